//! Three-state time-bin protocol: preparation, Bob's receiver, simulated statistics, and
//! the cross-click bound on multi-photon weight at the receiver.

pub mod crossclick;
pub mod network;
pub mod params;
pub mod statistics;

pub use crossclick::{cross_click_prob_fock, weight_outside_bound};
pub use network::{
    bob_network, bob_povms, cross_click_bins, cross_click_povm, loss_channel, preparation_isometry, BobNetwork, Event,
};
pub use params::{transmittance, ProtocolParams, Signal};
pub use statistics::{coherent_statistics, signal_amplitudes, simulate_statistics, Statistics};
