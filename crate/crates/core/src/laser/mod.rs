//! Laser phase models: phase distributions, the model state, visibility characterisation,
//! and the phase-modulator source map.

pub mod distribution;
pub mod modulator;
pub mod state;

pub use distribution::{
    distribution_for_visibility, first_circular_moment, q_from_visibility, visibility_iid, PhaseDistribution,
    PhaseModel, PhaseNode, DEFAULT_QUADRATURE_POINTS,
};
pub use modulator::{phase_modulator_channel_apply, residual_phase_nodes};
pub use state::{laser_state_from_distribution, model_state, poisson_tail, poisson_weights, LaserSpec};
