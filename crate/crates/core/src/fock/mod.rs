//! Truncated Fock-space linear algebra.
//!
//! Bases are explicit lists of occupation tuples in graded-lex order (total photon number
//! ascending, then lexicographic), so the projector onto at most `N` photons is a leading
//! diagonal block. Operators are dense complex matrices.

pub mod linalg;
pub mod network;
pub mod operator;
pub mod space;

pub use linalg::{gen_inverse_sqrt, hermitian_eig, op_norm, trace_norm, CMatrix, CVector, Eigen};
pub use network::{all_patterns, linear_network_isometry, threshold_povm, ObservedBin, ThresholdMeasurement};
pub use operator::{coherent_ket, total_photon_projector, DensityOperator, FockKet, FockMap, FockOperator};
pub use space::{CutoffKind, ModeSpace, Occupation};
