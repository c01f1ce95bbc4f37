//! Certified lower bounds on asymptotic key rates of decoy-state QKD with lasers whose
//! phase is only partially randomised.

pub mod error;
pub mod fock;
pub mod laser;
pub mod approx_diag;
pub mod decoy;
pub mod optim;
pub mod protocol;
pub mod keyrate;
pub mod pipeline;

pub use error::{Error, Result};

pub use approx_diag::EigenBlock;
pub use fock::{CMatrix, CVector, DensityOperator, FockOperator, ModeSpace};
pub use keyrate::KeyRateSummary;
pub use laser::PhaseModel;
pub use pipeline::{KeyRatePoint, RunConfig, Source};
pub use protocol::{Event, ProtocolParams, Signal, Statistics};
