//! Generalised decoy-state bounds on virtual-state statistics.
//!
//! Channels are represented by projected Choi matrices constrained by the observed
//! statistics of the actual states, with every finite-projection cost folded into
//! the constraint intervals. Bounds on the statistics of approximate eigenvectors are
//! certified through the dual and then widened by the eigenvector error.

mod bounds;
mod instance;
mod lp;

pub use bounds::{
    build_smn, eigvec_corrected_bounds, general_povm_yield_bounds, lower_yield, yield_bounds, CorrectionFlags, Smn,
    VirtualCorrections, YieldBound, CERTIFICATE_GAP_TOL, MARGIN_LADDER,
};
pub use instance::{full_instance, model_corrections, relaxed_instance, Corrections, DecoyInstance, DecoyRow};
pub use lp::standard_decoy_lp;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::approx_diag::EigenBlock;
use crate::error::Result;
use crate::fock::{DensityOperator, FockOperator};
use crate::protocol::{preparation_isometry, Signal, Statistics};

/// Which decoy program to solve.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecoyVariant {
    /// Preparation absorbed into the channel, one program per signal on the base mode.
    #[default]
    Relaxed,
    /// Preparation kept explicit, all signals jointly on two modes. Cross-checks only.
    Full,
}

/// Shared inputs of the per-block decoy analysis.
#[derive(Clone, Debug)]
pub struct DecoySetup<'a> {
    pub q: f64,
    pub d: u32,
    pub n: u32,
    pub t_x: f64,
    /// Projected event POVM elements.
    pub povms: &'a [DensityOperator],
    pub stats: &'a Statistics,
    pub variant: DecoyVariant,
}

/// Certified statistics of every `(signal, block)` virtual state.
#[derive(Clone, Debug)]
pub struct BlockYields {
    /// `events[signal][block][event]`, widened by the block's eigenvector error.
    pub events: Vec<Vec<Vec<YieldBound>>>,
    /// Lower bound on the weight inside the measurement projection, `[signal][block]`.
    pub in_projection: Vec<Vec<YieldBound>>,
}

impl BlockYields {
    /// Largest certificate gap over every solve.
    pub fn max_gap(&self) -> f64 {
        self.events
            .iter()
            .flatten()
            .flatten()
            .chain(self.in_projection.iter().flatten())
            .map(|b| b.max_gap)
            .fold(0.0, f64::max)
    }

    /// Whether every interval came from a certified solve.
    pub fn all_certified(&self) -> bool {
        self.events.iter().flatten().flatten().chain(self.in_projection.iter().flatten()).all(|b| b.certified)
    }
}

enum Task {
    Event(usize),
    InProjection,
}

/// Solves every decoy program for the given blocks. Programs run on the current rayon pool.
pub fn block_yields(setup: &DecoySetup<'_>, blocks: &[EigenBlock]) -> Result<BlockYields> {
    let smns: Vec<Smn> = match setup.variant {
        DecoyVariant::Relaxed => Signal::ALL
            .iter()
            .map(|&s| {
                build_smn(&relaxed_instance(s, setup.q, setup.d, setup.n, setup.t_x, setup.povms, setup.stats)?)
            })
            .collect::<Result<_>>()?,
        DecoyVariant::Full => {
            vec![build_smn(&full_instance(setup.q, setup.d, setup.n, setup.t_x, setup.povms, setup.stats)?)?]
        }
    };
    let virtual_state = |s: Signal, b: &EigenBlock| -> Result<DensityOperator> {
        let base = b.vector.projector();
        match setup.variant {
            DecoyVariant::Relaxed => Ok(base),
            DecoyVariant::Full => preparation_isometry(s, setup.d)?.conjugate(&base),
        }
    };
    let pi_n = FockOperator::identity(&setup.povms[0].space);

    let mut tasks = Vec::new();
    for s in Signal::ALL {
        for (k, _) in blocks.iter().enumerate() {
            for e in 0..setup.povms.len() {
                tasks.push((s, k, Task::Event(e)));
            }
            tasks.push((s, k, Task::InProjection));
        }
    }
    let results: Vec<YieldBound> = tasks
        .par_iter()
        .map(|(s, k, task)| -> Result<YieldBound> {
            let block = &blocks[*k];
            if !block.usable {
                return Ok(eigvec_corrected_bounds(YieldBound::trivial(), f64::INFINITY));
            }
            let smn = match setup.variant {
                DecoyVariant::Relaxed => &smns[s.index()],
                DecoyVariant::Full => &smns[0],
            };
            let sigma = virtual_state(*s, block)?;
            let raw = match task {
                Task::Event(e) => yield_bounds(smn, &sigma, &setup.povms[*e], VirtualCorrections::default())?,
                Task::InProjection => lower_yield(smn, &sigma, &pi_n, VirtualCorrections::default())?,
            };
            Ok(eigvec_corrected_bounds(raw, block.eps_vec))
        })
        .collect::<Result<_>>()?;

    let per_signal = blocks.len() * (setup.povms.len() + 1);
    let mut events = Vec::with_capacity(3);
    let mut in_projection = Vec::with_capacity(3);
    for s in 0..3 {
        let chunk = &results[s * per_signal..(s + 1) * per_signal];
        let mut ev = Vec::with_capacity(blocks.len());
        let mut ip = Vec::with_capacity(blocks.len());
        for k in 0..blocks.len() {
            let row = &chunk[k * (setup.povms.len() + 1)..(k + 1) * (setup.povms.len() + 1)];
            ev.push(row[..setup.povms.len()].to_vec());
            ip.push(row[setup.povms.len()]);
        }
        events.push(ev);
        in_projection.push(ip);
    }
    Ok(BlockYields { events, in_projection })
}
