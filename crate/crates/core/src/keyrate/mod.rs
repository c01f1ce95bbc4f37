//! Block-decomposed key-rate lower bound.
//!
//! Each eigenblock of the signal state contributes `weight · min f(ρ_AB)` over joint
//! states consistent with that block's certified statistics, where `f` is the relative
//! entropy between the key map's output and its pinching. Blocks are solved by
//! Frank–Wolfe and bounded through a dual-certified linearisation. Error-correction
//! leakage is subtracted once from the sum.

mod block;
mod objective;

pub use block::{
    block_weight_floor, rho_a_block, solve_block, BlockProblem, BlockRate, BlockSpec, Families, FrankWolfe, A_DIM,
    KEY_MARGIN_LADDER,
};
pub use objective::{build_objective_map, Evaluation, ObjectiveMap, REGULARIZATION};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::DensityOperator;
use crate::protocol::{Event, Signal, Statistics};

/// Binary entropy in bits.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
    term(p) + term(1.0 - p)
}

/// `f_EC · p(kept) · H(A | B)` from a joint table `joint[alice bit][bob bit]` of kept rounds.
pub fn leak_from_joint(joint: [[f64; 2]; 2], f_ec: f64) -> f64 {
    let kept: f64 = joint.iter().flatten().sum();
    if kept <= 0.0 {
        return 0.0;
    }
    let h = |ps: &[f64]| -> f64 { ps.iter().filter(|&&p| p > 0.0).map(|&p| -p / kept * (p / kept).log2()).sum() };
    let h_ab = h(&[joint[0][0], joint[0][1], joint[1][0], joint[1][1]]);
    let h_b = h(&[joint[0][0] + joint[1][0], joint[0][1] + joint[1][1]]);
    f_ec * kept * (h_ab - h_b).max(0.0)
}

/// Error-correction leakage per round at the signal intensity.
pub fn delta_leak(stats: &Statistics, priors: &[f64; 3], f_ec: f64) -> f64 {
    let mut joint = [[0.0; 2]; 2];
    for (a, s) in [Signal::Zero, Signal::One].into_iter().enumerate() {
        for e in Event::ALL {
            if let Some(b) = e.key_bit() {
                joint[a][b] += priors[a] * stats.gamma(s, 0, e);
            }
        }
    }
    leak_from_joint(joint, f_ec)
}

/// Key rate of one operating point with its per-block breakdown.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KeyRateSummary {
    pub blocks: Vec<BlockRateRow>,
    pub delta_leak: f64,
    /// `Σ R_ñ − δ_leak`, possibly negative.
    pub raw: f64,
    /// `max(0, raw)`.
    pub total: f64,
}

/// Serializable view of a [`BlockRate`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockRateRow {
    pub index: usize,
    pub weight: f64,
    pub eps_vec: f64,
    pub w_floor: f64,
    /// Objective at the best feasible point found; diagnostic only, never reported.
    pub best_value: f64,
    pub bound: f64,
    pub rate: f64,
    pub certified: bool,
    pub gap: f64,
    pub margin: f64,
}

impl From<&BlockRate> for BlockRateRow {
    fn from(b: &BlockRate) -> Self {
        Self {
            index: b.index,
            weight: b.weight,
            eps_vec: b.eps_vec,
            w_floor: b.w_floor,
            best_value: b.best_value,
            bound: b.bound,
            rate: b.rate,
            certified: b.certified,
            gap: b.gap,
            margin: b.margin,
        }
    }
}

/// `R = Σ R_ñ − δ_leak`, reported raw and clamped at zero.
pub fn total_keyrate(blocks: &[BlockRate], delta_leak: f64) -> KeyRateSummary {
    let raw = blocks.iter().map(|b| b.rate).sum::<f64>() - delta_leak;
    KeyRateSummary { blocks: blocks.iter().map(BlockRateRow::from).collect(), delta_leak, raw, total: raw.max(0.0) }
}

/// Solves every block program on the current rayon pool.
pub fn solve_blocks(specs: Vec<BlockSpec>, povms: &[DensityOperator], fw: &FrankWolfe) -> Result<Vec<BlockRate>> {
    if povms.len() != Event::ALL.len() {
        return Err(Error::Dimension(format!("{} POVM elements for {} events", povms.len(), Event::ALL.len())));
    }
    let map = build_objective_map(povms)?;
    specs
        .into_par_iter()
        .map(|spec| solve_block(&BlockProblem::new(spec, povms, Families::default())?, &map, fw))
        .collect()
}
