use std::f64::consts::PI;

use num_complex::Complex64;

use super::distribution::{PhaseDistribution, PhaseNode};
use crate::error::{Error, Result};
use crate::fock::{CMatrix, DensityOperator};

/// Slack allowed when checking that the residual phase density stays non-negative.
const RESIDUAL_TOL: f64 = 1e-12;

/// Residual phase measure `(p - q/2π) / (1 - q)` of a mixed-unitary source map.
pub fn residual_phase_nodes(dist: &PhaseDistribution, q: f64, points: usize) -> Result<Vec<PhaseNode>> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::InvalidArgument(format!("source map needs 0 <= q < 1, got {q}")));
    }
    dist.validate()?;
    let nodes = dist.nodes(points)?;
    let mut out = Vec::with_capacity(nodes.len());
    for n in nodes {
        let w = (n.weight - q * n.span / (2.0 * PI)) / (1.0 - q);
        if w < -RESIDUAL_TOL {
            return Err(Error::InvalidArgument(format!(
                "q = {q} exceeds 2π·min p (residual weight {w:e} at φ = {})",
                n.phi
            )));
        }
        out.push(PhaseNode { weight: w.max(0.0), ..n });
    }
    // Renormalise so the channel is exactly trace preserving.
    let total: f64 = out.iter().map(|n| n.weight).sum();
    for n in &mut out {
        n.weight /= total;
    }
    Ok(out)
}

/// Applies `σ ↦ ∫ p̃(φ) U_φ σ U_φ† dφ` with `U_φ = e^{iφN}` and `p̃` the residual measure.
///
/// Maps the model state of randomisation `q` onto the state of a laser with phase density `dist`.
pub fn phase_modulator_channel_apply(
    dist: &PhaseDistribution,
    q: f64,
    input: &DensityOperator,
    quadrature_points: usize,
) -> Result<DensityOperator> {
    let nodes = residual_phase_nodes(dist, q, quadrature_points)?;
    let space = &input.space;
    let n = space.dim();
    let photons: Vec<i64> = (0..n).map(|i| space.photons(i) as i64).collect();
    let max_n = photons.iter().copied().max().unwrap_or(0);
    // Phase moments for every photon-number difference.
    let mut moments: Vec<Complex64> = (0..=max_n)
        .map(|k| nodes.iter().map(|nd| Complex64::from_polar(nd.weight, k as f64 * nd.phi)).sum())
        .collect();
    moments[0] = Complex64::new(1.0, 0.0);
    let m = CMatrix::from_fn(n, n, |a, b| {
        let diff = photons[a] - photons[b];
        let phase = if diff >= 0 { moments[diff as usize] } else { moments[(-diff) as usize].conj() };
        input.matrix[(a, b)] * phase
    });
    DensityOperator::new(space.clone(), m)
}
