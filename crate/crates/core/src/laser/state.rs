use num_complex::Complex64;

use super::distribution::PhaseDistribution;
use crate::error::{Error, Result};
use crate::fock::{coherent_ket, CMatrix, DensityOperator, ModeSpace};

/// Degree of randomisation, intensities, and photon cutoff of a laser source.
#[derive(Clone, Debug, PartialEq)]
pub struct LaserSpec {
    pub q: f64,
    /// Signal intensity first, decoys after.
    pub intensities: Vec<f64>,
    pub cutoff: u32,
}

impl LaserSpec {
    pub fn new(q: f64, intensities: Vec<f64>, cutoff: u32) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidArgument(format!("q = {q} outside [0,1]")));
        }
        if intensities.iter().any(|&mu| !(mu >= 0.0) || !mu.is_finite()) {
            return Err(Error::InvalidArgument("intensities must be finite and non-negative".into()));
        }
        if cutoff < 1 {
            return Err(Error::InvalidArgument("cutoff must be at least 1".into()));
        }
        Ok(Self { q, intensities, cutoff })
    }
}

/// Poisson probabilities `e^{-μ} μⁿ / n!` for `n = 0..=cutoff`.
pub fn poisson_weights(mu: f64, cutoff: u32) -> Vec<f64> {
    let mut w = Vec::with_capacity(cutoff as usize + 1);
    let mut p = (-mu).exp();
    for n in 0..=cutoff {
        if n > 0 {
            p *= mu / n as f64;
        }
        w.push(p);
    }
    w
}

/// Poisson mass beyond `cutoff`, summed term by term (no cancellation).
pub fn poisson_tail(mu: f64, cutoff: u32) -> f64 {
    if mu == 0.0 {
        return 0.0;
    }
    let n0 = cutoff as f64 + 1.0;
    let ln_first = -mu + n0 * mu.ln() - ln_factorial(cutoff + 1);
    let mut term = ln_first.exp();
    let mut total = 0.0;
    let mut n = n0;
    while term > 0.0 {
        total += term;
        n += 1.0;
        term *= mu / n;
        if term < 1e-17 * total && n > mu {
            break;
        }
    }
    total
}

fn ln_factorial(n: u32) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// Single-pulse model state `q·Poisson + (1-q)|√μ⟩⟨√μ|`, truncated at `cutoff`.
///
/// Not renormalised: the trace falls short of one by the Poisson tail.
pub fn model_state(mu: f64, q: f64, cutoff: u32) -> Result<DensityOperator> {
    if !(0.0..=1.0).contains(&q) || !(mu >= 0.0) {
        return Err(Error::InvalidArgument(format!("model state needs q in [0,1] and mu >= 0, got q={q}, mu={mu}")));
    }
    let space = ModeSpace::single(cutoff);
    let p = poisson_weights(mu, cutoff);
    let amp = coherent_ket(Complex64::new(mu.sqrt(), 0.0), cutoff).amplitudes;
    let n = space.dim();
    let m = CMatrix::from_fn(n, n, |a, b| {
        let diag = if a == b { q * p[a] } else { 0.0 };
        Complex64::new(diag + (1.0 - q) * amp[a].re * amp[b].re, 0.0)
    });
    DensityOperator::new(space, m)
}

/// `∫ p(φ) |√μ e^{iφ}⟩⟨√μ e^{iφ}| dφ` on the periodic trapezoid grid.
pub fn laser_state_from_distribution(
    dist: &PhaseDistribution,
    mu: f64,
    cutoff: u32,
    quadrature_points: usize,
) -> Result<DensityOperator> {
    dist.validate()?;
    let nodes = dist.nodes(quadrature_points)?;
    let total: f64 = nodes.iter().map(|n| n.weight).sum();
    if (total - 1.0).abs() > super::distribution::NORMALISATION_TOL {
        return Err(Error::NotNormalized(total));
    }
    let space = ModeSpace::single(cutoff);
    let amp = coherent_ket(Complex64::new(mu.sqrt(), 0.0), cutoff).amplitudes;
    let n = space.dim();
    // Only the phase moments ∫ p e^{ikφ} for |k| <= cutoff are needed.
    let moments: Vec<Complex64> =
        (0..n).map(|k| nodes.iter().map(|nd| Complex64::from_polar(nd.weight, k as f64 * nd.phi)).sum()).collect();
    let m = CMatrix::from_fn(n, n, |a, b| {
        let base = amp[a].re * amp[b].re;
        if a >= b {
            moments[a - b] * base
        } else {
            moments[b - a].conj() * base
        }
    });
    DensityOperator::new(space, m)
}
