use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of periodic trapezoid nodes.
pub const DEFAULT_QUADRATURE_POINTS: usize = 512;

/// Smallest accepted quadrature grid.
pub const MIN_QUADRATURE_POINTS: usize = 64;

/// Normalisation tolerance for tabulated densities.
pub const NORMALISATION_TOL: f64 = 1e-8;

/// Series terms smaller than this are dropped.
const SERIES_CUTOFF: f64 = 1e-16;

/// Probability density of a pulse's optical phase on `[0, 2π)`.
#[derive(Clone, Debug, PartialEq)]
pub enum PhaseDistribution {
    /// `q/2π` uniform background plus an atom of mass `1-q` at phase 0.
    DeltaMix { q: f64 },
    /// Normal distribution with standard deviation `sigma`, wrapped onto the circle.
    WrappedNormal { sigma: f64 },
    Uniform,
    /// Density samples on a strictly increasing grid in `[0, 2π)`, interpolated
    /// linearly and periodically.
    Tabulated { grid: Vec<f64>, density: Vec<f64> },
}

/// Model used to turn a measured visibility into a degree of phase randomisation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseModel {
    DeltaMix,
    WrappedNormal,
}

impl PhaseModel {
    pub const ALL: [PhaseModel; 2] = [PhaseModel::DeltaMix, PhaseModel::WrappedNormal];

    pub fn name(self) -> &'static str {
        match self {
            PhaseModel::DeltaMix => "delta-mix",
            PhaseModel::WrappedNormal => "wrapped-normal",
        }
    }
}

/// One quadrature node: phase, probability mass, and the arc length it represents.
///
/// Point masses have `span == 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseNode {
    pub phi: f64,
    pub weight: f64,
    pub span: f64,
}

impl PhaseDistribution {
    pub fn validate(&self) -> Result<()> {
        match self {
            PhaseDistribution::DeltaMix { q } if !(0.0..=1.0).contains(q) => {
                Err(Error::InvalidArgument(format!("delta-mix weight {q} outside [0,1]")))
            }
            PhaseDistribution::WrappedNormal { sigma } if !(*sigma >= 0.0) => {
                Err(Error::InvalidArgument(format!("negative standard deviation {sigma}")))
            }
            PhaseDistribution::Tabulated { grid, density } => {
                if grid.len() != density.len() || grid.len() < 2 {
                    return Err(Error::InvalidArgument("tabulated grid and density lengths differ".into()));
                }
                if grid.windows(2).any(|w| w[1] <= w[0]) || grid[0] < 0.0 || *grid.last().unwrap() >= 2.0 * PI {
                    return Err(Error::InvalidArgument("tabulated grid must increase strictly within [0, 2π)".into()));
                }
                if density.iter().any(|&p| p < 0.0 || !p.is_finite()) {
                    return Err(Error::InvalidArgument("negative tabulated density".into()));
                }
                let total: f64 = self.nodes(0)?.iter().map(|n| n.weight).sum();
                if (total - 1.0).abs() > NORMALISATION_TOL {
                    return Err(Error::NotNormalized(total));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Continuous part of the density at `phi`.
    pub fn density(&self, phi: f64) -> f64 {
        let phi = phi.rem_euclid(2.0 * PI);
        match self {
            PhaseDistribution::DeltaMix { q } => q / (2.0 * PI),
            PhaseDistribution::Uniform => 1.0 / (2.0 * PI),
            PhaseDistribution::WrappedNormal { sigma } => wrapped_normal_density(phi, *sigma),
            PhaseDistribution::Tabulated { grid, density } => {
                let n = grid.len();
                let k = grid.partition_point(|&g| g <= phi);
                let (lo, hi) = if k == 0 { (n - 1, 0) } else { (k - 1, k % n) };
                let g_lo = if k == 0 { grid[lo] - 2.0 * PI } else { grid[lo] };
                let g_hi = if hi == 0 { grid[0] + 2.0 * PI } else { grid[hi] };
                let t = (phi - g_lo) / (g_hi - g_lo);
                density[lo] * (1.0 - t) + density[hi] * t
            }
        }
    }

    /// Periodic trapezoid discretisation. `points` is ignored for tabulated
    /// densities, which use their own grid.
    pub fn nodes(&self, points: usize) -> Result<Vec<PhaseNode>> {
        let uniform = |pts: usize, dens: &dyn Fn(f64) -> f64| -> Vec<PhaseNode> {
            let h = 2.0 * PI / pts as f64;
            (0..pts)
                .map(|k| {
                    let phi = k as f64 * h;
                    PhaseNode { phi, weight: dens(phi) * h, span: h }
                })
                .collect()
        };
        match self {
            PhaseDistribution::Tabulated { grid, density } => {
                let n = grid.len();
                Ok((0..n)
                    .map(|k| {
                        let prev = if k == 0 { grid[n - 1] - 2.0 * PI } else { grid[k - 1] };
                        let next = if k + 1 == n { grid[0] + 2.0 * PI } else { grid[k + 1] };
                        let span = (next - prev) / 2.0;
                        PhaseNode { phi: grid[k], weight: density[k] * span, span }
                    })
                    .collect())
            }
            _ => {
                if points < MIN_QUADRATURE_POINTS {
                    return Err(Error::InvalidArgument(format!(
                        "{points} quadrature points, need at least {MIN_QUADRATURE_POINTS}"
                    )));
                }
                let mut nodes = uniform(points, &|phi| self.density(phi));
                if let PhaseDistribution::DeltaMix { q } = self {
                    nodes.push(PhaseNode { phi: 0.0, weight: 1.0 - q, span: 0.0 });
                }
                Ok(nodes)
            }
        }
    }

    /// Degree of phase randomisation `2π · min_φ p(φ)` over the quadrature grid.
    pub fn degree_of_randomisation(&self, points: usize) -> Result<f64> {
        let nodes = self.nodes(points)?;
        Ok(nodes
            .iter()
            .filter(|n| n.span > 0.0)
            .map(|n| 2.0 * PI * n.weight / n.span)
            .fold(f64::INFINITY, f64::min)
            .min(1.0))
    }
}

/// Wrapped-normal density, from whichever series converges faster.
pub fn wrapped_normal_density(phi: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return if phi.rem_euclid(2.0 * PI) == 0.0 { f64::INFINITY } else { 0.0 };
    }
    if sigma < 1.5 {
        // Sum of Gaussian images.
        let phi = (phi + PI).rem_euclid(2.0 * PI) - PI;
        let norm = 1.0 / (sigma * (2.0 * PI).sqrt());
        let mut total = norm * (-phi * phi / (2.0 * sigma * sigma)).exp();
        for m in 1.. {
            let a = phi + 2.0 * PI * m as f64;
            let b = phi - 2.0 * PI * m as f64;
            let term = norm * ((-a * a / (2.0 * sigma * sigma)).exp() + (-b * b / (2.0 * sigma * sigma)).exp());
            total += term;
            if term < SERIES_CUTOFF * total.max(f64::MIN_POSITIVE) {
                break;
            }
        }
        total
    } else {
        // Fourier series 1/2π (1 + 2 Σ e^{-k²σ²/2} cos kφ).
        let mut total = 1.0;
        for k in 1.. {
            let coef = (-(k * k) as f64 * sigma * sigma / 2.0).exp();
            if coef < SERIES_CUTOFF {
                break;
            }
            total += 2.0 * coef * (k as f64 * phi).cos();
        }
        total / (2.0 * PI)
    }
}

/// `c₁ = ∫ p(φ) e^{iφ} dφ` by quadrature.
pub fn first_circular_moment(dist: &PhaseDistribution, points: usize) -> Result<Complex64> {
    dist.validate()?;
    Ok(dist.nodes(points)?.iter().map(|n| Complex64::from_polar(n.weight, n.phi)).sum())
}

/// Interference visibility of two pulses with independent, identically distributed phases.
///
/// The interference term depends on the phase difference, whose first moment is `|c₁|²`.
pub fn visibility_iid(dist: &PhaseDistribution, points: usize) -> Result<f64> {
    Ok(first_circular_moment(dist, points)?.norm_sqr())
}

/// Degree of phase randomisation implied by a visibility under a phase model.
pub fn q_from_visibility(v: f64, model: PhaseModel) -> Result<f64> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidArgument(format!("visibility {v} outside [0,1]")));
    }
    Ok(match model {
        PhaseModel::DeltaMix => 1.0 - v.sqrt(),
        PhaseModel::WrappedNormal => {
            if v == 0.0 {
                1.0
            } else if v == 1.0 {
                0.0
            } else {
                let sigma = (-v.ln()).sqrt();
                (2.0 * PI * wrapped_normal_density(PI, sigma)).clamp(0.0, 1.0)
            }
        }
    })
}

/// The phase distribution a model associates with a measured visibility.
pub fn distribution_for_visibility(v: f64, model: PhaseModel) -> Result<PhaseDistribution> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidArgument(format!("visibility {v} outside [0,1]")));
    }
    Ok(match model {
        PhaseModel::DeltaMix => PhaseDistribution::DeltaMix { q: 1.0 - v.sqrt() },
        PhaseModel::WrappedNormal if v == 0.0 => PhaseDistribution::Uniform,
        PhaseModel::WrappedNormal => PhaseDistribution::WrappedNormal { sigma: (-v.ln()).sqrt() },
    })
}
