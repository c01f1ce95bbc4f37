use super::bounds::{CorrectionFlags, YieldBound, CERTIFICATE_GAP_TOL};
use crate::error::{Error, Result};
use crate::laser::poisson_weights;
use crate::optim::{solve, Coeff, ConicProblem, Relation, Sense, SolveStatus};

/// Interval widening for the linear program, which stays well conditioned when tight.
const LP_MARGIN: f64 = 1e-9;

/// Photon-number yield interval from the standard decoy linear program.
///
/// Yields `Y_n ∈ [0, 1]` for `n ≤ n_max` must reproduce each observed probability
/// `γ_μ = Σ_n p_μ(n) Y_n` up to the unconstrained tail mass `1 − Σ_{n ≤ n_max} p_μ(n)`.
/// Valid for fully phase-randomised sources only.
pub fn standard_decoy_lp(intensities: &[f64], gamma: &[f64], n_max: u32, target: u32) -> Result<YieldBound> {
    if intensities.len() != gamma.len() || intensities.is_empty() {
        return Err(Error::Dimension(format!("{} intensities for {} statistics", intensities.len(), gamma.len())));
    }
    if target > n_max {
        return Err(Error::InvalidArgument(format!("target {target} above n_max {n_max}")));
    }
    let mut p = ConicProblem::new();
    let ys: Vec<_> = (0..=n_max).map(|n| p.add_var(1, 1.0, format!("Y{n}"))).collect();
    for &y in &ys {
        p.add_constraint(vec![(y, Coeff::identity(1))], Relation::Le(1.0), "yield cap");
    }
    for (&mu, &g) in intensities.iter().zip(gamma) {
        let w = poisson_weights(mu, n_max);
        let tail = (1.0 - w.iter().sum::<f64>()).max(0.0);
        let terms = ys.iter().zip(&w).filter(|(_, &pn)| pn > 0.0).map(|(&y, &pn)| (y, Coeff::identity(1).scale(pn))).collect::<Vec<_>>();
        let (lo, hi) = (g - tail - LP_MARGIN, g + LP_MARGIN);
        if terms.is_empty() {
            if lo > 0.0 || hi < 0.0 {
                return Err(Error::Infeasible(format!("statistic {g} at intensity {mu} is unreachable")));
            }
            continue;
        }
        p.add_constraint(terms, Relation::Range(lo, hi), format!("mu {mu}"));
    }
    let mut bound = |sense: Sense| -> Result<Option<(f64, f64)>> {
        p.set_objective(vec![(ys[target as usize], Coeff::identity(1))]);
        let r = solve(&p, sense)?;
        if r.status == SolveStatus::Infeasible {
            return Err(Error::Infeasible("decoy statistics are inconsistent with any yields".into()));
        }
        let gap = (r.primal_value - r.certified_bound).abs() / r.primal_value.abs().max(1.0);
        Ok((r.status == SolveStatus::Optimal && gap <= CERTIFICATE_GAP_TOL).then_some((r.certified_bound, gap)))
    };
    let lo = bound(Sense::Minimize)?;
    let hi = bound(Sense::Maximize)?;
    Ok(YieldBound {
        lower: lo.map_or(0.0, |v| v.0.clamp(0.0, 1.0)),
        upper: hi.map_or(1.0, |v| v.0.clamp(0.0, 1.0)),
        flags: CorrectionFlags::default(),
        certified: lo.is_some() && hi.is_some(),
        max_gap: lo.map_or(0.0, |v| v.1).max(hi.map_or(0.0, |v| v.1)),
        margin: LP_MARGIN,
    })
}
