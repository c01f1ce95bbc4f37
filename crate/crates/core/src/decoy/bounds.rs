use super::instance::DecoyInstance;
use crate::error::{Error, Result};
use crate::fock::linalg::kron;
use crate::fock::{CMatrix, DensityOperator, FockOperator};
use crate::optim::{solve, Coeff, ConicProblem, Relation, Sense, SolveStatus, VarId};

/// Widenings applied to every interval so the feasible set has an interior, tightest first.
///
/// The optimum moves roughly with the square root of the margin while the solver's
/// conditioning degrades as it shrinks, so a solve that fails to certify is retried on
/// the next, looser rung. Every rung is a relaxation, hence every rung is sound.
pub const MARGIN_LADDER: [f64; 3] = [1e-7, 1e-6, 1e-5];

/// A solve counts as certified only if its certificate is this close to the primal value.
pub const CERTIFICATE_GAP_TOL: f64 = 1e-6;

/// Feasible set of projected Choi matrices: `J ⪰ 0`, `Tr_K J ≤ Π_M`, statistics intervals.
#[derive(Clone, Debug)]
pub struct Smn {
    /// One program per entry of [`MARGIN_LADDER`], in the same order.
    pub problems: Vec<ConicProblem>,
    pub choi: VarId,
    pub state_dim: usize,
    pub povm_dim: usize,
}

pub fn build_smn(inst: &DecoyInstance) -> Result<Smn> {
    inst.validate()?;
    let dm = inst.state_space.dim();
    let dk = inst.povm_space().dim();
    let mut base = ConicProblem::new();
    let choi = base.add_var(dm * dk, dm as f64, "choi");
    let slack = base.add_var(dm, dm as f64, "partial-trace slack");
    let pull_choi = move |e: &Coeff| e.kron_identity(dk);
    let pull_slack = |e: &Coeff| e.clone();
    base.add_matrix_equality(&[(choi, &pull_choi), (slack, &pull_slack)], &CMatrix::identity(dm, dm), "partial trace");
    let mut rows = Vec::new();
    for row in &inst.rows {
        let rt = row.state.matrix.transpose();
        for (l, povm) in inst.povms.iter().enumerate() {
            let (lo, hi) = row.corrections.interval(row.gamma[l]);
            rows.push((Coeff::auto(kron(&rt, &povm.matrix)), lo, hi, format!("{} povm {l}", row.label)));
        }
    }
    let problems = MARGIN_LADDER
        .iter()
        .map(|&m| {
            let mut p = base.clone();
            for (coeff, lo, hi, label) in &rows {
                p.add_constraint(vec![(choi, coeff.clone())], Relation::Range(lo - m, hi + m), label.clone());
            }
            p
        })
        .collect();
    Ok(Smn { problems, choi, state_dim: dm, povm_dim: dk })
}

/// Correction costs of a virtual state with respect to the state-space projection.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct VirtualCorrections {
    /// Weight of the virtual state outside the projection.
    pub w: f64,
    /// Off-diagonal cost of projecting the virtual state.
    pub eps: f64,
}

/// Which corrections entered an interval.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CorrectionFlags {
    pub eps_vec: bool,
    pub eps_virtual: bool,
    pub w_virtual: bool,
    pub w_outside: bool,
}

/// Certified interval for one statistic of a virtual state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct YieldBound {
    pub lower: f64,
    pub upper: f64,
    pub flags: CorrectionFlags,
    /// False when a side fell back to its trivial value after solver trouble.
    pub certified: bool,
    /// Largest `|primal − certified| / max(1, |primal|)` over the solves used.
    pub max_gap: f64,
    /// Largest interval widening among the solves used, zero if none was needed.
    pub margin: f64,
}

impl YieldBound {
    pub fn trivial() -> Self {
        Self { lower: 0.0, upper: 1.0, flags: CorrectionFlags::default(), certified: false, max_gap: 0.0, margin: 0.0 }
    }

    fn clamp(mut self) -> Self {
        self.lower = self.lower.clamp(0.0, 1.0);
        self.upper = self.upper.clamp(0.0, 1.0);
        if self.lower > self.upper {
            // Only possible through round-off on an exactly determined value.
            let mid = 0.5 * (self.lower + self.upper);
            self.lower = mid;
            self.upper = mid;
        }
        self
    }
}

/// A certified optimum with its certificate gap and the margin it was solved at.
#[derive(Clone, Copy, Debug)]
struct Certified {
    bound: f64,
    gap: f64,
    margin: f64,
}

/// Certified optimum of `Tr[(σᵀ ⊗ F) J]`, walking the margin ladder; `None` if no rung certifies.
fn certified_optimum(smn: &Smn, objective: &CMatrix, sense: Sense) -> Result<Option<Certified>> {
    let coeff = Coeff::auto(objective.clone());
    for (problem, &margin) in smn.problems.iter().zip(&MARGIN_LADDER) {
        let mut problem = problem.clone();
        problem.set_objective(vec![(smn.choi, coeff.clone())]);
        let r = solve(&problem, sense)?;
        if r.status == SolveStatus::Infeasible {
            // Looser rungs may still admit a channel when round-off broke the tight one.
            continue;
        }
        let gap = (r.primal_value - r.certified_bound).abs() / r.primal_value.abs().max(1.0);
        if r.status == SolveStatus::Optimal && r.certified_bound.is_finite() && gap <= CERTIFICATE_GAP_TOL {
            return Ok(Some(Certified { bound: r.certified_bound, gap, margin }));
        }
    }
    Ok(None)
}

fn objective_matrix(smn: &Smn, sigma: &DensityOperator, f: &FockOperator) -> Result<CMatrix> {
    if sigma.dim() != smn.state_dim || f.dim() != smn.povm_dim {
        return Err(Error::Dimension(format!(
            "virtual state {} / POVM {} against feasible set {} x {}",
            sigma.dim(),
            f.dim(),
            smn.state_dim,
            smn.povm_dim
        )));
    }
    Ok(kron(&sigma.matrix.transpose(), &f.matrix))
}

/// Interval for `Tr[F Φ(σ)]` with `F` supported on the measurement projection.
///
/// The lower side pays `ε`; the upper side pays `w + ε`.
pub fn yield_bounds(smn: &Smn, sigma: &DensityOperator, f: &FockOperator, virt: VirtualCorrections) -> Result<YieldBound> {
    let obj = objective_matrix(smn, sigma, f)?;
    if obj.iter().all(|z| z.norm() == 0.0) {
        return Ok(YieldBound {
            lower: 0.0,
            upper: 0.0,
            flags: CorrectionFlags::default(),
            certified: true,
            max_gap: 0.0,
            margin: 0.0,
        });
    }
    let lo = certified_optimum(smn, &obj, Sense::Minimize)?;
    let hi = certified_optimum(smn, &obj, Sense::Maximize)?;
    if lo.is_none() && hi.is_none() && infeasible_everywhere(smn, &obj)? {
        return Err(Error::Infeasible("decoy constraints admit no channel; statistics are inconsistent".into()));
    }
    let flags = CorrectionFlags { eps_virtual: virt.eps > 0.0, w_virtual: virt.w > 0.0, ..Default::default() };
    Ok(YieldBound {
        lower: lo.map_or(0.0, |v| v.bound - virt.eps),
        upper: hi.map_or(1.0, |v| v.bound + virt.w + virt.eps),
        flags,
        certified: lo.is_some() && hi.is_some(),
        max_gap: summary(&[lo, hi], |c| c.gap),
        margin: summary(&[lo, hi], |c| c.margin),
    }
    .clamp())
}

fn summary(sides: &[Option<Certified>], key: impl Fn(&Certified) -> f64) -> f64 {
    sides.iter().flatten().map(key).fold(0.0, f64::max)
}

/// Whether even the loosest rung is infeasible, meaning the statistics admit no channel.
fn infeasible_everywhere(smn: &Smn, objective: &CMatrix) -> Result<bool> {
    let mut problem = smn.problems.last().expect("ladder is non-empty").clone();
    problem.set_objective(vec![(smn.choi, Coeff::auto(objective.clone()))]);
    Ok(solve(&problem, Sense::Minimize)?.status == SolveStatus::Infeasible)
}

/// Lower bound alone, used for the in-projection weight.
pub fn lower_yield(smn: &Smn, sigma: &DensityOperator, f: &FockOperator, virt: VirtualCorrections) -> Result<YieldBound> {
    let obj = objective_matrix(smn, sigma, f)?;
    let lo = certified_optimum(smn, &obj, Sense::Minimize)?;
    if lo.is_none() && infeasible_everywhere(smn, &obj)? {
        return Err(Error::Infeasible("decoy constraints admit no channel; statistics are inconsistent".into()));
    }
    Ok(YieldBound {
        lower: lo.map_or(0.0, |v| v.bound - virt.eps),
        upper: 1.0,
        flags: CorrectionFlags { eps_virtual: virt.eps > 0.0, ..Default::default() },
        certified: lo.is_some(),
        max_gap: summary(&[lo], |c| c.gap),
        margin: summary(&[lo], |c| c.margin),
    }
    .clamp())
}

/// Interval for a POVM element with weight outside the measurement projection.
///
/// `f_projected` is its compression onto the projection; `w_outside` bounds the
/// virtual output weight outside it (one minus the lower bound for the projection itself).
pub fn general_povm_yield_bounds(
    smn: &Smn,
    sigma: &DensityOperator,
    f_projected: &FockOperator,
    w_outside: f64,
    virt: VirtualCorrections,
) -> Result<YieldBound> {
    let base = yield_bounds(smn, sigma, f_projected, VirtualCorrections::default())?;
    Ok(YieldBound {
        lower: base.lower - virt.eps,
        upper: base.upper + w_outside + virt.w + 2.0 * virt.eps,
        flags: CorrectionFlags {
            eps_virtual: virt.eps > 0.0,
            w_virtual: virt.w > 0.0,
            w_outside: w_outside > 0.0,
            ..Default::default()
        },
        ..base
    }
    .clamp())
}

/// Widens an interval by the eigenvector error; unusable blocks become `[0, 1]`.
pub fn eigvec_corrected_bounds(bound: YieldBound, eps_vec: f64) -> YieldBound {
    if !eps_vec.is_finite() {
        return YieldBound { flags: CorrectionFlags { eps_vec: true, ..bound.flags }, ..YieldBound::trivial() };
    }
    YieldBound {
        lower: bound.lower - eps_vec,
        upper: bound.upper + eps_vec,
        flags: CorrectionFlags { eps_vec: bound.flags.eps_vec || eps_vec > 0.0, ..bound.flags },
        ..bound
    }
    .clamp()
}
