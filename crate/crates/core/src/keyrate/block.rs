use num_complex::Complex64;

use super::objective::ObjectiveMap;
use crate::approx_diag::EigenBlock;
use crate::decoy::{BlockYields, YieldBound, CERTIFICATE_GAP_TOL};
use crate::error::{Error, Result};
use crate::fock::linalg::{hermitian_eig, hermitian_eigenvalues, kron};
use crate::fock::{CMatrix, DensityOperator};
use crate::optim::{solve, Coeff, ConicProblem, Relation, Sense, SolveStatus, VarId};
use crate::protocol::{preparation_isometry, Signal};

/// Widenings of every constraint of the block program, tightest first.
///
/// A Frank–Wolfe run whose linear subproblems fail to certify is repeated on the next
/// rung. Every rung is a relaxation of the tighter ones.
pub const KEY_MARGIN_LADDER: [f64; 4] = [1e-9, 1e-8, 1e-7, 1e-6];

/// Eigenvalues of Alice's state below this fraction of the largest count as zero.
const SUPPORT_RTOL: f64 = 1e-12;

/// Linear subproblems allowed to fail certification before a rung is abandoned.
const UNCERTIFIED_PATIENCE: usize = 3;

/// Dimension of Alice's key register, one level per signal.
pub const A_DIM: usize = 3;

/// Alice's reduced state for one block: `(ρ_A)_ij = √(p_i p_j)·⟨v|V_j† V_i|v⟩`.
pub fn rho_a_block(block: &EigenBlock, priors: &[f64; 3], d: u32) -> Result<CMatrix> {
    let kets = Signal::ALL
        .iter()
        .map(|&s| preparation_isometry(s, d)?.apply_ket(&block.vector))
        .collect::<Result<Vec<_>>>()?;
    let norm = block.vector.norm_sqr();
    let mut m = CMatrix::zeros(A_DIM, A_DIM);
    for i in 0..A_DIM {
        for j in 0..A_DIM {
            m[(i, j)] = kets[j].inner(&kets[i]) * ((priors[i] * priors[j]).sqrt() / norm);
        }
    }
    Ok(m)
}

/// Largest weight the block's state may have outside Bob's projection: `1 − Σ_i p_i·Y^L(i, Π_N)`.
pub fn block_weight_floor(in_projection: &[YieldBound], priors: &[f64; 3]) -> f64 {
    let kept: f64 = in_projection.iter().zip(priors).map(|(b, p)| p * b.lower).sum();
    (1.0 - kept).clamp(0.0, 1.0)
}

/// Which constraint families enter the block program.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Families {
    pub decoy: bool,
    pub partial_trace: bool,
    pub window: bool,
}

impl Default for Families {
    fn default() -> Self {
        Self { decoy: true, partial_trace: true, window: true }
    }
}

/// Inputs of one block program, independent of how the intervals were obtained.
#[derive(Clone, Debug)]
pub struct BlockSpec {
    pub index: usize,
    /// Key weight `max(0, p′ − ε_proj)`.
    pub weight: f64,
    pub eps_vec: f64,
    pub rho_a: CMatrix,
    pub priors: [f64; 3],
    /// `intervals[signal][event]` on the block's statistics.
    pub intervals: Vec<Vec<(f64, f64)>>,
    /// Bound on the weight outside Bob's projection.
    pub w_floor: f64,
    pub usable: bool,
}

impl BlockSpec {
    pub fn from_decoy(block: &EigenBlock, eps_proj: f64, priors: &[f64; 3], yields: &BlockYields, d: u32) -> Result<Self> {
        let k = block.index;
        let per_signal = |s: usize| yields.events[s].get(k).ok_or_else(|| Error::Dimension(format!("no yields for block {k}")));
        let intervals = (0..A_DIM)
            .map(|s| Ok(per_signal(s)?.iter().map(|b| (b.lower, b.upper)).collect()))
            .collect::<Result<Vec<_>>>()?;
        let in_proj: Vec<YieldBound> = (0..A_DIM).map(|s| yields.in_projection[s][k]).collect();
        Ok(Self {
            index: k,
            weight: (block.value - eps_proj).max(0.0),
            eps_vec: block.eps_vec,
            rho_a: if block.usable { rho_a_block(block, priors, d)? } else { CMatrix::zeros(A_DIM, A_DIM) },
            priors: *priors,
            intervals,
            w_floor: block_weight_floor(&in_proj, priors),
            usable: block.usable && block.eps_vec.is_finite(),
        })
    }
}

/// Feasible set of the block's joint states `ρ_AB` as a conic program per margin rung.
///
/// Without eigenvector error the partial-trace constraint confines `ρ_AB` to
/// `supp(ρ_A) ⊗ K`, so the variable is parametrised as `ρ_AB = W ρ′ W†` with `W`
/// an isometry onto that subspace. This removes directions of zero width.
#[derive(Clone, Debug)]
pub struct BlockProblem {
    pub spec: BlockSpec,
    /// One program per entry of [`KEY_MARGIN_LADDER`].
    pub problems: Vec<ConicProblem>,
    pub rho: VarId,
    /// `W`, from the reduced variable space into `A ⊗ K`.
    pub embedding: CMatrix,
}

impl BlockProblem {
    pub fn new(spec: BlockSpec, povms: &[DensityOperator], families: Families) -> Result<Self> {
        if spec.rho_a.shape() != (A_DIM, A_DIM) {
            return Err(Error::Dimension(format!("Alice's state is {:?}", spec.rho_a.shape())));
        }
        if spec.intervals.len() != A_DIM || spec.intervals.iter().any(|row| row.len() != povms.len()) {
            return Err(Error::Dimension("block intervals do not match signals and events".into()));
        }
        let dk = povms.first().map(|p| p.dim()).ok_or_else(|| Error::InvalidArgument("no POVM elements".into()))?;
        let basis = if families.partial_trace && spec.eps_vec == 0.0 && spec.usable {
            support_basis(&spec.rho_a)?
        } else {
            CMatrix::identity(A_DIM, A_DIM)
        };
        let ra = basis.ncols();
        let embedding = kron(&basis, &CMatrix::identity(dk, dk));
        let pull = |c: &CMatrix| -> CMatrix {
            let m = embedding.adjoint() * c * &embedding;
            (&m + m.adjoint()).scale(0.5)
        };
        let dim = ra * dk;
        let rho_a = basis.adjoint() * &spec.rho_a * &basis;
        let problems = KEY_MARGIN_LADDER
            .iter()
            .map(|&margin| {
                let mut p = ConicProblem::new();
                let rho = p.add_var(dim, 1.0 + margin, "joint state");
                p.add_constraint(vec![(rho, Coeff::identity(dim))], Relation::Le(1.0 + margin), "trace cap");
                if families.window {
                    let lo = 1.0 - spec.w_floor - spec.eps_vec - margin;
                    if lo > 0.0 {
                        p.add_constraint(vec![(rho, Coeff::identity(dim))], Relation::Ge(lo), "trace window");
                    }
                }
                if families.partial_trace {
                    // Tr_B ρ + T − ε_vec·S = ρ_A + τ·𝟙 with T, S ⪰ 0 and Tr S ≤ 1.
                    let slack = p.add_var(ra, 2.0, "partial-trace slack");
                    let pull_rho = move |e: &Coeff| e.kron_identity(dk);
                    let pull_slack = |e: &Coeff| e.clone();
                    let rhs = &rho_a + CMatrix::identity(ra, ra).scale(margin);
                    if spec.eps_vec > 0.0 {
                        let s = p.add_var(ra, 1.0, "eigenvector slack");
                        let eps = spec.eps_vec;
                        let pull_s = move |e: &Coeff| e.scale(-eps);
                        p.add_matrix_equality(&[(rho, &pull_rho), (slack, &pull_slack), (s, &pull_s)], &rhs, "partial trace");
                        p.add_constraint(vec![(s, Coeff::identity(ra))], Relation::Le(1.0), "eigenvector slack norm");
                    } else {
                        p.add_matrix_equality(&[(rho, &pull_rho), (slack, &pull_slack)], &rhs, "partial trace");
                    }
                }
                if families.decoy {
                    for (i, row) in spec.intervals.iter().enumerate() {
                        let pi = spec.priors[i];
                        if pi == 0.0 {
                            continue;
                        }
                        let mut sel = CMatrix::zeros(A_DIM, A_DIM);
                        sel[(i, i)] = Complex64::new(1.0, 0.0);
                        for (j, (&(lo, hi), povm)) in row.iter().zip(povms).enumerate() {
                            let coeff = pull(&kron(&sel, &povm.matrix));
                            if coeff.iter().all(|z| z.norm() == 0.0) {
                                continue;
                            }
                            let range = Relation::Range(pi * lo - margin, pi * hi + margin);
                            p.add_constraint(vec![(rho, Coeff::auto(coeff))], range, format!("signal {i} event {j}"));
                        }
                    }
                }
                (p, rho)
            })
            .collect::<Vec<_>>();
        let rho = problems[0].1;
        Ok(Self { spec, problems: problems.into_iter().map(|(p, _)| p).collect(), rho, embedding })
    }

    /// Dimension of the reduced variable.
    pub fn dim(&self) -> usize {
        self.embedding.ncols()
    }

    /// Lifts a reduced variable to `A ⊗ K`.
    pub fn lift(&self, rho: &CMatrix) -> CMatrix {
        &self.embedding * rho * self.embedding.adjoint()
    }
}

/// Orthonormal basis of the support of a PSD matrix.
fn support_basis(m: &CMatrix) -> Result<CMatrix> {
    let e = hermitian_eig(m)?;
    let top = e.values.first().copied().unwrap_or(0.0);
    let cols: Vec<_> = (0..e.values.len())
        .filter(|&k| e.values[k] > SUPPORT_RTOL * top)
        .map(|k| e.vectors.column(k).into_owned())
        .collect();
    if cols.is_empty() {
        return Err(Error::InvalidArgument("Alice's state is zero".into()));
    }
    Ok(CMatrix::from_columns(&cols))
}

/// Frank–Wolfe settings.
#[derive(Clone, Copy, Debug)]
pub struct FrankWolfe {
    pub max_iterations: usize,
    /// Stop once an iteration improves the objective by less than this fraction.
    pub min_improvement: f64,
    /// Golden-section steps of the line search.
    pub line_search_steps: usize,
}

impl Default for FrankWolfe {
    fn default() -> Self {
        Self { max_iterations: 150, min_improvement: 1e-7, line_search_steps: 40 }
    }
}

/// Certified contribution of one block.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockRate {
    pub index: usize,
    pub weight: f64,
    pub eps_vec: f64,
    pub w_floor: f64,
    /// Smallest objective found at a feasible point, an upper estimate of the minimum.
    pub best_value: f64,
    /// Certified lower bound on the minimum, continuity penalty included.
    pub bound: f64,
    /// `weight · max(0, bound)`.
    pub rate: f64,
    pub iterations: usize,
    /// False when the block contributed zero because of solver trouble or unusability.
    pub certified: bool,
    /// Certificate gap of the linear subproblem that produced the bound.
    pub gap: f64,
    /// Constraint widening of the rung that produced the bound.
    pub margin: f64,
}

impl BlockRate {
    fn zero(spec: &BlockSpec) -> Self {
        Self {
            index: spec.index,
            weight: spec.weight,
            eps_vec: spec.eps_vec,
            w_floor: spec.w_floor,
            best_value: f64::NAN,
            bound: 0.0,
            rate: 0.0,
            iterations: 0,
            certified: false,
            gap: 0.0,
            margin: 0.0,
        }
    }
}

/// Certified minimum of `Tr(g ρ)` over one program, with the minimiser.
fn linear_minimum(problem: &ConicProblem, rho: VarId, g: &CMatrix) -> Result<Option<(Option<(f64, f64)>, CMatrix)>> {
    let mut p = problem.clone();
    p.set_objective(vec![(rho, Coeff::Dense(g.clone()))]);
    let r = solve(&p, Sense::Minimize)?;
    if r.status == SolveStatus::Infeasible {
        return Ok(None);
    }
    let gap = (r.primal_value - r.certified_bound).abs() / r.primal_value.abs().max(1.0);
    let cert = (r.status == SolveStatus::Optimal && r.certified_bound.is_finite() && gap <= CERTIFICATE_GAP_TOL)
        .then_some((r.certified_bound, gap));
    let x = &r.x[rho.0];
    Ok(Some((cert, (x + x.adjoint()).scale(0.5))))
}

fn is_psd(m: &CMatrix) -> Result<bool> {
    Ok(hermitian_eigenvalues(m)?.last().map_or(true, |&l| l >= 0.0))
}

/// Minimises `φ(t) = f(ρ + t·D)` over `t ∈ [0, 1]` by golden section.
fn line_search(map: &ObjectiveMap, rho: &CMatrix, dir: &CMatrix, steps: usize) -> Result<(f64, f64)> {
    let phi = |t: f64| -> Result<f64> { Ok(map.evaluate(&(rho + dir.scale(t)))?.value) };
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (0.0, 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (phi(c)?, phi(d)?);
    for _ in 0..steps {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = phi(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = phi(d)?;
        }
    }
    let mut best = if fc < fd { (c, fc) } else { (d, fd) };
    let f1 = phi(1.0)?;
    if f1 < best.1 {
        best = (1.0, f1);
    }
    Ok(best)
}

/// Outcome of Frank–Wolfe on one rung.
struct Descent {
    best_value: f64,
    /// Best certified linearisation bound with its certificate gap.
    bound: Option<(f64, f64)>,
    iterations: usize,
}

fn descend(problem: &ConicProblem, rho_var: VarId, map: &ObjectiveMap, fw: &FrankWolfe) -> Result<Option<Descent>> {
    let mut p = problem.clone();
    p.set_objective(Vec::new());
    let r = solve(&p, Sense::Minimize)?;
    if r.status == SolveStatus::Infeasible {
        return Ok(None);
    }
    let x = &r.x[rho_var.0];
    let mut rho = (x + x.adjoint()).scale(0.5);
    if !is_psd(&rho)? {
        return Ok(None);
    }
    let mut eval = map.evaluate(&rho)?;
    let mut out = Descent { best_value: eval.value, bound: None, iterations: 0 };
    let record = |out: &mut Descent, value: f64, at_rho: f64, cert: Option<(f64, f64)>| {
        if let Some((min, gap)) = cert {
            let lb = value - at_rho + min;
            if out.bound.map_or(true, |(b, _)| lb > b) {
                out.bound = Some((lb, gap));
            }
        }
    };
    let mut moved = true;
    while out.iterations < fw.max_iterations {
        out.iterations += 1;
        let Some((cert, target)) = linear_minimum(problem, rho_var, &eval.gradient)? else { break };
        record(&mut out, eval.value, Coeff::Dense(eval.gradient.clone()).eval(&rho), cert);
        if out.bound.is_none() && out.iterations >= UNCERTIFIED_PATIENCE {
            return Ok(Some(out));
        }
        let dir = &target - &rho;
        let (t, value) = line_search(map, &rho, &dir, fw.line_search_steps)?;
        if t <= 0.0 || value >= eval.value {
            moved = false;
            break;
        }
        let improvement = eval.value - value;
        rho = &rho + dir.scale(t);
        eval = map.evaluate(&rho)?;
        out.best_value = out.best_value.min(eval.value);
        let scale = eval.value.abs().max(1e-12);
        let closed = out.bound.map_or(false, |(b, _)| eval.value - b <= fw.min_improvement * scale);
        if improvement < fw.min_improvement * scale || closed {
            break;
        }
    }
    // The final iterate's linearisation is usually the tightest.
    if moved {
        if let Some((cert, _)) = linear_minimum(problem, rho_var, &eval.gradient)? {
            record(&mut out, eval.value, Coeff::Dense(eval.gradient.clone()).eval(&rho), cert);
        }
    }
    Ok(Some(out))
}

/// Certified lower bound on the block's contribution.
///
/// Frank–Wolfe descent on the regularised objective. Every linear subproblem yields
/// the linearisation bound `f(ρ_k) − Tr(g_k ρ_k) + min Tr(g_k ρ)`, valid by convexity
/// whenever its minimum is dual certified. The best such bound, less the continuity
/// penalty, is weighted by the block weight. Solver trouble on every rung yields zero.
pub fn solve_block(bp: &BlockProblem, map: &ObjectiveMap, fw: &FrankWolfe) -> Result<BlockRate> {
    let spec = &bp.spec;
    if !spec.usable || spec.weight <= 0.0 {
        return Ok(BlockRate::zero(spec));
    }
    if map.in_dim != bp.embedding.nrows() {
        return Err(Error::Dimension(format!("objective on {} for block program on {}", map.in_dim, bp.embedding.nrows())));
    }
    let reduced = ObjectiveMap::new(map.kraus.iter().map(|k| k * &bp.embedding).collect(), map.key_projectors.clone())?;
    for (problem, &margin) in bp.problems.iter().zip(&KEY_MARGIN_LADDER) {
        let Some(d) = descend(problem, bp.rho, &reduced, fw)? else { continue };
        let Some((lb, gap)) = d.bound else { continue };
        let bound = lb - reduced.continuity_penalty();
        return Ok(BlockRate {
            index: spec.index,
            weight: spec.weight,
            eps_vec: spec.eps_vec,
            w_floor: spec.w_floor,
            best_value: d.best_value,
            bound,
            rate: spec.weight * bound.max(0.0),
            iterations: d.iterations,
            certified: true,
            gap,
            margin,
        });
    }
    Ok(BlockRate::zero(spec))
}
