//! Approximate eigendecomposition of truncated density operators.
//!
//! A state `ρ` on the full Fock space is replaced by its block-diagonal part
//! `ρ' = ΠρΠ + Π̄ρΠ̄` where `Π` projects onto at most `d` photons. The discarded
//! off-diagonal block has trace norm at most `ε_proj = λ√w`, which bounds both the
//! eigenvalue shift and, through a spectral gap `δ`, the eigenvector error.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::linalg::{self, CMatrix, CVector};
use crate::fock::{DensityOperator, FockKet};
use crate::laser::poisson_tail;

/// Tail weights below this are clamped when forming `ε_proj`.
pub const WEIGHT_FLOOR: f64 = 1e-18;

/// Rounding allowance for the perturbation checks.
pub const CHECK_TOL: f64 = 1e-12;

/// Size of the off-diagonal block discarded by a finite projection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectionBudget {
    /// Bound on the trace norm of `ΠρΠ̄`.
    pub eps_proj: f64,
    /// Operator norm of the whitened off-diagonal block.
    pub lambda: f64,
    /// Tail weight `Tr Π̄ρΠ̄`, unclamped.
    pub weight: f64,
}

/// One approximate eigenpair with its certified error terms.
#[derive(Clone, Debug)]
pub struct EigenBlock {
    pub index: usize,
    /// Eigenvalue of the projected state.
    pub value: f64,
    pub vector: FockKet,
    /// Spectral gap margin; the block is usable only when positive.
    pub delta: f64,
    /// Trace-distance bound between the true and approximate eigenprojectors.
    /// Infinite for unusable blocks.
    pub eps_vec: f64,
    pub usable: bool,
}

/// Budget computed from an explicit state on a larger cutoff.
///
/// `ε_proj = λ√w` with `λ = ‖√(ΠρΠ)^g ΠρΠ̄ √(Π̄ρΠ̄)^g‖_∞` and `w = Tr Π̄ρΠ̄`, where `Π`
/// keeps states with at most `d` photons.
pub fn projection_budget(rho_big: &DensityOperator, d: u32) -> Result<ProjectionBudget> {
    let space = &rho_big.space;
    let inner: Vec<usize> = space.indices_up_to(d);
    let outer: Vec<usize> = (0..space.dim()).filter(|&i| space.photons(i) > d).collect();
    if outer.is_empty() {
        return Err(Error::InvalidArgument(format!("state has no component above {d} photons")));
    }
    let evs = linalg::hermitian_eigenvalues(&rho_big.matrix)?;
    let top = evs.first().copied().unwrap_or(0.0).max(0.0);
    let min = evs.last().copied().unwrap_or(0.0);
    if min < -1e-10 * top.max(1.0) {
        return Err(Error::NotPsd(min));
    }
    let pick = |rows: &[usize], cols: &[usize]| CMatrix::from_fn(rows.len(), cols.len(), |i, j| rho_big.matrix[(rows[i], cols[j])]);
    let a = pick(&inner, &inner);
    let b = pick(&inner, &outer);
    let dd = pick(&outer, &outer);
    let whitened = linalg::gen_inverse_sqrt(&a)? * &b * linalg::gen_inverse_sqrt(&dd)?;
    let lambda = linalg::op_norm(&whitened);
    let weight = linalg::trace(&dd).re.max(0.0);
    Ok(ProjectionBudget { eps_proj: lambda * weight.sqrt(), lambda, weight })
}

/// Analytic budget of the model laser state: `λ ≤ 1-q`, `w` the exact Poisson tail.
///
/// `ε_proj` uses `max(w, WEIGHT_FLOOR)` so that it never drops below the precision at
/// which the truncated state itself is known.
pub fn model_budget(mu: f64, q: f64, d: u32) -> ProjectionBudget {
    let lambda = 1.0 - q;
    let weight = poisson_tail(mu, d);
    let eps_proj = if lambda == 0.0 { 0.0 } else { lambda * weight.max(WEIGHT_FLOOR).sqrt() };
    ProjectionBudget { eps_proj, lambda, weight }
}

/// Top `n_blocks` eigenpairs of the projected state with gap margins and eigenvector errors.
///
/// The gap of block `ñ` is `min(p'_{ñ-1} - p'_ñ, p'_ñ - p'_{ñ+1}) - ε_proj`, using only the
/// available side at the ends. The outside block contributes eigenvalues in `[0, w]`, so
/// the lower neighbour is never taken below `w`.
pub fn approx_eigendecomposition(
    rho: &DensityOperator,
    budget: &ProjectionBudget,
    n_blocks: usize,
) -> Result<Vec<EigenBlock>> {
    let dim = rho.dim();
    if n_blocks > dim {
        return Err(Error::InvalidArgument(format!("{n_blocks} blocks requested from a {dim}-dimensional state")));
    }
    let eig = linalg::hermitian_eig(&rho.matrix)?;
    let eps = budget.eps_proj;
    let w = budget.weight;
    let mut blocks = Vec::with_capacity(n_blocks);
    for k in 0..n_blocks {
        let p = eig.values[k];
        let mut gap = f64::INFINITY;
        if k > 0 {
            gap = gap.min(eig.values[k - 1] - p);
        }
        let below = if k + 1 < dim { eig.values[k + 1].max(w) } else { w };
        if k + 1 < dim || w > 0.0 {
            gap = gap.min(p - below);
        }
        let delta = gap - eps;
        let usable = delta > 0.0;
        let eps_vec = if !usable {
            f64::INFINITY
        } else if eps == 0.0 {
            0.0
        } else {
            2.0 * eps / delta
        };
        let vector = FockKet::new(rho.space.clone(), eig.vectors.column(k).into_owned())?;
        blocks.push(EigenBlock { index: k, value: p, vector, delta, eps_vec, usable });
    }
    Ok(blocks)
}

/// `|λ_i(ρ) - λ_i(σ)| ≤ ‖ρ - σ‖_∞` for every `i`.
pub fn weyl_check(rho: &DensityOperator, sigma: &DensityOperator) -> Result<bool> {
    let diff = rho.sub(sigma)?;
    let radius = linalg::op_norm(&diff.matrix);
    let a = linalg::hermitian_eigenvalues(&rho.matrix)?;
    let b = linalg::hermitian_eigenvalues(&sigma.matrix)?;
    Ok(a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= radius + CHECK_TOL))
}

/// Fidelity bound `|⟨u_i|v_i⟩|² ≥ 1 - ε²/δ_i²` between the `i`-th eigenvectors of `ρ` and `σ`.
///
/// `ε = ‖ρ - σ‖_∞` and `δ_i` is the gap of `λ_i(σ)` to its neighbours minus `ε`. Returns
/// `None` when `δ_i ≤ 0`, where the bound says nothing.
pub fn davis_kahan_check(rho: &DensityOperator, sigma: &DensityOperator, i: usize) -> Result<Option<bool>> {
    let diff = rho.sub(sigma)?;
    let eps = linalg::op_norm(&diff.matrix);
    let es = linalg::hermitian_eig(&sigma.matrix)?;
    let n = es.values.len();
    if i >= n {
        return Err(Error::InvalidArgument(format!("eigenvalue index {i} out of range")));
    }
    let mut gap = f64::INFINITY;
    if i > 0 {
        gap = gap.min(es.values[i - 1] - es.values[i]);
    }
    if i + 1 < n {
        gap = gap.min(es.values[i] - es.values[i + 1]);
    }
    let delta = gap - eps;
    if !(delta > 0.0) {
        return Ok(None);
    }
    let er = linalg::hermitian_eig(&rho.matrix)?;
    let u: CVector = er.vectors.column(i).into_owned();
    let v: CVector = es.vectors.column(i).into_owned();
    Ok(Some(infidelity(&u, &v) <= (eps / delta).powi(2) + CHECK_TOL))
}

/// `1 - |⟨v|u⟩|²` for unit vectors, computed from the orthogonal component.
pub fn infidelity(u: &CVector, v: &CVector) -> f64 {
    let overlap: Complex64 = v.dotc(u);
    (u - v * overlap).norm_squared()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::ModeSpace;
    use crate::laser::{model_state, poisson_weights};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_density(n: usize, rank: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        let g = CMatrix::from_fn(n, rank, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let m = &g * g.adjoint();
        let t = m.trace();
        linalg::hermitian_part(&(m / t))
    }

    #[test]
    fn block_diagonal_state_has_zero_budget() {
        let rho = model_state(0.5, 1.0, 12).unwrap();
        let b = projection_budget(&rho, 2).unwrap();
        assert_eq!(b.lambda, 0.0);
        assert_eq!(b.eps_proj, 0.0);
    }

    #[test]
    fn coherent_projector_budget() {
        // Oracle: explicit trace norm of the off-diagonal block.
        let rho = model_state(0.5, 0.0, 12).unwrap();
        let b = projection_budget(&rho, 2).unwrap();
        assert!((b.lambda - 1.0).abs() < 1e-10);
        let off = rho.matrix.view((0, 3), (3, 10)).into_owned();
        assert!(linalg::trace_norm(&off) <= b.eps_proj + 1e-14);
    }

    #[test]
    fn model_budget_values() {
        assert_eq!(model_budget(0.5, 1.0, 4).eps_proj, 0.0);
        let b = model_budget(0.5, 1.0, 1);
        assert!((b.weight - 0.0902).abs() < 1e-4);
        let b = model_budget(0.5, 0.9564, 20);
        assert!(b.weight < 1e-18);
        assert!((b.eps_proj - 0.0436 * WEIGHT_FLOOR.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn diagonal_state_blocks_are_poisson() {
        let rho = model_state(0.5, 1.0, 20).unwrap();
        let blocks = approx_eigendecomposition(&rho, &model_budget(0.5, 1.0, 20), 3).unwrap();
        let w = poisson_weights(0.5, 20);
        for (k, b) in blocks.iter().enumerate() {
            assert!((b.value - w[k]).abs() < 1e-12);
            assert_eq!(b.eps_vec, 0.0);
            assert!(b.usable);
        }
    }

    #[test]
    fn pure_state_has_one_block() {
        let rho = model_state(0.5, 0.0, 10).unwrap();
        let blocks = approx_eigendecomposition(&rho, &model_budget(0.5, 0.0, 10), 2).unwrap();
        assert!((blocks[0].value - (1.0 - poisson_tail(0.5, 10))).abs() < 1e-14);
        assert!(blocks[1].value.abs() < 1e-14);
        assert!(!blocks[1].usable && blocks[1].eps_vec.is_infinite());
    }

    #[test]
    fn eps_vec_shrinks_with_cutoff() {
        let mut last = f64::INFINITY;
        for d in [5u32, 10, 15, 20] {
            let rho = model_state(0.5, 0.9564, d).unwrap();
            let blocks = approx_eigendecomposition(&rho, &model_budget(0.5, 0.9564, d), 3).unwrap();
            let worst = blocks.iter().map(|b| b.eps_vec).fold(0.0, f64::max);
            assert!(worst <= last);
            last = worst;
        }
    }

    #[test]
    fn identical_states_pass_checks() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = ModeSpace::register(4);
        let rho = DensityOperator::new(s, random_density(4, 4, &mut rng)).unwrap();
        assert!(weyl_check(&rho, &rho).unwrap());
        assert_eq!(davis_kahan_check(&rho, &rho, 0).unwrap(), Some(true));
    }

    #[test]
    fn degenerate_sigma_is_skipped() {
        let s = ModeSpace::register(3);
        let sigma = DensityOperator::diagonal(&s, &[0.4, 0.4, 0.2]).unwrap();
        let rho = DensityOperator::diagonal(&s, &[0.45, 0.35, 0.2]).unwrap();
        assert_eq!(davis_kahan_check(&rho, &sigma, 0).unwrap(), None);
    }
}
