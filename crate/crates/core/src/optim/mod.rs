//! Conic modelling, a primal-dual interior-point backend, and dual certification.
//!
//! Reported bounds never come from a raw solver optimum. They come from
//! [`certify_bound`], which is valid for any dual vector under the variables'
//! trace caps.

mod ipm;
mod problem;
mod standard;

pub use ipm::{ConicSolver, InteriorPoint, IpmOptions, RawSolution, SolveStatus};
pub use problem::{Coeff, ConicProblem, Constraint, Part, PsdVar, Relation, Sense, VarId};
pub use standard::{certify, smat, svec, svec_index, svec_len, Certificate, Lowered, StandardForm};

use crate::error::Result;
use crate::fock::CMatrix;

/// Outcome of [`solve`].
#[derive(Clone, Debug)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Objective at the returned primal point, in the problem's sense.
    pub primal_value: f64,
    /// Dual objective, in the problem's sense.
    pub dual_value: f64,
    /// One Hermitian matrix per declared variable.
    pub x: Vec<CMatrix>,
    /// Standard-form dual vector.
    pub y: Vec<f64>,
    /// Lower bound for minimisations, upper bound for maximisations.
    pub certified_bound: f64,
    pub relative_gap: f64,
    pub iterations: usize,
    pub embedded: bool,
}

impl SolveResult {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Solves with the default interior-point backend.
pub fn solve(problem: &ConicProblem, sense: Sense) -> Result<SolveResult> {
    solve_with(problem, sense, &InteriorPoint::default())
}

pub fn solve_with(problem: &ConicProblem, sense: Sense, solver: &dyn ConicSolver) -> Result<SolveResult> {
    let lowered = match Lowered::new(problem, sense) {
        Ok(l) => l,
        Err(crate::Error::Infeasible(msg)) => return Ok(infeasible(problem, sense, msg)),
        Err(e) => return Err(e),
    };
    let raw = solver.solve_standard(&lowered.form)?;
    let certified_bound = certify_bound(&lowered, &raw.y)?;
    Ok(SolveResult {
        status: raw.status,
        primal_value: lowered.objective_from_standard(raw.primal_objective),
        dual_value: lowered.objective_from_standard(raw.dual_objective),
        x: lowered.recover(&raw.x),
        y: raw.y,
        certified_bound,
        relative_gap: raw.relative_gap,
        iterations: raw.iterations,
        embedded: lowered.embedded,
    })
}

fn infeasible(problem: &ConicProblem, sense: Sense, _reason: String) -> SolveResult {
    let bound = match sense {
        Sense::Minimize => f64::INFINITY,
        Sense::Maximize => f64::NEG_INFINITY,
    };
    SolveResult {
        status: SolveStatus::Infeasible,
        primal_value: f64::NAN,
        dual_value: bound,
        x: problem.vars.iter().map(|v| CMatrix::zeros(v.dim, v.dim)).collect(),
        y: Vec::new(),
        certified_bound: bound,
        relative_gap: f64::NAN,
        iterations: 0,
        embedded: false,
    }
}

/// Safe one-sided bound from any dual vector: below the minimum, or above the maximum.
pub fn certify_bound(lowered: &Lowered, y: &[f64]) -> Result<f64> {
    Ok(lowered.objective_from_standard(certify(&lowered.form, y)?.bound))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn max_trace_under_cap() {
        let mut p = ConicProblem::new();
        let x = p.add_var(3, 1.0, "x");
        p.add_constraint(vec![(x, Coeff::identity(3))], Relation::Le(1.0), "tr");
        p.set_objective(vec![(x, Coeff::identity(3))]);
        let r = solve(&p, Sense::Maximize).unwrap();
        assert!(r.is_optimal(), "{r:?}");
        assert!((r.primal_value - 1.0).abs() < 1e-7);
        assert!(r.certified_bound >= r.primal_value - 1e-9);
        assert!((r.certified_bound - 1.0).abs() < 1e-6);
    }

    #[test]
    fn infeasible_equalities() {
        let mut p = ConicProblem::new();
        let x = p.add_var(2, 3.0, "x");
        p.add_constraint(vec![(x, Coeff::identity(2))], Relation::Eq(1.0), "a");
        p.add_constraint(vec![(x, Coeff::identity(2))], Relation::Eq(2.0), "b");
        p.set_objective(vec![(x, Coeff::entry(2, 0, 0, Part::Re))]);
        let r = solve(&p, Sense::Minimize).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
    }

    #[test]
    fn trivially_infeasible_zero_row() {
        let mut p = ConicProblem::new();
        let x = p.add_var(2, 1.0, "x");
        p.add_constraint(vec![(x, Coeff::entry(2, 0, 1, Part::Im))], Relation::Eq(1.0), "im");
        p.add_constraint(vec![(x, Coeff::identity(2))], Relation::Le(1.0), "tr");
        // Forced onto the real path the row reads 0 = 1; the embedded path keeps it.
        let r = solve(&p, Sense::Minimize).unwrap();
        assert!(r.embedded);
        assert_eq!(r.status, SolveStatus::Infeasible);
    }

    /// `min ⟨C, X⟩` over 2x2 PSD with fixed diagonal, against a scan of the off-diagonal.
    fn scan_2x2(cm: &CMatrix, d: [f64; 2]) -> f64 {
        let r = (d[0] * d[1]).sqrt();
        let steps = 400;
        let mut best = f64::INFINITY;
        for a in 0..=steps {
            let rad = r * a as f64 / steps as f64;
            for t in 0..steps {
                let phi = 2.0 * std::f64::consts::PI * t as f64 / steps as f64;
                let off = Complex64::from_polar(rad, phi);
                let x = CMatrix::from_row_slice(2, 2, &[c(d[0], 0.0), off, off.conj(), c(d[1], 0.0)]);
                best = best.min(crate::fock::linalg::trace_product(cm, &x).re);
            }
        }
        best
    }

    #[test]
    fn fixed_diagonal_matches_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..6 {
            let off = if trial % 2 == 0 { c(rng.gen_range(-1.0..1.0), 0.0) } else { c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) };
            let cm = CMatrix::from_row_slice(2, 2, &[c(rng.gen_range(-1.0..1.0), 0.0), off, off.conj(), c(rng.gen_range(-1.0..1.0), 0.0)]);
            let d = [rng.gen_range(0.1..1.0), rng.gen_range(0.1..1.0)];
            let mut p = ConicProblem::new();
            let x = p.add_var(2, d[0] + d[1], "x");
            p.add_constraint(vec![(x, Coeff::entry(2, 0, 0, Part::Re))], Relation::Eq(d[0]), "d0");
            p.add_constraint(vec![(x, Coeff::entry(2, 1, 1, Part::Re))], Relation::Eq(d[1]), "d1");
            p.set_objective(vec![(x, Coeff::Dense(cm.clone()))]);
            let r = solve(&p, Sense::Minimize).unwrap();
            let truth = -2.0 * off.norm() * (d[0] * d[1]).sqrt() + cm[(0, 0)].re * d[0] + cm[(1, 1)].re * d[1];
            let scan = scan_2x2(&cm, d);
            assert!(r.is_optimal());
            assert_eq!(r.embedded, trial % 2 == 1);
            assert!((r.primal_value - truth).abs() < 1e-7, "{} vs {truth}", r.primal_value);
            assert!(r.certified_bound <= scan + 1e-12);
            assert!(r.certified_bound <= truth + 1e-12);
            assert!((r.certified_bound - truth).abs() < 1e-6);
            assert!(p.max_violation(&r.x) < 1e-8);
        }
    }

    #[test]
    fn perturbed_dual_is_inflated_by_violation() {
        // min x₀₀ s.t. Tr X = 1 has the exact dual y = 0 with Z = diag(1, 0).
        let mut p = ConicProblem::new();
        let x = p.add_var(2, 1.0, "x");
        p.add_constraint(vec![(x, Coeff::identity(2))], Relation::Eq(1.0), "tr");
        p.set_objective(vec![(x, Coeff::entry(2, 0, 0, Part::Re))]);
        let low = Lowered::new(&p, Sense::Minimize).unwrap();
        assert_eq!(certify_bound(&low, &[0.0]).unwrap(), 0.0);
        let v = 0.01;
        assert!((certify_bound(&low, &[v]).unwrap() - (v - v)).abs() < 1e-15);
        let cert = certify(&low.form, &[v]).unwrap();
        assert!((cert.penalty - v).abs() < 1e-15);
    }

    #[test]
    fn ranges_and_maximisation() {
        // max Re X₀₁ s.t. X₀₀ ∈ [0.2, 0.3], X₁₁ ≤ 0.5.
        let mut p = ConicProblem::new();
        let x = p.add_var(2, 0.8, "x");
        p.add_constraint(vec![(x, Coeff::entry(2, 0, 0, Part::Re))], Relation::Range(0.2, 0.3), "r");
        p.add_constraint(vec![(x, Coeff::entry(2, 1, 1, Part::Re))], Relation::Le(0.5), "u");
        p.add_constraint(vec![(x, Coeff::entry(2, 1, 1, Part::Re))], Relation::Ge(0.1), "l");
        p.set_objective(vec![(x, Coeff::entry(2, 0, 1, Part::Re))]);
        let r = solve(&p, Sense::Maximize).unwrap();
        let truth = (0.3f64 * 0.5).sqrt();
        assert!(r.is_optimal());
        assert!((r.primal_value - truth).abs() < 1e-7);
        assert!(r.certified_bound >= truth - 1e-12);
        assert!(r.certified_bound - truth < 1e-6);
    }

    #[test]
    fn complex_objective_uses_embedding() {
        // max Im X₀₁ with unit diagonal bounds: optimum 1 at X₀₁ = i.
        let mut p = ConicProblem::new();
        let x = p.add_var(2, 2.0, "x");
        p.add_constraint(vec![(x, Coeff::entry(2, 0, 0, Part::Re))], Relation::Le(1.0), "a");
        p.add_constraint(vec![(x, Coeff::entry(2, 1, 1, Part::Re))], Relation::Le(1.0), "b");
        p.set_objective(vec![(x, Coeff::entry(2, 0, 1, Part::Im))]);
        let r = solve(&p, Sense::Maximize).unwrap();
        assert!(r.embedded);
        assert!((r.primal_value - 1.0).abs() < 1e-7);
        assert!((r.x[0][(0, 1)] - c(0.0, 1.0)).norm() < 1e-4);
        let vals = p.constraint_values(&r.x);
        assert!(vals[0] <= 1.0 + 1e-9 && vals[1] <= 1.0 + 1e-9);
    }

    #[test]
    fn partial_trace_equality() {
        // min Tr((Z ⊗ Z) X) s.t. Tr_B X = 𝟙/2: optimum -1 on the anticorrelated state.
        let mut p = ConicProblem::new();
        let x = p.add_var(4, 1.0, "x");
        let zz = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0)]));
        p.add_matrix_equality(&[(x, &|e: &Coeff| e.kron_identity(2))], &CMatrix::identity(2, 2).scale(0.5), "ptr");
        p.set_objective(vec![(x, Coeff::Dense(zz))]);
        let r = solve(&p, Sense::Minimize).unwrap();
        assert!(r.is_optimal());
        assert!((r.primal_value + 1.0).abs() < 1e-7);
        assert!(r.certified_bound <= -1.0 + 1e-12 && r.certified_bound > -1.0 - 1e-6);
    }
}
