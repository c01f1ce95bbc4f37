//! Real standard form shared by every conic backend.
//!
//! Columns are ordered as all non-negative scalars first, then each PSD block in
//! `svec` layout: lower triangle, column-major, off-diagonal entries scaled by `√2`
//! so that `svec(A)·svec(B) = Tr(AB)`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::problem::{Coeff, ConicProblem, Relation, Sense};
use crate::error::{Error, Result};
use crate::fock::CMatrix;

/// `min cᵀx  s.t.  A x = b,  x ∈ ℝ₊^{n_lp} × S₊^{n_1} × …`.
#[derive(Clone, Debug, Default)]
pub struct StandardForm {
    pub n_lp: usize,
    /// Upper bound on each scalar variable over the feasible set.
    pub lp_caps: Vec<f64>,
    /// Dimension of each PSD block.
    pub psd_dims: Vec<usize>,
    /// Upper bound on the trace of each PSD block over the feasible set.
    pub psd_caps: Vec<f64>,
    pub c: Vec<f64>,
    /// Sparse `(row, column, value)` triplets; duplicates are summed.
    pub a: Vec<(usize, usize, f64)>,
    pub b: Vec<f64>,
}

pub fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Position of entry `(i, j)` of an `n x n` block in `svec` order.
pub fn svec_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i >= j { (i, j) } else { (j, i) };
    // Column `j` starts after `Σ_{k<j} (n - k)` entries.
    j * (2 * n - j + 1) / 2 + (i - j)
}

pub fn svec(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(svec_len(n));
    for j in 0..n {
        for i in j..n {
            out.push(if i == j { m[(i, j)] } else { std::f64::consts::SQRT_2 * m[(i, j)] });
        }
    }
    out
}

pub fn smat(v: &[f64], n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        for i in j..n {
            if i == j {
                m[(i, i)] = v[k];
            } else {
                let x = v[k] / std::f64::consts::SQRT_2;
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
            k += 1;
        }
    }
    m
}

impl StandardForm {
    pub fn n_rows(&self) -> usize {
        self.b.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_lp + self.psd_dims.iter().map(|&n| svec_len(n)).sum::<usize>()
    }

    /// First column of each PSD block.
    pub fn block_offsets(&self) -> Vec<usize> {
        let mut off = self.n_lp;
        self.psd_dims
            .iter()
            .map(|&n| {
                let o = off;
                off += svec_len(n);
                o
            })
            .collect()
    }

    /// `c - Aᵀ y`.
    pub fn dual_slack(&self, y: &[f64]) -> Vec<f64> {
        let mut z = self.c.clone();
        for &(r, col, v) in &self.a {
            z[col] -= v * y[r];
        }
        z
    }

    /// `A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rows()];
        for &(r, col, v) in &self.a {
            out[r] += v * x[col];
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.lp_caps.len() != self.n_lp || self.psd_caps.len() != self.psd_dims.len() {
            return Err(Error::Dimension("cap vectors do not match the cone layout".into()));
        }
        if self.c.len() != self.n_cols() {
            return Err(Error::Dimension(format!("objective has {} entries, expected {}", self.c.len(), self.n_cols())));
        }
        let (m, n) = (self.n_rows(), self.n_cols());
        if let Some(t) = self.a.iter().find(|t| t.0 >= m || t.1 >= n) {
            return Err(Error::Dimension(format!("triplet ({}, {}) outside {m} x {n}", t.0, t.1)));
        }
        Ok(())
    }
}

/// Dual-certified lower bound on the optimum of a standard form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Certificate {
    /// `bᵀy` minus the worst-case contribution of every negative direction of `c - Aᵀy`.
    pub bound: f64,
    pub dual_objective: f64,
    pub penalty: f64,
}

/// Valid for any `y`: every feasible `x` satisfies `cᵀx ≥ bᵀy + Σ_b λ_min(Z_b)⁻ cap_b`.
pub fn certify(form: &StandardForm, y: &[f64]) -> Result<Certificate> {
    let z = form.dual_slack(y);
    let dual_objective: f64 = form.b.iter().zip(y).map(|(b, y)| b * y).sum();
    let mut penalty = 0.0;
    for k in 0..form.n_lp {
        penalty += (-z[k]).max(0.0) * form.lp_caps[k];
    }
    for ((&n, &cap), off) in form.psd_dims.iter().zip(&form.psd_caps).zip(form.block_offsets()) {
        let zb = smat(&z[off..off + svec_len(n)], n);
        let lmin = zb.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
        penalty += (-lmin).max(0.0) * cap;
    }
    if !penalty.is_finite() || !dual_objective.is_finite() {
        return Err(Error::Solver("non-finite dual certificate".into()));
    }
    Ok(Certificate { bound: dual_objective - penalty, dual_objective, penalty })
}

/// How each variable of a [`ConicProblem`] was lowered.
#[derive(Clone, Debug)]
pub struct Lowered {
    pub form: StandardForm,
    pub sense: Sense,
    /// Variables are real symmetric blocks when false, `2n x 2n` real embeddings when true.
    pub embedded: bool,
    /// Constraint index of each standard-form row, `None` for auxiliary rows.
    pub row_origin: Vec<Option<usize>>,
}

/// Threshold below which a lowered row is treated as identically zero.
const ZERO_ROW_TOL: f64 = 1e-14;

impl Lowered {
    /// Lowers a problem, choosing the real path whenever it is exact.
    pub fn new(problem: &ConicProblem, sense: Sense) -> Result<Self> {
        Self::with_embedding(problem, sense, !problem.is_real())
    }

    pub fn with_embedding(problem: &ConicProblem, sense: Sense, embedded: bool) -> Result<Self> {
        problem.validate()?;
        let factor = if embedded { 2 } else { 1 };
        let psd_dims: Vec<usize> = problem.vars.iter().map(|v| v.dim * factor).collect();
        let psd_caps: Vec<f64> = problem.vars.iter().map(|v| v.trace_cap * factor as f64).collect();

        // Each constraint becomes one main row plus at most one auxiliary row.
        struct RowSpec {
            entries: Vec<(usize, usize, f64)>,
            slacks: Vec<(usize, f64)>,
            rhs: f64,
            origin: Option<usize>,
        }
        let mut lp_caps: Vec<f64> = Vec::new();
        let mut rows: Vec<RowSpec> = Vec::new();
        for (ci, con) in problem.constraints.iter().enumerate() {
            let entries = lower_terms(&con.terms, &psd_dims, embedded);
            if entries.iter().all(|e| e.2.abs() <= ZERO_ROW_TOL) {
                let ok = match con.relation {
                    Relation::Eq(b) => b.abs() <= ZERO_ROW_TOL,
                    Relation::Le(b) => b >= -ZERO_ROW_TOL,
                    Relation::Ge(b) => b <= ZERO_ROW_TOL,
                    Relation::Range(lo, hi) => lo <= ZERO_ROW_TOL && hi >= -ZERO_ROW_TOL,
                };
                if ok {
                    continue;
                }
                return Err(Error::Infeasible(format!("constraint {} reads 0 against {:?}", con.label, con.relation)));
            }
            let (lo_sum, hi_sum) = con.terms.iter().fold((0.0, 0.0), |(lo, hi), (v, c)| {
                let (l, h) = c.spectrum_bounds();
                let cap = problem.vars[v.0].trace_cap;
                (lo + l.min(0.0) * cap, hi + h.max(0.0) * cap)
            });
            let mut slack = |cap: f64| {
                lp_caps.push(cap.max(0.0));
                lp_caps.len() - 1
            };
            match con.relation {
                Relation::Eq(b) => rows.push(RowSpec { entries, slacks: vec![], rhs: b, origin: Some(ci) }),
                Relation::Le(b) => {
                    let s = slack(b - lo_sum);
                    rows.push(RowSpec { entries, slacks: vec![(s, 1.0)], rhs: b, origin: Some(ci) });
                }
                Relation::Ge(b) => {
                    let s = slack(hi_sum - b);
                    rows.push(RowSpec { entries, slacks: vec![(s, -1.0)], rhs: b, origin: Some(ci) });
                }
                Relation::Range(lo, hi) => {
                    let s1 = slack(hi - lo);
                    let s2 = slack(hi - lo);
                    rows.push(RowSpec { entries, slacks: vec![(s1, -1.0)], rhs: lo, origin: Some(ci) });
                    rows.push(RowSpec {
                        entries: vec![],
                        slacks: vec![(s1, 1.0), (s2, 1.0)],
                        rhs: hi - lo,
                        origin: None,
                    });
                }
            }
        }

        let n_lp = lp_caps.len();
        let mut offsets = Vec::with_capacity(psd_dims.len());
        let mut off = n_lp;
        for &n in &psd_dims {
            offsets.push(off);
            off += svec_len(n);
        }
        let n_cols = off;

        let mut a = Vec::new();
        let mut b = Vec::with_capacity(rows.len());
        let mut row_origin = Vec::with_capacity(rows.len());
        for (r, spec) in rows.into_iter().enumerate() {
            for (block, k, v) in spec.entries {
                a.push((r, offsets[block] + k, v));
            }
            for (s, v) in spec.slacks {
                a.push((r, s, v));
            }
            b.push(spec.rhs);
            row_origin.push(spec.origin);
        }

        let mut c = vec![0.0; n_cols];
        let sign = if sense == Sense::Maximize { -1.0 } else { 1.0 };
        for (block, k, v) in lower_terms(&problem.objective, &psd_dims, embedded) {
            c[offsets[block] + k] += sign * v;
        }

        let form = StandardForm { n_lp, lp_caps, psd_dims, psd_caps, c, a, b };
        form.validate()?;
        Ok(Self { form, sense, embedded, row_origin })
    }

    /// Hermitian variable values from a standard-form solution vector.
    pub fn recover(&self, x: &[f64]) -> Vec<CMatrix> {
        self.form
            .psd_dims
            .iter()
            .zip(self.form.block_offsets())
            .map(|(&n, off)| {
                let m = smat(&x[off..off + svec_len(n)], n);
                if self.embedded {
                    let h = n / 2;
                    CMatrix::from_fn(h, h, |i, j| {
                        num_complex::Complex64::new(
                            0.5 * (m[(i, j)] + m[(h + i, h + j)]),
                            0.5 * (m[(h + i, j)] - m[(i, h + j)]),
                        )
                    })
                } else {
                    m.map(|v| num_complex::Complex64::new(v, 0.0))
                }
            })
            .collect()
    }

    /// Objective value in the original sense from a standard-form objective.
    pub fn objective_from_standard(&self, value: f64) -> f64 {
        match self.sense {
            Sense::Minimize => value,
            Sense::Maximize => -value,
        }
    }
}

/// Lowers `Σ Tr(F_k X_k)` to `(block, svec position, coefficient)` triplets.
fn lower_terms(terms: &[(super::problem::VarId, Coeff)], psd_dims: &[usize], embedded: bool) -> Vec<(usize, usize, f64)> {
    let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (var, coeff) in terms {
        let n = psd_dims[var.0];
        let h = if embedded { n / 2 } else { n };
        let mut add = |i: usize, j: usize, v: f64| {
            if v == 0.0 {
                return;
            }
            let w = if i == j { v } else { v / std::f64::consts::SQRT_2 };
            *acc.entry((var.0, svec_index(n, i, j))).or_insert(0.0) += w;
        };
        let mut visit = |i: usize, j: usize, z: num_complex::Complex64| {
            if embedded {
                add(i, j, 0.5 * z.re);
                add(h + i, h + j, 0.5 * z.re);
                add(i, h + j, -0.5 * z.im);
                add(h + i, j, 0.5 * z.im);
            } else {
                add(i, j, z.re);
            }
        };
        match coeff {
            Coeff::Dense(m) => {
                for j in 0..h {
                    for i in 0..h {
                        visit(i, j, m[(i, j)]);
                    }
                }
            }
            Coeff::Sparse { entries, .. } => {
                for &(i, j, z) in entries {
                    visit(i, j, z);
                }
            }
        }
    }
    acc.into_iter().filter(|e| e.1 != 0.0).map(|((b, k), v)| (b, k, v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::problem::Part;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn svec_round_trip_and_inner_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = DMatrix::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0));
        let a = &g + g.transpose();
        let h = DMatrix::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0));
        let b = &h + h.transpose();
        assert!((smat(&svec(&a), 4) - &a).amax() < 1e-15);
        let dot: f64 = svec(&a).iter().zip(svec(&b)).map(|(x, y)| x * y).sum();
        assert!((dot - (&a * &b).trace()).abs() < 1e-12);
        for j in 0..4 {
            for i in j..4 {
                let k = svec_index(4, i, j);
                assert_eq!(svec_index(4, j, i), k);
                let mut e = DMatrix::zeros(4, 4);
                e[(i, j)] = 1.0;
                e[(j, i)] = 1.0;
                assert!(svec(&e)[k] > 0.0);
            }
        }
    }

    #[test]
    fn embedding_preserves_functionals() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = CMatrix::from_fn(3, 3, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let x = &g * g.adjoint();
        let mut p = ConicProblem::new();
        let v = p.add_var(3, 10.0, "x");
        let coeffs =
            [Coeff::entry(3, 0, 2, Part::Im), Coeff::entry(3, 1, 2, Part::Re), Coeff::Dense(&x + CMatrix::identity(3, 3))];
        for c in &coeffs {
            p.add_constraint(vec![(v, c.clone())], Relation::Eq(0.0), "c");
        }
        let low = Lowered::with_embedding(&p, Sense::Minimize, true).unwrap();
        let mut big = DMatrix::zeros(6, 6);
        for i in 0..3 {
            for j in 0..3 {
                big[(i, j)] = x[(i, j)].re;
                big[(i + 3, j + 3)] = x[(i, j)].re;
                big[(i, j + 3)] = -x[(i, j)].im;
                big[(i + 3, j)] = x[(i, j)].im;
            }
        }
        let mut xs = vec![0.0; low.form.n_lp];
        xs.extend(svec(&big));
        let vals = low.form.apply(&xs);
        for (c, got) in coeffs.iter().zip(vals) {
            assert!((c.eval(&x) - got).abs() < 1e-12);
        }
        let back = low.recover(&xs);
        assert!((&back[0] - &x).camax() < 1e-14);
    }

    #[test]
    fn imaginary_rows_vanish_on_real_path() {
        let mut p = ConicProblem::new();
        let v = p.add_var(2, 1.0, "x");
        p.add_constraint(vec![(v, Coeff::entry(2, 0, 1, Part::Im))], Relation::Eq(0.0), "im");
        p.add_constraint(vec![(v, Coeff::identity(2))], Relation::Le(1.0), "tr");
        let low = Lowered::new(&p, Sense::Maximize).unwrap();
        assert!(!low.embedded);
        assert_eq!(low.form.n_rows(), 1);
        assert_eq!(low.row_origin, vec![Some(1)]);
        p.add_constraint(vec![(v, Coeff::entry(2, 0, 1, Part::Im))], Relation::Eq(0.5), "bad");
        assert!(matches!(Lowered::with_embedding(&p, Sense::Minimize, false), Err(Error::Infeasible(_))));
    }

    #[test]
    fn certificate_is_a_lower_bound() {
        // min x₀₀ s.t. Tr X = 1: optimum 0; any y gives a bound ≤ 0.
        let mut p = ConicProblem::new();
        let v = p.add_var(2, 1.0, "x");
        p.add_constraint(vec![(v, Coeff::identity(2))], Relation::Eq(1.0), "tr");
        p.set_objective(vec![(v, Coeff::entry(2, 0, 0, Part::Re))]);
        let low = Lowered::new(&p, Sense::Minimize).unwrap();
        for y in [-1.0, -0.3, 0.0, 0.2, 1.0] {
            let cert = certify(&low.form, &[y]).unwrap();
            assert!(cert.bound <= 1e-15, "y={y} bound={}", cert.bound);
        }
        assert_eq!(certify(&low.form, &[0.0]).unwrap().bound, 0.0);
    }
}
