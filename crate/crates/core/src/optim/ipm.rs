//! Primal-dual interior-point method for the real standard form.
//!
//! HKM search direction with Mehrotra predictor-corrector. Each iteration forms the
//! Schur complement `M_ij = Tr(A_i X A_j Z⁻¹)` and factors it once for both solves.

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector};

use super::standard::{svec, svec_len, StandardForm};
use crate::error::{Error, Result};

const REFINEMENT_STEPS: usize = 8;
const INFEASIBILITY_COUPLING: f64 = 0.1;
const MAX_SIGMA: f64 = 0.5;
/// Iterations without a better merit before giving up on further progress.
const PATIENCE: usize = 5;
const POLISH_STEPS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NumericalTrouble,
}

/// Output of a backend on a [`StandardForm`].
#[derive(Clone, Debug)]
pub struct RawSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `|primal − dual| / max(1, |primal|)`.
    pub relative_gap: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub iterations: usize,
}

/// Adapter contract for conic backends.
pub trait ConicSolver: Send + Sync {
    fn solve_standard(&self, form: &StandardForm) -> Result<RawSolution>;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IpmOptions {
    /// Stop once gap and both infeasibilities are below this.
    pub tolerance: f64,
    /// Best iterate is reported optimal if its measures are below this.
    pub accept_tolerance: f64,
    pub max_iterations: usize,
    /// Fraction of the step to the cone boundary.
    pub step_fraction: f64,
    /// Print one line per iteration to stderr.
    pub trace: bool,
}

impl Default for IpmOptions {
    fn default() -> Self {
        Self { tolerance: 1e-9, accept_tolerance: 1e-6, max_iterations: 100, step_fraction: 0.95, trace: false }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct InteriorPoint {
    pub options: IpmOptions,
}

impl InteriorPoint {
    pub fn new(options: IpmOptions) -> Self {
        Self { options }
    }
}

impl ConicSolver for InteriorPoint {
    fn solve_standard(&self, form: &StandardForm) -> Result<RawSolution> {
        form.validate()?;
        let data = Data::new(form)?;
        Ok(data.solve(&self.options))
    }
}

/// Symmetric coefficient block of one row.
#[derive(Clone, Debug)]
enum RowMat {
    /// Full entry list, both triangles.
    Sparse(Vec<(usize, usize, f64)>),
    Dense(DMatrix<f64>),
}

impl RowMat {
    fn dot(&self, m: &DMatrix<f64>) -> f64 {
        match self {
            RowMat::Sparse(es) => es.iter().map(|&(i, j, v)| v * m[(i, j)]).sum(),
            RowMat::Dense(a) => a.dot(m),
        }
    }

    fn axpy(&self, s: f64, out: &mut DMatrix<f64>) {
        match self {
            RowMat::Sparse(es) => {
                for &(i, j, v) in es {
                    out[(i, j)] += s * v;
                }
            }
            RowMat::Dense(a) => *out += a * s,
        }
    }

    fn nnz(&self, n: usize) -> usize {
        match self {
            RowMat::Sparse(es) => es.len(),
            RowMat::Dense(_) => n * n,
        }
    }

    fn to_dense(&self, n: usize) -> DMatrix<f64> {
        match self {
            RowMat::Sparse(es) => {
                let mut d = DMatrix::zeros(n, n);
                for &(i, j, v) in es {
                    d[(i, j)] += v;
                }
                d
            }
            RowMat::Dense(a) => a.clone(),
        }
    }

    fn scale(&mut self, s: f64) {
        match self {
            RowMat::Sparse(es) => es.iter_mut().for_each(|e| e.2 *= s),
            RowMat::Dense(a) => *a *= s,
        }
    }

    fn norm_sqr(&self) -> f64 {
        match self {
            RowMat::Sparse(es) => es.iter().map(|e| e.2 * e.2).sum(),
            RowMat::Dense(a) => a.norm_squared(),
        }
    }
}

#[derive(Clone, Debug, Default)]
struct Row {
    parts: Vec<(usize, RowMat)>,
    lp: Vec<(usize, f64)>,
}

/// Scaled problem in block form.
struct Data {
    dims: Vec<usize>,
    n_lp: usize,
    c: Vec<DMatrix<f64>>,
    c_lp: DVector<f64>,
    rows: Vec<Row>,
    b: DVector<f64>,
    /// `(row, part index)` of every row touching each block.
    block_rows: Vec<Vec<(usize, usize)>>,
    /// `(row, coefficient)` for each scalar variable.
    lp_cols: Vec<Vec<(usize, f64)>>,
    row_scale: Vec<f64>,
    obj_scale: f64,
}

#[derive(Clone)]
struct Iterate {
    x: Vec<DMatrix<f64>>,
    xl: DVector<f64>,
    y: DVector<f64>,
    z: Vec<DMatrix<f64>>,
    zl: DVector<f64>,
}

#[derive(Clone, Copy, Debug)]
struct Measures {
    pobj: f64,
    dobj: f64,
    gap: f64,
    pinf: f64,
    dinf: f64,
}

impl Measures {
    fn merit(&self) -> f64 {
        self.gap.max(self.pinf).max(self.dinf)
    }
}

/// Position of every column: scalar index or `(block, i, j)` with `i ≥ j`.
enum Col {
    Lp(usize),
    Psd(usize, usize, usize),
}

impl Data {
    fn new(form: &StandardForm) -> Result<Self> {
        let mut cols = Vec::with_capacity(form.n_cols());
        cols.extend((0..form.n_lp).map(Col::Lp));
        for (b, &n) in form.psd_dims.iter().enumerate() {
            for j in 0..n {
                for i in j..n {
                    cols.push(Col::Psd(b, i, j));
                }
            }
        }
        let m = form.n_rows();
        let mut psd_acc: Vec<BTreeMap<(usize, usize, usize), f64>> = vec![BTreeMap::new(); m];
        let mut lp_acc: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); m];
        for &(r, col, v) in &form.a {
            match cols[col] {
                Col::Lp(k) => *lp_acc[r].entry(k).or_insert(0.0) += v,
                Col::Psd(b, i, j) => *psd_acc[r].entry((b, i, j)).or_insert(0.0) += v,
            }
        }
        let to_rowmat = |n: usize, entries: Vec<(usize, usize, f64)>| -> RowMat {
            let full: Vec<(usize, usize, f64)> = entries
                .into_iter()
                .flat_map(|(i, j, v)| {
                    if i == j {
                        vec![(i, i, v)]
                    } else {
                        let h = v / std::f64::consts::SQRT_2;
                        vec![(i, j, h), (j, i, h)]
                    }
                })
                .collect();
            if full.len() * 4 > n * n {
                let mut d = DMatrix::zeros(n, n);
                for (i, j, v) in full {
                    d[(i, j)] += v;
                }
                RowMat::Dense(d)
            } else {
                RowMat::Sparse(full)
            }
        };

        let mut rows = Vec::with_capacity(m);
        for r in 0..m {
            let mut by_block: BTreeMap<usize, Vec<(usize, usize, f64)>> = BTreeMap::new();
            for (&(b, i, j), &v) in &psd_acc[r] {
                if v != 0.0 {
                    by_block.entry(b).or_default().push((i, j, v));
                }
            }
            let parts = by_block.into_iter().map(|(b, es)| (b, to_rowmat(form.psd_dims[b], es))).collect();
            let lp = lp_acc[r].iter().filter(|e| *e.1 != 0.0).map(|(&k, &v)| (k, v)).collect();
            rows.push(Row { parts, lp });
        }

        let mut c: Vec<DMatrix<f64>> = form.psd_dims.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        let mut c_lp = DVector::zeros(form.n_lp);
        for (col, &v) in form.c.iter().enumerate() {
            match cols[col] {
                Col::Lp(k) => c_lp[k] = v,
                Col::Psd(b, i, j) => {
                    if i == j {
                        c[b][(i, i)] = v;
                    } else {
                        let h = v / std::f64::consts::SQRT_2;
                        c[b][(i, j)] = h;
                        c[b][(j, i)] = h;
                    }
                }
            }
        }

        // Normalise rows and the objective.
        let mut b = DVector::from_column_slice(&form.b);
        let mut row_scale = vec![1.0; m];
        for (r, row) in rows.iter_mut().enumerate() {
            let norm = (row.parts.iter().map(|p| p.1.norm_sqr()).sum::<f64>()
                + row.lp.iter().map(|e| e.1 * e.1).sum::<f64>())
            .sqrt();
            if norm == 0.0 {
                return Err(Error::Solver(format!("row {r} has no coefficients")));
            }
            let s = 1.0 / norm;
            row.parts.iter_mut().for_each(|p| p.1.scale(s));
            row.lp.iter_mut().for_each(|e| e.1 *= s);
            b[r] *= s;
            row_scale[r] = s;
        }
        let c_norm = (c.iter().map(|m| m.norm_squared()).sum::<f64>() + c_lp.norm_squared()).sqrt();
        let obj_scale = 1.0 / c_norm.max(1.0);
        c.iter_mut().for_each(|m| *m *= obj_scale);
        c_lp *= obj_scale;

        let mut block_rows = vec![Vec::new(); form.psd_dims.len()];
        let mut lp_cols = vec![Vec::new(); form.n_lp];
        for (r, row) in rows.iter().enumerate() {
            for (p, (blk, _)) in row.parts.iter().enumerate() {
                block_rows[*blk].push((r, p));
            }
            for &(k, v) in &row.lp {
                lp_cols[k].push((r, v));
            }
        }

        Ok(Self { dims: form.psd_dims.clone(), n_lp: form.n_lp, c, c_lp, rows, b, block_rows, lp_cols, row_scale, obj_scale })
    }

    fn a_op(&self, x: &[DMatrix<f64>], xl: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.rows.len(),
            self.rows.iter().map(|row| {
                row.parts.iter().map(|(b, a)| a.dot(&x[*b])).sum::<f64>()
                    + row.lp.iter().map(|&(k, v)| v * xl[k]).sum::<f64>()
            }),
        )
    }

    fn at_op(&self, y: &DVector<f64>) -> (Vec<DMatrix<f64>>, DVector<f64>) {
        let mut out: Vec<DMatrix<f64>> = self.dims.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        let mut out_lp = DVector::zeros(self.n_lp);
        for (row, &yi) in self.rows.iter().zip(y.iter()) {
            if yi == 0.0 {
                continue;
            }
            for (b, a) in &row.parts {
                a.axpy(yi, &mut out[*b]);
            }
            for &(k, v) in &row.lp {
                out_lp[k] += yi * v;
            }
        }
        (out, out_lp)
    }

    fn schur(&self, x: &[DMatrix<f64>], zinv: &[DMatrix<f64>], ratio: &DVector<f64>) -> DMatrix<f64> {
        let m = self.rows.len();
        let mut mat = DMatrix::zeros(m, m);
        for (blk, members) in self.block_rows.iter().enumerate() {
            let (xb, zb) = (&x[blk], &zinv[blk]);
            // Caching `X A Z⁻¹` costs two products; it pays off once the row's sparse
            // pairings would cost more.
            let n = xb.nrows();
            let total: usize = members.iter().map(|&(r, p)| self.rows[r].parts[p].1.nnz(n)).sum();
            let g: Vec<Option<DMatrix<f64>>> = members
                .iter()
                .map(|&(r, p)| match &self.rows[r].parts[p].1 {
                    RowMat::Dense(a) => Some(xb * a * zb),
                    sp @ RowMat::Sparse(es) if es.len() * total > 2 * n * n * n => Some(xb * sp.to_dense(n) * zb),
                    RowMat::Sparse(_) => None,
                })
                .collect();
            for (u, &(ri, pi)) in members.iter().enumerate() {
                let ai = &self.rows[ri].parts[pi].1;
                for (v, &(rj, pj)) in members.iter().enumerate().skip(u) {
                    let aj = &self.rows[rj].parts[pj].1;
                    let val = match (&g[u], &g[v]) {
                        (_, Some(gj)) => ai.dot(gj),
                        (Some(gi), None) => aj.dot(gi),
                        (None, None) => sparse_pair(ai, aj, xb, zb),
                    };
                    mat[(ri, rj)] += val;
                    if ri != rj {
                        mat[(rj, ri)] += val;
                    }
                }
            }
        }
        for (k, col) in self.lp_cols.iter().enumerate() {
            for (u, &(ri, ai)) in col.iter().enumerate() {
                for &(rj, aj) in &col[u..] {
                    let val = ai * aj * ratio[k];
                    mat[(ri, rj)] += val;
                    if ri != rj {
                        mat[(rj, ri)] += val;
                    }
                }
            }
        }
        mat
    }

    fn total_dim(&self) -> f64 {
        (self.dims.iter().sum::<usize>() + self.n_lp) as f64
    }

    fn measures(&self, it: &Iterate) -> (Measures, DVector<f64>, Vec<DMatrix<f64>>, DVector<f64>) {
        let rp = &self.b - self.a_op(&it.x, &it.xl);
        let (aty, aty_lp) = self.at_op(&it.y);
        let rd: Vec<DMatrix<f64>> = (0..self.dims.len()).map(|k| &self.c[k] - &aty[k] - &it.z[k]).collect();
        let rd_lp = &self.c_lp - aty_lp - &it.zl;
        let pobj = (0..self.dims.len()).map(|k| self.c[k].dot(&it.x[k])).sum::<f64>() + self.c_lp.dot(&it.xl);
        let dobj = self.b.dot(&it.y);
        let (pobj, dobj) = (pobj / self.obj_scale, dobj / self.obj_scale);
        let gap = (pobj - dobj).abs() / pobj.abs().max(1.0);
        let c_norm = (self.c.iter().map(|m| m.norm_squared()).sum::<f64>() + self.c_lp.norm_squared()).sqrt();
        let pinf = rp.norm() / (1.0 + self.b.norm());
        let dinf = (rd.iter().map(|m| m.norm_squared()).sum::<f64>() + rd_lp.norm_squared()).sqrt() / (1.0 + c_norm);
        (Measures { pobj, dobj, gap, pinf, dinf }, rp, rd, rd_lp)
    }

    fn initial(&self) -> Iterate {
        let max_b = self.b.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        let xi = |n: usize| 10f64.max((n as f64).sqrt()).max(n as f64 * (1.0 + max_b) / 2.0);
        let eta = |n: usize| 10f64.max((n as f64).sqrt());
        Iterate {
            x: self.dims.iter().map(|&n| DMatrix::identity(n, n) * xi(n)).collect(),
            xl: DVector::from_element(self.n_lp, xi(1)),
            y: DVector::zeros(self.rows.len()),
            z: self.dims.iter().map(|&n| DMatrix::identity(n, n) * eta(n)).collect(),
            zl: DVector::from_element(self.n_lp, eta(1)),
        }
    }

    /// Certificate that no `X ⪰ 0` satisfies the equalities: `bᵀy > 0` and `Aᵀy ⪯ 0`.
    fn primal_infeasible(&self, y: &DVector<f64>) -> bool {
        let s = self.b.dot(y);
        if !(s > 0.0) {
            return false;
        }
        let (aty, aty_lp) = self.at_op(&(y / s));
        let worst = aty
            .iter()
            .map(|m| m.clone().symmetric_eigenvalues().max())
            .chain(aty_lp.iter().copied())
            .fold(f64::NEG_INFINITY, f64::max);
        worst <= 1e-8
    }

    fn solve(&self, opts: &IpmOptions) -> RawSolution {
        let nb = self.dims.len();
        let mut it = self.initial();
        let mut best: Option<(Measures, Iterate)> = None;
        let mut status = SolveStatus::NumericalTrouble;
        let mut iterations = 0;
        let mut stalls = 0;
        let mut since_best = 0;
        let mut start: Option<(f64, f64)> = None;

        while iterations < opts.max_iterations {
            let (meas, rp, rd, rd_lp) = self.measures(&it);
            if opts.trace {
                eprintln!(
                    "ipm {iterations:3} pobj {:+.10e} dobj {:+.10e} gap {:.2e} pinf {:.2e} dinf {:.2e}",
                    meas.pobj, meas.dobj, meas.gap, meas.pinf, meas.dinf
                );
            }
            if !meas.merit().is_finite() {
                break;
            }
            if best.as_ref().map_or(true, |(b, _)| meas.merit() < b.merit()) {
                best = Some((meas, it.clone()));
                since_best = 0;
            } else {
                since_best += 1;
            }
            let best_merit = best.as_ref().map_or(f64::INFINITY, |b| b.0.merit());
            if since_best >= PATIENCE && (best_merit <= opts.accept_tolerance || since_best >= 3 * PATIENCE) {
                break;
            }
            if meas.merit() <= opts.tolerance {
                status = SolveStatus::Optimal;
                break;
            }
            if meas.dobj.abs() > 1e6 * (1.0 + meas.pobj.abs()) && self.primal_infeasible(&it.y) {
                status = SolveStatus::Infeasible;
                break;
            }
            iterations += 1;

            let zinv: Option<Vec<DMatrix<f64>>> =
                it.z.iter().map(|z| Cholesky::new(z.clone()).map(|c| c.inverse())).collect();
            let Some(zinv) = zinv else { break };
            let ratio = it.xl.component_div(&it.zl);
            let mu = ((0..nb).map(|k| it.x[k].dot(&it.z[k])).sum::<f64>() + it.xl.dot(&it.zl)) / self.total_dim();

            let schur = self.schur(&it.x, &zinv, &ratio);
            let Some(chol) = factor(schur) else { break };

            // Directions for a given complementarity target `rc`.
            let direction = |rc: &[DMatrix<f64>], rc_lp: &DVector<f64>| {
                let w: Vec<DMatrix<f64>> = (0..nb).map(|k| &rc[k] - &it.x[k] * &rd[k] * &zinv[k]).collect();
                let w_lp = rc_lp - it.xl.component_mul(&rd_lp).component_div(&it.zl);
                let rhs = &rp - self.a_op(&w, &w_lp);
                let mut dy = chol.solve(&rhs);
                let build = |dy: &DVector<f64>| {
                    let (atdy, atdy_lp) = self.at_op(dy);
                    let dz: Vec<DMatrix<f64>> = (0..nb).map(|k| &rd[k] - &atdy[k]).collect();
                    let dx: Vec<DMatrix<f64>> =
                        (0..nb).map(|k| &rc[k] - sym(&(&it.x[k] * &dz[k] * &zinv[k]))).collect();
                    let dz_lp = &rd_lp - atdy_lp;
                    let dx_lp = rc_lp - it.xl.component_mul(&dz_lp).component_div(&it.zl);
                    (dx, dx_lp, dz, dz_lp)
                };
                let mut dir = build(&dy);
                // Refine against the operator itself: A(dX) must reproduce the primal residual.
                let mut res = (&rp - self.a_op(&dir.0, &dir.1)).norm();
                for _ in 0..REFINEMENT_STEPS {
                    if res <= 1e-14 * (1.0 + rp.norm()) {
                        break;
                    }
                    let r = &rp - self.a_op(&dir.0, &dir.1);
                    let step = chol.solve(&r);
                    let cand_dy = &dy + step;
                    let cand = build(&cand_dy);
                    let cand_res = (&rp - self.a_op(&cand.0, &cand.1)).norm();
                    if !(cand_res < 0.5 * res) {
                        break;
                    }
                    (dy, dir, res) = (cand_dy, cand, cand_res);
                }
                let (dx, dx_lp, dz, dz_lp) = dir;
                (dx, dx_lp, dy, dz, dz_lp)
            };

            let neg_x: Vec<DMatrix<f64>> = it.x.iter().map(|x| -x).collect();
            let (dxa, dxa_lp, _, dza, dza_lp) = direction(&neg_x, &(-&it.xl));
            let ap = max_step(&it.x, &dxa, &it.xl, &dxa_lp).min(1.0);
            let ad = max_step(&it.z, &dza, &it.zl, &dza_lp).min(1.0);
            let mu_aff = ((0..nb).map(|k| (&it.x[k] + &dxa[k] * ap).dot(&(&it.z[k] + &dza[k] * ad))).sum::<f64>()
                + (&it.xl + &dxa_lp * ap).dot(&(&it.zl + &dza_lp * ad)))
                / self.total_dim();
            let mut sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);
            // Complementarity must not outrun feasibility, or the Newton system degenerates
            // before the residuals are gone.
            let (mu0, inf0) = *start.get_or_insert((mu, meas.pinf.max(meas.dinf).max(1e-300)));
            let floor = INFEASIBILITY_COUPLING * mu0 * meas.pinf.max(meas.dinf) / inf0;
            if sigma * mu < floor {
                sigma = (floor / mu).min(MAX_SIGMA);
            }

            let rc: Vec<DMatrix<f64>> = (0..nb)
                .map(|k| &zinv[k] * (sigma * mu) - &it.x[k] - sym(&(&dxa[k] * &dza[k] * &zinv[k])))
                .collect();
            let rc_lp = DVector::from_iterator(
                self.n_lp,
                (0..self.n_lp).map(|k| (sigma * mu - dxa_lp[k] * dza_lp[k]) / it.zl[k] - it.xl[k]),
            );
            let (dx, dx_lp, dy, dz, dz_lp) = direction(&rc, &rc_lp);
            let ap = (opts.step_fraction * max_step(&it.x, &dx, &it.xl, &dx_lp)).min(1.0);
            let ad = (opts.step_fraction * max_step(&it.z, &dz, &it.zl, &dz_lp)).min(1.0);
            if opts.trace {
                eprintln!("    mu {mu:.2e} sigma {sigma:.2e} ap {ap:.3e} ad {ad:.3e} |dy| {:.2e} |y| {:.2e}", dy.norm(), it.y.norm());
            }
            if !(ap > 0.0 && ad > 0.0) || !ap.is_finite() || !ad.is_finite() {
                break;
            }
            for k in 0..nb {
                it.x[k] = sym(&(&it.x[k] + &dx[k] * ap));
                it.z[k] = sym(&(&it.z[k] + &dz[k] * ad));
            }
            it.xl += &dx_lp * ap;
            it.zl += &dz_lp * ad;
            it.y += &dy * ad;
            if ap.min(ad) < 1e-8 {
                stalls += 1;
                if stalls >= 3 {
                    break;
                }
            } else {
                stalls = 0;
            }
        }

        let (meas, it) = match status {
            SolveStatus::Optimal => best.expect("optimal status records an iterate"),
            _ => {
                let last = (self.measures(&it).0, it);
                let (bm, bi) = match best {
                    Some(b) if b.0.merit() <= last.0.merit() || !last.0.merit().is_finite() => b,
                    _ => last,
                };
                if status != SolveStatus::Infeasible && bm.merit() <= opts.accept_tolerance {
                    status = SolveStatus::Optimal;
                }
                (bm, bi)
            }
        };
        let (meas, it, status) = match status {
            SolveStatus::Infeasible => (meas, it, status),
            _ => {
                let (meas, it) = self.polish(meas, it, opts.trace);
                let status = if meas.merit() <= opts.accept_tolerance { SolveStatus::Optimal } else { status };
                (meas, it, status)
            }
        };
        self.export(it, meas, status, iterations)
    }

    /// Removes the primal residual by a correction inside the range of `X`.
    ///
    /// Near a degenerate optimum the Newton steps stop reducing the residual while the
    /// dual has converged; the correction `ΔX = X (Aᵀu) X` keeps `X + ΔX ⪰ 0` for small `u`.
    fn polish(&self, meas: Measures, it: Iterate, trace: bool) -> (Measures, Iterate) {
        let nb = self.dims.len();
        let (mut meas, mut it) = (meas, it);
        for _ in 0..POLISH_STEPS {
            let rp = &self.b - self.a_op(&it.x, &it.xl);
            let weights = it.xl.component_mul(&it.xl);
            let Some(chol) = factor(self.schur(&it.x, &it.x, &weights)) else { break };
            let u = chol.solve(&rp);
            let (atu, atu_lp) = self.at_op(&u);
            let mut cand = it.clone();
            for k in 0..nb {
                cand.x[k] = sym(&(&it.x[k] + &it.x[k] * &atu[k] * &it.x[k]));
            }
            cand.xl += weights.component_mul(&atu_lp);
            if cand.xl.iter().any(|&v| v < 0.0) || cand.x.iter().any(|x| Cholesky::new(x.clone()).is_none()) {
                break;
            }
            let m = self.measures(&cand).0;
            if trace {
                eprintln!("polish pobj {:+.10e} gap {:.2e} pinf {:.2e} (from pinf {:.2e})", m.pobj, m.gap, m.pinf, meas.pinf);
            }
            if !(m.merit() < meas.merit()) {
                break;
            }
            meas = m;
            it = cand;
        }
        (meas, it)
    }

    fn export(&self, it: Iterate, meas: Measures, status: SolveStatus, iterations: usize) -> RawSolution {
        let mut x: Vec<f64> = it.xl.iter().copied().collect();
        for m in &it.x {
            x.extend(svec(m));
        }
        debug_assert_eq!(x.len(), self.n_lp + self.dims.iter().map(|&n| svec_len(n)).sum::<usize>());
        let y = it.y.iter().zip(&self.row_scale).map(|(&y, &s)| y * s / self.obj_scale).collect();
        RawSolution {
            status,
            x,
            y,
            primal_objective: meas.pobj,
            dual_objective: meas.dobj,
            relative_gap: meas.gap,
            primal_infeasibility: meas.pinf,
            dual_infeasibility: meas.dinf,
            iterations,
        }
    }
}

/// `Tr(A X B Z⁻¹)` for two sparse symmetric coefficient blocks.
fn sparse_pair(a: &RowMat, b: &RowMat, x: &DMatrix<f64>, zinv: &DMatrix<f64>) -> f64 {
    let (RowMat::Sparse(ea), RowMat::Sparse(eb)) = (a, b) else { unreachable!("dense rows use the cached product") };
    let mut s = 0.0;
    for &(p, q, u) in ea {
        for &(r, t, v) in eb {
            s += u * v * x[(q, r)] * zinv[(t, p)];
        }
    }
    s
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Cholesky factor of a Jacobi-equilibrated Schur complement.
struct SchurFactor {
    /// `D^{-1/2}` of the diagonal.
    scale: DVector<f64>,
    chol: Cholesky<f64, nalgebra::Dyn>,
}

impl SchurFactor {
    fn solve(&self, r: &DVector<f64>) -> DVector<f64> {
        let mut v = r.component_mul(&self.scale);
        self.chol.solve_mut(&mut v);
        v.component_mul(&self.scale)
    }
}

/// Equilibrates, then factors with diagonal regularisation on failure.
fn factor(mut m: DMatrix<f64>) -> Option<SchurFactor> {
    let n = m.nrows();
    let scale = DVector::from_iterator(n, m.diagonal().iter().map(|&v| if v > 0.0 { 1.0 / v.sqrt() } else { 1.0 }));
    for j in 0..n {
        for i in 0..n {
            m[(i, j)] *= scale[i] * scale[j];
        }
    }
    if let Some(chol) = Cholesky::new(m.clone()) {
        return Some(SchurFactor { scale, chol });
    }
    let mut delta = 1e-14;
    for _ in 0..8 {
        for i in 0..n {
            m[(i, i)] += delta;
        }
        if let Some(chol) = Cholesky::new(m.clone()) {
            return Some(SchurFactor { scale, chol });
        }
        delta *= 100.0;
    }
    None
}

/// Largest `α` keeping `X + α dX` and `x + α dx` in the cone, `∞` if unbounded.
fn max_step(x: &[DMatrix<f64>], dx: &[DMatrix<f64>], xl: &DVector<f64>, dxl: &DVector<f64>) -> f64 {
    let mut alpha = f64::INFINITY;
    for (xb, db) in x.iter().zip(dx) {
        let Some(chol) = Cholesky::new(xb.clone()) else { return 0.0 };
        let l = chol.l();
        let Some(t) = l.solve_lower_triangular(db) else { return 0.0 };
        let Some(w) = l.solve_lower_triangular(&t.transpose()) else { return 0.0 };
        let lmin = sym(&w).symmetric_eigenvalues().min();
        if lmin < 0.0 {
            alpha = alpha.min(-1.0 / lmin);
        }
    }
    for k in 0..xl.len() {
        if dxl[k] < 0.0 {
            alpha = alpha.min(-xl[k] / dxl[k]);
        }
    }
    alpha
}
