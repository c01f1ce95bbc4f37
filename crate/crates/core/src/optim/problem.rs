use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::CMatrix;

/// Handle of a matrix variable in a [`ConicProblem`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct VarId(pub usize);

/// Hermitian coefficient matrix `F` of a linear functional `X ↦ Tr(F X)`.
#[derive(Clone, Debug)]
pub enum Coeff {
    Dense(CMatrix),
    /// Explicit entries; both `(i, j)` and `(j, i)` are listed for off-diagonal terms.
    Sparse { dim: usize, entries: Vec<(usize, usize, Complex64)> },
}

/// Which part of a Hermitian matrix entry a basis functional reads.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Part {
    Re,
    Im,
}

impl Coeff {
    pub fn dim(&self) -> usize {
        match self {
            Coeff::Dense(m) => m.nrows(),
            Coeff::Sparse { dim, .. } => *dim,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Coeff::Sparse { dim, entries: (0..dim).map(|i| (i, i, Complex64::new(1.0, 0.0))).collect() }
    }

    /// Functional reading `Re X_ij` or `Im X_ij`.
    pub fn entry(dim: usize, i: usize, j: usize, part: Part) -> Self {
        let half = |v: Complex64| v * 0.5;
        let entries = match (part, i == j) {
            (Part::Re, true) => vec![(i, i, Complex64::new(1.0, 0.0))],
            (Part::Re, false) => vec![(i, j, half(Complex64::new(1.0, 0.0))), (j, i, half(Complex64::new(1.0, 0.0)))],
            (Part::Im, true) => Vec::new(),
            (Part::Im, false) => vec![(i, j, half(Complex64::new(0.0, 1.0))), (j, i, half(Complex64::new(0.0, -1.0)))],
        };
        Coeff::Sparse { dim, entries }
    }

    /// Sparse coefficient from a dense Hermitian matrix, dropping exact zeros.
    pub fn sparse_from(m: &CMatrix) -> Self {
        let mut entries = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                if m[(i, j)] != Complex64::new(0.0, 0.0) {
                    entries.push((i, j, m[(i, j)]));
                }
            }
        }
        Coeff::Sparse { dim: m.nrows(), entries }
    }

    /// Dense or sparse, whichever is smaller.
    pub fn auto(m: CMatrix) -> Self {
        let nnz = m.iter().filter(|z| **z != Complex64::new(0.0, 0.0)).count();
        if nnz * 4 < m.len() {
            Coeff::sparse_from(&m)
        } else {
            Coeff::Dense(m)
        }
    }

    pub fn to_dense(&self) -> CMatrix {
        match self {
            Coeff::Dense(m) => m.clone(),
            Coeff::Sparse { dim, entries } => {
                let mut m = CMatrix::zeros(*dim, *dim);
                for &(i, j, v) in entries {
                    m[(i, j)] += v;
                }
                m
            }
        }
    }

    /// `F ⊗ 𝟙_k`, the pull-back of a functional through a partial trace over a right factor.
    pub fn kron_identity(&self, k: usize) -> Self {
        let dim = self.dim();
        let mut entries = Vec::new();
        let mut push = |i: usize, j: usize, v: Complex64| {
            for t in 0..k {
                entries.push((i * k + t, j * k + t, v));
            }
        };
        match self {
            Coeff::Dense(m) => {
                for j in 0..dim {
                    for i in 0..dim {
                        if m[(i, j)] != Complex64::new(0.0, 0.0) {
                            push(i, j, m[(i, j)]);
                        }
                    }
                }
            }
            Coeff::Sparse { entries: es, .. } => {
                for &(i, j, v) in es {
                    push(i, j, v);
                }
            }
        }
        Coeff::Sparse { dim: dim * k, entries }
    }

    pub fn scale(&self, s: f64) -> Self {
        match self {
            Coeff::Dense(m) => Coeff::Dense(m.scale(s)),
            Coeff::Sparse { dim, entries } => {
                Coeff::Sparse { dim: *dim, entries: entries.iter().map(|&(i, j, v)| (i, j, v * s)).collect() }
            }
        }
    }

    /// `Tr(F X)`, real part.
    pub fn eval(&self, x: &CMatrix) -> f64 {
        match self {
            Coeff::Dense(m) => crate::fock::linalg::trace_product(m, x).re,
            Coeff::Sparse { entries, .. } => entries.iter().map(|&(i, j, v)| (v * x[(j, i)]).re).sum(),
        }
    }

    /// Whether every entry is real.
    pub fn is_real(&self) -> bool {
        match self {
            Coeff::Dense(m) => m.iter().all(|z| z.im == 0.0),
            Coeff::Sparse { entries, .. } => entries.iter().all(|e| e.2.im == 0.0),
        }
    }

    /// Whether every entry is purely imaginary.
    pub fn is_imaginary(&self) -> bool {
        match self {
            Coeff::Dense(m) => m.iter().all(|z| z.re == 0.0),
            Coeff::Sparse { entries, .. } => entries.iter().all(|e| e.2.re == 0.0),
        }
    }

    /// Gershgorin interval containing the spectrum.
    pub fn spectrum_bounds(&self) -> (f64, f64) {
        let m = self.to_dense();
        let n = m.nrows();
        if n == 0 {
            return (0.0, 0.0);
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let radius: f64 = (0..n).filter(|&j| j != i).map(|j| m[(i, j)].norm()).sum();
            lo = lo.min(m[(i, i)].re - radius);
            hi = hi.max(m[(i, i)].re + radius);
        }
        (lo, hi)
    }
}

/// Relation of a constraint `Σ Tr(F_k X_k)` to its bound(s).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Relation {
    Eq(f64),
    Le(f64),
    Ge(f64),
    /// Two-sided `lo ≤ · ≤ hi`.
    Range(f64, f64),
}

/// A Hermitian PSD matrix variable with an a priori trace bound.
#[derive(Clone, Debug)]
pub struct PsdVar {
    pub dim: usize,
    /// Every feasible point satisfies `Tr X ≤ trace_cap`.
    pub trace_cap: f64,
    pub name: String,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub terms: Vec<(VarId, Coeff)>,
    pub relation: Relation,
    pub label: String,
}

/// Optimisation direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Linear objective over Hermitian PSD variables with linear constraints.
#[derive(Clone, Debug, Default)]
pub struct ConicProblem {
    pub vars: Vec<PsdVar>,
    pub objective: Vec<(VarId, Coeff)>,
    pub constraints: Vec<Constraint>,
}

impl ConicProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, dim: usize, trace_cap: f64, name: impl Into<String>) -> VarId {
        self.vars.push(PsdVar { dim, trace_cap, name: name.into() });
        VarId(self.vars.len() - 1)
    }

    pub fn set_objective(&mut self, terms: Vec<(VarId, Coeff)>) {
        self.objective = terms;
    }

    pub fn add_constraint(&mut self, terms: Vec<(VarId, Coeff)>, relation: Relation, label: impl Into<String>) {
        self.constraints.push(Constraint { terms, relation, label: label.into() });
    }

    /// Adds the matrix equation `Σ_k L_k(X_k) = rhs` entry by entry.
    ///
    /// `pullbacks[k]` maps a Hermitian basis functional `E` on the result space to the
    /// coefficient `L_k†(E)` on `X_k`.
    pub fn add_matrix_equality(
        &mut self,
        pullbacks: &[(VarId, &dyn Fn(&Coeff) -> Coeff)],
        rhs: &CMatrix,
        label: &str,
    ) {
        let n = rhs.nrows();
        for j in 0..n {
            for i in 0..=j {
                for part in [Part::Re, Part::Im] {
                    if part == Part::Im && i == j {
                        continue;
                    }
                    let e = Coeff::entry(n, i, j, part);
                    let terms = pullbacks.iter().map(|(v, f)| (*v, f(&e))).collect();
                    let value = match part {
                        Part::Re => rhs[(i, j)].re,
                        Part::Im => rhs[(i, j)].im,
                    };
                    self.add_constraint(terms, Relation::Eq(value), format!("{label}[{i},{j}].{part:?}"));
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |terms: &[(VarId, Coeff)], what: &str| -> Result<()> {
            for (v, c) in terms {
                let var = self
                    .vars
                    .get(v.0)
                    .ok_or_else(|| Error::InvalidArgument(format!("{what} references unknown variable {}", v.0)))?;
                if c.dim() != var.dim {
                    return Err(Error::Dimension(format!(
                        "{what}: coefficient of dim {} on variable {} of dim {}",
                        c.dim(),
                        var.name,
                        var.dim
                    )));
                }
            }
            Ok(())
        };
        check(&self.objective, "objective")?;
        for c in &self.constraints {
            check(&c.terms, &c.label)?;
            if let Relation::Range(lo, hi) = c.relation {
                if lo > hi {
                    return Err(Error::Infeasible(format!("{}: empty range [{lo}, {hi}]", c.label)));
                }
            }
        }
        for v in &self.vars {
            if !(v.trace_cap > 0.0) || !v.trace_cap.is_finite() {
                return Err(Error::InvalidArgument(format!("variable {} needs a finite trace cap", v.name)));
            }
        }
        Ok(())
    }

    /// Whether restricting every variable to real symmetric matrices is exact.
    ///
    /// True when the objective is real and every constraint is real, or purely imaginary
    /// with a zero equality bound; complex conjugation then preserves feasibility and value.
    pub fn is_real(&self) -> bool {
        self.objective.iter().all(|(_, c)| c.is_real())
            && self.constraints.iter().all(|con| {
                con.terms.iter().all(|(_, c)| c.is_real())
                    || (con.terms.iter().all(|(_, c)| c.is_imaginary()) && con.relation == Relation::Eq(0.0))
            })
    }

    /// Objective value at a point.
    pub fn objective_value(&self, x: &[CMatrix]) -> f64 {
        self.objective.iter().map(|(v, c)| c.eval(&x[v.0])).sum()
    }

    /// Left-hand side of every constraint at a point.
    pub fn constraint_values(&self, x: &[CMatrix]) -> Vec<f64> {
        self.constraints.iter().map(|con| con.terms.iter().map(|(v, c)| c.eval(&x[v.0])).sum()).collect()
    }

    /// Largest violation of any constraint at a point.
    pub fn max_violation(&self, x: &[CMatrix]) -> f64 {
        self.constraint_values(x)
            .iter()
            .zip(&self.constraints)
            .map(|(&v, con)| match con.relation {
                Relation::Eq(b) => (v - b).abs(),
                Relation::Le(b) => (v - b).max(0.0),
                Relation::Ge(b) => (b - v).max(0.0),
                Relation::Range(lo, hi) => (lo - v).max(v - hi).max(0.0),
            })
            .fold(0.0, f64::max)
    }
}
