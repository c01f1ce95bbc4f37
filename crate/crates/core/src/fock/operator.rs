use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::linalg::{self, CMatrix, CVector};
use super::space::{ModeSpace, Occupation};
use crate::error::{Error, Result};

/// A vector on a truncated Fock space. May be subnormalised by truncation.
#[derive(Clone, Debug)]
pub struct FockKet {
    pub space: ModeSpace,
    pub amplitudes: CVector,
}

/// A square operator on a truncated Fock space.
#[derive(Clone, Debug)]
pub struct FockOperator {
    pub space: ModeSpace,
    pub matrix: CMatrix,
}

/// States are operators that are PSD with trace at most one.
pub type DensityOperator = FockOperator;

/// A linear map between two truncated Fock spaces (e.g. an isometry).
#[derive(Clone, Debug)]
pub struct FockMap {
    pub from: ModeSpace,
    pub to: ModeSpace,
    /// `to.dim() x from.dim()`.
    pub matrix: CMatrix,
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

impl FockKet {
    pub fn new(space: ModeSpace, amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(Error::Dimension(format!("ket of length {} on space of dim {}", amplitudes.len(), space.dim())));
        }
        Ok(Self { space, amplitudes })
    }

    /// The basis state `|occ⟩`.
    pub fn basis(space: &ModeSpace, occ: &[u32]) -> Result<Self> {
        let i = space
            .index_of(occ)
            .ok_or_else(|| Error::InvalidArgument(format!("occupation {occ:?} not in space")))?;
        let mut v = CVector::zeros(space.dim());
        v[i] = c(1.0);
        Ok(Self { space: space.clone(), amplitudes: v })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    pub fn inner(&self, other: &FockKet) -> Complex64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// `|self⟩⟨self|`.
    pub fn projector(&self) -> FockOperator {
        FockOperator { space: self.space.clone(), matrix: &self.amplitudes * self.amplitudes.adjoint() }
    }

    pub fn tensor(&self, other: &FockKet) -> FockKet {
        FockKet { space: self.space.tensor(&other.space), amplitudes: self.amplitudes.kronecker(&other.amplitudes) }
    }
}

/// Coherent state `|α⟩` truncated at `cutoff` photons, not renormalised.
///
/// The missing weight is `1 - norm_sqr()`, the Poisson tail beyond the cutoff.
pub fn coherent_ket(alpha: Complex64, cutoff: u32) -> FockKet {
    let space = ModeSpace::single(cutoff);
    let mut amps = CVector::zeros(space.dim());
    let mut a = c((-alpha.norm_sqr() / 2.0).exp());
    for n in 0..=cutoff as usize {
        if n > 0 {
            a = a * alpha / (n as f64).sqrt();
        }
        amps[n] = a;
    }
    FockKet { space, amplitudes: amps }
}

/// Projector onto states with at most `n` photons in total.
pub fn total_photon_projector(space: &ModeSpace, n: u32) -> FockOperator {
    let d = DVector::from_fn(space.dim(), |i, _| if space.photons(i) <= n { c(1.0) } else { c(0.0) });
    FockOperator { space: space.clone(), matrix: CMatrix::from_diagonal(&d) }
}

impl FockOperator {
    pub fn new(space: ModeSpace, matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != space.dim() || matrix.ncols() != space.dim() {
            return Err(Error::Dimension(format!(
                "{}x{} matrix on space of dim {}",
                matrix.nrows(),
                matrix.ncols(),
                space.dim()
            )));
        }
        Ok(Self { space, matrix })
    }

    pub fn zeros(space: &ModeSpace) -> Self {
        Self { space: space.clone(), matrix: CMatrix::zeros(space.dim(), space.dim()) }
    }

    pub fn identity(space: &ModeSpace) -> Self {
        Self { space: space.clone(), matrix: CMatrix::identity(space.dim(), space.dim()) }
    }

    /// Real diagonal operator.
    pub fn diagonal(space: &ModeSpace, diag: &[f64]) -> Result<Self> {
        if diag.len() != space.dim() {
            return Err(Error::Dimension("diagonal length".into()));
        }
        let d = DVector::from_iterator(diag.len(), diag.iter().map(|&x| c(x)));
        Ok(Self { space: space.clone(), matrix: CMatrix::from_diagonal(&d) })
    }

    pub fn from_real(space: &ModeSpace, m: &DMatrix<f64>) -> Result<Self> {
        Self::new(space.clone(), linalg::complexify(m))
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn trace(&self) -> Complex64 {
        linalg::trace(&self.matrix)
    }

    pub fn is_hermitian(&self) -> bool {
        linalg::ensure_hermitian(&self.matrix).is_ok()
    }

    /// Whether all entries are exactly real.
    pub fn is_real(&self) -> bool {
        linalg::is_real(&self.matrix)
    }

    pub fn adjoint(&self) -> Self {
        Self { space: self.space.clone(), matrix: self.matrix.adjoint() }
    }

    pub fn transpose(&self) -> Self {
        Self { space: self.space.clone(), matrix: self.matrix.transpose() }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { space: self.space.clone(), matrix: self.matrix.scale(s) }
    }

    pub fn add(&self, other: &FockOperator) -> Result<Self> {
        self.same_space(other)?;
        Ok(Self { space: self.space.clone(), matrix: &self.matrix + &other.matrix })
    }

    pub fn sub(&self, other: &FockOperator) -> Result<Self> {
        self.same_space(other)?;
        Ok(Self { space: self.space.clone(), matrix: &self.matrix - &other.matrix })
    }

    pub fn mul(&self, other: &FockOperator) -> Result<Self> {
        self.same_space(other)?;
        Ok(Self { space: self.space.clone(), matrix: &self.matrix * &other.matrix })
    }

    /// `Tr(self · other)`.
    pub fn trace_with(&self, other: &FockOperator) -> Result<Complex64> {
        self.same_space(other)?;
        Ok(linalg::trace_product(&self.matrix, &other.matrix))
    }

    /// `⟨ψ|self|ψ⟩`.
    pub fn expectation(&self, ket: &FockKet) -> Result<Complex64> {
        if ket.space != self.space {
            return Err(Error::Dimension("ket lives on a different space".into()));
        }
        Ok(ket.amplitudes.dotc(&(&self.matrix * &ket.amplitudes)))
    }

    fn same_space(&self, other: &FockOperator) -> Result<()> {
        if self.space != other.space {
            return Err(Error::Dimension(format!("{:?} vs {:?}", self.space, other.space)));
        }
        Ok(())
    }

    /// Kronecker product; the merged basis is `self`'s modes followed by `other`'s.
    pub fn tensor(&self, other: &FockOperator) -> FockOperator {
        FockOperator { space: self.space.tensor(&other.space), matrix: linalg::kron(&self.matrix, &other.matrix) }
    }

    /// Partial trace keeping the listed modes (in the listed order).
    ///
    /// Works on any basis: entries missing from the space are treated as zero, so the
    /// result equals the partial trace of the operator zero-padded into the full Fock space.
    /// The result basis is the set of distinct kept occupations in graded-lex order.
    pub fn partial_trace(&self, keep_modes: &[usize]) -> Result<FockOperator> {
        let n_modes = self.space.n_modes();
        let mut seen = vec![false; n_modes];
        for &m in keep_modes {
            if m >= n_modes || seen[m] {
                return Err(Error::InvalidArgument(format!("invalid mode index {m} for {n_modes} modes")));
            }
            seen[m] = true;
        }
        let traced: Vec<usize> = (0..n_modes).filter(|m| !seen[*m]).collect();
        let split = |occ: &Occupation| -> (Occupation, Occupation) {
            (keep_modes.iter().map(|&m| occ[m]).collect(), traced.iter().map(|&m| occ[m]).collect())
        };
        let mut kept_set: BTreeMap<Occupation, usize> = BTreeMap::new();
        let mut groups: BTreeMap<Occupation, Vec<(usize, Occupation)>> = BTreeMap::new();
        for (i, occ) in self.space.basis().iter().enumerate() {
            let (k, t) = split(occ);
            kept_set.insert(k.clone(), 0);
            groups.entry(t).or_default().push((i, k));
        }
        let mut kept: Vec<Occupation> = kept_set.keys().cloned().collect();
        kept.sort_by(|a, b| {
            let sa: u32 = a.iter().sum();
            let sb: u32 = b.iter().sum();
            sa.cmp(&sb).then_with(|| a.cmp(b))
        });
        for (pos, k) in kept.iter().enumerate() {
            kept_set.insert(k.clone(), pos);
        }
        let out_space = ModeSpace::from_basis(keep_modes.len(), kept)?;
        let mut out = CMatrix::zeros(out_space.dim(), out_space.dim());
        for members in groups.values() {
            for (i, ki) in members {
                for (j, kj) in members {
                    out[(kept_set[ki], kept_set[kj])] += self.matrix[(*i, *j)];
                }
            }
        }
        FockOperator::new(out_space, out)
    }

    /// Restriction `P self P` onto a subspace whose basis is a subset of this one.
    pub fn compress(&self, sub: &ModeSpace) -> Result<FockOperator> {
        let idx = subspace_indices(sub, &self.space)?;
        let m = CMatrix::from_fn(idx.len(), idx.len(), |i, j| self.matrix[(idx[i], idx[j])]);
        FockOperator::new(sub.clone(), m)
    }

    /// Zero-padded embedding into a larger space containing this one.
    pub fn embed(&self, big: &ModeSpace) -> Result<FockOperator> {
        let idx = subspace_indices(&self.space, big)?;
        let mut m = CMatrix::zeros(big.dim(), big.dim());
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                m[(i, j)] = self.matrix[(a, b)];
            }
        }
        FockOperator::new(big.clone(), m)
    }

    /// Largest entry-wise modulus of `[self, other]`.
    pub fn commutator_norm(&self, other: &FockOperator) -> Result<f64> {
        self.same_space(other)?;
        let comm = &self.matrix * &other.matrix - &other.matrix * &self.matrix;
        Ok(comm.iter().map(|z| z.norm()).fold(0.0, f64::max))
    }
}

/// Indices of `sub`'s basis states within `big`.
pub fn subspace_indices(sub: &ModeSpace, big: &ModeSpace) -> Result<Vec<usize>> {
    sub.basis()
        .iter()
        .map(|o| big.index_of(o).ok_or_else(|| Error::Dimension(format!("occupation {o:?} missing from target space"))))
        .collect()
}

impl FockMap {
    pub fn new(from: ModeSpace, to: ModeSpace, matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != to.dim() || matrix.ncols() != from.dim() {
            return Err(Error::Dimension("map matrix shape".into()));
        }
        Ok(Self { from, to, matrix })
    }

    pub fn apply_ket(&self, ket: &FockKet) -> Result<FockKet> {
        if ket.space != self.from {
            return Err(Error::Dimension("ket not in map domain".into()));
        }
        Ok(FockKet { space: self.to.clone(), amplitudes: &self.matrix * &ket.amplitudes })
    }

    /// `V ρ V†`.
    pub fn conjugate(&self, op: &FockOperator) -> Result<FockOperator> {
        if op.space != self.from {
            return Err(Error::Dimension("operator not in map domain".into()));
        }
        Ok(FockOperator { space: self.to.clone(), matrix: &self.matrix * &op.matrix * self.matrix.adjoint() })
    }

    /// `V† A V`.
    pub fn pullback(&self, op: &FockOperator) -> Result<FockOperator> {
        if op.space != self.to {
            return Err(Error::Dimension("operator not in map codomain".into()));
        }
        Ok(FockOperator { space: self.from.clone(), matrix: self.matrix.adjoint() * &op.matrix * &self.matrix })
    }

    /// Largest entry-wise deviation of `V†V` from the identity.
    pub fn isometry_defect(&self) -> f64 {
        let g = self.matrix.adjoint() * &self.matrix;
        let n = g.nrows();
        (g - CMatrix::identity(n, n)).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}
