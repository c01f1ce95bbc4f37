//! Dense Hermitian linear algebra on complex matrices.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Relative threshold below which eigenvalues count as zero in generalised inverses.
pub const GEN_INVERSE_RTOL: f64 = 1e-12;

/// Entrywise Hermiticity tolerance.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Eigenpairs of a Hermitian matrix, eigenvalues descending.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: CMatrix,
}

/// Largest entrywise deviation from Hermiticity.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn ensure_hermitian(m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!("{}x{} matrix is not square", m.nrows(), m.ncols())));
    }
    let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let defect = hermitian_defect(m);
    if defect > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian(defect));
    }
    Ok(())
}

/// `(m + m†) / 2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Eigenvalues are sorted descending with ties broken by the basis index of the
/// eigenvector's dominant component. Each eigenvector's phase is fixed so that its
/// first component of maximal modulus is real and positive.
pub fn hermitian_eig(m: &CMatrix) -> Result<Eigen> {
    ensure_hermitian(m)?;
    let n = m.nrows();
    if n == 0 {
        return Ok(Eigen { values: Vec::new(), vectors: CMatrix::zeros(0, 0) });
    }
    let h = hermitian_part(m);
    let se = nalgebra::linalg::SymmetricEigen::new(h);
    let mut order: Vec<(f64, usize, usize)> = (0..n)
        .map(|k| {
            let col = se.eigenvectors.column(k);
            (se.eigenvalues[k], dominant_index(col.iter()), k)
        })
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut vectors = CMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (dst, &(val, dom, src)) in order.iter().enumerate() {
        let col = se.eigenvectors.column(src);
        let pivot = col[dom];
        let phase = if pivot.norm() > 0.0 { pivot.conj() / pivot.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..n {
            vectors[(i, dst)] = col[i] * phase;
        }
        values.push(val);
    }
    Ok(Eigen { values, vectors })
}

fn dominant_index<'a>(it: impl Iterator<Item = &'a Complex64>) -> usize {
    let mut best = 0;
    let mut best_norm = -1.0;
    for (i, z) in it.enumerate() {
        // Strict comparison with a relative guard keeps the first of near-equal maxima.
        let v = z.norm();
        if v > best_norm * (1.0 + 1e-9) {
            best = i;
            best_norm = v;
        }
    }
    best
}

/// Eigenvalues of a Hermitian matrix, descending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Result<Vec<f64>> {
    ensure_hermitian(m)?;
    let mut v: Vec<f64> = hermitian_part(m).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    Ok(v)
}

/// Largest singular value.
pub fn op_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    singular_values(m).into_iter().fold(0.0, f64::max)
}

/// Sum of singular values.
pub fn trace_norm(m: &CMatrix) -> f64 {
    singular_values(m).into_iter().sum()
}

pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    m.clone().singular_values().iter().copied().collect()
}

/// `f(m)` for Hermitian `m`, applying `f` to each eigenvalue.
pub fn hermitian_fn(m: &CMatrix, f: impl Fn(f64) -> f64) -> Result<CMatrix> {
    let e = hermitian_eig(m)?;
    Ok(spectral(&e, f))
}

/// Rebuilds `Σ f(λ_k) v_k v_k†`.
pub fn spectral(e: &Eigen, f: impl Fn(f64) -> f64) -> CMatrix {
    let n = e.vectors.nrows();
    let mut scaled = e.vectors.clone();
    for (k, &lam) in e.values.iter().enumerate() {
        let s = f(lam);
        for i in 0..n {
            scaled[(i, k)] *= s;
        }
    }
    &scaled * e.vectors.adjoint()
}

/// Generalised inverse square root of a PSD matrix.
///
/// Eigenvalues below `GEN_INVERSE_RTOL` times the largest are treated as zero.
pub fn gen_inverse_sqrt(m: &CMatrix) -> Result<CMatrix> {
    let e = hermitian_eig(m)?;
    let top = e.values.first().copied().unwrap_or(0.0).max(0.0);
    let min = e.values.last().copied().unwrap_or(0.0);
    if min < -1e-10 * top.max(1.0) {
        return Err(Error::NotPsd(min));
    }
    let cut = GEN_INVERSE_RTOL * top;
    Ok(spectral(&e, |l| if l > cut && l > 0.0 { 1.0 / l.sqrt() } else { 0.0 }))
}

/// Square root of a PSD matrix (negative rounding noise clipped to zero).
pub fn sqrt_psd(m: &CMatrix) -> Result<CMatrix> {
    hermitian_fn(m, |l| l.max(0.0).sqrt())
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// `Tr(a b)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Kronecker product with the first factor as the slow index.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Complex matrix from real entries.
pub fn complexify(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Whether every entry has exactly zero imaginary part.
pub fn is_real(m: &CMatrix) -> bool {
    m.iter().all(|z| z.im == 0.0)
}

pub fn real_part(m: &CMatrix) -> DMatrix<f64> {
    m.map(|z| z.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_psd(n: usize, rank: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        let g = CMatrix::from_fn(n, rank, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        &g * g.adjoint()
    }

    #[test]
    fn identity_eigenvalues() {
        let e = hermitian_eig(&CMatrix::identity(4, 4)).unwrap();
        assert!(e.values.iter().all(|&v| (v - 1.0).abs() < 1e-14));
        // Ties are ordered by basis index.
        for k in 0..4 {
            assert!((e.vectors[(k, k)].re - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn gen_inverse_sqrt_of_projector() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = Complex64::new(1.0, 0.0);
        let g = gen_inverse_sqrt(&m).unwrap();
        assert!((g[(0, 0)].re - 1.0).abs() < 1e-14);
        assert!(g[(1, 1)].norm() < 1e-14);
    }

    #[test]
    fn generalised_inverse_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a = random_psd(6, 3, &mut rng);
            let g = gen_inverse_sqrt(&a).unwrap();
            let ginv = &g * &g;
            let back = &a * &ginv * &a;
            assert!((&back - &a).camax() < 1e-10);
        }
    }

    #[test]
    fn norms_are_ordered() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let g = CMatrix::from_fn(5, 5, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let h = hermitian_part(&g);
            assert!(op_norm(&h) <= trace_norm(&h) + 1e-12);
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = Complex64::new(1.0, 0.0);
        assert!(matches!(hermitian_eig(&m), Err(Error::NotHermitian(_))));
    }
}
