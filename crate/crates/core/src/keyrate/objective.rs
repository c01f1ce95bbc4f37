use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::linalg::{hermitian_eig, hermitian_eigenvalues, kron, spectral};
use crate::fock::{CMatrix, DensityOperator};
use crate::protocol::Event;

/// Mixing weight of the maximally mixed state inside the logarithms.
pub const REGULARIZATION: f64 = 1e-10;

/// Relative threshold for the support of `Σ K K†`.
const SUPPORT_RTOL: f64 = 1e-12;

/// Key-generation map `G` with the pinching `Z` on its key register.
///
/// Inputs live on `A ⊗ K`. Outputs live on `R ⊗ K` with `R` the key register.
/// The objective is evaluated on the support of `G(𝟙)`, which every output lies in
/// and which is block diagonal under `Z`.
#[derive(Clone, Debug)]
pub struct ObjectiveMap {
    pub kraus: Vec<CMatrix>,
    /// Orthogonal projectors on the output, summing to the identity.
    pub key_projectors: Vec<CMatrix>,
    pub in_dim: usize,
    pub out_dim: usize,
    /// Orthonormal basis of the output support, columns grouped by key value.
    support: CMatrix,
    /// Column range of each key value within `support`.
    blocks: Vec<std::ops::Range<usize>>,
}

/// Value and gradient of the regularised objective, in bits.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub value: f64,
    /// Hermitian gradient on the input space.
    pub gradient: CMatrix,
}

impl ObjectiveMap {
    pub fn new(kraus: Vec<CMatrix>, key_projectors: Vec<CMatrix>) -> Result<Self> {
        let first = kraus.first().ok_or_else(|| Error::InvalidArgument("objective map needs a Kraus operator".into()))?;
        let (out_dim, in_dim) = first.shape();
        if kraus.iter().any(|k| k.shape() != (out_dim, in_dim)) {
            return Err(Error::Dimension("Kraus operators of differing shapes".into()));
        }
        if key_projectors.iter().any(|p| p.shape() != (out_dim, out_dim)) {
            return Err(Error::Dimension("key projector does not act on the output".into()));
        }
        let sum: CMatrix = key_projectors.iter().fold(CMatrix::zeros(out_dim, out_dim), |acc, p| acc + p);
        if (sum - CMatrix::identity(out_dim, out_dim)).camax() > 1e-12 {
            return Err(Error::InvalidArgument("key projectors do not sum to the identity".into()));
        }
        let kk: CMatrix = kraus.iter().fold(CMatrix::zeros(in_dim, in_dim), |acc, k| acc + k.adjoint() * k);
        let top = hermitian_eigenvalues(&kk)?.first().copied().unwrap_or(0.0);
        if top > 1.0 + 1e-12 {
            return Err(Error::InvalidArgument(format!("objective map increases trace (Σ K†K has norm {top})")));
        }
        let range: CMatrix = kraus.iter().fold(CMatrix::zeros(out_dim, out_dim), |acc, k| acc + k * k.adjoint());
        let mut columns = Vec::new();
        let mut blocks = Vec::new();
        for p in &key_projectors {
            let e = hermitian_eig(&(p * &range * p))?;
            let cut = SUPPORT_RTOL * e.values.first().copied().unwrap_or(0.0).max(1e-300);
            let start = columns.len();
            for (k, &lam) in e.values.iter().enumerate() {
                if lam > cut {
                    columns.push(e.vectors.column(k).into_owned());
                }
            }
            blocks.push(start..columns.len());
        }
        let support = if columns.is_empty() { CMatrix::zeros(out_dim, 0) } else { CMatrix::from_columns(&columns) };
        Ok(Self { kraus, key_projectors, in_dim, out_dim, support, blocks })
    }

    /// Dimension of the output support, the dimension entering the continuity penalty.
    pub fn support_dim(&self) -> usize {
        self.support.ncols()
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        self.kraus.iter().fold(CMatrix::zeros(self.out_dim, self.out_dim), |acc, k| acc + k * rho * k.adjoint())
    }

    pub fn adjoint(&self, m: &CMatrix) -> CMatrix {
        self.kraus.iter().fold(CMatrix::zeros(self.in_dim, self.in_dim), |acc, k| acc + k.adjoint() * m * k)
    }

    pub fn pinch(&self, sigma: &CMatrix) -> CMatrix {
        self.key_projectors.iter().fold(CMatrix::zeros(self.out_dim, self.out_dim), |acc, p| acc + p * sigma * p)
    }

    /// Unregularised `D(G(ρ) ‖ Z(G(ρ)))` in bits, with zero eigenvalues contributing nothing.
    pub fn exact_value(&self, rho: &CMatrix) -> Result<f64> {
        let sigma = self.apply(rho);
        let plogp = |m: &CMatrix| -> Result<f64> {
            Ok(hermitian_eigenvalues(m)?.iter().filter(|&&l| l > 0.0).map(|&l| l * l.ln()).sum())
        };
        Ok((plogp(&sigma)? - plogp(&self.pinch(&sigma))?) / std::f64::consts::LN_2)
    }

    /// Regularised objective and its gradient at a PSD input.
    ///
    /// Within the support the output is mixed with weight [`REGULARIZATION`] towards
    /// `Tr(σ)·𝟙/r`. Zero output trace gives value and gradient zero.
    pub fn evaluate(&self, rho: &CMatrix) -> Result<Evaluation> {
        if rho.shape() != (self.in_dim, self.in_dim) {
            return Err(Error::Dimension(format!("{:?} input for objective on {}", rho.shape(), self.in_dim)));
        }
        let r = self.support_dim();
        let u = &self.support;
        let reduced = u.adjoint() * self.apply(rho) * u;
        let t: f64 = reduced.diagonal().iter().map(|z| z.re).sum();
        if r == 0 || t <= 0.0 {
            return Ok(Evaluation { value: 0.0, gradient: CMatrix::zeros(self.in_dim, self.in_dim) });
        }
        let eps = REGULARIZATION;
        let floor = 0.5 * eps * t / r as f64;
        let mut sigma = reduced.scale(1.0 - eps);
        for i in 0..r {
            sigma[(i, i)] += Complex64::new(eps * t / r as f64, 0.0);
        }
        let full = hermitian_eig(&sigma)?;
        let mut log_diff = spectral(&full, |l| l.max(floor).ln());
        let mut value: f64 = full.values.iter().map(|&l| l.max(floor) * l.max(floor).ln()).sum();
        for range in &self.blocks {
            if range.is_empty() {
                continue;
            }
            let block = sigma.view((range.start, range.start), (range.len(), range.len())).into_owned();
            let e = hermitian_eig(&block)?;
            value -= e.values.iter().map(|&l| l.max(floor) * l.max(floor).ln()).sum::<f64>();
            let log_block = spectral(&e, |l| l.max(floor).ln());
            let mut view = log_diff.view_mut((range.start, range.start), (range.len(), range.len()));
            view -= log_block;
        }
        // Adjoint of the mixing map, then of the support compression and of G.
        let tr: Complex64 = log_diff.trace();
        let mut m = log_diff.scale(1.0 - eps);
        for i in 0..r {
            m[(i, i)] += tr * (eps / r as f64);
        }
        let lifted = u * m * u.adjoint();
        let gradient = self.adjoint(&lifted).scale(1.0 / std::f64::consts::LN_2);
        Ok(Evaluation { value: value / std::f64::consts::LN_2, gradient: (&gradient + gradient.adjoint()).scale(0.5) })
    }

    /// Upper bound on `f(ρ) − f_reg(ρ)` for inputs of trace at most one.
    pub fn continuity_penalty(&self) -> f64 {
        let d = self.support_dim() as f64;
        if d <= 1.0 {
            return 0.0;
        }
        let eps = REGULARIZATION;
        2.0 * eps * (d - 1.0) * (d / (eps * (d - 1.0))).log2()
    }
}

/// Objective map of the three-state protocol.
///
/// Keeps rounds where Alice sent one of the first two signals and Bob saw a Z click,
/// copying Alice's signal index into a two-dimensional key register `R`:
/// `K = Σ_{i∈{0,1}} |i⟩_R⟨i|_A ⊗ √(Γ_{Z-early} + Γ_{Z-late})`.
pub fn build_objective_map(povms: &[DensityOperator]) -> Result<ObjectiveMap> {
    if povms.len() != Event::ALL.len() {
        return Err(Error::Dimension(format!("{} POVM elements for {} events", povms.len(), Event::ALL.len())));
    }
    let z = &povms[Event::ZEarly.index()].matrix + &povms[Event::ZLate.index()].matrix;
    let root = crate::fock::linalg::sqrt_psd(&z)?;
    let dk = root.nrows();
    let one = Complex64::new(1.0, 0.0);
    let mut filter = CMatrix::zeros(2, 3);
    filter[(0, 0)] = one;
    filter[(1, 1)] = one;
    let kraus = kron(&filter, &root);
    let key_projectors = (0..2)
        .map(|i| {
            let mut p = DMatrix::<Complex64>::zeros(2, 2);
            p[(i, i)] = one;
            kron(&p, &CMatrix::identity(dk, dk))
        })
        .collect();
    ObjectiveMap::new(vec![kraus], key_projectors)
}
