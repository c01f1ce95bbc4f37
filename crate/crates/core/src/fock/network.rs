use std::collections::BTreeMap;

use num_complex::Complex64;

use super::linalg::{CMatrix, CVector};
use super::operator::{FockMap, FockOperator};
use super::space::{ModeSpace, Occupation};
use crate::error::{Error, Result};

/// Column-orthonormality tolerance for mode maps.
pub const ISOMETRY_TOL: f64 = 1e-10;

/// Multi-photon isometry induced by a passive linear network.
///
/// `mode_map` is `n_out x n_in`; input creation operator `a_j†` maps to
/// `Σ_o mode_map[o, j] b_o†`. Domain and codomain are the total-photon-`n` spaces.
pub fn linear_network_isometry(mode_map: &CMatrix, n: u32) -> Result<FockMap> {
    let (n_out, n_in) = mode_map.shape();
    let gram = mode_map.adjoint() * mode_map;
    let defect = (gram - CMatrix::identity(n_in, n_in)).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if defect > ISOMETRY_TOL {
        return Err(Error::NotIsometric(defect));
    }
    let from = ModeSpace::total(n_in, n);
    let to = ModeSpace::total(n_out, n);
    let mut m = CMatrix::zeros(to.dim(), from.dim());
    for (col, occ) in from.basis().iter().enumerate() {
        // Expand Π_j (Σ_o U_oj b_o†)^{n_j} as a polynomial in output creation operators.
        let mut poly: BTreeMap<Occupation, Complex64> = BTreeMap::new();
        poly.insert(vec![0; n_out], Complex64::new(1.0, 0.0));
        let mut norm_in = 1.0;
        for (j, &nj) in occ.iter().enumerate() {
            norm_in *= factorial(nj);
            for _ in 0..nj {
                let mut next = BTreeMap::new();
                for (mono, coef) in &poly {
                    for o in 0..n_out {
                        let u = mode_map[(o, j)];
                        if u == Complex64::new(0.0, 0.0) {
                            continue;
                        }
                        let mut e = mono.clone();
                        e[o] += 1;
                        *next.entry(e).or_insert(Complex64::new(0.0, 0.0)) += coef * u;
                    }
                }
                poly = next;
            }
        }
        for (mono, coef) in poly {
            let norm_out: f64 = mono.iter().map(|&e| factorial(e)).product();
            let row = to.index_of(&mono).expect("photon number is conserved");
            m[(row, col)] = coef * (norm_out / norm_in).sqrt();
        }
    }
    FockMap::new(from, to, m)
}

pub(crate) fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// A named set of output modes watched by one threshold detector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservedBin {
    pub label: String,
    pub modes: Vec<usize>,
}

impl ObservedBin {
    pub fn new(label: impl Into<String>, modes: Vec<usize>) -> Self {
        Self { label: label.into(), modes }
    }
}

/// Threshold detectors behind a linear network, on inputs with at most `n` photons.
///
/// Caches the network isometry so that many click patterns can be evaluated.
#[derive(Clone, Debug)]
pub struct ThresholdMeasurement {
    isometry: FockMap,
    bins: Vec<ObservedBin>,
    /// Click vector of every output basis state.
    clicks: Vec<Vec<bool>>,
}

impl ThresholdMeasurement {
    pub fn new(mode_map: &CMatrix, bins: &[ObservedBin], n: u32) -> Result<Self> {
        let n_out = mode_map.nrows();
        let mut owner = vec![false; n_out];
        for bin in bins {
            for &m in &bin.modes {
                if m >= n_out {
                    return Err(Error::InvalidArgument(format!("bin {} references mode {m}", bin.label)));
                }
                if owner[m] {
                    return Err(Error::OverlappingBins(m));
                }
                owner[m] = true;
            }
        }
        let isometry = linear_network_isometry(mode_map, n)?;
        let clicks = isometry
            .to
            .basis()
            .iter()
            .map(|occ| bins.iter().map(|b| b.modes.iter().any(|&m| occ[m] > 0)).collect())
            .collect();
        Ok(Self { isometry, bins: bins.to_vec(), clicks })
    }

    pub fn input_space(&self) -> &ModeSpace {
        &self.isometry.from
    }

    pub fn isometry(&self) -> &FockMap {
        &self.isometry
    }

    pub fn bins(&self) -> &[ObservedBin] {
        &self.bins
    }

    /// `V† D V` where `D` projects onto output states whose click vector satisfies `accept`.
    pub fn event(&self, accept: impl Fn(&[bool]) -> bool) -> FockOperator {
        let v = &self.isometry.matrix;
        let rows: Vec<usize> = (0..v.nrows()).filter(|&r| accept(&self.clicks[r])).collect();
        let dim = v.ncols();
        let mut g = CMatrix::zeros(dim, dim);
        for &r in &rows {
            let row: CVector = v.row(r).transpose();
            for j in 0..dim {
                if row[j] == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for i in 0..dim {
                    g[(i, j)] += row[i].conj() * row[j];
                }
            }
        }
        FockOperator { space: self.isometry.from.clone(), matrix: g }
    }

    /// POVM element of one exact click pattern (one entry per observed bin).
    pub fn pattern(&self, pattern: &[bool]) -> Result<FockOperator> {
        if pattern.len() != self.bins.len() {
            return Err(Error::Dimension(format!("pattern of length {} for {} bins", pattern.len(), self.bins.len())));
        }
        Ok(self.event(|c| c == pattern))
    }
}

/// POVM element of a threshold click pattern behind a linear network.
pub fn threshold_povm(mode_map: &CMatrix, bins: &[ObservedBin], pattern: &[bool], n: u32) -> Result<FockOperator> {
    ThresholdMeasurement::new(mode_map, bins, n)?.pattern(pattern)
}

/// All `2^k` click patterns over `k` bins, no-click first.
pub fn all_patterns(k: usize) -> Vec<Vec<bool>> {
    (0..1usize << k).map(|bits| (0..k).map(|b| bits >> b & 1 == 1).collect()).collect()
}
