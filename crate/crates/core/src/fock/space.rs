use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Occupation numbers of every mode, in mode order.
pub type Occupation = Vec<u32>;

/// How the basis of a [`ModeSpace`] was generated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CutoffKind {
    /// Every mode holds at most `cutoff` photons.
    PerMode,
    /// The photon number summed over modes is at most `cutoff`.
    Total,
    /// Kronecker product of two spaces, or an explicit basis list.
    Custom,
}

#[derive(Debug)]
struct Inner {
    n_modes: usize,
    kind: CutoffKind,
    cutoff: u32,
    basis: Vec<Occupation>,
    index: HashMap<Occupation, usize>,
}

/// A truncated Fock space described by an explicit, ordered list of occupation tuples.
///
/// Cheap to clone; the basis is shared.
#[derive(Clone)]
pub struct ModeSpace(Arc<Inner>);

impl ModeSpace {
    fn from_parts(n_modes: usize, kind: CutoffKind, cutoff: u32, basis: Vec<Occupation>) -> Result<Self> {
        let mut index = HashMap::with_capacity(basis.len());
        for (i, occ) in basis.iter().enumerate() {
            if occ.len() != n_modes {
                return Err(Error::Dimension(format!(
                    "occupation {occ:?} has {} modes, expected {n_modes}",
                    occ.len()
                )));
            }
            if index.insert(occ.clone(), i).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate occupation {occ:?}")));
            }
        }
        Ok(Self(Arc::new(Inner { n_modes, kind, cutoff, basis, index })))
    }

    /// Modes sharing a total photon budget, basis in graded-lex order.
    pub fn total(n_modes: usize, cutoff: u32) -> Self {
        let basis = graded_tuples(n_modes, cutoff, |_| true, cutoff);
        Self::from_parts(n_modes, CutoffKind::Total, cutoff, basis).expect("generated basis is valid")
    }

    /// Modes with independent per-mode cutoffs, basis in graded-lex order.
    pub fn per_mode(n_modes: usize, cutoff: u32) -> Self {
        let max_total = cutoff * n_modes as u32;
        let basis = graded_tuples(n_modes, max_total, |occ| occ.iter().all(|&n| n <= cutoff), cutoff);
        Self::from_parts(n_modes, CutoffKind::PerMode, cutoff, basis).expect("generated basis is valid")
    }

    /// Single mode holding at most `cutoff` photons.
    pub fn single(cutoff: u32) -> Self {
        Self::total(1, cutoff)
    }

    /// A classical register with `dim` orthogonal labels, encoded as one mode.
    pub fn register(dim: usize) -> Self {
        assert!(dim >= 1, "register needs at least one state");
        Self::per_mode(1, dim as u32 - 1)
    }

    /// Space with an explicit basis list (order preserved).
    pub fn from_basis(n_modes: usize, basis: Vec<Occupation>) -> Result<Self> {
        let cutoff = basis.iter().flat_map(|o| o.iter().copied()).max().unwrap_or(0);
        Self::from_parts(n_modes, CutoffKind::Custom, cutoff, basis)
    }

    /// Kronecker product; basis index of `(i, j)` is `i * other.dim() + j`.
    pub fn tensor(&self, other: &ModeSpace) -> Self {
        let mut basis = Vec::with_capacity(self.dim() * other.dim());
        for a in self.basis() {
            for b in other.basis() {
                let mut occ = a.clone();
                occ.extend_from_slice(b);
                basis.push(occ);
            }
        }
        let cutoff = self.cutoff().max(other.cutoff());
        Self::from_parts(self.n_modes() + other.n_modes(), CutoffKind::Custom, cutoff, basis)
            .expect("product of valid bases is valid")
    }

    pub fn n_modes(&self) -> usize {
        self.0.n_modes
    }

    pub fn kind(&self) -> &CutoffKind {
        &self.0.kind
    }

    pub fn cutoff(&self) -> u32 {
        self.0.cutoff
    }

    pub fn dim(&self) -> usize {
        self.0.basis.len()
    }

    pub fn basis(&self) -> &[Occupation] {
        &self.0.basis
    }

    /// Position of an occupation tuple in the basis.
    pub fn index_of(&self, occ: &[u32]) -> Option<usize> {
        self.0.index.get(occ).copied()
    }

    /// Total photon number of basis state `i`.
    pub fn photons(&self, i: usize) -> u32 {
        self.0.basis[i].iter().sum()
    }

    /// Basis indices whose total photon number is at most `n`.
    pub fn indices_up_to(&self, n: u32) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.photons(i) <= n).collect()
    }

    /// The subspace of states with at most `n` photons in total, keeping basis order.
    pub fn truncate_total(&self, n: u32) -> ModeSpace {
        if matches!(self.kind(), CutoffKind::Total) {
            return ModeSpace::total(self.n_modes(), n.min(self.cutoff()));
        }
        let basis = self.indices_up_to(n).into_iter().map(|i| self.0.basis[i].clone()).collect();
        ModeSpace::from_basis(self.n_modes(), basis).expect("subset of a valid basis is valid")
    }

    /// Whether every basis state of `self` also belongs to `other`.
    pub fn is_subspace_of(&self, other: &ModeSpace) -> bool {
        self.n_modes() == other.n_modes() && self.basis().iter().all(|o| other.index_of(o).is_some())
    }
}

impl PartialEq for ModeSpace {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || (self.0.n_modes == other.0.n_modes && self.0.basis == other.0.basis)
    }
}

impl Eq for ModeSpace {}

impl fmt::Debug for ModeSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModeSpace")
            .field("n_modes", &self.0.n_modes)
            .field("kind", &self.0.kind)
            .field("cutoff", &self.0.cutoff)
            .field("dim", &self.dim())
            .finish()
    }
}

/// Tuples accepted by `keep`, ordered by total photon number then lexicographically.
fn graded_tuples(n_modes: usize, max_total: u32, keep: impl Fn(&[u32]) -> bool, per_mode_max: u32) -> Vec<Occupation> {
    let mut out = Vec::new();
    if n_modes == 0 {
        out.push(Vec::new());
        return out;
    }
    let mut cur = vec![0u32; n_modes];
    for total in 0..=max_total {
        fill(&mut cur, 0, total, per_mode_max.max(total), &keep, &mut out);
    }
    out
}

fn fill(
    cur: &mut [u32],
    pos: usize,
    remaining: u32,
    cap: u32,
    keep: &impl Fn(&[u32]) -> bool,
    out: &mut Vec<Occupation>,
) {
    if pos + 1 == cur.len() {
        cur[pos] = remaining;
        if keep(cur) {
            out.push(cur.to_vec());
        }
        return;
    }
    for n in 0..=remaining.min(cap) {
        cur[pos] = n;
        fill(cur, pos + 1, remaining - n, cap, keep, out);
    }
    cur[pos] = 0;
}
