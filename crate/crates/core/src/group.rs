//! Declared coupling-function uncertainty as a matrix group.
//!
//! When the analyst only trusts the coupling functions up to per-coupling
//! rescaling and mixing with the self-coupling, the admissible replacements
//! for node `i`'s regressor are `f -> G^T f` where `G` ranges over the group
//! of invertible matrices that are nonzero only on the diagonal and on row
//! `i`:
//!
//! ```text
//! (G v)_j = d_j v_j                      for j != i,   d_j != 0
//! (G v)_i = d_i v_i + sum_{k != i} g_k v_k
//! ```
//!
//! Data generated by couplings `G^T f` with interconnection vector `a` is
//! identical to data generated by couplings `f` with vector `G a`, so the
//! vectors reachable from `a` through the group — its *orbit* — can never be
//! told apart. The orbit of a vector is determined by which off-diagonal
//! coordinates are nonzero (its support); magnitudes and signs are free, and
//! the self-coordinate is free as soon as the support is nonempty. This
//! module provides the group elements (apply/compose/invert), orbit labels
//! and witnesses, and the verdict for what remains decidable when the data
//! is not persistently exciting.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};

/// Relative threshold below which a coordinate counts as zero when reading
/// supports: `|v_j| <= rel * max_k |v_k|`.
pub const ZERO_TOL_REL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Group elements
// ---------------------------------------------------------------------------

/// One element of the uncertainty group of node `node`: an invertible matrix
/// carrying a nonzero diagonal `d` and free off-diagonal entries `g_k` in row
/// `node` only.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement {
    node: usize,
    diag: DVector<f64>,
    /// Row-`node` mixing coefficients; entry `node` is identically zero (the
    /// diagonal carries that position).
    row: DVector<f64>,
}

impl GroupElement {
    pub fn new(node: usize, diag: DVector<f64>, row: DVector<f64>) -> Result<Self> {
        let n = diag.len();
        if node >= n {
            return Err(Error::Parameter(format!(
                "node index {node} out of range for {n} coordinates"
            )));
        }
        if row.len() != n {
            return Err(Error::Dimension(format!(
                "mixing row has length {}, expected {n}",
                row.len()
            )));
        }
        if diag.iter().any(|d| !d.is_finite() || *d == 0.0) {
            return Err(Error::Parameter(
                "group element diagonal must be finite and nonzero".into(),
            ));
        }
        if row.iter().any(|g| !g.is_finite()) {
            return Err(Error::Parameter(
                "group element mixing row must be finite".into(),
            ));
        }
        if row[node] != 0.0 {
            return Err(Error::Parameter(
                "the self entry of the mixing row is carried by the diagonal; set it to zero"
                    .into(),
            ));
        }
        Ok(Self { node, diag, row })
    }

    pub fn identity(n: usize, node: usize) -> Self {
        Self {
            node,
            diag: DVector::from_element(n, 1.0),
            row: DVector::zeros(n),
        }
    }

    /// Purely diagonal element (no self-row mixing).
    pub fn diagonal(node: usize, diag: DVector<f64>) -> Result<Self> {
        let n = diag.len();
        Self::new(node, diag, DVector::zeros(n))
    }

    /// Random element with diagonal magnitudes in `[0.5, 2]`, random signs,
    /// and mixing entries in `[-1, 1]`. Deterministic for a given generator.
    pub fn random<R: Rng>(n: usize, node: usize, rng: &mut R) -> Self {
        let diag = DVector::from_fn(n, |_, _| {
            let mag = rng.gen_range(0.5..2.0);
            if rng.gen_bool(0.5) {
                mag
            } else {
                -mag
            }
        });
        let row = DVector::from_fn(n, |k, _| {
            if k == node {
                0.0
            } else {
                rng.gen_range(-1.0..1.0)
            }
        });
        Self { node, diag, row }
    }

    pub fn node(&self) -> usize {
        self.node
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &DVector<f64> {
        &self.diag
    }

    pub fn row(&self) -> &DVector<f64> {
        &self.row
    }

    /// True when the element does no self-row mixing (diagonal matrix).
    pub fn is_diagonal(&self) -> bool {
        self.row.iter().all(|g| *g == 0.0)
    }

    /// Apply to an interconnection vector without forming the matrix.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let i = self.node;
        let mut out = DVector::from_fn(v.len(), |j, _| self.diag[j] * v[j]);
        out[i] += self.row.dot(v) - self.row[i] * v[i];
        out
    }

    /// Dense matrix form (diagonal `d`, extra entries in row `node`).
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            m[(j, j)] = self.diag[j];
        }
        for k in 0..n {
            if k != self.node {
                m[(self.node, k)] = self.row[k];
            }
        }
        m
    }

    /// Closed-form inverse: diagonal `1/d_j`, mixing entries
    /// `-g_k / (d_i d_k)`.
    pub fn inverse(&self) -> Self {
        let i = self.node;
        let diag = DVector::from_fn(self.n(), |j, _| 1.0 / self.diag[j]);
        let row = DVector::from_fn(self.n(), |k, _| {
            if k == i {
                0.0
            } else {
                -self.row[k] / (self.diag[i] * self.diag[k])
            }
        });
        Self {
            node: i,
            diag,
            row,
        }
    }

    /// Group composition `self * other` (matrix product): diagonal
    /// `d1_j d2_j`, mixing entries `d1_i g2_k + g1_k d2_k`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.node != other.node || self.n() != other.n() {
            return Err(Error::Parameter(
                "group elements must share the node and the dimension to compose".into(),
            ));
        }
        let i = self.node;
        let diag = DVector::from_fn(self.n(), |j, _| self.diag[j] * other.diag[j]);
        let row = DVector::from_fn(self.n(), |k, _| {
            if k == i {
                0.0
            } else {
                self.diag[i] * other.row[k] + self.row[k] * other.diag[k]
            }
        });
        Ok(Self {
            node: i,
            diag,
            row,
        })
    }
}

// ---------------------------------------------------------------------------
// Orbits
// ---------------------------------------------------------------------------

/// Complete invariant of a group orbit: which off-diagonal coordinates are
/// nonzero, plus — only when that support is empty — whether the
/// self-coordinate is nonzero. With nonempty support the self-coordinate can
/// be driven anywhere by the mixing row, so the flag normalizes to `false`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrbitLabel {
    node: usize,
    support: BTreeSet<usize>,
    self_nonzero: bool,
}

impl OrbitLabel {
    pub fn node(&self) -> usize {
        self.node
    }

    /// Indices `j != node` whose coordinate is nonzero throughout the orbit.
    pub fn support(&self) -> &BTreeSet<usize> {
        &self.support
    }

    /// Meaningful only when [`Self::support`] is empty; normalized to `false`
    /// otherwise.
    pub fn self_nonzero(&self) -> bool {
        self.self_nonzero
    }

    /// Dimension of the orbit as a manifold: `0` for the zero orbit, `1` for
    /// a pure self-loop, `|support| + 1` otherwise (one magnitude per
    /// supported coordinate plus the free self-coordinate).
    pub fn dimension(&self) -> usize {
        if self.support.is_empty() {
            usize::from(self.self_nonzero)
        } else {
            self.support.len() + 1
        }
    }
}

pub(crate) fn relative_support(
    node: usize,
    v: &DVector<f64>,
    zero_tol: f64,
) -> (BTreeSet<usize>, bool) {
    let scale = v.amax();
    let mut support = BTreeSet::new();
    let mut self_nonzero = false;
    if scale == 0.0 {
        return (support, self_nonzero);
    }
    for j in 0..v.len() {
        if v[j].abs() > zero_tol * scale {
            if j == node {
                self_nonzero = true;
            } else {
                support.insert(j);
            }
        }
    }
    (support, self_nonzero)
}

/// Read the orbit label of `v` for node `node`, treating coordinates below
/// `zero_tol * ‖v‖_∞` as zero.
pub fn orbit_label(node: usize, v: &DVector<f64>, zero_tol: f64) -> OrbitLabel {
    let (support, self_nonzero) = relative_support(node, v, zero_tol);
    let self_nonzero = if support.is_empty() {
        self_nonzero
    } else {
        false // the mixing row makes the self-coordinate free
    };
    OrbitLabel {
        node,
        support,
        self_nonzero,
    }
}

/// Whether two vectors lie on the same group orbit (equal labels).
pub fn same_orbit(node: usize, a: &DVector<f64>, b: &DVector<f64>, zero_tol: f64) -> bool {
    orbit_label(node, a, zero_tol) == orbit_label(node, b, zero_tol)
}

/// Construct a group element with `G a = b` when the two vectors share an
/// orbit; `None` when their labels differ. The witness uses per-coordinate
/// ratios on the common support and, when the support is nonempty, a single
/// mixing entry to land the free self-coordinate.
pub fn orbit_witness(
    node: usize,
    a: &DVector<f64>,
    b: &DVector<f64>,
    zero_tol: f64,
) -> Option<GroupElement> {
    let label_a = orbit_label(node, a, zero_tol);
    if label_a != orbit_label(node, b, zero_tol) {
        return None;
    }
    let n = a.len();
    let mut diag = DVector::from_element(n, 1.0);
    let mut row = DVector::zeros(n);
    for &j in label_a.support() {
        diag[j] = b[j] / a[j];
    }
    if let Some(&pivot) = label_a.support().iter().next() {
        // (G a)_i = d_i a_i + g_pivot a_pivot must equal b_i.
        row[pivot] = (b[node] - a[node]) / a[pivot];
    } else if label_a.self_nonzero() {
        diag[node] = b[node] / a[node];
    }
    Some(GroupElement {
        node,
        diag,
        row,
    })
}

/// A group element that flips the sign of one nonzero coordinate of `v`
/// while staying in the same orbit — a concrete witness that coordinate
/// signs are never identifiable under this uncertainty without extra prior
/// knowledge. `None` only for the zero vector.
pub fn sign_flip_witness(node: usize, v: &DVector<f64>, zero_tol: f64) -> Option<GroupElement> {
    let label = orbit_label(node, v, zero_tol);
    let n = v.len();
    if let Some(&j) = label.support().iter().next() {
        let mut diag = DVector::from_element(n, 1.0);
        diag[j] = -1.0;
        // Keep the self-coordinate where it was: d_i v_i + g_j (-?) ... the
        // diagonal flip alone leaves every other coordinate fixed already.
        Some(GroupElement {
            node,
            diag,
            row: DVector::zeros(n),
        })
    } else if label.self_nonzero() {
        let mut diag = DVector::from_element(n, 1.0);
        diag[node] = -1.0;
        Some(GroupElement {
            node,
            diag,
            row: DVector::zeros(n),
        })
    } else {
        None
    }
}

// ---------------------------------------------------------------------------
// Kernel coverage and the generic verdict
// ---------------------------------------------------------------------------

/// Off-diagonal coordinates that the kernel of a Gram matrix can move: the
/// union of the supports of the kernel basis vectors (each read with a
/// relative zero tolerance), plus whether that union covers every
/// off-diagonal coordinate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KernelCoverage {
    node: usize,
    n: usize,
    moved: BTreeSet<usize>,
    full: bool,
}

impl KernelCoverage {
    pub fn node(&self) -> usize {
        self.node
    }

    /// Off-diagonal coordinates touched by some kernel direction.
    pub fn moved(&self) -> &BTreeSet<usize> {
        &self.moved
    }

    /// True when every off-diagonal coordinate is touched: the closure of
    /// the indistinguishable set is then the whole space.
    pub fn is_full(&self) -> bool {
        self.full
    }

    /// Off-diagonal coordinates the kernel never moves: on these,
    /// presence/absence of an interaction is decidable despite the
    /// ambiguity, because every consistent vector agrees there up to the
    /// declared coupling uncertainty.
    pub fn identifiable(&self) -> BTreeSet<usize> {
        (0..self.n)
            .filter(|j| *j != self.node && !self.moved.contains(j))
            .collect()
    }
}

/// Compute which off-diagonal coordinates the kernel moves. `kernel` holds
/// one basis vector per column.
pub fn kernel_orbit_containment(
    node: usize,
    kernel: &DMatrix<f64>,
    zero_tol: f64,
) -> KernelCoverage {
    let n = kernel.nrows();
    let mut moved = BTreeSet::new();
    for c in 0..kernel.ncols() {
        let z = kernel.column(c).clone_owned();
        let (support, _) = relative_support(node, &z, zero_tol);
        moved.extend(support);
    }
    let full = moved.len() == n.saturating_sub(1);
    KernelCoverage {
        node,
        n,
        moved,
        full,
    }
}

/// What the combination of data and declared uncertainty leaves decidable
/// for one node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GenericVerdict {
    /// Persistently exciting data: the solution is a single point and the
    /// ambiguity is exactly one group orbit, so every orbit invariant (the
    /// off-diagonal support, hence connectivity and degree) is determined.
    OrbitsOnly { label: OrbitLabel },
    /// The kernel moves some but not all off-diagonal coordinates: almost
    /// every consistent vector carries the generic support below, but the
    /// solution set also contains vectors of strictly smaller support, so
    /// support conclusions hold only generically and are not robust.
    StructurallyUnstable { generic_support: BTreeSet<usize> },
    /// The kernel moves every off-diagonal coordinate: the closure of the
    /// indistinguishable set is the whole space and no nontrivial property
    /// of the row can be decided.
    AllIndistinguishable,
}

/// Decide the generic verdict for one node from a particular solution and a
/// kernel basis of its Gram matrix.
pub fn generic_verdict(
    node: usize,
    solution: &DVector<f64>,
    kernel: &DMatrix<f64>,
    zero_tol: f64,
) -> GenericVerdict {
    if kernel.ncols() == 0 {
        return GenericVerdict::OrbitsOnly {
            label: orbit_label(node, solution, zero_tol),
        };
    }
    let coverage = kernel_orbit_containment(node, kernel, zero_tol);
    if coverage.is_full() {
        return GenericVerdict::AllIndistinguishable;
    }
    let (support, _) = relative_support(node, solution, zero_tol);
    let generic_support: BTreeSet<usize> = support.union(coverage.moved()).copied().collect();
    GenericVerdict::StructurallyUnstable { generic_support }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
