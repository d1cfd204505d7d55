//! Excitation analysis via per-node Gram matrices.
//!
//! For node `i` with regressor vector `f_i(x(t))`, the trajectory induces the
//! Gram matrix and moment vector
//!
//! ```text
//! M_i = ∫ f_i f_i^T dt,      w_i = ∫ f_i (dx_i/dt - u_i) dt,
//! ```
//!
//! integrated with the trapezoid rule over the sample grid. Every
//! interconnection vector consistent with the data solves `M_i v = w_i`, so
//! the solution set is the affine subspace `v* + ker M_i`. The data is
//! *persistently exciting* for node `i` exactly when `ker M_i = {0}`; the
//! margin `σ_min / σ_max` measures how far the data is from losing that
//! property. Declared coupling transforms act on the pair by congruence:
//! `M -> G^T M G`, `w -> G^T w`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{RegressorFamily, Trajectory};

/// Relative threshold separating "numerically nonzero" singular values from
/// noise when deciding ranks: values above `rel * σ_max` count toward the
/// rank. Must lie strictly between 0 and 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct RankTolerance {
    rel: f64,
}

impl RankTolerance {
    pub const DEFAULT_REL: f64 = 1e-8;

    pub fn new(rel: f64) -> Result<Self> {
        if !(rel > 0.0 && rel < 1.0) {
            return Err(Error::Parameter(format!(
                "rank tolerance must lie strictly between 0 and 1, got {rel}"
            )));
        }
        Ok(Self { rel })
    }

    pub fn rel(&self) -> f64 {
        self.rel
    }
}

impl Default for RankTolerance {
    fn default() -> Self {
        Self {
            rel: Self::DEFAULT_REL,
        }
    }
}

// ---------------------------------------------------------------------------
// Gram computation
// ---------------------------------------------------------------------------

/// Raw per-node integrals: the Gram matrix `M_i` and moment vector `w_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeGram {
    node: usize,
    matrix: DMatrix<f64>,
    moment: DVector<f64>,
}

impl NodeGram {
    /// Wrap precomputed integrals (used by deformation probes that transform
    /// the pair without re-integrating).
    pub fn from_parts(node: usize, matrix: DMatrix<f64>, moment: DVector<f64>) -> Result<Self> {
        let n = moment.len();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::Dimension(format!(
                "gram matrix must be {n}x{n} to match the moment vector"
            )));
        }
        Ok(Self {
            node,
            matrix,
            moment,
        })
    }

    pub fn node(&self) -> usize {
        self.node
    }

    pub fn n(&self) -> usize {
        self.moment.len()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn moment(&self) -> &DVector<f64> {
        &self.moment
    }
}

/// Integrate the Gram matrix and moment vector of one node with the
/// trapezoid rule. The trajectory must carry state derivatives (simulated
/// data records them exactly; see [`crate::model::estimate_derivatives`] for
/// imported data).
pub fn compute_gram(traj: &Trajectory, reg: &RegressorFamily, node: usize) -> Result<NodeGram> {
    let n = traj.n();
    if reg.n() != n {
        return Err(Error::Dimension(format!(
            "regressor family size {} does not match trajectory dimension {n}",
            reg.n()
        )));
    }
    if node >= n {
        return Err(Error::Parameter(format!(
            "node index {node} out of range for {n} nodes"
        )));
    }
    if !traj.has_derivatives() {
        return Err(Error::Precondition(
            "gram computation needs state derivatives; estimate them first for imported data"
                .into(),
        ));
    }
    let m = traj.len();
    let h = traj.step();
    let mut matrix = DMatrix::<f64>::zeros(n, n);
    let mut moment = DVector::<f64>::zeros(n);
    for k in 0..m {
        let f = reg.evaluate(node, traj.state(k));
        if f.len() != n {
            return Err(Error::Dimension(format!(
                "regressor returned length {} for node {node}, expected {n}",
                f.len()
            )));
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::Evaluation { node, sample: k });
        }
        let weight = if k == 0 || k == m - 1 { 0.5 * h } else { h };
        let residual_rate = traj.derivative(k).expect("checked above")[node] - traj.input(k)[node];
        matrix.ger(weight, &f, &f, 1.0);
        moment.axpy(weight * residual_rate, &f, 1.0);
    }
    NodeGram::from_parts(node, matrix, moment)
}

/// [`compute_gram`] for every node.
pub fn compute_all(traj: &Trajectory, reg: &RegressorFamily) -> Result<Vec<NodeGram>> {
    (0..traj.n()).map(|i| compute_gram(traj, reg, i)).collect()
}

/// Congruence action of an invertible declared transform `G` on the pair:
/// `M -> G^T M G`, `w -> G^T w`. Solutions map by `v -> G^{-1} v`, so the
/// kernel of the transformed Gram matrix is `G^{-1} ker M`.
pub fn gram_under_transform(gram: &NodeGram, g: &DMatrix<f64>) -> Result<NodeGram> {
    let n = gram.n();
    if g.nrows() != n || g.ncols() != n {
        return Err(Error::Dimension(format!(
            "transform must be {n}x{n}, got {}x{}",
            g.nrows(),
            g.ncols()
        )));
    }
    NodeGram::from_parts(
        gram.node(),
        g.transpose() * gram.matrix() * g,
        g.transpose() * gram.moment(),
    )
}

// ---------------------------------------------------------------------------
// Spectral analysis
// ---------------------------------------------------------------------------

/// Spectral decomposition of one node's Gram matrix with a rank decision:
/// ordered singular values, orthonormal range and kernel bases, excitation
/// margin, and the minimum-norm solution machinery.
#[derive(Debug, Clone)]
pub struct GramAnalysis {
    node: usize,
    matrix: DMatrix<f64>,
    moment: DVector<f64>,
    /// Eigenvalues sorted descending (Gram matrices are symmetric positive
    /// semidefinite, so these are the singular values up to rounding).
    eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors, column `k` matching `eigenvalues[k]`, each
    /// sign-fixed so its largest-magnitude component is positive.
    basis: DMatrix<f64>,
    rank: usize,
    tol: RankTolerance,
}

/// Analyze one node's Gram matrix under the given rank tolerance.
pub fn analyze(gram: &NodeGram, tol: RankTolerance) -> GramAnalysis {
    let n = gram.n();
    // Decompose by SVD rather than symmetric QR iteration: the latter can
    // return an orthogonal basis that fails to diagonalize well-conditioned
    // Gram matrices (residuals around 1e-4 instead of round-off), which
    // would corrupt every rank, margin, kernel, and minimum-norm decision
    // downstream. Gram matrices are positive semidefinite, so the singular
    // triplets are exactly the eigenpairs.
    let svd = gram.matrix().clone().svd(true, false);
    let u = svd.u.expect("left singular vectors were requested");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .expect("gram singular values are finite")
            .then(a.cmp(&b))
    });
    let eigenvalues: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();
    let mut basis = DMatrix::<f64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = u.column(src).clone_owned();
        // Deterministic sign: flip so the largest-magnitude entry is positive.
        let lead = (0..n)
            .max_by(|&a, &b| {
                col[a]
                    .abs()
                    .partial_cmp(&col[b].abs())
                    .expect("eigenvector entries are finite")
                    .then(b.cmp(&a))
            })
            .unwrap_or(0);
        if col[lead] < 0.0 {
            col.neg_mut();
        }
        basis.set_column(dst, &col);
    }
    let largest = eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    let cut = tol.rel() * largest;
    let rank = if largest == 0.0 {
        0
    } else {
        eigenvalues.iter().take_while(|&&v| v > cut).count()
    };
    GramAnalysis {
        node: gram.node(),
        matrix: gram.matrix().clone(),
        moment: gram.moment().clone(),
        eigenvalues,
        basis,
        rank,
        tol,
    }
}

/// True when the data is persistently exciting for this node, i.e. the Gram
/// matrix has full numerical rank.
pub fn pe_check(gram: &NodeGram, tol: RankTolerance) -> bool {
    analyze(gram, tol).pe()
}

impl GramAnalysis {
    pub fn node(&self) -> usize {
        self.node
    }

    pub fn n(&self) -> usize {
        self.moment.len()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn moment(&self) -> &DVector<f64> {
        &self.moment
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn tol(&self) -> RankTolerance {
        self.tol
    }

    /// Singular values sorted descending (negative rounding noise clamped).
    pub fn singular_values(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|v| v.max(0.0)).collect()
    }

    /// Excitation margin `σ_min / σ_max`; zero for the zero matrix.
    pub fn margin(&self) -> f64 {
        let sv = self.singular_values();
        let largest = sv.first().copied().unwrap_or(0.0);
        let smallest = sv.last().copied().unwrap_or(0.0);
        if largest == 0.0 {
            0.0
        } else {
            smallest / largest
        }
    }

    /// Persistent excitation: the kernel is trivial.
    pub fn pe(&self) -> bool {
        self.rank == self.n()
    }

    /// Orthonormal basis of the numerical range (row space), `n x rank`.
    pub fn range_basis(&self) -> DMatrix<f64> {
        self.basis.columns(0, self.rank).clone_owned()
    }

    /// Orthonormal basis of the numerical kernel, `n x (n - rank)`.
    pub fn kernel_basis(&self) -> DMatrix<f64> {
        self.basis
            .columns(self.rank, self.n() - self.rank)
            .clone_owned()
    }

    /// Minimum-norm solution of `M v = w` via the spectral pseudoinverse
    /// restricted to the numerical range.
    pub fn min_norm_solution(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.n());
        for k in 0..self.rank {
            let q = self.basis.column(k);
            v.axpy(q.dot(&self.moment) / self.eigenvalues[k], &q, 1.0);
        }
        v
    }

    /// Relative equation residual `‖M v - w‖ / (1 + ‖w‖)` of a candidate
    /// interconnection vector.
    pub fn relative_residual(&self, v: &DVector<f64>) -> f64 {
        (&self.matrix * v - &self.moment).norm() / (1.0 + self.moment.norm())
    }

    pub fn summary(&self) -> GramSummary {
        GramSummary {
            node: self.node,
            rank: self.rank,
            singular_values: self.singular_values(),
            kernel_basis: self
                .kernel_basis()
                .column_iter()
                .map(|c| c.iter().copied().collect())
                .collect(),
            pe: self.pe(),
            margin: self.margin(),
        }
    }
}

/// Report-friendly summary of one node's excitation analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramSummary {
    pub node: usize,
    pub rank: usize,
    pub singular_values: Vec<f64>,
    /// Orthonormal kernel basis vectors, one inner vector per basis element.
    pub kernel_basis: Vec<Vec<f64>>,
    pub pe: bool,
    pub margin: f64,
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
