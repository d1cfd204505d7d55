//! Solution-set geometry: fibers, prior pieces, and separation tests.
//!
//! The data of one node pins its interconnection vector down to a *fiber* —
//! the affine set `v* + ker M` of all vectors reproducing the measured
//! moments. Prior knowledge restricts candidates to *pieces*: a finite list
//! of points, or axis-aligned sign boxes. Two pieces can be told apart by
//! the data exactly when no fiber meets both, i.e. when their Minkowski
//! difference misses `ker M`; for boxes that test is a small linear program
//! over separating functionals drawn from the row space, and failures are
//! certified by an explicit pair of candidates on a common fiber.

pub mod lp;

pub use crate::reconstruct::property_distinguishable;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gram::GramAnalysis;
use lp::{LinearProgram, LpOutcome, Relation};

/// Hard cap on prior pieces and on piece pairs examined by one query.
pub const PIECE_CAP: usize = 100_000;

/// Relative slack below which an LP separation optimum counts as zero.
pub const SEPARATION_EPS: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Boxes
// ---------------------------------------------------------------------------

/// Axis-aligned box `[lo_1, hi_1] x ... x [lo_n, hi_n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisBox {
    lo: DVector<f64>,
    hi: DVector<f64>,
}

impl AxisBox {
    pub fn new(lo: DVector<f64>, hi: DVector<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Dimension(
                "box bounds must have equal lengths".into(),
            ));
        }
        for j in 0..lo.len() {
            if !lo[j].is_finite() || !hi[j].is_finite() || lo[j] > hi[j] {
                return Err(Error::Parameter(format!(
                    "box interval {j} is invalid: [{}, {}]",
                    lo[j], hi[j]
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn from_intervals(intervals: &[(f64, f64)]) -> Result<Self> {
        let lo = DVector::from_iterator(intervals.len(), intervals.iter().map(|p| p.0));
        let hi = DVector::from_iterator(intervals.len(), intervals.iter().map(|p| p.1));
        Self::new(lo, hi)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &DVector<f64> {
        &self.lo
    }

    pub fn hi(&self) -> &DVector<f64> {
        &self.hi
    }

    pub fn center(&self) -> DVector<f64> {
        (&self.lo + &self.hi) * 0.5
    }

    pub fn radius(&self) -> DVector<f64> {
        (&self.hi - &self.lo) * 0.5
    }

    /// Membership up to an absolute tolerance per coordinate.
    pub fn contains(&self, p: &DVector<f64>, tol: f64) -> bool {
        (0..self.dim()).all(|j| p[j] >= self.lo[j] - tol && p[j] <= self.hi[j] + tol)
    }

    /// Support function `max_{v in box} w . v`.
    pub fn support(&self, w: &DVector<f64>) -> f64 {
        let c = self.center();
        let r = self.radius();
        (0..self.dim()).map(|j| w[j] * c[j] + w[j].abs() * r[j]).sum()
    }

    /// Minkowski difference `self - other = {a - b}` as a box.
    pub fn minkowski_difference(&self, other: &AxisBox) -> Result<AxisBox> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension(
                "boxes must share a dimension to difference".into(),
            ));
        }
        AxisBox::new(&self.lo - &other.hi, &self.hi - &other.lo)
    }
}

// ---------------------------------------------------------------------------
// Sign patterns and sign boxes
// ---------------------------------------------------------------------------

/// Sign of one coordinate in a pattern prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "-")]
    Neg,
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "+")]
    Pos,
}

impl Sign {
    /// Classify a value with an absolute zero threshold.
    pub fn classify(v: f64, zero_eps: f64) -> Sign {
        if v.abs() <= zero_eps {
            Sign::Zero
        } else if v > 0.0 {
            Sign::Pos
        } else {
            Sign::Neg
        }
    }

    pub fn glyph(&self) -> char {
        match self {
            Sign::Neg => '-',
            Sign::Zero => '0',
            Sign::Pos => '+',
        }
    }
}

/// Render a sign pattern as a compact string like `"+-0"`.
pub fn sign_string(label: &[Sign]) -> String {
    label.iter().map(Sign::glyph).collect()
}

/// Magnitude bounds defining sign boxes: nonzero entries have magnitude in
/// `[a_min, a_max]`, zero entries magnitude at most `epsilon`, with
/// `0 <= epsilon < a_min < a_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignBounds {
    pub epsilon: f64,
    pub a_min: f64,
    pub a_max: f64,
}

impl SignBounds {
    pub fn new(epsilon: f64, a_min: f64, a_max: f64) -> Result<Self> {
        let bounds = Self {
            epsilon,
            a_min,
            a_max,
        };
        bounds.validate()?;
        Ok(bounds)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.epsilon.is_finite()
            && self.a_min.is_finite()
            && self.a_max.is_finite()
            && 0.0 <= self.epsilon
            && self.epsilon < self.a_min
            && self.a_min < self.a_max;
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter(format!(
                "sign bounds need 0 <= epsilon < a_min < a_max, got ({}, {}, {})",
                self.epsilon, self.a_min, self.a_max
            )))
        }
    }

    /// Coordinate interval carrying one sign.
    pub fn interval(&self, sign: Sign) -> (f64, f64) {
        match sign {
            Sign::Neg => (-self.a_max, -self.a_min),
            Sign::Zero => (-self.epsilon, self.epsilon),
            Sign::Pos => (self.a_min, self.a_max),
        }
    }
}

/// A box tagged with the sign pattern it represents.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBox {
    pub label: Vec<Sign>,
    pub body: AxisBox,
}

/// All `3^n` sign boxes in deterministic order (coordinate 0 varies slowest;
/// signs ordered `-`, `0`, `+`). Errors when `3^n` exceeds [`PIECE_CAP`].
pub fn sign_boxes(n: usize, bounds: &SignBounds) -> Result<Vec<LabeledBox>> {
    bounds.validate()?;
    if n == 0 {
        return Err(Error::Parameter("sign boxes need n >= 1".into()));
    }
    let mut count: usize = 1;
    for _ in 0..n {
        count = count
            .checked_mul(3)
            .filter(|&c| c <= PIECE_CAP)
            .ok_or_else(|| {
                Error::Scale(format!(
                    "3^{n} sign boxes exceed the cap of {PIECE_CAP} pieces"
                ))
            })?;
    }
    const ORDER: [Sign; 3] = [Sign::Neg, Sign::Zero, Sign::Pos];
    let mut out = Vec::with_capacity(count);
    for idx in 0..count {
        let mut label = vec![Sign::Zero; n];
        let mut rem = idx;
        for j in (0..n).rev() {
            label[j] = ORDER[rem % 3];
            rem /= 3;
        }
        let intervals: Vec<(f64, f64)> = label.iter().map(|&s| bounds.interval(s)).collect();
        out.push(LabeledBox {
            label,
            body: AxisBox::from_intervals(&intervals)?,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Priors
// ---------------------------------------------------------------------------

/// Candidate set for one interconnection vector.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorSet {
    /// No prior knowledge: every vector is a candidate.
    Unconstrained,
    /// Finitely many fully specified candidate vectors.
    Discrete(Vec<DVector<f64>>),
    /// Union of labeled sign boxes.
    Boxes(Vec<LabeledBox>),
}

impl PriorSet {
    pub fn discrete_from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Parameter(
                "a discrete prior needs at least one candidate".into(),
            ));
        }
        if rows.len() > PIECE_CAP {
            return Err(Error::Scale(format!(
                "{} discrete candidates exceed the cap of {PIECE_CAP}",
                rows.len()
            )));
        }
        let n = rows[0].len();
        let mut points = Vec::with_capacity(rows.len());
        for (k, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Dimension(format!(
                    "discrete candidate {k} has length {}, expected {n}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parameter(format!(
                    "discrete candidate {k} contains a non-finite value"
                )));
            }
            points.push(DVector::from_column_slice(row));
        }
        Ok(PriorSet::Discrete(points))
    }

    /// Number of pieces (`None` for the unconstrained continuum).
    pub fn pieces(&self) -> Option<usize> {
        match self {
            PriorSet::Unconstrained => None,
            PriorSet::Discrete(points) => Some(points.len()),
            PriorSet::Boxes(boxes) => Some(boxes.len()),
        }
    }

    /// Ambient dimension if the prior constrains one.
    pub fn dim(&self) -> Option<usize> {
        match self {
            PriorSet::Unconstrained => None,
            PriorSet::Discrete(points) => points.first().map(|p| p.len()),
            PriorSet::Boxes(boxes) => boxes.first().map(|b| b.body.dim()),
        }
    }
}

/// On-disk prior description: exactly one of `discrete` (candidate vectors)
/// or `bounds` (sign-box magnitudes) must be present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct PriorSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub discrete: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<SignBounds>,
}

impl PriorSpec {
    /// Materialize for systems of `n` nodes.
    pub fn to_prior(&self, n: usize) -> Result<PriorSet> {
        match (&self.discrete, &self.bounds) {
            (Some(rows), None) => {
                let prior = PriorSet::discrete_from_rows(rows)?;
                if prior.dim() != Some(n) {
                    return Err(Error::Dimension(format!(
                        "discrete candidates have dimension {:?}, expected {n}",
                        prior.dim()
                    )));
                }
                Ok(prior)
            }
            (None, Some(bounds)) => Ok(PriorSet::Boxes(sign_boxes(n, bounds)?)),
            (None, None) => Err(Error::Config(
                "prior spec must declare one of 'discrete' or 'bounds'".into(),
            )),
            (Some(_), Some(_)) => Err(Error::Config(
                "prior spec cannot declare both 'discrete' and 'bounds'".into(),
            )),
        }
    }
}

// ---------------------------------------------------------------------------
// Fibers
// ---------------------------------------------------------------------------

/// The affine solution set `point + span(kernel)` of one node's data, with
/// the orthonormal row-space basis and the consistency residual of the
/// particular solution.
#[derive(Debug, Clone)]
pub struct Fiber {
    node: usize,
    point: DVector<f64>,
    kernel: DMatrix<f64>,
    range: DMatrix<f64>,
    residual: f64,
}

impl Fiber {
    pub fn from_analysis(analysis: &GramAnalysis) -> Self {
        let point = analysis.min_norm_solution();
        let residual = analysis.relative_residual(&point);
        Self {
            node: analysis.node(),
            point,
            kernel: analysis.kernel_basis(),
            range: analysis.range_basis(),
            residual,
        }
    }

    pub fn node(&self) -> usize {
        self.node
    }

    pub fn n(&self) -> usize {
        self.point.len()
    }

    /// Minimum-norm particular solution.
    pub fn point(&self) -> &DVector<f64> {
        &self.point
    }

    /// Orthonormal kernel basis (`n x kernel_dim`).
    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    /// Orthonormal row-space basis (`n x rank`).
    pub fn range(&self) -> &DMatrix<f64> {
        &self.range
    }

    /// Relative residual `‖M v* - w‖ / (1 + ‖w‖)` of the particular solution.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn dim(&self) -> usize {
        self.kernel.ncols()
    }

    /// Whether `p` lies on the fiber: its row-space deviation from the
    /// particular solution is at most `tol * (1 + ‖p‖_∞)`.
    pub fn contains(&self, p: &DVector<f64>, tol: f64) -> bool {
        let deviation = self.range.transpose() * (p - &self.point);
        deviation.norm() <= tol * (1.0 + p.amax())
    }

    /// A fiber point inside `bx`, when one exists, found by a feasibility
    /// linear program over the kernel coefficients.
    pub fn intersect_box(&self, bx: &AxisBox) -> Result<Option<DVector<f64>>> {
        let n = self.n();
        if bx.dim() != n {
            return Err(Error::Dimension(format!(
                "box dimension {} does not match fiber dimension {n}",
                bx.dim()
            )));
        }
        let kdim = self.dim();
        if kdim == 0 {
            return Ok(bx.contains(&self.point, 0.0).then(|| self.point.clone()));
        }
        // lo <= point + Z beta <= hi, variables beta.
        let mut prog = LinearProgram::minimize(vec![0.0; kdim]);
        for j in 0..n {
            let row: Vec<f64> = (0..kdim).map(|k| self.kernel[(j, k)]).collect();
            prog.constrain(row.clone(), Relation::Ge, bx.lo()[j] - self.point[j]);
            prog.constrain(row, Relation::Le, bx.hi()[j] - self.point[j]);
        }
        match prog.solve()? {
            LpOutcome::Optimal { point: beta, .. } => {
                let beta = DVector::from_column_slice(&beta);
                Ok(Some(&self.point + &self.kernel * beta))
            }
            LpOutcome::Infeasible => Ok(None),
            LpOutcome::Unbounded => Err(Error::Numerical(
                "feasibility program cannot be unbounded".into(),
            )),
        }
    }
}

// ---------------------------------------------------------------------------
// Separation
// ---------------------------------------------------------------------------

/// Outcome of a pairwise distinguishability test between two prior pieces
/// under a given excitation structure.
#[derive(Debug, Clone, PartialEq)]
pub enum Separation {
    /// The data always tells the pieces apart: `functional` lies in the row
    /// space and every candidate in the first piece scores at most every
    /// candidate in the second minus `gap` (`gap` may be zero when the
    /// pieces touch without sharing a fiber interior).
    Separable { functional: DVector<f64>, gap: f64 },
    /// Some fiber meets both pieces; when available, `witness` is a concrete
    /// pair of candidates producing identical data.
    Inseparable {
        witness: Option<(DVector<f64>, DVector<f64>)>,
    },
}

impl Separation {
    pub fn is_separable(&self) -> bool {
        matches!(self, Separation::Separable { .. })
    }
}

/// Decide whether two boxes can always be told apart when the kernel of the
/// Gram matrix is `span(kernel)` (columns orthonormal) and the row space is
/// `span(range)`.
///
/// The test minimizes `c . w + r . t` over row-space functionals `w` with
/// `t_j >= |w_j|` and `sum t = 1`, where `c` and `r` are the center and
/// radius of the Minkowski difference of the boxes. The optimum bounds the
/// worst-case margin `max_{v1 in b1} w . v1 - min_{v2 in b2} w . v2`, so a
/// non-positive optimum with a nonzero `w` certifies separation (pieces may
/// touch but share no fiber interior); otherwise a feasibility program
/// recovers candidates `v1, v2` in the two boxes with `v1 - v2` in the
/// kernel. When a degenerate (zero-radius) coordinate lets the program
/// reach zero with `w = 0`, the certificate is vacuous and the feasibility
/// program decides instead.
pub fn separate_boxes(
    range: &DMatrix<f64>,
    kernel: &DMatrix<f64>,
    b1: &AxisBox,
    b2: &AxisBox,
) -> Result<Separation> {
    let n = b1.dim();
    if b2.dim() != n || range.nrows() != n || kernel.nrows() != n {
        return Err(Error::Dimension(
            "boxes and bases must share the ambient dimension".into(),
        ));
    }
    let rank = range.ncols();
    let diff = b1.minkowski_difference(b2)?;
    let c = diff.center();
    let r = diff.radius();

    if rank > 0 {
        // Variables (alpha_1..alpha_rank, t_1..t_n).
        let mut objective = Vec::with_capacity(rank + n);
        for k in 0..rank {
            objective.push(range.column(k).dot(&c));
        }
        objective.extend(r.iter().copied());
        let mut prog = LinearProgram::minimize(objective);
        for j in 0..n {
            // t_j - (B alpha)_j >= 0
            let mut row = vec![0.0; rank + n];
            for k in 0..rank {
                row[k] = -range[(j, k)];
            }
            row[rank + j] = 1.0;
            prog.constrain(row, Relation::Ge, 0.0);
            // t_j + (B alpha)_j >= 0
            let mut row = vec![0.0; rank + n];
            for k in 0..rank {
                row[k] = range[(j, k)];
            }
            row[rank + j] = 1.0;
            prog.constrain(row, Relation::Ge, 0.0);
        }
        let mut normalization = vec![0.0; rank + n];
        normalization[rank..].fill(1.0);
        prog.constrain(normalization, Relation::Eq, 1.0);

        let outcome = prog.solve()?;
        let (value, point) = match outcome {
            LpOutcome::Optimal { value, point } => (value, point),
            other => {
                return Err(Error::Numerical(format!(
                    "separation program must be bounded and feasible, got {other:?}"
                )))
            }
        };
        let scale = 1.0 + c.amax() + r.amax();
        let alpha = DVector::from_column_slice(&point[..rank]);
        let functional = range * alpha;
        if value < -SEPARATION_EPS * scale {
            return Ok(Separation::Separable {
                functional,
                gap: -value,
            });
        }
        // Touching band: the non-strict convention accepts a zero-margin
        // certificate, but only a nonzero functional certifies anything.
        if value <= SEPARATION_EPS * scale && functional.abs().sum() > 1e-9 {
            return Ok(Separation::Separable {
                functional,
                gap: (-value).max(0.0),
            });
        }
    }

    // No separating functional: exhibit candidates on a common fiber.
    match common_fiber_witness(kernel, b1, b2)? {
        Some(witness) => Ok(Separation::Inseparable {
            witness: Some(witness),
        }),
        None if rank == 0 => Ok(Separation::Inseparable { witness: None }),
        None => Err(Error::Numerical(
            "separation test inconclusive: no certificate and no common fiber".into(),
        )),
    }
}

/// Find `v1 in b1`, `v2 in b2` with `v1 - v2` in the kernel span, if the
/// feasibility program admits one.
fn common_fiber_witness(
    kernel: &DMatrix<f64>,
    b1: &AxisBox,
    b2: &AxisBox,
) -> Result<Option<(DVector<f64>, DVector<f64>)>> {
    let n = b1.dim();
    let kdim = kernel.ncols();
    // Variables (v1, v2, beta).
    let nv = 2 * n + kdim;
    let mut prog = LinearProgram::minimize(vec![0.0; nv]);
    for j in 0..n {
        let mut row = vec![0.0; nv];
        row[j] = 1.0;
        prog.constrain(row.clone(), Relation::Ge, b1.lo()[j]);
        prog.constrain(row, Relation::Le, b1.hi()[j]);
        let mut row = vec![0.0; nv];
        row[n + j] = 1.0;
        prog.constrain(row.clone(), Relation::Ge, b2.lo()[j]);
        prog.constrain(row, Relation::Le, b2.hi()[j]);
    }
    for j in 0..n {
        let mut row = vec![0.0; nv];
        row[j] = 1.0;
        row[n + j] = -1.0;
        for k in 0..kdim {
            row[2 * n + k] = -kernel[(j, k)];
        }
        prog.constrain(row, Relation::Eq, 0.0);
    }
    match prog.solve()? {
        LpOutcome::Optimal { point, .. } => {
            let v1 = DVector::from_column_slice(&point[..n]);
            let v2 = DVector::from_column_slice(&point[n..2 * n]);
            Ok(Some((v1, v2)))
        }
        LpOutcome::Infeasible => Ok(None),
        LpOutcome::Unbounded => Err(Error::Numerical(
            "feasibility program cannot be unbounded".into(),
        )),
    }
}

/// Decide whether two fully specified candidates can be told apart: their
/// difference must have a row-space component above `rel_tol` relative to
/// its size. Identical candidates (or a difference inside the kernel) are
/// returned as inseparable with themselves as the witness pair.
pub fn separate_points(
    range: &DMatrix<f64>,
    p1: &DVector<f64>,
    p2: &DVector<f64>,
    rel_tol: f64,
) -> Result<Separation> {
    let n = p1.len();
    if p2.len() != n || range.nrows() != n {
        return Err(Error::Dimension(
            "points and basis must share the ambient dimension".into(),
        ));
    }
    let d = p1 - p2;
    let dnorm = d.norm();
    if dnorm == 0.0 {
        return Ok(Separation::Inseparable {
            witness: Some((p1.clone(), p2.clone())),
        });
    }
    let projected = range.transpose() * &d;
    let gap = projected.norm();
    if gap > rel_tol * dnorm {
        // Oriented so the first point scores `gap` below the second.
        Ok(Separation::Separable {
            functional: -(range * projected) / gap,
            gap,
        })
    } else {
        Ok(Separation::Inseparable {
            witness: Some((p1.clone(), p2.clone())),
        })
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
