//! Deciding which properties of an interaction row the data determine.
//!
//! A node's Gram matrix and moment vector summarize everything the measured
//! trajectory reveals about its interconnection row. The solution fiber is
//! the affine set of rows that explain the data equally well; a prior
//! restricts the candidates; a property assigns labels to candidates. The
//! verdict is `unique` when every feasible candidate carries one label,
//! `ambiguous` when at least two labels are feasible (each backed by a
//! concrete witness), and `inconsistent` when no candidate fits both the
//! data and the prior.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::lp::{LinearProgram, LpOutcome, Relation};
use crate::geometry::{
    separate_boxes, separate_points, AxisBox, Fiber, LabeledBox, PriorSet, Separation, Sign,
    SEPARATION_EPS,
};
use crate::gram::{analyze, GramAnalysis, NodeGram, RankTolerance};
use crate::group::{kernel_orbit_containment, relative_support, ZERO_TOL_REL};
use crate::model::InteractionMatrix;

/// Default bound on `‖M v − w‖ / (1 + ‖w‖)` above which the data are
/// declared inconsistent with the model class.
pub const CONSISTENCY_TOL: f64 = 1e-6;

/// Default cap on the number of label-distinct prior-piece pairs examined
/// by [`property_distinguishable`].
pub const PAIR_CAP: usize = 100_000;

// ---------------------------------------------------------------------------
// Settings
// ---------------------------------------------------------------------------

/// Tolerances steering every reconstruction decision. Each report embeds
/// the values used so tolerance-dependent claims stay auditable.
#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    /// Relative spectral cutoff defining numerical rank.
    pub rank_tol: RankTolerance,
    /// Zero threshold, relative to the largest magnitude of the vector
    /// being classified.
    pub zero_tol: f64,
    /// Residual gate: above it, data and model class are declared
    /// mutually inconsistent.
    pub consistency_tol: f64,
    /// Cap on examined prior-piece pairs in distinguishability scans.
    pub pair_cap: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            rank_tol: RankTolerance::default(),
            zero_tol: ZERO_TOL_REL,
            consistency_tol: CONSISTENCY_TOL,
            pair_cap: PAIR_CAP,
        }
    }
}

impl Settings {
    pub fn validate(&self) -> Result<()> {
        if !(self.zero_tol > 0.0 && self.zero_tol < 1.0) {
            return Err(Error::Parameter(format!(
                "zero tolerance must lie in (0, 1), got {}",
                self.zero_tol
            )));
        }
        if !(self.consistency_tol > 0.0 && self.consistency_tol < 1.0) {
            return Err(Error::Parameter(format!(
                "consistency tolerance must lie in (0, 1), got {}",
                self.consistency_tol
            )));
        }
        if self.pair_cap == 0 {
            return Err(Error::Parameter("pair cap must be positive".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Properties
// ---------------------------------------------------------------------------

/// The reconstructable quantities, from the finest (the row itself) to the
/// coarsest (an interaction count).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PropertyKind {
    /// The interconnection row exactly.
    Identity,
    /// Entrywise sign pattern (`-`, `0`, `+`), diagonal included.
    Sign,
    /// Entrywise presence/absence of an interaction, diagonal included.
    Connectivity,
    /// Presence/absence of interactions from *other* nodes: connectivity
    /// with the self-coordinate masked to zero.
    Adjacency,
    /// Number of interactions feeding the node (self-loop counted).
    Degree,
}

impl std::fmt::Display for PropertyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            PropertyKind::Identity => "identity",
            PropertyKind::Sign => "sign",
            PropertyKind::Connectivity => "connectivity",
            PropertyKind::Adjacency => "adjacency",
            PropertyKind::Degree => "degree",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for PropertyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(PropertyKind::Identity),
            "sign" => Ok(PropertyKind::Sign),
            "connectivity" => Ok(PropertyKind::Connectivity),
            "adjacency" => Ok(PropertyKind::Adjacency),
            "degree" => Ok(PropertyKind::Degree),
            other => Err(Error::Parameter(format!(
                "unknown property '{other}'; expected identity, sign, connectivity, adjacency, or degree"
            ))),
        }
    }
}

/// A property label attached to one interconnection row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum PropertyValue {
    Identity(Vec<f64>),
    Sign(Vec<Sign>),
    Connectivity(Vec<u8>),
    Adjacency(Vec<u8>),
    Degree(usize),
}

/// Evaluate a property on a single row. Magnitudes at or below
/// `zero_tol · ‖row‖_∞` count as zero; the adjacency label masks the
/// node's own coordinate, while sign, connectivity, and degree include it.
pub fn row_property(
    node: usize,
    row: &DVector<f64>,
    kind: PropertyKind,
    zero_tol: f64,
) -> PropertyValue {
    let eps = zero_tol * row.amax();
    let sign_at = |v: f64| Sign::classify(v, eps);
    match kind {
        PropertyKind::Identity => PropertyValue::Identity(row.iter().copied().collect()),
        PropertyKind::Sign => PropertyValue::Sign(row.iter().map(|&v| sign_at(v)).collect()),
        PropertyKind::Connectivity => PropertyValue::Connectivity(
            row.iter()
                .map(|&v| u8::from(sign_at(v) != Sign::Zero))
                .collect(),
        ),
        PropertyKind::Adjacency => PropertyValue::Adjacency(
            row.iter()
                .enumerate()
                .map(|(j, &v)| {
                    if j == node {
                        0
                    } else {
                        u8::from(sign_at(v) != Sign::Zero)
                    }
                })
                .collect(),
        ),
        PropertyKind::Degree => PropertyValue::Degree(
            row.iter()
                .filter(|&&v| sign_at(v) != Sign::Zero)
                .count(),
        ),
    }
}

/// Derive the property label a sign box carries for a non-identity
/// property; the box label pins the sign of every coordinate, so the
/// coarser labels follow directly.
fn box_property(node: usize, label: &[Sign], kind: PropertyKind) -> Option<PropertyValue> {
    match kind {
        PropertyKind::Identity => None,
        PropertyKind::Sign => Some(PropertyValue::Sign(label.to_vec())),
        PropertyKind::Connectivity => Some(PropertyValue::Connectivity(
            label.iter().map(|&s| u8::from(s != Sign::Zero)).collect(),
        )),
        PropertyKind::Adjacency => Some(PropertyValue::Adjacency(
            label
                .iter()
                .enumerate()
                .map(|(j, &s)| {
                    if j == node {
                        0
                    } else {
                        u8::from(s != Sign::Zero)
                    }
                })
                .collect(),
        )),
        PropertyKind::Degree => Some(PropertyValue::Degree(
            label.iter().filter(|&&s| s != Sign::Zero).count(),
        )),
    }
}

/// A whole-matrix property value: one row label per node, or the in-degree
/// sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum MatrixPropertyValue {
    Identity(Vec<Vec<f64>>),
    Sign(Vec<Vec<Sign>>),
    Connectivity(Vec<Vec<u8>>),
    Adjacency(Vec<Vec<u8>>),
    Degree(Vec<usize>),
}

/// Evaluate a property on a known interaction matrix. Entries at or below
/// `zero_tol` times the largest magnitude in the matrix count as zero.
pub fn property_of(
    a: &InteractionMatrix,
    kind: PropertyKind,
    zero_tol: f64,
) -> MatrixPropertyValue {
    let n = a.n();
    let eps = zero_tol * a.as_matrix().amax();
    let sign_at = |v: f64| Sign::classify(v, eps);
    match kind {
        PropertyKind::Identity => {
            MatrixPropertyValue::Identity((0..n).map(|i| a.row(i).iter().copied().collect()).collect())
        }
        PropertyKind::Sign => MatrixPropertyValue::Sign(
            (0..n)
                .map(|i| a.row(i).iter().map(|&v| sign_at(v)).collect())
                .collect(),
        ),
        PropertyKind::Connectivity => MatrixPropertyValue::Connectivity(
            (0..n)
                .map(|i| {
                    a.row(i)
                        .iter()
                        .map(|&v| u8::from(sign_at(v) != Sign::Zero))
                        .collect()
                })
                .collect(),
        ),
        PropertyKind::Adjacency => MatrixPropertyValue::Adjacency(
            (0..n)
                .map(|i| {
                    a.row(i)
                        .iter()
                        .enumerate()
                        .map(|(j, &v)| {
                            if j == i {
                                0
                            } else {
                                u8::from(sign_at(v) != Sign::Zero)
                            }
                        })
                        .collect()
                })
                .collect(),
        ),
        PropertyKind::Degree => MatrixPropertyValue::Degree(
            (0..n)
                .map(|i| {
                    a.row(i)
                        .iter()
                        .filter(|&&v| sign_at(v) != Sign::Zero)
                        .count()
                })
                .collect(),
        ),
    }
}

/// Assemble per-node row labels into a whole-matrix value when every node
/// agrees on the property kind. `None` when kinds are mixed or the slice
/// is empty.
pub fn assemble_property(values: &[PropertyValue]) -> Option<MatrixPropertyValue> {
    let first = values.first()?;
    match first {
        PropertyValue::Identity(_) => {
            let mut rows = Vec::with_capacity(values.len());
            for v in values {
                match v {
                    PropertyValue::Identity(r) => rows.push(r.clone()),
                    _ => return None,
                }
            }
            Some(MatrixPropertyValue::Identity(rows))
        }
        PropertyValue::Sign(_) => {
            let mut rows = Vec::with_capacity(values.len());
            for v in values {
                match v {
                    PropertyValue::Sign(r) => rows.push(r.clone()),
                    _ => return None,
                }
            }
            Some(MatrixPropertyValue::Sign(rows))
        }
        PropertyValue::Connectivity(_) => {
            let mut rows = Vec::with_capacity(values.len());
            for v in values {
                match v {
                    PropertyValue::Connectivity(r) => rows.push(r.clone()),
                    _ => return None,
                }
            }
            Some(MatrixPropertyValue::Connectivity(rows))
        }
        PropertyValue::Adjacency(_) => {
            let mut rows = Vec::with_capacity(values.len());
            for v in values {
                match v {
                    PropertyValue::Adjacency(r) => rows.push(r.clone()),
                    _ => return None,
                }
            }
            Some(MatrixPropertyValue::Adjacency(rows))
        }
        PropertyValue::Degree(_) => {
            let mut degrees = Vec::with_capacity(values.len());
            for v in values {
                match v {
                    PropertyValue::Degree(d) => degrees.push(*d),
                    _ => return None,
                }
            }
            Some(MatrixPropertyValue::Degree(degrees))
        }
    }
}

// ---------------------------------------------------------------------------
// Verdicts
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictStatus {
    /// Every data-consistent candidate in the prior carries one label.
    Unique,
    /// At least two labels are feasible; see the witnesses.
    Ambiguous,
    /// No candidate fits both the data and the prior.
    Inconsistent,
}

/// A feasible candidate row together with the property label it carries.
#[derive(Debug, Clone, Serialize)]
pub struct LabeledWitness {
    pub label: PropertyValue,
    pub candidate: Vec<f64>,
}

/// Per-node reconstruction outcome.
#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub node: usize,
    pub property: PropertyKind,
    pub status: VerdictStatus,
    /// The recovered label; present exactly when `status` is `unique`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<PropertyValue>,
    /// One feasible candidate per distinct feasible label; populated only
    /// when `status` is `ambiguous` (then it holds at least two entries).
    pub witnesses: Vec<LabeledWitness>,
    /// Relative residual `‖M v − w‖ / (1 + ‖w‖)` of the base solution.
    pub residual: f64,
    /// Number of prior pieces examined (1 for the unconstrained prior).
    pub pieces_checked: usize,
}

fn verdict_from_labels(
    node: usize,
    property: PropertyKind,
    witnesses: Vec<LabeledWitness>,
    residual: f64,
    pieces_checked: usize,
) -> Verdict {
    match witnesses.len() {
        0 => Verdict {
            node,
            property,
            status: VerdictStatus::Inconsistent,
            value: None,
            witnesses: Vec::new(),
            residual,
            pieces_checked,
        },
        1 => Verdict {
            node,
            property,
            status: VerdictStatus::Unique,
            value: Some(witnesses.into_iter().next().expect("one witness").label),
            witnesses: Vec::new(),
            residual,
            pieces_checked,
        },
        _ => Verdict {
            node,
            property,
            status: VerdictStatus::Ambiguous,
            value: None,
            witnesses,
            residual,
            pieces_checked,
        },
    }
}

// ---------------------------------------------------------------------------
// Solution fiber
// ---------------------------------------------------------------------------

/// Analyze one node's data and return the affine set of rows explaining it.
/// Errors when even the best-fitting row leaves a relative residual above
/// the consistency tolerance: the data then contradict the declared model
/// class and no reconstruction claim would be sound.
pub fn solution_fiber(gram: &NodeGram, settings: &Settings) -> Result<(GramAnalysis, Fiber)> {
    settings.validate()?;
    let analysis = analyze(gram, settings.rank_tol);
    let base = analysis.min_norm_solution();
    let residual = analysis.relative_residual(&base);
    if residual > settings.consistency_tol {
        return Err(Error::DataInconsistent {
            node: gram.node(),
            residual,
            tolerance: settings.consistency_tol,
        });
    }
    let fiber = Fiber::from_analysis(&analysis);
    Ok((analysis, fiber))
}

// ---------------------------------------------------------------------------
// Reconstruction
// ---------------------------------------------------------------------------

/// Reconstruct a property of one node's interconnection row from its Gram
/// summary and a prior, with a uniqueness certificate or explicit
/// counterexamples.
///
/// Piece priors: every piece the solution fiber reaches contributes its
/// label; box pieces carry their label directly (connectivity, adjacency,
/// and degree derive from the sign label), while discrete pieces are
/// labeled by evaluating the property on the candidate. The unconstrained
/// prior is decided analytically from the kernel: any kernel direction
/// sweeps a coordinate through every real value, so a property is unique
/// precisely when no kernel direction can change its label.
pub fn reconstruct_property(
    gram: &NodeGram,
    prior: &PriorSet,
    kind: PropertyKind,
    settings: &Settings,
) -> Result<Verdict> {
    let (analysis, fiber) = solution_fiber(gram, settings)?;
    let node = gram.node();
    let residual = fiber.residual();
    match prior {
        PriorSet::Unconstrained => unconstrained_verdict(node, kind, &analysis, residual, settings),
        PriorSet::Discrete(points) => {
            check_prior_dim(points.first().map(|p| p.len()), gram.n())?;
            let mut witnesses: Vec<LabeledWitness> = Vec::new();
            for p in points {
                if analysis.relative_residual(p) > settings.consistency_tol {
                    continue;
                }
                let label = row_property(node, p, kind, settings.zero_tol);
                if !witnesses.iter().any(|w| w.label == label) {
                    witnesses.push(LabeledWitness {
                        label,
                        candidate: p.iter().copied().collect(),
                    });
                }
            }
            Ok(verdict_from_labels(
                node,
                kind,
                witnesses,
                residual,
                points.len(),
            ))
        }
        PriorSet::Boxes(boxes) => {
            check_prior_dim(boxes.first().map(|b| b.body.dim()), gram.n())?;
            if kind == PropertyKind::Identity {
                identity_on_boxes(node, &fiber, boxes, residual)
            } else {
                let mut witnesses: Vec<LabeledWitness> = Vec::new();
                for lb in boxes {
                    let Some(point) = fiber.intersect_box(&lb.body)? else {
                        continue;
                    };
                    let label =
                        box_property(node, &lb.label, kind).expect("non-identity box label");
                    if !witnesses.iter().any(|w| w.label == label) {
                        witnesses.push(LabeledWitness {
                            label,
                            candidate: point.iter().copied().collect(),
                        });
                    }
                }
                Ok(verdict_from_labels(
                    node,
                    kind,
                    witnesses,
                    residual,
                    boxes.len(),
                ))
            }
        }
    }
}

fn check_prior_dim(prior_dim: Option<usize>, n: usize) -> Result<()> {
    match prior_dim {
        Some(d) if d != n => Err(Error::Dimension(format!(
            "prior pieces have dimension {d} but the node has {n} coordinates"
        ))),
        _ => Ok(()),
    }
}

/// Identity on a box-union prior: the label of a feasible candidate is the
/// candidate itself, so uniqueness requires the fiber to meet the union in
/// exactly one point. A piece whose intersection has positive diameter
/// yields two witnesses from within that piece.
fn identity_on_boxes(
    node: usize,
    fiber: &Fiber,
    boxes: &[LabeledBox],
    residual: f64,
) -> Result<Verdict> {
    let mut witnesses: Vec<LabeledWitness> = Vec::new();
    let push = |point: &DVector<f64>, witnesses: &mut Vec<LabeledWitness>| {
        let label = PropertyValue::Identity(point.iter().copied().collect());
        if !witnesses.iter().any(|w| w.label == label) {
            witnesses.push(LabeledWitness {
                label,
                candidate: point.iter().copied().collect(),
            });
        }
    };
    for lb in boxes {
        let Some(point) = fiber.intersect_box(&lb.body)? else {
            continue;
        };
        match fiber_box_spread(fiber, &lb.body)? {
            Some((p1, p2)) => {
                push(&p1, &mut witnesses);
                push(&p2, &mut witnesses);
            }
            None => push(&point, &mut witnesses),
        }
        if witnesses.len() >= 2 {
            // Already ambiguous; keep scanning only to stay deterministic
            // about pieces_checked, not to add more witnesses.
            break;
        }
    }
    Ok(verdict_from_labels(
        node,
        PropertyKind::Identity,
        witnesses,
        residual,
        boxes.len(),
    ))
}

/// Two points where the fiber meets the box at distinct locations, if the
/// intersection is not a singleton: extremize each kernel coefficient over
/// the intersection polytope until a positive spread appears.
fn fiber_box_spread(fiber: &Fiber, bx: &AxisBox) -> Result<Option<(DVector<f64>, DVector<f64>)>> {
    let scale = 1.0 + bx.lo().amax().max(bx.hi().amax());
    for dir in 0..fiber.dim() {
        let lo = extreme_in_box(fiber, bx, dir, false)?;
        let hi = extreme_in_box(fiber, bx, dir, true)?;
        if let (Some((vlo, plo)), Some((vhi, phi))) = (lo, hi) {
            if vhi - vlo > 1e-9 * scale {
                return Ok(Some((plo, phi)));
            }
        }
    }
    Ok(None)
}

/// Extremize one kernel coefficient over `{β : lo ≤ base + Zβ ≤ hi}`;
/// `None` when the fiber misses the box.
fn extreme_in_box(
    fiber: &Fiber,
    bx: &AxisBox,
    dir: usize,
    maximize: bool,
) -> Result<Option<(f64, DVector<f64>)>> {
    let kdim = fiber.dim();
    let n = fiber.n();
    let mut objective = vec![0.0; kdim];
    objective[dir] = if maximize { -1.0 } else { 1.0 };
    let mut prog = LinearProgram::minimize(objective);
    for j in 0..n {
        let mut row = vec![0.0; kdim];
        for k in 0..kdim {
            row[k] = fiber.kernel()[(j, k)];
        }
        prog.constrain(row.clone(), Relation::Ge, bx.lo()[j] - fiber.point()[j]);
        prog.constrain(row, Relation::Le, bx.hi()[j] - fiber.point()[j]);
    }
    match prog.solve()? {
        LpOutcome::Optimal { value, point } => {
            let beta = DVector::from_column_slice(&point);
            let v = fiber.point() + fiber.kernel() * beta;
            let extreme = if maximize { -value } else { value };
            Ok(Some((extreme, v)))
        }
        LpOutcome::Infeasible => Ok(None),
        LpOutcome::Unbounded => Err(Error::Numerical(
            "bounded box programs cannot be unbounded".into(),
        )),
    }
}

/// Analytic rules for the unconstrained prior. The fiber is nonempty by
/// construction, so the verdict is never inconsistent here.
fn unconstrained_verdict(
    node: usize,
    kind: PropertyKind,
    analysis: &GramAnalysis,
    residual: f64,
    settings: &Settings,
) -> Result<Verdict> {
    let base = analysis.min_norm_solution();
    let kernel = analysis.kernel_basis();
    let unique = if kernel.ncols() == 0 {
        true
    } else if kind == PropertyKind::Adjacency {
        // Kernel directions that only move the self-coordinate leave the
        // adjacency label untouched.
        kernel_orbit_containment(node, &kernel, settings.zero_tol)
            .moved()
            .is_empty()
    } else {
        false
    };
    if unique {
        let label = row_property(node, &base, kind, settings.zero_tol);
        return Ok(Verdict {
            node,
            property: kind,
            status: VerdictStatus::Unique,
            value: Some(label),
            witnesses: Vec::new(),
            residual,
            pieces_checked: 1,
        });
    }
    let (w1, w2) = distinct_label_pair(node, kind, &base, &kernel, settings.zero_tol)
        .ok_or_else(|| {
            Error::Numerical(format!(
                "node {node}: the kernel admits distinct {kind} labels but none could be realized numerically"
            ))
        })?;
    Ok(Verdict {
        node,
        property: kind,
        status: VerdictStatus::Ambiguous,
        value: None,
        witnesses: vec![w1, w2],
        residual,
        pieces_checked: 1,
    })
}

/// Construct two points on the fiber `base + span(kernel)` carrying
/// different labels for `kind`. Candidates are swept deterministically
/// along the single most visible kernel direction: the base point itself, a
/// generic point clear of every zero crossing, each crossing (one
/// coordinate exactly zero), and each mirror point (one coordinate's sign
/// flipped). Labels are evaluated with the same classifier used everywhere
/// else, so a returned pair is verified, not assumed.
fn distinct_label_pair(
    node: usize,
    kind: PropertyKind,
    base: &DVector<f64>,
    kernel: &DMatrix<f64>,
    zero_tol: f64,
) -> Option<(LabeledWitness, LabeledWitness)> {
    let n = base.len();
    if kernel.ncols() == 0 {
        return None;
    }
    // Column choice: adjacency needs a direction that moves an
    // off-diagonal coordinate; everything else takes the column with the
    // largest single entry (ties resolved by lowest index).
    let mut col = 0usize;
    let mut best = -1.0f64;
    for c in 0..kernel.ncols() {
        for j in 0..n {
            if kind == PropertyKind::Adjacency && j == node {
                continue;
            }
            let m = kernel[(j, c)].abs();
            if m > best {
                best = m;
                col = c;
            }
        }
    }
    if best <= 0.0 {
        return None;
    }
    let z = kernel.column(col).clone_owned();
    let zmax = z.amax();
    let support: Vec<usize> = (0..n).filter(|&j| z[j].abs() >= 1e-6 * zmax).collect();

    let mut ts: Vec<f64> = vec![0.0];
    let crossings: Vec<f64> = support.iter().map(|&j| -base[j] / z[j]).collect();
    let tmax = crossings.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    ts.push(1.0 + 2.0 * tmax);
    ts.push(-(1.0 + 2.0 * tmax));
    ts.extend(crossings.iter().copied());
    ts.extend(crossings.iter().map(|t| 2.0 * t));

    // Label equality is transitive, so comparing every candidate against
    // the first is enough to detect any differing pair.
    let mut first: Option<LabeledWitness> = None;
    for t in ts {
        if !t.is_finite() {
            continue;
        }
        let v = base + &z * t;
        let label = row_property(node, &v, kind, zero_tol);
        match &first {
            None => {
                first = Some(LabeledWitness {
                    label,
                    candidate: v.iter().copied().collect(),
                });
            }
            Some(w) if w.label != label => {
                return Some((
                    w.clone(),
                    LabeledWitness {
                        label,
                        candidate: v.iter().copied().collect(),
                    },
                ));
            }
            Some(_) => {}
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Adjacency under coupling-function uncertainty
// ---------------------------------------------------------------------------

/// Decidability of one incoming interaction when the coupling functions are
/// known only up to the declared linear deformation family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeStatus {
    Present,
    Absent,
    Unknown,
}

/// Per-coordinate adjacency verdict for one node under coupling
/// uncertainty. Interaction weights and signs are never reconstructable in
/// this regime (the deformation family rescales coordinates freely), and
/// the self-loop is decidable only when the data pin the row exactly and
/// the row has no off-diagonal interactions to fold into it.
#[derive(Debug, Clone, Serialize)]
pub struct AdjacencyVerdict {
    pub node: usize,
    /// One status per coordinate; index `node` is the self-loop.
    pub statuses: Vec<EdgeStatus>,
    /// Off-diagonal coordinates the kernel never moves: these are the
    /// decidable ones.
    pub identifiable: Vec<usize>,
    pub residual: f64,
}

/// Reconstruct what remains of the adjacency row when couplings carry the
/// linear deformation freedom: coordinates the kernel moves are unknown;
/// untouched off-diagonal coordinates resolve to present/absent from the
/// base solution; the self-coordinate resolves only under full excitation
/// with no off-diagonal support.
pub fn reconstruct_adjacency_under_uncertainty(
    gram: &NodeGram,
    settings: &Settings,
) -> Result<AdjacencyVerdict> {
    let (analysis, fiber) = solution_fiber(gram, settings)?;
    let node = gram.node();
    let n = gram.n();
    let base = analysis.min_norm_solution();
    let kernel = analysis.kernel_basis();
    let coverage = kernel_orbit_containment(node, &kernel, settings.zero_tol);
    let eps = settings.zero_tol * base.amax();
    let (off_support, _) = relative_support(node, &base, settings.zero_tol);
    let self_moved = (0..kernel.ncols()).any(|c| {
        let col = kernel.column(c);
        col[node].abs() > settings.zero_tol * col.amax()
    });

    let statuses = (0..n)
        .map(|j| {
            if j == node {
                if analysis.pe() && off_support.is_empty() && !self_moved {
                    presence(base[j], eps)
                } else {
                    EdgeStatus::Unknown
                }
            } else if coverage.moved().contains(&j) {
                EdgeStatus::Unknown
            } else {
                presence(base[j], eps)
            }
        })
        .collect();

    Ok(AdjacencyVerdict {
        node,
        statuses,
        identifiable: coverage.identifiable().into_iter().collect(),
        residual: fiber.residual(),
    })
}

fn presence(v: f64, eps: f64) -> EdgeStatus {
    if v.abs() > eps {
        EdgeStatus::Present
    } else {
        EdgeStatus::Absent
    }
}

// ---------------------------------------------------------------------------
// Distinguishability
// ---------------------------------------------------------------------------

/// The first pair of prior pieces carrying different labels that the data
/// cannot tell apart.
#[derive(Debug, Clone, Serialize)]
pub struct ConfoundedPair {
    pub labels: (PropertyValue, PropertyValue),
    /// Indices of the violating pieces in the prior's order; equal indices
    /// mean two points inside the same piece. Absent for the unconstrained
    /// prior.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pieces: Option<(usize, usize)>,
    /// Candidates on a common fiber realizing the two labels.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<(Vec<f64>, Vec<f64>)>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum Distinguishability {
    /// Every pair of label-distinct prior pieces is fiber-separated: the
    /// property is reconstructable from any data this excitation produces.
    Distinguishable,
    /// Some fiber meets two pieces with different labels.
    Confounded(ConfoundedPair),
}

impl Distinguishability {
    pub fn is_distinguishable(&self) -> bool {
        matches!(self, Distinguishability::Distinguishable)
    }
}

/// Decide whether the excitation structure distinguishes every pair of
/// label-distinct candidates in the prior. The interpretation is exact
/// when the coupling functions are declared exact; under coupling
/// uncertainty, use [`reconstruct_adjacency_under_uncertainty`].
///
/// Pairs are scanned in lexicographic order and the first violation is
/// returned. When the number of label-distinct pairs exceeds
/// `settings.pair_cap`, a scale error advises restricting the prior.
pub fn property_distinguishable(
    analysis: &GramAnalysis,
    prior: &PriorSet,
    kind: PropertyKind,
    settings: &Settings,
) -> Result<Distinguishability> {
    settings.validate()?;
    let node = analysis.node();
    let range = analysis.range_basis();
    let kernel = analysis.kernel_basis();
    match prior {
        PriorSet::Unconstrained => {
            if analysis.pe() {
                return Ok(Distinguishability::Distinguishable);
            }
            if kind == PropertyKind::Adjacency
                && kernel_orbit_containment(node, &kernel, settings.zero_tol)
                    .moved()
                    .is_empty()
            {
                return Ok(Distinguishability::Distinguishable);
            }
            let base = analysis.min_norm_solution();
            let (w1, w2) = distinct_label_pair(node, kind, &base, &kernel, settings.zero_tol)
                .ok_or_else(|| {
                    Error::Numerical(format!(
                        "node {node}: kernel admits distinct {kind} labels but none could be realized"
                    ))
                })?;
            Ok(Distinguishability::Confounded(ConfoundedPair {
                labels: (w1.label, w2.label),
                pieces: None,
                witness: Some((w1.candidate, w2.candidate)),
            }))
        }
        PriorSet::Discrete(points) => {
            let labels: Vec<PropertyValue> = points
                .iter()
                .map(|p| row_property(node, p, kind, settings.zero_tol))
                .collect();
            check_pair_cap(&labels, settings.pair_cap)?;
            let ids = label_ids(&labels);
            for a in 0..points.len() {
                for b in (a + 1)..points.len() {
                    if ids[a] == ids[b] {
                        continue;
                    }
                    if let Separation::Inseparable { witness } =
                        separate_points(&range, &points[a], &points[b], SEPARATION_EPS)?
                    {
                        return Ok(Distinguishability::Confounded(ConfoundedPair {
                            labels: (labels[a].clone(), labels[b].clone()),
                            pieces: Some((a, b)),
                            witness: witness
                                .map(|(v1, v2)| (vec_of(&v1), vec_of(&v2))),
                        }));
                    }
                }
            }
            Ok(Distinguishability::Distinguishable)
        }
        PriorSet::Boxes(boxes) => {
            if kind == PropertyKind::Identity {
                return identity_boxes_distinguishable(&range, &kernel, boxes, settings);
            }
            let labels: Vec<PropertyValue> = boxes
                .iter()
                .map(|lb| box_property(node, &lb.label, kind).expect("non-identity box label"))
                .collect();
            check_pair_cap(&labels, settings.pair_cap)?;
            let ids = label_ids(&labels);
            for a in 0..boxes.len() {
                for b in (a + 1)..boxes.len() {
                    if ids[a] == ids[b] {
                        continue;
                    }
                    if let Separation::Inseparable { witness } =
                        separate_boxes(&range, &kernel, &boxes[a].body, &boxes[b].body)?
                    {
                        return Ok(Distinguishability::Confounded(ConfoundedPair {
                            labels: (labels[a].clone(), labels[b].clone()),
                            pieces: Some((a, b)),
                            witness: witness
                                .map(|(v1, v2)| (vec_of(&v1), vec_of(&v2))),
                        }));
                    }
                }
            }
            Ok(Distinguishability::Distinguishable)
        }
    }
}

fn vec_of(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

/// Deterministic small integer per distinct label, keyed by the canonical
/// JSON encoding and assigned in first-occurrence order.
fn label_ids(labels: &[PropertyValue]) -> Vec<usize> {
    let mut map: HashMap<String, usize> = HashMap::new();
    labels
        .iter()
        .map(|l| {
            let key = serde_json::to_string(l).expect("labels serialize");
            let next = map.len();
            *map.entry(key).or_insert(next)
        })
        .collect()
}

/// Error out before scanning when the number of label-distinct pairs
/// exceeds the cap.
fn check_pair_cap(labels: &[PropertyValue], cap: usize) -> Result<()> {
    let ids = label_ids(labels);
    let mut counts: HashMap<usize, u128> = HashMap::new();
    for id in &ids {
        *counts.entry(*id).or_insert(0) += 1;
    }
    let m = labels.len() as u128;
    let same: u128 = counts.values().map(|c| c * (c - 1) / 2).sum();
    let cross = m * (m - 1) / 2 - same;
    if cross > cap as u128 {
        return Err(Error::Scale(format!(
            "{cross} label-distinct piece pairs exceed the cap of {cap}; restrict the prior to the pieces of interest"
        )));
    }
    Ok(())
}

/// Identity on boxes: a single piece in which the fiber direction fits with
/// positive length already confounds the property; otherwise every pair of
/// distinct pieces must separate.
fn identity_boxes_distinguishable(
    range: &DMatrix<f64>,
    kernel: &DMatrix<f64>,
    boxes: &[LabeledBox],
    settings: &Settings,
) -> Result<Distinguishability> {
    for (idx, lb) in boxes.iter().enumerate() {
        if let Some((p1, p2)) = box_internal_fiber_pair(kernel, &lb.body) {
            return Ok(Distinguishability::Confounded(ConfoundedPair {
                labels: (
                    PropertyValue::Identity(vec_of(&p1)),
                    PropertyValue::Identity(vec_of(&p2)),
                ),
                pieces: Some((idx, idx)),
                witness: Some((vec_of(&p1), vec_of(&p2))),
            }));
        }
    }
    let m = boxes.len() as u128;
    if m * (m - 1) / 2 > settings.pair_cap as u128 {
        return Err(Error::Scale(format!(
            "{} piece pairs exceed the cap of {}; restrict the prior to the pieces of interest",
            m * (m - 1) / 2,
            settings.pair_cap
        )));
    }
    for a in 0..boxes.len() {
        for b in (a + 1)..boxes.len() {
            if boxes[a].body == boxes[b].body {
                continue;
            }
            if let Separation::Inseparable { witness } =
                separate_boxes(range, kernel, &boxes[a].body, &boxes[b].body)?
            {
                let (v1, v2) = match &witness {
                    Some((v1, v2)) => (vec_of(v1), vec_of(v2)),
                    None => (vec_of(&boxes[a].body.center()), vec_of(&boxes[b].body.center())),
                };
                return Ok(Distinguishability::Confounded(ConfoundedPair {
                    labels: (
                        PropertyValue::Identity(v1.clone()),
                        PropertyValue::Identity(v2.clone()),
                    ),
                    pieces: Some((a, b)),
                    witness: Some((v1, v2)),
                }));
            }
        }
    }
    Ok(Distinguishability::Distinguishable)
}

/// Two distinct points of the box lying on one fiber, when a kernel
/// direction fits inside the box: the direction must vanish on every
/// zero-width coordinate, which is a null-space condition on the kernel
/// basis restricted to those rows.
fn box_internal_fiber_pair(
    kernel: &DMatrix<f64>,
    bx: &AxisBox,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let k = kernel.ncols();
    if k == 0 {
        return None;
    }
    let n = kernel.nrows();
    let width = bx.hi() - bx.lo();
    let degenerate: Vec<usize> = (0..n).filter(|&j| width[j] <= 0.0).collect();
    let dir: DVector<f64> = if degenerate.is_empty() {
        kernel.column(0).clone_owned()
    } else {
        let zd = DMatrix::from_fn(degenerate.len(), k, |r, c| kernel[(degenerate[r], c)]);
        let gram_k = zd.transpose() * &zd;
        // SVD instead of symmetric QR iteration, for the same accuracy
        // reason as the main spectral analysis.
        let svd = gram_k.svd(true, false);
        let q = svd.u.expect("left singular vectors were requested");
        let lmax = svd.singular_values.iter().fold(0.0f64, |m, &l| m.max(l));
        let (imin, lmin) = svd
            .singular_values
            .iter()
            .enumerate()
            .fold((0usize, f64::INFINITY), |(bi, bl), (i, &l)| {
                if l < bl {
                    (i, l)
                } else {
                    (bi, bl)
                }
            });
        if lmin > 1e-20 * (1.0 + lmax) {
            return None;
        }
        let beta = q.column(imin).clone_owned();
        kernel * beta
    };
    let dmax = dir.amax();
    if dmax <= 0.0 {
        return None;
    }
    let mut t = f64::INFINITY;
    for j in 0..n {
        if dir[j].abs() > 1e-12 * dmax {
            if width[j] <= 0.0 {
                return None;
            }
            t = t.min(width[j] / (2.0 * dir[j].abs()));
        }
    }
    if !t.is_finite() || t <= 0.0 {
        return None;
    }
    let c = bx.center();
    let half = &dir * (t / 2.0);
    Some((&c - &half, &c + &half))
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
