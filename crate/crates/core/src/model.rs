//! System descriptions and trajectory data.
//!
//! A networked system couples `n` scalar states through pairwise coupling
//! functions weighted by an interaction matrix `A`:
//!
//! ```text
//! dx_i/dt = sum_j a_ij * f_ij(x_i, x_j) + u_i(t)
//! ```
//!
//! Stacking the couplings of node `i` into a regressor vector `f_i(x)` turns
//! each node into a linear regression problem `dx_i/dt = f_i(x)^T a_i + u_i`
//! for the interconnection vector `a_i` (row `i` of `A`, transposed). This
//! module provides the matrix/regressor/input types, a fixed-step RK4
//! simulator that records exact right-hand-side derivatives, steady-state
//! computation for the generalized Lotka-Volterra preset, finite-difference
//! derivative estimation for imported data, and the delimited trajectory file
//! format.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write as IoWrite};
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// States above this magnitude abort a simulation as a blow-up.
pub const BLOWUP_BOUND: f64 = 1e12;

/// Relative jitter above which a time grid is rejected as non-uniform.
pub const GRID_JITTER_TOL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Interaction matrix
// ---------------------------------------------------------------------------

/// Square matrix of coupling weights; entry `(i, j)` scales the influence of
/// node `j` on node `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionMatrix {
    mat: DMatrix<f64>,
}

impl InteractionMatrix {
    /// Wrap a square matrix with finite entries.
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::Dimension(format!(
                "interaction matrix must be square, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        if mat.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter(
                "interaction matrix has a non-finite entry".into(),
            ));
        }
        Ok(Self { mat })
    }

    /// Build from nested rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension(
                "interaction matrix rows must all have length n".into(),
            ));
        }
        let mat = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::new(mat)
    }

    /// Number of nodes.
    pub fn n(&self) -> usize {
        self.mat.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.mat[(i, j)]
    }

    /// Interconnection vector of node `i`: the transpose of row `i`.
    pub fn row(&self, i: usize) -> DVector<f64> {
        self.mat.row(i).transpose()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }
}

// ---------------------------------------------------------------------------
// Regressor families
// ---------------------------------------------------------------------------

/// Which pairwise coupling family generated the regressors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingPreset {
    /// `f_ij(x_i, x_j) = x_i * x_j` (generalized Lotka-Volterra).
    Glv,
    /// `f_ij(x_i, x_j) = x_j` (linear coupling).
    Linear,
    /// User-supplied pairwise evaluator.
    Custom,
}

/// How much the analyst trusts the declared coupling functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UncertaintyLevel {
    /// Couplings are known exactly.
    Exact,
    /// Couplings are known only up to the linear uncertainty group
    /// (per-coordinate rescaling plus self-row mixing); see [`crate::group`].
    LinearGroup,
}

type RegressorEval = dyn Fn(usize, &DVector<f64>) -> DVector<f64> + Send + Sync;

/// Per-node regressor vectors `f_i(x)` whose `j`-th component depends only on
/// `(x_i, x_j)`, plus optional left-composed linear maps modelling declared
/// transforms or deformations of the coupling functions.
#[derive(Clone)]
pub struct RegressorFamily {
    n: usize,
    preset: CouplingPreset,
    uncertainty: UncertaintyLevel,
    base: Arc<RegressorEval>,
    /// Per-node matrices applied on the left of the base evaluation.
    left_maps: Vec<Option<DMatrix<f64>>>,
}

impl fmt::Debug for RegressorFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RegressorFamily")
            .field("n", &self.n)
            .field("preset", &self.preset)
            .field("uncertainty", &self.uncertainty)
            .field(
                "left_maps",
                &self.left_maps.iter().filter(|m| m.is_some()).count(),
            )
            .finish()
    }
}

impl RegressorFamily {
    /// Product couplings `f_ij = x_i * x_j`.
    pub fn glv(n: usize) -> Self {
        Self {
            n,
            preset: CouplingPreset::Glv,
            uncertainty: UncertaintyLevel::Exact,
            base: Arc::new(|i: usize, x: &DVector<f64>| x * x[i]),
            left_maps: vec![None; n],
        }
    }

    /// Linear couplings `f_ij = x_j`.
    pub fn linear(n: usize) -> Self {
        Self {
            n,
            preset: CouplingPreset::Linear,
            uncertainty: UncertaintyLevel::Exact,
            base: Arc::new(|_i: usize, x: &DVector<f64>| x.clone()),
            left_maps: vec![None; n],
        }
    }

    /// User-supplied evaluator mapping `(node, state)` to the regressor
    /// vector. The pairwise structure — component `j` of `f_i` depends only
    /// on `(x_i, x_j)` — is verified by probe evaluations: perturbing any
    /// coordinate `k` with `k != i` must leave every component except `k`
    /// unchanged.
    pub fn custom<F>(n: usize, eval: F) -> Result<Self>
    where
        F: Fn(usize, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        let family = Self {
            n,
            preset: CouplingPreset::Custom,
            uncertainty: UncertaintyLevel::Exact,
            base: Arc::new(eval),
            left_maps: vec![None; n],
        };
        family.verify_pairwise()?;
        Ok(family)
    }

    /// Probe the base evaluator for the pairwise property. Deterministic:
    /// fixed seed, a handful of random states per node.
    fn verify_pairwise(&self) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x7061_6972_7769_7365); // "pairwise"
        const TRIALS: usize = 4;
        for _ in 0..TRIALS {
            let x = DVector::from_fn(self.n, |_, _| rng.gen_range(-2.0..2.0));
            for i in 0..self.n {
                let reference = (self.base)(i, &x);
                if reference.len() != self.n {
                    return Err(Error::Dimension(format!(
                        "custom regressor returned length {} for node {i}, expected {}",
                        reference.len(),
                        self.n
                    )));
                }
                for k in 0..self.n {
                    if k == i {
                        continue; // perturbing x_i may move every component
                    }
                    let mut shifted = x.clone();
                    shifted[k] += 1.0 + rng.gen_range(0.0..1.0);
                    let probed = (self.base)(i, &shifted);
                    for j in 0..self.n {
                        if j == k {
                            continue;
                        }
                        let scale = 1.0 + reference[j].abs();
                        if (probed[j] - reference[j]).abs() > 1e-12 * scale {
                            return Err(Error::Parameter(format!(
                                "regressor is not pairwise: component {j} of node {i} \
                                 changed when coordinate {k} was perturbed"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn preset(&self) -> CouplingPreset {
        self.preset
    }

    pub fn uncertainty(&self) -> UncertaintyLevel {
        self.uncertainty
    }

    /// Same family with a different declared uncertainty level.
    pub fn with_uncertainty(mut self, level: UncertaintyLevel) -> Self {
        self.uncertainty = level;
        self
    }

    /// Evaluate `f_i(x)`, applying any left-composed map for node `i`.
    pub fn evaluate(&self, node: usize, x: &DVector<f64>) -> DVector<f64> {
        let raw = (self.base)(node, x);
        match &self.left_maps[node] {
            Some(map) => map * raw,
            None => raw,
        }
    }

    /// Left-compose `map` onto node `node`'s regressor: `f_i -> map * f_i`.
    /// Used for declared coupling transforms and for deformation probes; the
    /// result is in general no longer pairwise.
    pub fn left_composed(&self, node: usize, map: &DMatrix<f64>) -> Result<Self> {
        if map.nrows() != self.n || map.ncols() != self.n {
            return Err(Error::Dimension(format!(
                "left map must be {0}x{0}, got {1}x{2}",
                self.n,
                map.nrows(),
                map.ncols()
            )));
        }
        let mut out = self.clone();
        out.left_maps[node] = Some(match &self.left_maps[node] {
            Some(old) => map * old,
            None => map.clone(),
        });
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// GLV parameters
// ---------------------------------------------------------------------------

/// Growth rates for the generalized Lotka-Volterra preset, whose intrinsic
/// dynamics enter as the known input `u_i(t) = r_i * x_i(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlvParameters {
    growth: DVector<f64>,
}

impl GlvParameters {
    pub fn new(growth: DVector<f64>) -> Result<Self> {
        if growth.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("growth rates must be finite".into()));
        }
        Ok(Self { growth })
    }

    pub fn from_slice(growth: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(growth))
    }

    pub fn n(&self) -> usize {
        self.growth.len()
    }

    pub fn growth(&self) -> &DVector<f64> {
        &self.growth
    }

    /// The matching known-input signal `u_i(t) = r_i * x_i(t)`.
    pub fn input(&self) -> InputSignal {
        InputSignal::Growth {
            rates: self.growth.clone(),
        }
    }
}

/// Positive steady state of `dx/dt = x .* (r + A x)`: solves `A x = -r`.
/// Returns `None` when `A` is singular within a relative tolerance of 1e-12
/// on its singular values. The caller decides whether non-positive solutions
/// are acceptable.
pub fn glv_steady_state(a: &InteractionMatrix, params: &GlvParameters) -> Option<DVector<f64>> {
    if params.n() != a.n() {
        return None;
    }
    let svd = a.as_matrix().clone().svd(true, true);
    let smax = svd.singular_values.max();
    if smax == 0.0 || svd.singular_values.min() <= 1e-12 * smax {
        return None;
    }
    svd.solve(&(-params.growth()), 0.0).ok()
}

// ---------------------------------------------------------------------------
// Input signals
// ---------------------------------------------------------------------------

/// Known input `u(t)` applied during simulation and recorded alongside the
/// states. The growth variant depends on the current state, which is why the
/// evaluation takes `x`.
#[derive(Debug, Clone, PartialEq)]
pub enum InputSignal {
    Zero,
    Constant(DVector<f64>),
    /// `u_i(t) = amplitude_i * sin(frequency_i * t + phase_i)`.
    Sinusoid {
        amplitude: DVector<f64>,
        frequency: DVector<f64>,
        phase: DVector<f64>,
    },
    /// `u_i(t) = rates_i * x_i(t)` — the Lotka-Volterra intrinsic term.
    Growth { rates: DVector<f64> },
    /// Pointwise sum of the parts.
    Composite(Vec<InputSignal>),
}

impl InputSignal {
    pub fn evaluate(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        let n = x.len();
        match self {
            InputSignal::Zero => DVector::zeros(n),
            InputSignal::Constant(c) => c.clone(),
            InputSignal::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => DVector::from_fn(n, |i, _| amplitude[i] * (frequency[i] * t + phase[i]).sin()),
            InputSignal::Growth { rates } => DVector::from_fn(n, |i, _| rates[i] * x[i]),
            InputSignal::Composite(parts) => {
                let mut acc = DVector::zeros(n);
                for part in parts {
                    acc += part.evaluate(t, x);
                }
                acc
            }
        }
    }

    /// Dimension check against the system size.
    pub fn check_dim(&self, n: usize) -> Result<()> {
        let ok = match self {
            InputSignal::Zero => true,
            InputSignal::Constant(c) => c.len() == n,
            InputSignal::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => amplitude.len() == n && frequency.len() == n && phase.len() == n,
            InputSignal::Growth { rates } => rates.len() == n,
            InputSignal::Composite(parts) => {
                for part in parts {
                    part.check_dim(n)?;
                }
                true
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "input signal dimension does not match system size {n}"
            )))
        }
    }
}

// ---------------------------------------------------------------------------
// Trajectories
// ---------------------------------------------------------------------------

/// Uniformly sampled trajectory: times, states, recorded inputs, and
/// optionally state derivatives. Simulated trajectories carry exact
/// right-hand-side derivatives; imported data can have them estimated by
/// [`estimate_derivatives`].
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<DVector<f64>>,
    inputs: Vec<DVector<f64>>,
    derivatives: Option<Vec<DVector<f64>>>,
}

impl Trajectory {
    /// Assemble a trajectory and validate its invariants: at least two
    /// samples, matching dimensions, finite values, strictly increasing
    /// uniform times (relative jitter at most [`GRID_JITTER_TOL`]).
    pub fn new(
        times: Vec<f64>,
        states: Vec<DVector<f64>>,
        inputs: Vec<DVector<f64>>,
        derivatives: Option<Vec<DVector<f64>>>,
    ) -> Result<Self> {
        let m = times.len();
        if m < 2 {
            return Err(Error::InsufficientData(
                "a trajectory needs at least two samples".into(),
            ));
        }
        if states.len() != m || inputs.len() != m {
            return Err(Error::Dimension(
                "times, states and inputs must have equal sample counts".into(),
            ));
        }
        if let Some(d) = &derivatives {
            if d.len() != m {
                return Err(Error::Dimension(
                    "derivative sample count must match the state samples".into(),
                ));
            }
        }
        let n = states[0].len();
        for (k, s) in states.iter().enumerate() {
            if s.len() != n || inputs[k].len() != n {
                return Err(Error::Dimension(format!(
                    "sample {k} has inconsistent dimension"
                )));
            }
            let deriv_bad = derivatives
                .as_ref()
                .map(|d| d[k].len() != n || d[k].iter().any(|v| !v.is_finite()))
                .unwrap_or(false);
            if !times[k].is_finite()
                || s.iter().any(|v| !v.is_finite())
                || inputs[k].iter().any(|v| !v.is_finite())
                || deriv_bad
            {
                return Err(Error::Parameter(format!(
                    "sample {k} contains a non-finite value"
                )));
            }
        }
        let mean_dt = (times[m - 1] - times[0]) / (m - 1) as f64;
        if mean_dt <= 0.0 {
            return Err(Error::Parameter("times must be increasing".into()));
        }
        for k in 1..m {
            let dt = times[k] - times[k - 1];
            if (dt - mean_dt).abs() > GRID_JITTER_TOL * mean_dt {
                return Err(Error::Parameter(format!(
                    "non-uniform time grid at sample {k}: dt = {dt:.12e}, mean = {mean_dt:.12e}"
                )));
            }
        }
        Ok(Self {
            times,
            states,
            inputs,
            derivatives,
        })
    }

    pub fn n(&self) -> usize {
        self.states[0].len()
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false // invariant: at least two samples
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn time(&self, k: usize) -> f64 {
        self.times[k]
    }

    pub fn state(&self, k: usize) -> &DVector<f64> {
        &self.states[k]
    }

    pub fn input(&self, k: usize) -> &DVector<f64> {
        &self.inputs[k]
    }

    pub fn derivative(&self, k: usize) -> Option<&DVector<f64>> {
        self.derivatives.as_ref().map(|d| &d[k])
    }

    pub fn has_derivatives(&self) -> bool {
        self.derivatives.is_some()
    }

    pub fn step(&self) -> f64 {
        (self.times[self.len() - 1] - self.times[0]) / (self.len() - 1) as f64
    }

    pub fn span(&self) -> (f64, f64) {
        (self.times[0], self.times[self.len() - 1])
    }

    // -- file format --------------------------------------------------------

    /// Write as delimited text: header `t,x1..xn,u1..un[,dx1..dxn]`, one
    /// sample per row, shortest round-trip decimal formatting.
    pub fn write_to<W: IoWrite>(&self, out: &mut W) -> std::io::Result<()> {
        let n = self.n();
        let mut header = String::from("t");
        for i in 1..=n {
            header.push_str(&format!(",x{i}"));
        }
        for i in 1..=n {
            header.push_str(&format!(",u{i}"));
        }
        if self.has_derivatives() {
            for i in 1..=n {
                header.push_str(&format!(",dx{i}"));
            }
        }
        writeln!(out, "{header}")?;
        for k in 0..self.len() {
            let mut row = format!("{}", self.times[k]);
            for v in self.states[k].iter() {
                row.push_str(&format!(",{v}"));
            }
            for v in self.inputs[k].iter() {
                row.push_str(&format!(",{v}"));
            }
            if let Some(d) = &self.derivatives {
                for v in d[k].iter() {
                    row.push_str(&format!(",{v}"));
                }
            }
            writeln!(out, "{row}")?;
        }
        Ok(())
    }

    pub fn write_path(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut writer = BufWriter::new(file);
        self.write_to(&mut writer).map_err(|e| Error::io(path, e))
    }

    /// Parse the delimited format. Column names are validated, so the state
    /// dimension is unambiguous; the `dx` block is optional. Rejects empty
    /// files, malformed rows (with their line number), and non-uniform grids.
    pub fn read_from<R: Read>(reader: R, origin: &str) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            path: origin.to_string(),
            line,
            message,
        };
        let buf = BufReader::new(reader);
        let mut lines = buf.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "empty file".into()))
            .and_then(|(idx, line)| {
                line.map(|l| (idx, l))
                    .map_err(|e| parse_err(idx + 1, e.to_string()))
            })?;
        let cols: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
        if cols.is_empty() || cols[0] != "t" {
            return Err(parse_err(1, "header must start with column 't'".into()));
        }
        let n = cols.iter().skip(1).take_while(|c| c.starts_with('x')).count();
        if n == 0 {
            return Err(parse_err(1, "header declares no state columns".into()));
        }
        let with_derivs = match cols.len() {
            c if c == 1 + 2 * n => false,
            c if c == 1 + 3 * n => true,
            c => {
                return Err(parse_err(
                    1,
                    format!("expected 1+2n or 1+3n columns for n = {n}, got {c}"),
                ))
            }
        };
        for i in 0..n {
            let expect_x = format!("x{}", i + 1);
            let expect_u = format!("u{}", i + 1);
            if cols[1 + i] != expect_x {
                return Err(parse_err(1, format!("expected column '{expect_x}'")));
            }
            if cols[1 + n + i] != expect_u {
                return Err(parse_err(1, format!("expected column '{expect_u}'")));
            }
            if with_derivs {
                let expect_dx = format!("dx{}", i + 1);
                if cols[1 + 2 * n + i] != expect_dx {
                    return Err(parse_err(1, format!("expected column '{expect_dx}'")));
                }
            }
        }

        let mut times = Vec::new();
        let mut states = Vec::new();
        let mut inputs = Vec::new();
        let mut derivs = Vec::new();
        for (idx, line) in lines {
            let lineno = idx + 1;
            let line = line.map_err(|e| parse_err(lineno, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(|f| f.trim()).collect();
            if fields.len() != cols.len() {
                return Err(parse_err(
                    lineno,
                    format!("expected {} fields, got {}", cols.len(), fields.len()),
                ));
            }
            let mut values = Vec::with_capacity(fields.len());
            for f in &fields {
                let v: f64 = f
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("cannot parse '{f}' as a number")))?;
                values.push(v);
            }
            times.push(values[0]);
            states.push(DVector::from_column_slice(&values[1..1 + n]));
            inputs.push(DVector::from_column_slice(&values[1 + n..1 + 2 * n]));
            if with_derivs {
                derivs.push(DVector::from_column_slice(&values[1 + 2 * n..1 + 3 * n]));
            }
        }
        if times.len() < 2 {
            return Err(parse_err(
                2,
                "trajectory needs at least two sample rows".into(),
            ));
        }
        Trajectory::new(times, states, inputs, with_derivs.then_some(derivs)).map_err(|e| {
            match e {
                Error::Parameter(msg) | Error::Dimension(msg) => parse_err(2, msg),
                other => other,
            }
        })
    }

    pub fn read_path(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(file, &path.display().to_string())
    }
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

/// Integrate the network with the classic fixed-step fourth-order
/// Runge-Kutta scheme from `x0` over `[0, horizon]`.
///
/// The horizon is rounded to the nearest positive multiple of `step` so the
/// sample grid is exactly uniform. Every sample records the realized input
/// and the exact right-hand-side derivative. States are checked against
/// [`BLOWUP_BOUND`] after every step; the first violation aborts with the
/// offending time.
pub fn simulate(
    a: &InteractionMatrix,
    reg: &RegressorFamily,
    input: &InputSignal,
    x0: &DVector<f64>,
    horizon: f64,
    step: f64,
) -> Result<Trajectory> {
    let n = a.n();
    if reg.n() != n || x0.len() != n {
        return Err(Error::Dimension(format!(
            "system size mismatch: matrix {n}, regressor {}, x0 {}",
            reg.n(),
            x0.len()
        )));
    }
    input.check_dim(n)?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Parameter(format!("step must be positive, got {step}")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Parameter(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("x0 has a non-finite entry".into()));
    }

    let steps = ((horizon / step).round() as usize).max(1);

    let rhs = |t: f64, x: &DVector<f64>| -> DVector<f64> {
        let u = input.evaluate(t, x);
        DVector::from_fn(n, |i, _| reg.evaluate(i, x).dot(&a.row(i)) + u[i])
    };

    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut inputs = Vec::with_capacity(steps + 1);
    let mut derivs = Vec::with_capacity(steps + 1);

    let mut x = x0.clone();
    for k in 0..=steps {
        let t = k as f64 * step;
        let k1 = rhs(t, &x);
        times.push(t);
        states.push(x.clone());
        inputs.push(input.evaluate(t, &x));
        derivs.push(k1.clone());
        if k == steps {
            break;
        }
        let h = step;
        let k2 = rhs(t + 0.5 * h, &(&x + &k1 * (0.5 * h)));
        let k3 = rhs(t + 0.5 * h, &(&x + &k2 * (0.5 * h)));
        let k4 = rhs(t + h, &(&x + &k3 * h));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if x.iter().any(|v| !v.is_finite() || v.abs() > BLOWUP_BOUND) {
            return Err(Error::SimulationBlowup {
                time: t + h,
                bound: BLOWUP_BOUND,
            });
        }
    }

    Trajectory::new(times, states, inputs, Some(derivs))
}

// ---------------------------------------------------------------------------
// Derivative estimation
// ---------------------------------------------------------------------------

/// Fill in missing state derivatives with second-order finite differences:
/// central differences in the interior, one-sided three-point stencils at
/// the endpoints (both exact on quadratics). Trajectories that already carry
/// derivatives are returned unchanged.
pub fn estimate_derivatives(traj: &Trajectory) -> Result<Trajectory> {
    if traj.has_derivatives() {
        return Ok(traj.clone());
    }
    let m = traj.len();
    if m < 3 {
        return Err(Error::InsufficientData(
            "derivative estimation needs at least three samples".into(),
        ));
    }
    let h = traj.step();
    let mut derivs = Vec::with_capacity(m);
    for k in 0..m {
        let d = if k == 0 {
            (traj.state(0) * -3.0 + traj.state(1) * 4.0 - traj.state(2)) / (2.0 * h)
        } else if k == m - 1 {
            (traj.state(m - 1) * 3.0 - traj.state(m - 2) * 4.0 + traj.state(m - 3)) / (2.0 * h)
        } else {
            (traj.state(k + 1) - traj.state(k - 1)) / (2.0 * h)
        };
        derivs.push(d);
    }
    Trajectory::new(
        traj.times().to_vec(),
        (0..m).map(|k| traj.state(k).clone()).collect(),
        (0..m).map(|k| traj.input(k).clone()).collect(),
        Some(derivs),
    )
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
