//! Batch front end: data ingestion, pipeline orchestration, demos, and
//! machine-readable reports.
//!
//! Four commands cover the pipeline: `simulate` synthesizes trajectory
//! files, `analyze` reports per-node excitation and ambiguity structure,
//! `reconstruct` runs the full property pipeline under a declared prior,
//! and `probe` measures structural stability of those conclusions. `demo
//! <name>` materializes a bundled config file and runs it through the same
//! code path as user configs.
//!
//! Exit-code contract: 0 when every node is unique/analyzed, 2 when any
//! ambiguity was found, 3 when the data is inconsistent with the model
//! class or prior, 1 for usage and IO errors. Reports are JSON plus flat
//! delimited tables, every report embeds the tolerances used, and runs are
//! deterministic: identical config and seed produce byte-identical files.

pub mod config;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use serde::Serialize;

pub use config::{
    DriveConfig, InputConfig, ModelConfig, PresetName, PriorConfig, ProbeConfig, RunConfig,
    SimulateConfig, ToleranceConfig,
};

use crate::error::{Error, Result};
use crate::gram::{analyze, compute_gram, GramSummary};
use crate::group::{generic_verdict, kernel_orbit_containment, GenericVerdict};
use crate::model::{estimate_derivatives, simulate, Trajectory};
use crate::perturb::{
    flip_table, probe_orbit_instability, probe_pe_stability, survival_table, FlipRow, SurvivalRow,
};
use crate::reconstruct::{
    assemble_property, reconstruct_property, MatrixPropertyValue, PropertyKind, Verdict,
    VerdictStatus,
};

// ---------------------------------------------------------------------------
// Command-line surface
// ---------------------------------------------------------------------------

#[derive(Debug, Parser)]
#[command(
    name = "netrecon",
    version,
    about = "Decide which properties of a networked system's interaction matrix \
             are reconstructable from trajectory data, and reconstruct them"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a trajectory file from a configured system.
    Simulate(RunArgs),
    /// Report per-node excitation, kernel, and ambiguity structure.
    Analyze(RunArgs),
    /// Reconstruct a property of the interaction matrix under a prior.
    Reconstruct(RunArgs),
    /// Measure structural stability of excitation or coverage conclusions.
    Probe(RunArgs),
    /// Materialize a bundled demo config and run it.
    Demo {
        /// Demo name; run with a bogus name to list the available ones.
        name: String,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Path to the JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
}

/// Flag-level overrides of individual config fields.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Output directory for reports and tables.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for randomized probes.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Relative spectral cutoff defining numerical rank.
    #[arg(long)]
    pub tol_rank: Option<f64>,
    /// Zero-classification threshold.
    #[arg(long)]
    pub tol_zero: Option<f64>,
    /// Residual gate declaring data and model class inconsistent.
    #[arg(long)]
    pub tol_consistency: Option<f64>,
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(out) = &self.out {
            cfg.out = Some(out.clone());
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(v) = self.tol_rank {
            cfg.tolerances.rank = v;
        }
        if let Some(v) = self.tol_zero {
            cfg.tolerances.zero = v;
        }
        if let Some(v) = self.tol_consistency {
            cfg.tolerances.consistency = v;
        }
    }
}

/// Which pipeline a run executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Simulate,
    Analyze,
    Reconstruct,
    Probe,
}

// ---------------------------------------------------------------------------
// Entry points
// ---------------------------------------------------------------------------

/// Parse arguments and run; returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code_for(&err)
        }
    }
}

/// Exit code for a run that failed with `err` before producing a verdict.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::DataInconsistent { .. } => 3,
        _ => 1,
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    let (kind, cfg, demo_name) = match cli.command {
        Command::Simulate(args) => load_run(CommandKind::Simulate, args)?,
        Command::Analyze(args) => load_run(CommandKind::Analyze, args)?,
        Command::Reconstruct(args) => load_run(CommandKind::Reconstruct, args)?,
        Command::Probe(args) => load_run(CommandKind::Probe, args)?,
        Command::Demo { name, overrides } => {
            let (kind, text) = demo(&name).ok_or_else(|| {
                Error::Config(format!(
                    "unknown demo '{name}'; available: {}",
                    demo_names().join(", ")
                ))
            })?;
            let mut cfg = RunConfig::from_json(text, &format!("demo:{name}"))?;
            overrides.apply(&mut cfg);
            (kind, cfg, Some(name))
        }
    };
    cfg.validate()?;
    let out_dir = cfg.out.clone().ok_or_else(|| {
        Error::Config("no output directory: set 'out' in the config or pass --out".into())
    })?;

    let mut output = execute(kind, &cfg)?;
    if let Some(name) = &demo_name {
        // Demos ship as config files: the effective config is written next
        // to the reports, and re-running it reproduces them byte for byte.
        output
            .files
            .push((format!("{name}.config.json"), to_json_bytes(&cfg)?));
    }
    output.write_all(&out_dir)?;
    for (name, _) in &output.files {
        println!("wrote {}", out_dir.join(name).display());
    }
    Ok(output.exit)
}

fn load_run(kind: CommandKind, args: RunArgs) -> Result<(CommandKind, RunConfig, Option<String>)> {
    let mut cfg = RunConfig::load(&args.config)?;
    args.overrides.apply(&mut cfg);
    Ok((kind, cfg, None))
}

/// Run one command against a validated config, collecting every output file
/// in memory; nothing touches the filesystem until [`CommandOutput::write_all`].
pub fn execute(kind: CommandKind, cfg: &RunConfig) -> Result<CommandOutput> {
    cfg.validate()?;
    match kind {
        CommandKind::Simulate => cmd_simulate(cfg),
        CommandKind::Analyze => cmd_analyze(cfg),
        CommandKind::Reconstruct => cmd_reconstruct(cfg),
        CommandKind::Probe => cmd_probe(cfg),
    }
}

/// The files a command produced (name, content) and its exit code. Files
/// are written once, at the end of the run, by a single writer.
#[derive(Debug)]
pub struct CommandOutput {
    pub exit: i32,
    files: Vec<(String, Vec<u8>)>,
}

impl CommandOutput {
    pub fn files(&self) -> &[(String, Vec<u8>)] {
        &self.files
    }

    pub fn file(&self, name: &str) -> Option<&[u8]> {
        self.files
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, c)| c.as_slice())
    }

    pub fn write_all(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, content) in &self.files {
            let path = dir.join(name);
            fs::write(&path, content).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| Error::Numerical(format!("report serialization failed: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

/// Obtain the run's trajectory: read and, if needed, differentiate a
/// measured file, or synthesize one from the configured system.
fn obtain_trajectory(cfg: &RunConfig) -> Result<Trajectory> {
    match &cfg.input {
        InputConfig::Trajectory(path) => {
            let traj = Trajectory::read_path(path)?;
            if traj.has_derivatives() {
                Ok(traj)
            } else {
                estimate_derivatives(&traj)
            }
        }
        InputConfig::Simulate(sim) => {
            let a = cfg.interaction()?;
            let n = a.n();
            let reg = cfg.regressors(n);
            let input = cfg.input_signal(n)?;
            simulate(
                &a,
                &reg,
                &input,
                &DVector::from_column_slice(&sim.x0),
                sim.horizon,
                sim.step,
            )
        }
    }
}

/// Run `work` for every node on its own thread and collect the results in
/// node order.
fn per_node<T, F>(n: usize, work: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    let work = &work;
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..n)
            .map(|node| scope.spawn(move || work(node)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("node worker panicked"))
            .collect()
    })
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const SIMULATE_REPORT: &str = "simulate-report.json";
pub const ANALYZE_REPORT: &str = "analysis-report.json";
pub const RECONSTRUCT_REPORT: &str = "reconstruction-report.json";
pub const PROBE_REPORT: &str = "probe-report.json";
pub const SURVIVAL_TABLE: &str = "survival-table.csv";
pub const FLIP_TABLE: &str = "flip-table.csv";

#[derive(Debug, Serialize)]
struct SimulateReport {
    command: &'static str,
    tolerances: ToleranceConfig,
    seed: u64,
    preset: PresetName,
    nodes: usize,
    samples: usize,
    span: (f64, f64),
    step: f64,
    trajectory_file: &'static str,
}

/// Synthesize a trajectory and write it in the delimited format together
/// with a small JSON report.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<CommandOutput> {
    if !matches!(cfg.input, InputConfig::Simulate(_)) {
        return Err(Error::Config(
            "simulate needs synthesis parameters in input.simulate, not a measured file".into(),
        ));
    }
    let traj = obtain_trajectory(cfg)?;
    let mut buffer = Vec::new();
    traj.write_to(&mut buffer)
        .map_err(|e| Error::Numerical(format!("trajectory serialization failed: {e}")))?;
    let report = SimulateReport {
        command: "simulate",
        tolerances: cfg.tolerances,
        seed: cfg.seed,
        preset: cfg.model.preset,
        nodes: traj.n(),
        samples: traj.len(),
        span: traj.span(),
        step: traj.step(),
        trajectory_file: TRAJECTORY_FILE,
    };
    Ok(CommandOutput {
        exit: 0,
        files: vec![
            (TRAJECTORY_FILE.to_string(), buffer),
            (SIMULATE_REPORT.to_string(), to_json_bytes(&report)?),
        ],
    })
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

/// What a node's kernel leaves decidable, in report form.
#[derive(Debug, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum VerdictReport {
    /// Excited data: one solution, ambiguity is exactly one coupling orbit.
    OrbitsOnly {
        support: Vec<usize>,
        self_nonzero: bool,
    },
    /// Partial kernel coverage: generic support below, but smaller-support
    /// candidates exist, so the conclusion is structurally unstable.
    StructurallyUnstable { generic_support: Vec<usize> },
    /// The kernel reaches every off-diagonal coordinate.
    AllIndistinguishable,
}

impl From<GenericVerdict> for VerdictReport {
    fn from(v: GenericVerdict) -> Self {
        match v {
            GenericVerdict::OrbitsOnly { label } => VerdictReport::OrbitsOnly {
                support: label.support().iter().copied().collect(),
                self_nonzero: label.self_nonzero(),
            },
            GenericVerdict::StructurallyUnstable { generic_support } => {
                VerdictReport::StructurallyUnstable {
                    generic_support: generic_support.into_iter().collect(),
                }
            }
            GenericVerdict::AllIndistinguishable => VerdictReport::AllIndistinguishable,
        }
    }
}

#[derive(Debug, Serialize)]
struct AnalyzeNode {
    #[serde(flatten)]
    summary: GramSummary,
    /// Off-diagonal coordinates the kernel moves.
    coverage_moved: Vec<usize>,
    /// Whether the kernel moves every off-diagonal coordinate.
    coverage_full: bool,
    verdict: VerdictReport,
}

#[derive(Debug, Serialize)]
struct AnalyzeReport {
    command: &'static str,
    tolerances: ToleranceConfig,
    seed: u64,
    preset: PresetName,
    nodes: Vec<AnalyzeNode>,
}

/// Per-node identifiability analysis: excitation flag, margin, kernel,
/// orbit coverage, and the generic verdict.
pub fn cmd_analyze(cfg: &RunConfig) -> Result<CommandOutput> {
    let settings = cfg.tolerances.settings()?;
    let traj = obtain_trajectory(cfg)?;
    let reg = cfg.regressors(traj.n());
    let nodes = per_node(traj.n(), |node| {
        let gram = compute_gram(&traj, &reg, node)?;
        let analysis = analyze(&gram, settings.rank_tol);
        let coverage =
            kernel_orbit_containment(node, &analysis.kernel_basis(), settings.zero_tol);
        let verdict = generic_verdict(
            node,
            &analysis.min_norm_solution(),
            &analysis.kernel_basis(),
            settings.zero_tol,
        );
        Ok(AnalyzeNode {
            summary: analysis.summary(),
            coverage_moved: coverage.moved().iter().copied().collect(),
            coverage_full: coverage.is_full(),
            verdict: verdict.into(),
        })
    })?;
    let report = AnalyzeReport {
        command: "analyze",
        tolerances: cfg.tolerances,
        seed: cfg.seed,
        preset: cfg.model.preset,
        nodes,
    };
    Ok(CommandOutput {
        exit: 0,
        files: vec![(ANALYZE_REPORT.to_string(), to_json_bytes(&report)?)],
    })
}

// ---------------------------------------------------------------------------
// reconstruct
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct ReconstructReport {
    command: &'static str,
    tolerances: ToleranceConfig,
    seed: u64,
    preset: PresetName,
    property: PropertyKind,
    prior: String,
    /// Worst per-node status: inconsistent > ambiguous > unique.
    status: VerdictStatus,
    nodes: Vec<Verdict>,
    /// The assembled matrix-level value, present when every node is unique.
    #[serde(skip_serializing_if = "Option::is_none")]
    assembled: Option<MatrixPropertyValue>,
}

/// Full pipeline: per-node verdicts under the configured prior and
/// property, plus the assembled matrix-level value when unique everywhere.
pub fn cmd_reconstruct(cfg: &RunConfig) -> Result<CommandOutput> {
    let property = cfg.property.ok_or_else(|| {
        Error::Config("reconstruct needs a 'property' (identity, sign, connectivity, adjacency, or degree)".into())
    })?;
    let settings = cfg.tolerances.settings()?;
    let traj = obtain_trajectory(cfg)?;
    let n = traj.n();
    let reg = cfg.regressors(n);
    let nodes = per_node(n, |node| {
        let gram = compute_gram(&traj, &reg, node)?;
        let prior = cfg.prior_for(node, n)?;
        match reconstruct_property(&gram, &prior, property, &settings) {
            Ok(verdict) => Ok(verdict),
            // Residual inconsistency is a per-node outcome, not a run
            // failure: record it and keep analyzing the other nodes.
            Err(Error::DataInconsistent { residual, .. }) => Ok(Verdict {
                node,
                property,
                status: VerdictStatus::Inconsistent,
                value: None,
                witnesses: Vec::new(),
                residual,
                pieces_checked: 0,
            }),
            Err(other) => Err(other),
        }
    })?;

    let status = if nodes
        .iter()
        .any(|v| v.status == VerdictStatus::Inconsistent)
    {
        VerdictStatus::Inconsistent
    } else if nodes.iter().any(|v| v.status == VerdictStatus::Ambiguous) {
        VerdictStatus::Ambiguous
    } else {
        VerdictStatus::Unique
    };
    let assembled = if status == VerdictStatus::Unique {
        let values: Vec<_> = nodes
            .iter()
            .filter_map(|v| v.value.clone())
            .collect();
        if values.len() == nodes.len() {
            assemble_property(&values)
        } else {
            None
        }
    } else {
        None
    };
    let exit = match status {
        VerdictStatus::Unique => 0,
        VerdictStatus::Ambiguous => 2,
        VerdictStatus::Inconsistent => 3,
    };
    let report = ReconstructReport {
        command: "reconstruct",
        tolerances: cfg.tolerances,
        seed: cfg.seed,
        preset: cfg.model.preset,
        property,
        prior: cfg.prior_summary(),
        status,
        nodes,
        assembled,
    };
    Ok(CommandOutput {
        exit,
        files: vec![(RECONSTRUCT_REPORT.to_string(), to_json_bytes(&report)?)],
    })
}

// ---------------------------------------------------------------------------
// probe
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct ProbeReport {
    command: &'static str,
    tolerances: ToleranceConfig,
    seed: u64,
    probe: ProbeConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    survival: Option<Vec<SurvivalRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    flips: Option<Vec<FlipRow>>,
    table_file: &'static str,
}

/// Structural-stability tables: excitation survival under random coupling
/// deformations, or orbit-coverage flips under kernel rotations.
pub fn cmd_probe(cfg: &RunConfig) -> Result<CommandOutput> {
    let probe = cfg
        .probe
        .as_ref()
        .ok_or_else(|| Error::Config("probe needs a 'probe' section".into()))?;
    let settings = cfg.tolerances.settings()?;
    let traj = obtain_trajectory(cfg)?;
    let reg = cfg.regressors(traj.n());

    let (report, table_name, table) = match probe {
        ProbeConfig::Survival {
            node,
            kind,
            deltas,
            trials,
        } => {
            let rows = probe_pe_stability(
                &traj,
                &reg,
                *node,
                settings.rank_tol,
                *kind,
                deltas,
                *trials,
                cfg.seed,
            )?;
            let table = survival_table(&rows);
            (
                ProbeReport {
                    command: "probe",
                    tolerances: cfg.tolerances,
                    seed: cfg.seed,
                    probe: probe.clone(),
                    survival: Some(rows),
                    flips: None,
                    table_file: SURVIVAL_TABLE,
                },
                SURVIVAL_TABLE,
                table,
            )
        }
        ProbeConfig::Flip { node, deltas } => {
            let gram = compute_gram(&traj, &reg, *node)?;
            let rows =
                probe_orbit_instability(&gram, settings.rank_tol, settings.zero_tol, deltas)?;
            let table = flip_table(&rows);
            (
                ProbeReport {
                    command: "probe",
                    tolerances: cfg.tolerances,
                    seed: cfg.seed,
                    probe: probe.clone(),
                    survival: None,
                    flips: Some(rows),
                    table_file: FLIP_TABLE,
                },
                FLIP_TABLE,
                table,
            )
        }
    };
    Ok(CommandOutput {
        exit: 0,
        files: vec![
            (table_name.to_string(), table.into_bytes()),
            (PROBE_REPORT.to_string(), to_json_bytes(&report)?),
        ],
    })
}

// ---------------------------------------------------------------------------
// Demos
// ---------------------------------------------------------------------------

/// Bundled demo configs, each a complete JSON document run through the same
/// path as user configs.
const DEMOS: &[(&str, CommandKind, &str)] = &[
    (
        "five-species-community",
        CommandKind::Simulate,
        r#"{
  "model": {
    "preset": "glv",
    "interaction": [
      [-1.0, -0.2,  0.0, -0.1,  0.0],
      [-0.2, -1.0, -0.2,  0.0, -0.1],
      [ 0.0, -0.2, -1.0, -0.2,  0.0],
      [-0.1,  0.0, -0.2, -1.0, -0.2],
      [ 0.0, -0.1,  0.0, -0.2, -1.0]
    ],
    "growth": [0.0, -0.5, 0.5, -0.5, 0.0]
  },
  "input": {
    "simulate": {
      "x0": [0.895349, 0.72093, 0.255814, 1.82558, 1.82558],
      "horizon": 10.0,
      "step": 0.001
    }
  },
  "out": "demo-five-species-community"
}"#,
    ),
    (
        "driven-community",
        CommandKind::Analyze,
        r#"{
  "model": {
    "preset": "glv",
    "interaction": [[-1.0, -0.5], [-0.5, -1.0]],
    "growth": [1.5, 1.5]
  },
  "input": {
    "simulate": {
      "x0": [1.0, 1.0],
      "horizon": 20.0,
      "step": 0.001,
      "drive": {
        "amplitude": [0.3, 0.25],
        "frequency": [1.3, 2.1],
        "phase": [0.3, 1.1]
      }
    }
  },
  "out": "demo-driven-community"
}"#,
    ),
    (
        "steady-state-analysis",
        CommandKind::Analyze,
        r#"{
  "model": {
    "preset": "glv",
    "interaction": [[-1.0, -0.5], [-0.5, -1.0]],
    "growth": [1.5, 1.5]
  },
  "input": {
    "simulate": { "x0": [1.0, 1.0], "horizon": 5.0, "step": 0.001 }
  },
  "out": "demo-steady-state-analysis"
}"#,
    ),
    (
        "sign-recovery",
        CommandKind::Reconstruct,
        r#"{
  "model": {
    "preset": "glv",
    "interaction": [[-0.52, -0.5], [0.51, -0.54]],
    "growth": [2.52, 1.65]
  },
  "input": {
    "simulate": { "x0": [1.0, 4.0], "horizon": 10.0, "step": 0.01 }
  },
  "property": "sign",
  "prior": { "kind": "sign-boxes", "epsilon": 0.01, "a_min": 0.5, "a_max": 0.55 },
  "out": "demo-sign-recovery"
}"#,
    ),
    (
        "ambiguous-identity",
        CommandKind::Reconstruct,
        r#"{
  "model": {
    "preset": "glv",
    "interaction": [[-1.0, -0.5], [-0.5, -1.0]],
    "growth": [1.5, 1.5]
  },
  "input": {
    "simulate": { "x0": [1.0, 1.0], "horizon": 5.0, "step": 0.001 }
  },
  "property": "identity",
  "prior": { "kind": "unconstrained" },
  "out": "demo-ambiguous-identity"
}"#,
    ),
    (
        "discrete-weights",
        CommandKind::Reconstruct,
        r#"{
  "model": {
    "preset": "glv",
    "interaction": [[-1.0, -0.5], [-0.5, -1.0]],
    "growth": [1.5, 1.5]
  },
  "input": {
    "simulate": { "x0": [1.0, 1.0], "horizon": 5.0, "step": 0.001 }
  },
  "property": "identity",
  "prior": {
    "kind": "discrete",
    "candidates": [
      [[-1.0, -0.5], [-1.2, -0.4]],
      [[-0.5, -1.0], [-0.4, -1.2]]
    ]
  },
  "out": "demo-discrete-weights"
}"#,
    ),
    (
        "confounded-pair",
        CommandKind::Reconstruct,
        r#"{
  "model": {
    "preset": "glv",
    "interaction": [[-1.0, -0.5], [-0.5, -1.0]],
    "growth": [1.5, 1.5]
  },
  "input": {
    "simulate": { "x0": [1.0, 1.0], "horizon": 10.0, "step": 0.01 }
  },
  "property": "sign",
  "prior": {
    "kind": "discrete",
    "candidates": [
      [[-1.0, -0.5], [-1.55, 0.05]],
      [[-0.5, -1.0], [0.05, -1.55]]
    ]
  },
  "out": "demo-confounded-pair"
}"#,
    ),
    (
        "excitation-stability",
        CommandKind::Probe,
        r#"{
  "model": {
    "preset": "glv",
    "interaction": [[-1.0, -0.5], [-0.5, -1.0]],
    "growth": [1.5, 1.5]
  },
  "input": {
    "simulate": {
      "x0": [1.0, 1.0],
      "horizon": 20.0,
      "step": 0.001,
      "drive": {
        "amplitude": [0.3, 0.25],
        "frequency": [1.3, 2.1],
        "phase": [0.3, 1.1]
      }
    }
  },
  "seed": 42,
  "probe": {
    "mode": "survival",
    "node": 0,
    "kind": "additive-smooth",
    "deltas": [0.0, 1e-6, 1e-4, 1e-2],
    "trials": 100
  },
  "out": "demo-excitation-stability"
}"#,
    ),
    (
        "coverage-instability",
        CommandKind::Probe,
        r#"{
  "model": {
    "preset": "linear",
    "interaction": [[-0.5, 0.3], [0.0, -1.0]]
  },
  "input": {
    "simulate": { "x0": [1.0, 0.0], "horizon": 5.0, "step": 0.001 }
  },
  "probe": {
    "mode": "flip",
    "node": 1,
    "deltas": [0.0, 1e-6, 1e-4, 1e-2]
  },
  "out": "demo-coverage-instability"
}"#,
    ),
];

/// Names of the bundled demos, in registry order.
pub fn demo_names() -> Vec<&'static str> {
    DEMOS.iter().map(|(name, _, _)| *name).collect()
}

/// Look up a bundled demo by name.
pub fn demo(name: &str) -> Option<(CommandKind, &'static str)> {
    DEMOS
        .iter()
        .find(|(n, _, _)| *n == name)
        .map(|(_, kind, text)| (*kind, *text))
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Sign;
    use crate::reconstruct::PropertyValue;
    use serde_json::Value;

    fn demo_config(name: &str) -> (CommandKind, RunConfig) {
        let (kind, text) = demo(name).expect("demo exists");
        let cfg = RunConfig::from_json(text, name).expect("demo config parses");
        cfg.validate().expect("demo config validates");
        (kind, cfg)
    }

    fn report_json(output: &CommandOutput, name: &str) -> Value {
        let bytes = output.file(name).expect("report present");
        serde_json::from_slice(bytes).expect("report is valid JSON")
    }

    #[test]
    fn every_demo_parses_validates_and_names_an_out_dir() {
        let names = demo_names();
        assert_eq!(names.len(), 9);
        for name in names {
            let (_, cfg) = demo_config(name);
            assert!(cfg.out.is_some(), "demo {name} must carry an out dir");
        }
    }

    #[test]
    fn simulate_demo_writes_a_valid_trajectory_file() {
        let (kind, cfg) = demo_config("five-species-community");
        let output = execute(kind, &cfg).unwrap();
        assert_eq!(output.exit, 0);
        let bytes = output.file(TRAJECTORY_FILE).unwrap();
        let traj = Trajectory::read_from(bytes, "in-memory").unwrap();
        assert_eq!(traj.n(), 5);
        assert!(traj.len() > 1000);
        assert!(traj.has_derivatives());
        let report = report_json(&output, SIMULATE_REPORT);
        assert_eq!(report["nodes"], 5);
        assert!(report["tolerances"]["rank"].as_f64().unwrap() > 0.0);
    }

    #[test]
    fn zero_matrix_yields_constant_columns() {
        let cfg = RunConfig::from_json(
            r#"{
                "model": { "preset": "glv", "interaction": [[0.0, 0.0], [0.0, 0.0]], "growth": [0.0, 0.0] },
                "input": { "simulate": { "x0": [1.0, 2.0], "horizon": 1.0, "step": 0.01 } },
                "out": "unused"
            }"#,
            "inline",
        )
        .unwrap();
        let output = cmd_simulate(&cfg).unwrap();
        let traj = Trajectory::read_from(output.file(TRAJECTORY_FILE).unwrap(), "mem").unwrap();
        for k in 0..traj.len() {
            assert_eq!(traj.state(k)[0], 1.0);
            assert_eq!(traj.state(k)[1], 2.0);
        }
    }

    #[test]
    fn blowup_surfaces_as_an_error() {
        let cfg = RunConfig::from_json(
            r#"{
                "model": { "preset": "glv", "interaction": [[2.0, 1.0], [1.0, 2.0]], "growth": [1.0, 1.0] },
                "input": { "simulate": { "x0": [5.0, 5.0], "horizon": 50.0, "step": 0.01 } },
                "out": "unused"
            }"#,
            "inline",
        )
        .unwrap();
        let err = cmd_simulate(&cfg).unwrap_err();
        assert!(matches!(err, Error::SimulationBlowup { .. }), "got {err:?}");
        assert_eq!(exit_code_for(&err), 1);
    }

    #[test]
    fn driven_data_analyzes_as_excited_everywhere() {
        let (kind, cfg) = demo_config("driven-community");
        let output = execute(kind, &cfg).unwrap();
        assert_eq!(output.exit, 0);
        let report = report_json(&output, ANALYZE_REPORT);
        let nodes = report["nodes"].as_array().unwrap();
        assert_eq!(nodes.len(), 2);
        for node in nodes {
            assert_eq!(node["pe"], true);
            assert!(node["margin"].as_f64().unwrap() > 1e-4);
            assert_eq!(node["verdict"]["kind"], "orbits-only");
        }
    }

    #[test]
    fn steady_state_data_analyzes_as_rank_one_everywhere() {
        let (kind, cfg) = demo_config("steady-state-analysis");
        let output = execute(kind, &cfg).unwrap();
        let report = report_json(&output, ANALYZE_REPORT);
        for node in report["nodes"].as_array().unwrap() {
            assert_eq!(node["rank"], 1);
            assert_eq!(node["pe"], false);
            assert_eq!(node["verdict"]["kind"], "all-indistinguishable");
        }
    }

    #[test]
    fn sign_recovery_demo_is_unique_end_to_end() {
        let (kind, cfg) = demo_config("sign-recovery");
        let output = execute(kind, &cfg).unwrap();
        assert_eq!(output.exit, 0);
        let report = report_json(&output, RECONSTRUCT_REPORT);
        assert_eq!(report["status"], "unique");
        let assembled = &report["assembled"];
        assert_eq!(assembled["kind"], "sign");
        let rows = assembled["value"].as_array().unwrap();
        assert_eq!(rows[0], serde_json::json!(["-", "-"]));
        assert_eq!(rows[1], serde_json::json!(["+", "-"]));
    }

    #[test]
    fn unconstrained_identity_without_excitation_is_ambiguous() {
        let (kind, cfg) = demo_config("ambiguous-identity");
        let output = execute(kind, &cfg).unwrap();
        assert_eq!(output.exit, 2);
        let report = report_json(&output, RECONSTRUCT_REPORT);
        assert_eq!(report["status"], "ambiguous");
        for node in report["nodes"].as_array().unwrap() {
            assert_eq!(node["status"], "ambiguous");
            assert!(node["witnesses"].as_array().unwrap().len() >= 2);
        }
    }

    #[test]
    fn discrete_prior_recovers_unique_weights_from_rank_deficient_data() {
        let (kind, cfg) = demo_config("discrete-weights");
        let output = execute(kind, &cfg).unwrap();
        assert_eq!(output.exit, 0);
        let report = report_json(&output, RECONSTRUCT_REPORT);
        assert_eq!(report["status"], "unique");
        let assembled = &report["assembled"];
        assert_eq!(assembled["kind"], "identity");
        let rows = assembled["value"].as_array().unwrap();
        assert_eq!(rows[0], serde_json::json!([-1.0, -0.5]));
        assert_eq!(rows[1], serde_json::json!([-0.5, -1.0]));
    }

    #[test]
    fn confounded_pair_demo_exits_with_the_ambiguity_code() {
        let (kind, cfg) = demo_config("confounded-pair");
        let output = execute(kind, &cfg).unwrap();
        assert_eq!(output.exit, 2);
        let report = report_json(&output, RECONSTRUCT_REPORT);
        assert_eq!(report["status"], "ambiguous");
        for node in report["nodes"].as_array().unwrap() {
            assert_eq!(node["status"], "ambiguous");
            assert_eq!(node["witnesses"].as_array().unwrap().len(), 2);
        }
    }

    #[test]
    fn infeasible_discrete_prior_is_reported_as_inconsistent() {
        // Candidates that are far from the fiber of the steady-state data:
        // every node ends up with zero feasible labels.
        let cfg = RunConfig::from_json(
            r#"{
                "model": { "preset": "glv", "interaction": [[-1.0, -0.5], [-0.5, -1.0]], "growth": [1.5, 1.5] },
                "input": { "simulate": { "x0": [1.0, 1.0], "horizon": 5.0, "step": 0.001 } },
                "property": "sign",
                "prior": {
                    "kind": "discrete",
                    "candidates": [
                        [[3.0, 3.0], [2.0, 2.0]],
                        [[3.0, 3.0], [2.0, 2.0]]
                    ]
                },
                "out": "unused"
            }"#,
            "inline",
        )
        .unwrap();
        let output = cmd_reconstruct(&cfg).unwrap();
        assert_eq!(output.exit, 3);
        let report = report_json(&output, RECONSTRUCT_REPORT);
        assert_eq!(report["status"], "inconsistent");
    }

    #[test]
    fn survival_probe_demo_reports_full_survival_at_tiny_sizes() {
        let (kind, cfg) = demo_config("excitation-stability");
        let output = execute(kind, &cfg).unwrap();
        assert_eq!(output.exit, 0);
        let report = report_json(&output, PROBE_REPORT);
        let rows = report["survival"].as_array().unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0]["delta"], 0.0);
        assert_eq!(rows[0]["fraction"], 1.0);
        assert_eq!(rows[1]["fraction"], 1.0, "delta 1e-6 must always survive");
        let table = std::str::from_utf8(output.file(SURVIVAL_TABLE).unwrap()).unwrap();
        assert!(table.starts_with("delta,trials,survived,fraction\n0,100,100,1\n"));
    }

    #[test]
    fn flip_probe_demo_flips_at_every_positive_size() {
        let (kind, cfg) = demo_config("coverage-instability");
        let output = execute(kind, &cfg).unwrap();
        assert_eq!(output.exit, 0);
        let report = report_json(&output, PROBE_REPORT);
        let rows = report["flips"].as_array().unwrap();
        assert_eq!(rows[0]["flipped"], false);
        for row in &rows[1..] {
            assert_eq!(row["flipped"], true, "size {} must flip", row["delta"]);
        }
        let table = std::str::from_utf8(output.file(FLIP_TABLE).unwrap()).unwrap();
        assert!(table.starts_with("delta,flipped\n0,false\n"));
    }

    #[test]
    fn identical_configs_produce_byte_identical_outputs() {
        for name in ["sign-recovery", "excitation-stability"] {
            let (kind, cfg) = demo_config(name);
            let first = execute(kind, &cfg).unwrap();
            let second = execute(kind, &cfg).unwrap();
            assert_eq!(first.files(), second.files(), "demo {name} not deterministic");
        }
    }

    #[test]
    fn data_inconsistency_maps_to_exit_three() {
        let err = Error::DataInconsistent {
            node: 0,
            residual: 0.1,
            tolerance: 1e-6,
        };
        assert_eq!(exit_code_for(&err), 3);
        assert_eq!(exit_code_for(&Error::Config("x".into())), 1);
    }

    #[test]
    fn verdict_values_survive_the_report_round_trip() {
        // The assembled sign matrix in a report deserializes back into the
        // same labels the library produced.
        let (kind, cfg) = demo_config("sign-recovery");
        let output = execute(kind, &cfg).unwrap();
        let report = report_json(&output, RECONSTRUCT_REPORT);
        let nodes = report["nodes"].as_array().unwrap();
        for (i, node) in nodes.iter().enumerate() {
            assert_eq!(node["node"], i as i64);
            assert_eq!(node["status"], "unique");
            let value: PropertyValue =
                serde_json::from_value(node["value"].clone()).expect("value deserializes");
            match value {
                PropertyValue::Sign(signs) => {
                    assert_eq!(signs.len(), 2);
                    assert!(signs.iter().any(|s| *s != Sign::Zero));
                }
                other => panic!("expected sign value, got {other:?}"),
            }
        }
    }
}
