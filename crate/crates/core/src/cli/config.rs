//! Run configuration: the JSON document steering every command.
//!
//! One config describes the whole run: the model class (coupling preset and,
//! when data is synthesized, its parameters), where the trajectory comes
//! from, the declared prior, the target property, the tolerances, the seed,
//! and the output directory. Command-line flags override individual fields,
//! and identical effective configs produce byte-identical reports.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{sign_boxes, PriorSet, SignBounds};
use crate::gram::RankTolerance;
use crate::model::{CouplingPreset, GlvParameters, InputSignal, InteractionMatrix, RegressorFamily};
use crate::perturb::DeformationKind;
use crate::reconstruct::{PropertyKind, Settings};

// ---------------------------------------------------------------------------
// Document types
// ---------------------------------------------------------------------------

/// Coupling preset selector in configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PresetName {
    /// Product couplings `f_ij = x_i * x_j` with intrinsic growth input.
    Glv,
    /// Linear couplings `f_ij = x_j`; the input is only the declared drive.
    Linear,
}

/// Model class: which coupling family the data is interpreted in, plus the
/// system parameters needed when the trajectory is synthesized.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub preset: PresetName,
    /// Interaction matrix rows; required only to synthesize data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interaction: Option<Vec<Vec<f64>>>,
    /// Intrinsic growth rates (product-coupling preset only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth: Option<Vec<f64>>,
}

/// Additive sinusoidal drive `amplitude_i * sin(frequency_i t + phase_i)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    pub amplitude: Vec<f64>,
    pub frequency: Vec<f64>,
    pub phase: Vec<f64>,
}

/// Synthesis instructions when the run generates its own trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub x0: Vec<f64>,
    pub horizon: f64,
    pub step: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drive: Option<DriveConfig>,
}

/// Where the trajectory comes from: a measured file or synthesis.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub enum InputConfig {
    #[serde(rename = "trajectory")]
    Trajectory(PathBuf),
    #[serde(rename = "simulate")]
    Simulate(SimulateConfig),
}

/// Declared prior knowledge about each node's interconnection row.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PriorConfig {
    /// Every vector is a candidate.
    Unconstrained,
    /// Per-node lists of fully specified candidate rows;
    /// `candidates[i]` belongs to node `i`.
    Discrete { candidates: Vec<Vec<Vec<f64>>> },
    /// Sign boxes: nonzero entries have magnitude in `[a_min, a_max]`,
    /// zero entries at most `epsilon`.
    SignBoxes {
        epsilon: f64,
        a_min: f64,
        a_max: f64,
    },
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig::Unconstrained
    }
}

/// Tolerances in `(0, 1)`: spectral rank cutoff, zero-classification
/// threshold, and the residual consistency gate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceConfig {
    pub rank: f64,
    pub zero: f64,
    pub consistency: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        let settings = Settings::default();
        ToleranceConfig {
            rank: settings.rank_tol.rel(),
            zero: settings.zero_tol,
            consistency: settings.consistency_tol,
        }
    }
}

impl ToleranceConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("rank", self.rank),
            ("zero", self.zero),
            ("consistency", self.consistency),
        ] {
            if !(value > 0.0 && value < 1.0) {
                return Err(Error::Config(format!(
                    "tolerance '{name}' must lie in (0, 1), got {value}"
                )));
            }
        }
        Ok(())
    }

    pub fn settings(&self) -> Result<Settings> {
        self.validate()?;
        Ok(Settings {
            rank_tol: RankTolerance::new(self.rank)?,
            zero_tol: self.zero,
            consistency_tol: self.consistency,
            ..Settings::default()
        })
    }
}

/// Stability probe selector.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProbeConfig {
    /// Sweep deformation sizes and count how often the excitation check
    /// survives random coupling deformations.
    Survival {
        node: usize,
        kind: DeformationKind,
        deltas: Vec<f64>,
        trials: usize,
    },
    /// Rotate a rank-deficient node's kernel toward its untouched
    /// coordinates and report coverage flips.
    Flip { node: usize, deltas: Vec<f64> },
}

/// The full run description. JSON field names match the struct fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub input: InputConfig,
    #[serde(default)]
    pub prior: PriorConfig,
    /// Target property for reconstruction runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub property: Option<PropertyKind>,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
    #[serde(default)]
    pub seed: u64,
    /// Output directory; may instead be supplied with `--out`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Probe description for probe runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeConfig>,
}

// ---------------------------------------------------------------------------
// Loading and validation
// ---------------------------------------------------------------------------

impl RunConfig {
    /// Parse a config document, reporting the offending line on failure.
    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_string(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }

    /// Cross-field checks shared by every command: tolerance ranges,
    /// referenced files, and parameter dimensions.
    pub fn validate(&self) -> Result<()> {
        self.tolerances.validate()?;
        if let InputConfig::Trajectory(path) = &self.input {
            if !path.exists() {
                return Err(Error::Config(format!(
                    "trajectory file does not exist: {}",
                    path.display()
                )));
            }
        }
        if let Some(rows) = &self.model.interaction {
            let n = rows.len();
            if n == 0 || rows.iter().any(|r| r.len() != n) {
                return Err(Error::Config(
                    "interaction matrix must be square and non-empty".into(),
                ));
            }
            if let Some(growth) = &self.model.growth {
                if growth.len() != n {
                    return Err(Error::Config(format!(
                        "growth vector length {} does not match the {n}-node matrix",
                        growth.len()
                    )));
                }
            }
            if let InputConfig::Simulate(sim) = &self.input {
                if sim.x0.len() != n {
                    return Err(Error::Config(format!(
                        "x0 length {} does not match the {n}-node matrix",
                        sim.x0.len()
                    )));
                }
                if let Some(drive) = &sim.drive {
                    for (name, v) in [
                        ("amplitude", &drive.amplitude),
                        ("frequency", &drive.frequency),
                        ("phase", &drive.phase),
                    ] {
                        if v.len() != n {
                            return Err(Error::Config(format!(
                                "drive {name} length {} does not match the {n}-node matrix",
                                v.len()
                            )));
                        }
                    }
                }
            }
        } else if matches!(self.input, InputConfig::Simulate(_)) {
            return Err(Error::Config(
                "synthesizing a trajectory requires model.interaction".into(),
            ));
        }
        if self.model.preset == PresetName::Glv
            && matches!(self.input, InputConfig::Simulate(_))
            && self.model.growth.is_none()
        {
            return Err(Error::Config(
                "the product-coupling preset needs model.growth to synthesize data".into(),
            ));
        }
        Ok(())
    }

    /// The regressor family the run interprets data in.
    pub fn regressors(&self, n: usize) -> RegressorFamily {
        match self.model.preset {
            PresetName::Glv => RegressorFamily::glv(n),
            PresetName::Linear => RegressorFamily::linear(n),
        }
    }

    pub fn preset(&self) -> CouplingPreset {
        match self.model.preset {
            PresetName::Glv => CouplingPreset::Glv,
            PresetName::Linear => CouplingPreset::Linear,
        }
    }

    pub fn interaction(&self) -> Result<InteractionMatrix> {
        let rows = self.model.interaction.as_ref().ok_or_else(|| {
            Error::Config("this command needs model.interaction".into())
        })?;
        InteractionMatrix::from_rows(rows)
    }

    /// The input signal entering the simulated dynamics: the preset's
    /// intrinsic term plus the optional declared drive.
    pub fn input_signal(&self, n: usize) -> Result<InputSignal> {
        let mut parts = Vec::new();
        if self.model.preset == PresetName::Glv {
            let growth = self.model.growth.as_ref().ok_or_else(|| {
                Error::Config("the product-coupling preset needs model.growth".into())
            })?;
            parts.push(GlvParameters::from_slice(growth)?.input());
        }
        if let InputConfig::Simulate(sim) = &self.input {
            if let Some(drive) = &sim.drive {
                parts.push(InputSignal::Sinusoid {
                    amplitude: nalgebra::DVector::from_column_slice(&drive.amplitude),
                    frequency: nalgebra::DVector::from_column_slice(&drive.frequency),
                    phase: nalgebra::DVector::from_column_slice(&drive.phase),
                });
            }
        }
        let signal = match parts.len() {
            0 => InputSignal::Zero,
            1 => parts.pop().expect("length checked"),
            _ => InputSignal::Composite(parts),
        };
        signal.check_dim(n)?;
        Ok(signal)
    }

    /// The prior set for node `node` in an `n`-node system.
    pub fn prior_for(&self, node: usize, n: usize) -> Result<PriorSet> {
        match &self.prior {
            PriorConfig::Unconstrained => Ok(PriorSet::Unconstrained),
            PriorConfig::Discrete { candidates } => {
                if candidates.len() != n {
                    return Err(Error::Config(format!(
                        "discrete prior lists candidates for {} nodes, data has {n}",
                        candidates.len()
                    )));
                }
                PriorSet::discrete_from_rows(&candidates[node])
            }
            PriorConfig::SignBoxes {
                epsilon,
                a_min,
                a_max,
            } => Ok(PriorSet::Boxes(sign_boxes(
                n,
                &SignBounds::new(*epsilon, *a_min, *a_max)?,
            )?)),
        }
    }

    /// Short description of the prior for report headers.
    pub fn prior_summary(&self) -> String {
        match &self.prior {
            PriorConfig::Unconstrained => "unconstrained".to_string(),
            PriorConfig::Discrete { candidates } => {
                let sizes: BTreeSet<usize> = candidates.iter().map(Vec::len).collect();
                format!(
                    "discrete ({} nodes, {:?} candidates each)",
                    candidates.len(),
                    sizes
                )
            }
            PriorConfig::SignBoxes {
                epsilon,
                a_min,
                a_max,
            } => format!("sign boxes (epsilon {epsilon}, magnitudes [{a_min}, {a_max}])"),
        }
    }
}

// ---------------------------------------------------------------------------
