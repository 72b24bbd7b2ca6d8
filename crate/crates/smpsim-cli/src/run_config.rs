//! The run-configuration document consumed by every subcommand.
//!
//! A single JSON file declares the model plus run parameters; command-line
//! flags (`--seed`, `--out`, `--threads`) override the corresponding fields.
//!
//! ```json
//! {
//!   "model": { "states": 2, "kind": { "catalog": { "name": "ctmc2" } } },
//!   "seed": 42,
//!   "horizon": 10.0,
//!   "replications": 10,
//!   "simulate": { "initial_state": 1 },
//!   "couple": { "init1": { "state": 1 }, "init2": { "state": 2 } },
//!   "kernel": { "y_max": 2.0, "points": 41 },
//!   "verify": { "samples": 20000 }
//! }
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use smpsim::config::ModelConfig;
use smpsim::solver::AugmentedState;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::horizon")]
    pub horizon: f64,
    #[serde(default = "defaults::one")]
    pub replications: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// Skip the pre-simulation model validation gate.
    #[serde(default)]
    pub allow_invalid_model: bool,
    /// Age at which the cumulative hazard must have cleared `gamma_min`.
    #[serde(default = "defaults::y_check")]
    pub y_check: f64,
    #[serde(default = "defaults::gamma_min")]
    pub gamma_min: f64,
    #[serde(default)]
    pub simulate: SimulateOptions,
    #[serde(default)]
    pub verify: VerifyOptions,
    #[serde(default)]
    pub couple: CoupleOptions,
    #[serde(default)]
    pub kernel: KernelOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    /// Point-acceptance construction driven by the random measure.
    #[default]
    Prm,
    /// Direct inverse-transform sampler.
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateOptions {
    #[serde(default = "defaults::one")]
    pub initial_state: usize,
    #[serde(default)]
    pub initial_age: f64,
    #[serde(default)]
    pub initial_count: u64,
    #[serde(default)]
    pub sampler: Sampler,
    /// Also dump the consumed point stream of each replication as CSV
    /// (point-measure sampler only).
    #[serde(default)]
    pub dump_points: bool,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        Self {
            initial_state: 1,
            initial_age: 0.0,
            initial_count: 0,
            sampler: Sampler::Prm,
            dump_points: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyOptions {
    /// Suites to run; absent means all. Explicitly empty is a config error.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suites: Option<Vec<String>>,
    /// Sample count per statistical check.
    #[serde(default = "defaults::verify_samples")]
    pub samples: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            suites: None,
            samples: defaults::verify_samples(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSpec {
    pub state: usize,
    #[serde(default)]
    pub age: f64,
    #[serde(default)]
    pub count: u64,
}

impl From<InitSpec> for AugmentedState {
    fn from(spec: InitSpec) -> Self {
        AugmentedState {
            state: spec.state,
            age: spec.age,
            count: spec.count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoupleOptions {
    #[serde(default = "defaults::init_first")]
    pub init1: InitSpec,
    #[serde(default = "defaults::init_second")]
    pub init2: InitSpec,
    #[serde(default)]
    pub dynkin: DynkinOptions,
}

impl Default for CoupleOptions {
    fn default() -> Self {
        Self {
            init1: defaults::init_first(),
            init2: defaults::init_second(),
            dynkin: DynkinOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynkinOptions {
    #[serde(default = "defaults::yes")]
    pub enabled: bool,
    /// Window lengths, largest first; the drift slope is estimated from the
    /// largest and the bound checked at the smallest.
    #[serde(default = "defaults::h_values")]
    pub h_values: Vec<f64>,
    #[serde(default = "defaults::dynkin_reps")]
    pub reps: usize,
    /// Test-function names: `constant`, `first_indicator`,
    /// `second_indicator`, `product_indicator`.
    #[serde(default = "defaults::phis")]
    pub phis: Vec<String>,
    /// Target state the indicator functions watch.
    #[serde(default = "defaults::two")]
    pub target_state: usize,
}

impl Default for DynkinOptions {
    fn default() -> Self {
        Self {
            enabled: true,
            h_values: defaults::h_values(),
            reps: defaults::dynkin_reps(),
            phis: defaults::phis(),
            target_state: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelOptions {
    #[serde(default = "defaults::kernel_y_max")]
    pub y_max: f64,
    #[serde(default = "defaults::kernel_points")]
    pub points: usize,
    #[serde(default)]
    pub count: u64,
}

impl Default for KernelOptions {
    fn default() -> Self {
        Self {
            y_max: defaults::kernel_y_max(),
            points: defaults::kernel_points(),
            count: 0,
        }
    }
}

mod defaults {
    use super::InitSpec;

    pub fn horizon() -> f64 {
        10.0
    }
    pub fn one() -> usize {
        1
    }
    pub fn two() -> usize {
        2
    }
    pub fn yes() -> bool {
        true
    }
    pub fn y_check() -> f64 {
        10.0
    }
    pub fn gamma_min() -> f64 {
        0.5
    }
    pub fn verify_samples() -> usize {
        20_000
    }
    pub fn h_values() -> Vec<f64> {
        vec![0.02, 0.01]
    }
    pub fn dynkin_reps() -> usize {
        200_000
    }
    pub fn phis() -> Vec<String> {
        vec![
            "constant".into(),
            "first_indicator".into(),
            "product_indicator".into(),
        ]
    }
    pub fn kernel_y_max() -> f64 {
        2.0
    }
    pub fn kernel_points() -> usize {
        41
    }
    pub fn init_first() -> InitSpec {
        InitSpec {
            state: 1,
            age: 0.0,
            count: 0,
        }
    }
    pub fn init_second() -> InitSpec {
        InitSpec {
            state: 2,
            age: 0.0,
            count: 0,
        }
    }
}

impl RunConfig {
    pub fn from_json_bytes(bytes: &[u8]) -> crate::Result<Self> {
        let config: RunConfig = serde_json::from_slice(bytes)
            .map_err(|e| CliError::Config(format!("malformed run config: {e}")))?;
        config.check()?;
        Ok(config)
    }

    pub fn from_json_str(text: &str) -> crate::Result<Self> {
        Self::from_json_bytes(text.as_bytes())
    }

    /// Structural checks shared by every subcommand.
    pub fn check(&self) -> crate::Result<()> {
        self.model
            .check()
            .map_err(|e| CliError::Config(e.to_string()))?;
        let states = self.model.states;
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(CliError::Config(format!(
                "horizon must be positive and finite, got {}",
                self.horizon
            )));
        }
        if self.replications < 1 {
            return Err(CliError::Config("replications must be at least 1".into()));
        }
        if let Some(suites) = &self.verify.suites {
            if suites.is_empty() {
                return Err(CliError::Config(
                    "verify.suites is present but empty; name at least one suite".into(),
                ));
            }
        }
        let state_refs = [
            ("simulate.initial_state", self.simulate.initial_state),
            ("couple.init1.state", self.couple.init1.state),
            ("couple.init2.state", self.couple.init2.state),
        ];
        for (what, s) in state_refs {
            if s < 1 || s > states {
                return Err(CliError::Config(format!(
                    "{what} = {s} is outside 1..={states}"
                )));
            }
        }
        if self.couple.dynkin.target_state < 1 || self.couple.dynkin.target_state > states {
            return Err(CliError::Config(format!(
                "couple.dynkin.target_state = {} is outside 1..={states}",
                self.couple.dynkin.target_state
            )));
        }
        for init in [&self.couple.init1, &self.couple.init2] {
            if !(init.age.is_finite() && init.age >= 0.0) {
                return Err(CliError::Config(format!(
                    "initial ages must be finite and nonnegative, got {}",
                    init.age
                )));
            }
        }
        if !(self.simulate.initial_age.is_finite() && self.simulate.initial_age >= 0.0) {
            return Err(CliError::Config(format!(
                "simulate.initial_age must be finite and nonnegative, got {}",
                self.simulate.initial_age
            )));
        }
        if self.couple.dynkin.enabled {
            let d = &self.couple.dynkin;
            if d.h_values.is_empty() || d.h_values.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
                return Err(CliError::Config(
                    "couple.dynkin.h_values must be non-empty positive numbers".into(),
                ));
            }
            if d.reps == 0 {
                return Err(CliError::Config("couple.dynkin.reps must be positive".into()));
            }
        }
        if self.kernel.points < 2 || !(self.kernel.y_max.is_finite() && self.kernel.y_max > 0.0) {
            return Err(CliError::Config(
                "kernel needs y_max > 0 and at least 2 grid points".into(),
            ));
        }
        if !(self.y_check.is_finite() && self.y_check > 0.0) || !self.gamma_min.is_finite() {
            return Err(CliError::Config(
                "y_check must be positive and gamma_min finite".into(),
            ));
        }
        Ok(())
    }
}
