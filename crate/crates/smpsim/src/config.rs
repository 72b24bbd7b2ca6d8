//! JSON declaration of rate models.
//!
//! A model document names the state count and either a catalog entry with
//! parameter overrides or a tabulated grid:
//!
//! ```json
//! { "states": 2, "kind": { "catalog": { "name": "ctmc2" } } }
//! ```
//!
//! ```json
//! {
//!   "states": 2,
//!   "kind": { "grid": { "entries": [
//!     { "from": 1, "to": 2, "classes": [
//!       { "upto_n": 0, "breaks": [0.0, 1.0], "values": [0.5, 2.0] },
//!       { "breaks": [0.0], "values": [1.0] }
//!     ]},
//!     { "from": 2, "to": 1, "classes": [
//!       { "breaks": [0.0], "values": [3.0] }
//!     ]}
//!   ]}}
//! }
//! ```
//!
//! Grid values interpolate as right-continuous steps in age: `values[m]`
//! applies on `[breaks[m], breaks[m+1])` and the last value extends to
//! infinity. Count classes are consulted in order — a class applies to
//! counts `n ≤ upto_n` — and the last class must omit `upto_n` to catch all
//! remaining counts. `sup_norms` may be declared explicitly (a full K×K
//! matrix); otherwise exact sup-norms are derived from the representation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::catalog;
use crate::rates::{RateFn, RateModel, StepClass};

/// Hard cap on the declared state count; layouts are dense in `K²`.
pub const MAX_STATES: usize = 256;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("malformed JSON: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("invalid model config: {0}")]
    Invalid(String),

    #[error(transparent)]
    Model(#[from] crate::Error),
}

/// Top-level model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub states: usize,
    pub kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sup_norms: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelKind {
    Catalog {
        name: String,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        params: BTreeMap<String, f64>,
    },
    Grid {
        entries: Vec<GridEntry>,
    },
}

/// One ordered pair's tabulated rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridEntry {
    pub from: usize,
    pub to: usize,
    pub classes: Vec<GridClass>,
}

/// One count band of a grid entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridClass {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upto_n: Option<u64>,
    pub breaks: Vec<f64>,
    pub values: Vec<f64>,
}

impl ModelConfig {
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let config: ModelConfig = serde_json::from_str(text)?;
        config.check()?;
        Ok(config)
    }

    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self, ConfigError> {
        let config: ModelConfig = serde_json::from_slice(bytes)?;
        config.check()?;
        Ok(config)
    }

    /// Display name: explicit, else the catalog name, else `grid`.
    pub fn display_name(&self) -> &str {
        if let Some(name) = &self.name {
            return name;
        }
        match &self.kind {
            ModelKind::Catalog { name, .. } => name,
            ModelKind::Grid { .. } => "grid",
        }
    }

    /// Structural validation without building the model.
    pub fn check(&self) -> Result<(), ConfigError> {
        if self.states < 2 || self.states > MAX_STATES {
            return Err(ConfigError::Invalid(format!(
                "states must be within 2..={MAX_STATES}, got {}",
                self.states
            )));
        }
        if let Some(matrix) = &self.sup_norms {
            if matrix.len() != self.states || matrix.iter().any(|r| r.len() != self.states) {
                return Err(ConfigError::Invalid(format!(
                    "sup_norms must be a {0}x{0} matrix",
                    self.states
                )));
            }
            for row in matrix {
                if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(ConfigError::Invalid(
                        "sup_norms entries must be finite and nonnegative".into(),
                    ));
                }
            }
        }
        if let ModelKind::Grid { entries } = &self.kind {
            let mut seen = std::collections::BTreeSet::new();
            if entries.is_empty() {
                return Err(ConfigError::Invalid("grid has no entries".into()));
            }
            for entry in entries {
                entry.check(self.states)?;
                if !seen.insert((entry.from, entry.to)) {
                    return Err(ConfigError::Invalid(format!(
                        "duplicate grid entry for pair ({}, {})",
                        entry.from, entry.to
                    )));
                }
            }
        }
        Ok(())
    }

    /// Builds the rate model this document declares.
    pub fn build(&self) -> Result<RateModel, ConfigError> {
        self.check()?;
        let mut model = match &self.kind {
            ModelKind::Catalog { name, params } => {
                let entry = catalog::build(name, params)?;
                if entry.model.num_states() != self.states {
                    return Err(ConfigError::Invalid(format!(
                        "catalog '{name}' has {} states but the config declares {}",
                        entry.model.num_states(),
                        self.states
                    )));
                }
                entry.model
            }
            ModelKind::Grid { entries } => {
                let rate_entries = entries
                    .iter()
                    .map(|e| (e.from, e.to, e.to_rate_fn()))
                    .collect();
                RateModel::new(self.display_name(), self.states, rate_entries)?
            }
        };
        if let Some(matrix) = &self.sup_norms {
            model.declare_sup_norms(matrix)?;
        }
        Ok(model)
    }

    /// Canonical single-line JSON used for hashing and output metadata.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("model configs always serialize")
    }

    /// FNV-1a hash of the canonical JSON, printed as 16 hex digits.
    pub fn content_hash(&self) -> String {
        format!("{:016x}", fnv1a(self.canonical_json().as_bytes()))
    }
}

impl GridEntry {
    fn check(&self, states: usize) -> Result<(), ConfigError> {
        let pair = format!("({}, {})", self.from, self.to);
        if self.from < 1 || self.from > states || self.to < 1 || self.to > states {
            return Err(ConfigError::Invalid(format!(
                "grid pair {pair} is outside 1..={states}"
            )));
        }
        if self.from == self.to {
            return Err(ConfigError::Invalid(format!(
                "grid pair {pair} sits on the diagonal"
            )));
        }
        if self.classes.is_empty() {
            return Err(ConfigError::Invalid(format!(
                "grid pair {pair} has no count classes"
            )));
        }
        let mut prev_upto: Option<u64> = None;
        for (k, class) in self.classes.iter().enumerate() {
            let last = k + 1 == self.classes.len();
            match (last, class.upto_n) {
                (true, Some(_)) => {
                    return Err(ConfigError::Invalid(format!(
                        "grid pair {pair}: the last count class must omit upto_n"
                    )))
                }
                (false, None) => {
                    return Err(ConfigError::Invalid(format!(
                        "grid pair {pair}: only the last count class may omit upto_n"
                    )))
                }
                (false, Some(upto)) => {
                    if let Some(prev) = prev_upto {
                        if upto <= prev {
                            return Err(ConfigError::Invalid(format!(
                                "grid pair {pair}: upto_n values must increase"
                            )));
                        }
                    }
                    prev_upto = Some(upto);
                }
                (true, None) => {}
            }
            if class.breaks.is_empty() || class.breaks.len() != class.values.len() {
                return Err(ConfigError::Invalid(format!(
                    "grid pair {pair}: breaks and values must be non-empty and equally long"
                )));
            }
            if class.breaks[0] != 0.0 {
                return Err(ConfigError::Invalid(format!(
                    "grid pair {pair}: breaks must start at 0"
                )));
            }
            if class
                .breaks
                .windows(2)
                .any(|w| !(w[1].is_finite() && w[1] > w[0]))
            {
                return Err(ConfigError::Invalid(format!(
                    "grid pair {pair}: breaks must be finite and strictly increasing"
                )));
            }
            if class.values.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(ConfigError::Invalid(format!(
                    "grid pair {pair}: values must be finite and nonnegative"
                )));
            }
        }
        Ok(())
    }

    fn to_rate_fn(&self) -> RateFn {
        RateFn::Step(
            self.classes
                .iter()
                .map(|c| StepClass {
                    upto_count: c.upto_n,
                    breaks: c.breaks.clone(),
                    values: c.values.clone(),
                })
                .collect(),
        )
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
