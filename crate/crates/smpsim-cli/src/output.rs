//! Deterministic CSV and JSON writers.
//!
//! CSV files carry `#`-prefixed metadata lines (tool version, config hash,
//! seed, model) before the header row. Floats are written with Rust's
//! shortest round-trip formatting, so identical runs produce identical
//! bytes. Nothing environment-dependent (time, thread count, paths) is ever
//! written.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use smpsim::coupling::{CoupledPath, Mover};
use smpsim::prm::PointStream;
use smpsim::solver::Trajectory;

use crate::CliError;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Metadata stamped on every output file.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    pub model: String,
    pub model_hash: String,
    pub horizon: f64,
}

impl RunMetadata {
    pub fn new(
        command: &str,
        seed: u64,
        config_hash: &str,
        model: &str,
        model_hash: &str,
        horizon: f64,
    ) -> Self {
        Self {
            tool: "smpsim".into(),
            version: TOOL_VERSION.into(),
            command: command.into(),
            seed,
            config_hash: config_hash.into(),
            model: model.into(),
            model_hash: model_hash.into(),
            horizon,
        }
    }

    fn comment_block(&self) -> String {
        format!(
            "# tool=smpsim version={} command={}\n# seed={} config_hash={} model={} model_hash={} horizon={}\n",
            self.version,
            self.command,
            self.seed,
            self.config_hash,
            self.model,
            self.model_hash,
            self.horizon
        )
    }
}

pub fn write_file(path: &Path, contents: &str) -> crate::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::Io {
            path: parent.display().to_string(),
            source: e,
        })?;
    }
    fs::write(path, contents).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> crate::Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Config(format!("serialization failed: {e}")))?;
    text.push('\n');
    write_file(path, &text)
}

/// Trajectory CSV: metadata, then `n,t,state` rows starting with the virtual
/// zeroth transition at `−initial_age`.
pub fn trajectory_csv(meta: &RunMetadata, sampler: &str, replication: usize, traj: &Trajectory) -> String {
    let mut out = meta.comment_block();
    let _ = writeln!(
        out,
        "# sampler={} replication={} initial_state={} initial_age={} initial_count={}",
        sampler,
        replication,
        traj.start().state,
        traj.start().age,
        traj.start().count
    );
    out.push_str("n,t,state\n");
    let _ = writeln!(out, "0,{},{}", traj.origin_time(), traj.start().state);
    for (k, jump) in traj.jumps().iter().enumerate() {
        let _ = writeln!(out, "{},{},{}", k + 1, jump.time, jump.state);
    }
    out
}

/// Coupled-run CSV: one row per accepted point with the states after it.
pub fn coupled_csv(meta: &RunMetadata, replication: usize, path: &CoupledPath) -> String {
    let mut out = meta.comment_block();
    let _ = writeln!(
        out,
        "# replication={} init1={},{},{} init2={},{},{}",
        replication,
        path.first().start().state,
        path.first().start().age,
        path.first().start().count,
        path.second().start().state,
        path.second().start().age,
        path.second().start().count
    );
    out.push_str("t,component,state1,state2\n");
    for e in path.events() {
        let mover = match e.mover {
            Mover::First => "1",
            Mover::Second => "2",
            Mover::Both => "both",
        };
        let _ = writeln!(out, "{},{},{},{}", e.time, mover, e.state_first, e.state_second);
    }
    out
}

/// Debug dump of the points a replication's stream emits up to the horizon.
pub fn points_csv(meta: &RunMetadata, replication: usize, stream: &PointStream, horizon: f64) -> String {
    let mut fresh = stream.clone();
    let mut out = meta.comment_block();
    let _ = writeln!(out, "# replication={} strip_height={}", replication, fresh.strip_height());
    out.push_str("u,v\n");
    loop {
        let p = fresh.next_point();
        if p.time > horizon {
            break;
        }
        let _ = writeln!(out, "{},{}", p.time, p.mark);
    }
    out
}

pub fn replication_file_name(prefix: &str, replication: usize) -> String {
    format!("{prefix}_{replication:04}.csv")
}
