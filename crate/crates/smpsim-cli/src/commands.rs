//! The four subcommands: simulate, verify, couple, kernel.
//!
//! Every command is a pure function of `(run config, seed)`: replications
//! run on forked substreams keyed by replication index and outputs are
//! written in index order, so reruns are byte-identical at any `--threads`
//! setting.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use smpsim::coupling::{
    dynkin_check, meeting_stats, simulate_coupled, CoupledPath, DynkinCheck, TestFunction,
};
use smpsim::harness::{
    bonferroni, chi_square_two_sample, ks_one_sample, ks_two_sample, EmpiricalDistribution,
    Verdict,
};
use smpsim::layout::MarkResolution;
use smpsim::oracle::{invert_gamma, OracleSampler};
use smpsim::prm::PointStream;
use smpsim::rates::{ordered_pairs, RateModel};
use smpsim::solver::{holding_time_samples, simulate_path, AugmentedState, Trajectory};

use crate::output::{
    coupled_csv, points_csv, replication_file_name, trajectory_csv, write_json, RunMetadata,
};
use crate::run_config::{RunConfig, Sampler};
use crate::{CliError, Result};

/// Flag-level overrides; flags beat config fields.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

/// What a command produced; the caller maps it to an exit code.
#[derive(Debug, Clone)]
pub struct CmdOutcome {
    pub checks_passed: bool,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Simulate,
    Verify,
    Couple,
    Kernel,
}

impl CommandKind {
    fn name(&self) -> &'static str {
        match self {
            CommandKind::Simulate => "simulate",
            CommandKind::Verify => "verify",
            CommandKind::Couple => "couple",
            CommandKind::Kernel => "kernel",
        }
    }
}

pub fn run_command(
    kind: CommandKind,
    mut config: RunConfig,
    overrides: Overrides,
) -> Result<CmdOutcome> {
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    config.check()?;
    let out_dir = overrides
        .out
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("smpsim-out"));
    let threads = overrides.threads.or(config.threads).unwrap_or(1).max(1);

    let model = config.model.build()?;
    if !config.allow_invalid_model {
        let report = model.validate(config.y_check, config.gamma_min);
        if !report.passed() {
            let first = report
                .violations
                .iter()
                .take(3)
                .map(|v| format!("{v:?}"))
                .collect::<Vec<_>>()
                .join("; ");
            return Err(CliError::Config(format!(
                "model failed validation ({} violations; set allow_invalid_model to override): {first}",
                report.violations.len()
            )));
        }
    }

    let config_json = serde_json::to_string(&config)
        .map_err(|e| CliError::Config(format!("serialization failed: {e}")))?;
    let meta = RunMetadata::new(
        kind.name(),
        config.seed,
        &format!("{:016x}", smpsim::config::fnv1a(config_json.as_bytes())),
        config.model.display_name(),
        &config.model.content_hash(),
        config.horizon,
    );
    match kind {
        CommandKind::Simulate => cmd_simulate(&config, &model, &meta, &out_dir, threads),
        CommandKind::Verify => cmd_verify(&config, &model, &meta, &out_dir),
        CommandKind::Couple => cmd_couple(&config, &model, &meta, &out_dir, threads),
        CommandKind::Kernel => cmd_kernel(&config, &model, &meta, &out_dir),
    }
}

/// Mark strips must be positive; a zero-rate model (validation overridden)
/// gets a unit strip whose points are all rejected.
fn stream_height(resolution: &MarkResolution) -> f64 {
    let h = resolution.strip_height();
    if h > 0.0 {
        h
    } else {
        1.0
    }
}

fn pooled<T: Send>(
    threads: usize,
    reps: usize,
    f: impl Fn(usize) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| (0..reps).into_par_iter().map(&f).collect())
}

#[derive(Serialize)]
struct ReplicationRecord {
    replication: usize,
    jumps: usize,
    final_state: usize,
    censored_age: f64,
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    metadata: &'a RunMetadata,
    replications: usize,
    initial_state: usize,
    initial_age: f64,
    initial_count: u64,
    total_jumps: usize,
    mean_jumps: f64,
    per_replication: Vec<ReplicationRecord>,
}

fn cmd_simulate(
    config: &RunConfig,
    model: &RateModel,
    meta: &RunMetadata,
    out_dir: &Path,
    threads: usize,
) -> Result<CmdOutcome> {
    let resolution = MarkResolution::new(model);
    let root = PointStream::new(config.seed, 0, stream_height(&resolution))?;
    let start = AugmentedState {
        state: config.simulate.initial_state,
        age: config.simulate.initial_age,
        count: config.simulate.initial_count,
    };
    let horizon = config.horizon;
    let sampler = config.simulate.sampler;
    let sampler_name = match sampler {
        Sampler::Prm => "prm",
        Sampler::Oracle => "oracle",
    };
    let trajectories: Vec<Trajectory> = pooled(threads, config.replications, |r| match sampler {
        Sampler::Prm => {
            let mut stream = root.fork_child(r as u64);
            Ok(simulate_path(model, &resolution, &mut stream, start, horizon)?)
        }
        Sampler::Oracle => {
            let mut oracle = OracleSampler::new(model, config.seed, r as u64);
            Ok(oracle.simulate_path(start, horizon)?)
        }
    })?;

    let mut per_replication = Vec::with_capacity(trajectories.len());
    for (r, traj) in trajectories.iter().enumerate() {
        let csv = trajectory_csv(meta, sampler_name, r, traj);
        crate::output::write_file(&out_dir.join(replication_file_name("trajectory", r)), &csv)?;
        if config.simulate.dump_points && sampler == Sampler::Prm {
            let stream = root.fork_child(r as u64);
            let csv = points_csv(meta, r, &stream, horizon);
            crate::output::write_file(&out_dir.join(replication_file_name("points", r)), &csv)?;
        }
        let end = traj.state_at(horizon)?;
        per_replication.push(ReplicationRecord {
            replication: r,
            jumps: traj.num_jumps(),
            final_state: end.state,
            censored_age: end.age,
        });
    }
    let total_jumps: usize = per_replication.iter().map(|r| r.jumps).sum();
    let summary = SimulateSummary {
        metadata: meta,
        replications: config.replications,
        initial_state: start.state,
        initial_age: start.age,
        initial_count: start.count,
        total_jumps,
        mean_jumps: total_jumps as f64 / config.replications as f64,
        per_replication,
    };
    write_json(&out_dir.join("simulate_summary.json"), &summary)?;
    Ok(CmdOutcome {
        checks_passed: true,
        out_dir: out_dir.to_path_buf(),
    })
}

#[derive(Serialize)]
struct KernelSummary<'a> {
    metadata: &'a RunMetadata,
    y_max: f64,
    points: usize,
    count: u64,
    verdicts: Vec<Verdict>,
    passed: bool,
}

fn cmd_kernel(
    config: &RunConfig,
    model: &RateModel,
    meta: &RunMetadata,
    out_dir: &Path,
) -> Result<CmdOutcome> {
    let k = model.num_states();
    let n = config.kernel.count;
    let points = config.kernel.points;
    let y_max = config.kernel.y_max;

    let mut csv = String::new();
    csv.push_str(&format!(
        "# tool=smpsim version={} command=kernel model={} model_hash={} count={}\n",
        crate::output::TOOL_VERSION,
        meta.model,
        meta.model_hash,
        n
    ));
    csv.push('y');
    for i in 1..=k {
        csv.push_str(&format!(",F_{i}"));
    }
    for (i, j) in ordered_pairs(k) {
        csv.push_str(&format!(",Q_{i}_{j}"));
    }
    for (i, j) in ordered_pairs(k) {
        csv.push_str(&format!(",p_{i}_{j}"));
    }
    csv.push('\n');
    for g in 0..points {
        let y = y_max * g as f64 / (points - 1) as f64;
        csv.push_str(&format!("{y}"));
        for i in 1..=k {
            csv.push_str(&format!(",{}", model.holding_cdf(i, y, n)?));
        }
        for (i, j) in ordered_pairs(k) {
            csv.push_str(&format!(",{}", model.kernel(i, j, y, n)?));
        }
        for (i, j) in ordered_pairs(k) {
            csv.push_str(&format!(",{}", model.embedded_probs(i, y, n)[j - 1]));
        }
        csv.push('\n');
    }
    crate::output::write_file(&out_dir.join("kernel_table.csv"), &csv)?;

    // quadrature cross-check: kernel rows must sum to the holding cdf
    let mut verdicts = Vec::new();
    for i in 1..=k {
        let total: f64 = (1..=k)
            .filter(|&j| j != i)
            .map(|j| model.kernel(i, j, y_max, n))
            .sum::<smpsim::Result<f64>>()?;
        let cdf = model.holding_cdf(i, y_max, n)?;
        verdicts.push(Verdict::upper_bound(
            format!("kernel_row_sum_matches_cdf_state_{i}"),
            (total - cdf).abs(),
            1e-8,
        ));
    }
    let passed = verdicts.iter().all(|v| v.pass);
    let summary = KernelSummary {
        metadata: meta,
        y_max,
        points,
        count: n,
        verdicts,
        passed,
    };
    write_json(&out_dir.join("kernel_summary.json"), &summary)?;
    Ok(CmdOutcome {
        checks_passed: passed,
        out_dir: out_dir.to_path_buf(),
    })
}

#[derive(Serialize)]
struct DynkinRecord {
    phi: String,
    h: f64,
    residual: f64,
    std_error: f64,
    generator_value: f64,
    bound: f64,
    trend_ok: bool,
    pass: bool,
}

#[derive(Serialize)]
struct CoupleSummary<'a> {
    metadata: &'a RunMetadata,
    meeting: smpsim::coupling::MeetingSummary,
    dynkin: Vec<DynkinRecord>,
    passed: bool,
}

pub fn phi_by_name(name: &str, target: usize) -> Result<TestFunction> {
    match name {
        "constant" => Ok(TestFunction::constant(1.0)),
        "first_indicator" => Ok(TestFunction::first_state_is(target)),
        "second_indicator" => Ok(TestFunction::second_state_is(target)),
        "product_indicator" => Ok(TestFunction::both_states_are(target, target)),
        other => Err(CliError::Config(format!(
            "unknown test function '{other}' (expected constant, first_indicator, second_indicator, product_indicator)"
        ))),
    }
}

fn cmd_couple(
    config: &RunConfig,
    model: &RateModel,
    meta: &RunMetadata,
    out_dir: &Path,
    threads: usize,
) -> Result<CmdOutcome> {
    let resolution = MarkResolution::new(model);
    let root = PointStream::new(config.seed, 0, stream_height(&resolution))?;
    let init1: AugmentedState = config.couple.init1.into();
    let init2: AugmentedState = config.couple.init2.into();
    let horizon = config.horizon;

    let paths: Vec<CoupledPath> = pooled(threads, config.replications, |r| {
        let mut stream = root.fork_child(r as u64);
        Ok(simulate_coupled(
            model,
            &resolution,
            &mut stream,
            init1,
            init2,
            horizon,
        )?)
    })?;
    for (r, path) in paths.iter().enumerate() {
        let csv = coupled_csv(meta, r, path);
        crate::output::write_file(&out_dir.join(replication_file_name("coupled", r)), &csv)?;
    }
    let meeting = meeting_stats(&paths);

    let mut dynkin = Vec::new();
    let mut passed = true;
    if config.couple.dynkin.enabled {
        let opts = &config.couple.dynkin;
        // a dedicated substream family far from the replication indices
        let dynkin_root = root.fork_child(u64::MAX);
        for (pi, phi_name) in opts.phis.iter().enumerate() {
            let phi = phi_by_name(phi_name, opts.target_state)?;
            let check: DynkinCheck = dynkin_check(
                model,
                &resolution,
                &phi,
                init1,
                init2,
                &opts.h_values,
                opts.reps,
                &dynkin_root.fork_child(pi as u64),
            )?;
            passed &= check.pass;
            for (h, est) in &check.estimates {
                dynkin.push(DynkinRecord {
                    phi: phi_name.clone(),
                    h: *h,
                    residual: est.residual,
                    std_error: est.std_error,
                    generator_value: est.generator_value,
                    bound: check.bound_at_smallest,
                    trend_ok: check.trend_ok,
                    pass: check.pass,
                });
            }
        }
    }
    let summary = CoupleSummary {
        metadata: meta,
        meeting,
        dynkin,
        passed,
    };
    write_json(&out_dir.join("couple_summary.json"), &summary)?;
    Ok(CmdOutcome {
        checks_passed: passed,
        out_dir: out_dir.to_path_buf(),
    })
}

#[derive(Serialize)]
struct VerifySummary<'a> {
    metadata: &'a RunMetadata,
    suites: Vec<String>,
    samples: usize,
    verdicts: Vec<Verdict>,
    passed: bool,
}

const ALL_SUITES: [&str; 8] = [
    "layout",
    "rates",
    "prm",
    "holding",
    "kernel",
    "short_holding",
    "oracle",
    "coupling",
];

fn cmd_verify(
    config: &RunConfig,
    model: &RateModel,
    meta: &RunMetadata,
    out_dir: &Path,
) -> Result<CmdOutcome> {
    let suites: Vec<String> = match &config.verify.suites {
        Some(list) => {
            for name in list {
                if !ALL_SUITES.contains(&name.as_str()) {
                    return Err(CliError::Config(format!(
                        "unknown verify suite '{name}' (expected one of {ALL_SUITES:?})"
                    )));
                }
            }
            list.clone()
        }
        None => ALL_SUITES.iter().map(|s| s.to_string()).collect(),
    };
    let samples = config.verify.samples;
    let seed = config.seed;
    let resolution = MarkResolution::new(model);

    let mut verdicts = Vec::new();
    for suite in &suites {
        let mut batch = match suite.as_str() {
            "layout" => suite_layout(model, &resolution, samples, seed),
            "rates" => suite_rates(model, seed)?,
            "prm" => suite_prm(seed),
            "holding" => suite_holding(model, &resolution, samples, seed)?,
            "kernel" => suite_kernel(model, &resolution, samples, seed)?,
            "short_holding" => suite_short_holding(model, &resolution, samples, seed)?,
            "oracle" => suite_oracle(model, &resolution, samples, seed)?,
            "coupling" => suite_coupling(model, &resolution, samples, seed)?,
            other => unreachable!("suite names checked above: {other}"),
        };
        for v in &mut batch {
            v.test = format!("{suite}/{}", v.test);
        }
        verdicts.extend(batch);
    }
    let passed = verdicts.iter().all(|v| v.pass);
    let summary = VerifySummary {
        metadata: meta,
        suites,
        samples,
        verdicts,
        passed,
    };
    write_json(&out_dir.join("verify_verdicts.json"), &summary)?;
    Ok(CmdOutcome {
        checks_passed: passed,
        out_dir: out_dir.to_path_buf(),
    })
}

/// Randomized interval-layout checks: pairwise disjointness, length equals
/// the rate, containment in the per-state mark bound, and the
/// shared-left-endpoint / overlap-length identities.
fn suite_layout(
    model: &RateModel,
    resolution: &MarkResolution,
    samples: usize,
    seed: u64,
) -> Vec<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4c41_594f);
    let k = model.num_states();
    let (mut overlap_bad, mut length_bad, mut containment_bad, mut identity_bad) = (0u64, 0u64, 0u64, 0u64);
    // one rounding of the offset addition
    let slack = |a: f64, b: f64| 4.0 * f64::EPSILON * (1.0 + a.abs() + b.abs());
    for _ in 0..samples {
        let y = rng.random::<f64>() * 8.0;
        let n = rng.random_range(0..6u64);
        let intervals: Vec<(usize, usize, smpsim::layout::MarkInterval)> = ordered_pairs(k)
            .map(|(i, j)| (i, j, resolution.interval_of(i, j, y, n)))
            .collect();
        for (a, (i1, j1, ia)) in intervals.iter().enumerate() {
            let rate = model.rate(*i1, *j1, y, n);
            if (ia.len() - rate).abs() > slack(ia.start, rate) {
                length_bad += 1;
            }
            if ia.end > resolution.row_bound(*i1) + slack(ia.end, 0.0) || ia.start < 0.0 {
                containment_bad += 1;
            }
            for (_, _, ib) in intervals.iter().skip(a + 1) {
                if ia.intersection_len(ib) > 0.0 {
                    overlap_bad += 1;
                }
            }
        }
        // second draw for the two-age identities
        let y2 = rng.random::<f64>() * 8.0;
        let n2 = rng.random_range(0..6u64);
        for i in 1..=k {
            for split in resolution.overlap_lengths(i, y, n, y2, n2) {
                let a = resolution.interval_of(i, split.target, y, n);
                let b = resolution.interval_of(i, split.target, y2, n2);
                if a.start != b.start {
                    identity_bad += 1;
                }
                if (a.intersection_len(&b) - split.shared).abs() > slack(a.start, split.shared) {
                    identity_bad += 1;
                }
            }
        }
    }
    vec![
        Verdict::upper_bound("disjointness_violations", overlap_bad as f64, 0.0),
        Verdict::upper_bound("length_violations", length_bad as f64, 0.0),
        Verdict::upper_bound("containment_violations", containment_bad as f64, 0.0),
        Verdict::upper_bound("overlap_identity_violations", identity_bad as f64, 0.0),
    ]
}

/// Analytic identities of the rate field on a deterministic grid.
fn suite_rates(model: &RateModel, seed: u64) -> Result<Vec<Verdict>> {
    let k = model.num_states();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5241_5445);
    let counts = [0u64, 1, 3];

    // hazard identity p·f/(1−F) = λ on a 100-point age grid, kept where
    // 1−F is numerically non-degenerate (γ ≤ 10)
    let mut max_residual: f64 = 0.0;
    for n in counts {
        for i in 1..=k {
            for g in 1..=100 {
                let y = 5.0 * g as f64 / 100.0;
                if model.gamma(i, y, n)? > 10.0 {
                    break;
                }
                for j in 1..=k {
                    if j != i {
                        max_residual = max_residual
                            .max(model.rate_identity_residual(i, j, y, n)?.abs());
                    }
                }
            }
        }
    }

    // embedded rows sum to one
    let mut max_row_gap: f64 = 0.0;
    for n in counts {
        for i in 1..=k {
            for g in 0..=50 {
                let y = 6.0 * g as f64 / 50.0;
                let sum: f64 = model.embedded_probs(i, y, n).iter().sum();
                max_row_gap = max_row_gap.max((sum - 1.0).abs());
            }
        }
    }

    // d/dy Q / (1 − F) recovers the rate, sampled away from corners
    let mut max_fd_gap: f64 = 0.0;
    let h = 1e-4;
    for i in 1..=k {
        let corners = model.row_breakpoints(i, 0);
        let mut tested = 0;
        while tested < 20 {
            let y = 0.05 + rng.random::<f64>() * 2.5;
            if corners.iter().any(|c| (y - c).abs() < 10.0 * h) {
                continue;
            }
            tested += 1;
            for j in 1..=k {
                if j == i {
                    continue;
                }
                let up = model.kernel(i, j, y + h, 0)?;
                let down = model.kernel(i, j, y - h, 0)?;
                let survivor = 1.0 - model.holding_cdf(i, y, 0)?;
                let fd = (up - down) / (2.0 * h) / survivor;
                max_fd_gap = max_fd_gap.max((fd - model.rate(i, j, y, 0)).abs());
            }
        }
    }

    // kernel rows sum to the holding cdf
    let mut max_kernel_gap: f64 = 0.0;
    for n in counts {
        for i in 1..=k {
            for y in [0.3, 0.9, 1.7] {
                let total: f64 = (1..=k)
                    .filter(|&j| j != i)
                    .map(|j| model.kernel(i, j, y, n))
                    .sum::<smpsim::Result<f64>>()?;
                let cdf = model.holding_cdf(i, y, n)?;
                max_kernel_gap = max_kernel_gap.max((total - cdf).abs());
            }
        }
    }

    Ok(vec![
        Verdict::upper_bound("hazard_identity_max_residual", max_residual, 1e-9),
        Verdict::upper_bound("embedded_row_sum_max_gap", max_row_gap, 1e-12),
        Verdict::upper_bound("kernel_derivative_max_gap", max_fd_gap, 1e-5),
        Verdict::upper_bound("kernel_row_sum_max_gap", max_kernel_gap, 1e-8),
    ])
}

/// Distributional checks of the point stream itself.
fn suite_prm(seed: u64) -> Vec<Verdict> {
    let strip = 6.0;
    let root = PointStream::new(seed ^ 0x5052_4d00, 0, strip).expect("positive strip");

    // count law over [0,1] x [0,strip]
    let reps = 10_000;
    let counts: Vec<f64> = root
        .fork(reps)
        .into_iter()
        .map(|mut s| {
            let mut c = 0.0;
            while s.next_point().time <= 1.0 {
                c += 1.0;
            }
            c
        })
        .collect();
    let mean = counts.iter().sum::<f64>() / reps as f64;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
    let mean_se = (strip / reps as f64).sqrt();

    // mark uniformity and inter-arrival mean on one long stream
    let mut stream = root.fork_child(reps as u64 + 1);
    let n = 100_000;
    let mut marks = Vec::with_capacity(n);
    let mut prev = 0.0;
    let mut gap_sum = 0.0;
    for _ in 0..n {
        let p = stream.next_point();
        marks.push(p.mark / strip);
        gap_sum += p.time - prev;
        prev = p.time;
    }
    let marks = EmpiricalDistribution::from_samples(marks).expect("non-empty");
    let ks = ks_one_sample(&marks, |x| x.clamp(0.0, 1.0)).expect("sized sample");
    let gap_mean = gap_sum / n as f64;

    vec![
        Verdict::upper_bound("count_mean_z", (mean - strip).abs() / mean_se, 3.0),
        Verdict::upper_bound("count_variance_rel_gap", (var - strip).abs() / strip, 0.10),
        Verdict::upper_bound("mark_uniformity_ks", ks.statistic, ks.critical_1pct),
        Verdict::upper_bound(
            "interarrival_mean_rel_gap",
            (gap_mean - 1.0 / strip).abs() * strip,
            0.01,
        ),
    ]
}

/// KS of point-mechanism sojourns against `1 − e^{−γ}` per state.
fn suite_holding(
    model: &RateModel,
    resolution: &MarkResolution,
    samples: usize,
    seed: u64,
) -> Result<Vec<Verdict>> {
    let k = model.num_states();
    let alpha = bonferroni(0.01, k);
    let mut verdicts = Vec::new();
    for i in 1..=k {
        let mut stream = PointStream::new(seed ^ 0x484f_4c44, i as u64, stream_height(resolution))?;
        let sojourns =
            holding_time_samples(model, resolution, &mut stream, i, 0, samples)?;
        let dist = EmpiricalDistribution::from_samples(sojourns)?;
        let ks = ks_one_sample(&dist, |y| {
            model.holding_cdf(i, y, 0).unwrap_or(f64::NAN)
        })?;
        verdicts.push(Verdict::p_value(
            format!("holding_cdf_ks_state_{i}"),
            ks.p_value,
            alpha,
        ));
    }
    Ok(verdicts)
}

/// Empirical `P[X_{T₁} = j, T₁ ≤ y]` against the kernel by quadrature,
/// within three binomial standard errors.
fn suite_kernel(
    model: &RateModel,
    resolution: &MarkResolution,
    samples: usize,
    seed: u64,
) -> Result<Vec<Verdict>> {
    let k = model.num_states();
    let ys = [0.25, 0.5, 1.0];
    let horizon = 1.0;
    let mut verdicts = Vec::new();
    for i in 1..=k {
        let root = PointStream::new(seed ^ 0x4b45_524e, i as u64, stream_height(resolution))?;
        let mut counts = vec![[0u64; 3]; k + 1];
        for r in 0..samples {
            let mut stream = root.fork_child(r as u64);
            let traj = simulate_path(
                model,
                resolution,
                &mut stream,
                AugmentedState::new(i),
                horizon,
            )?;
            if let Some(first) = traj.jumps().first() {
                for (yi, y) in ys.iter().enumerate() {
                    if first.time <= *y {
                        counts[first.state][yi] += 1;
                    }
                }
            }
        }
        let mut max_z: f64 = 0.0;
        for j in 1..=k {
            if j == i {
                continue;
            }
            for (yi, y) in ys.iter().enumerate() {
                let want = model.kernel(i, j, *y, 0)?;
                let got = counts[j][yi] as f64 / samples as f64;
                let se = (want * (1.0 - want) / samples as f64).sqrt().max(1e-12);
                max_z = max_z.max((got - want).abs() / se);
            }
        }
        verdicts.push(Verdict::upper_bound(
            format!("kernel_law_max_z_state_{i}"),
            max_z,
            3.0,
        ));
    }
    Ok(verdicts)
}

/// Fraction of short sojourns stays under the non-explosion bound
/// `1 − e^{−εc}` (plus Monte Carlo slack).
fn suite_short_holding(
    model: &RateModel,
    resolution: &MarkResolution,
    samples: usize,
    seed: u64,
) -> Result<Vec<Verdict>> {
    let epsilon = 0.1;
    let bound = 1.0 - (-epsilon * model.max_exit_sup()).exp();
    let k = model.num_states();
    let per_state = (samples / k).max(100);
    let mut short = 0u64;
    let mut total = 0u64;
    for i in 1..=k {
        let mut stream =
            PointStream::new(seed ^ 0x5348_4f52, i as u64, stream_height(resolution))?;
        for s in holding_time_samples(model, resolution, &mut stream, i, 0, per_state)? {
            total += 1;
            if s < epsilon {
                short += 1;
            }
        }
    }
    let frac = short as f64 / total as f64;
    let se = (frac * (1.0 - frac) / total as f64).sqrt();
    Ok(vec![Verdict::upper_bound(
        "short_sojourn_fraction",
        frac,
        bound + 3.0 * se,
    )])
}

/// Two-sample agreement between the point-mechanism solver and the direct
/// sampler: sojourn laws per state and count, and first-transition targets.
fn suite_oracle(
    model: &RateModel,
    resolution: &MarkResolution,
    samples: usize,
    seed: u64,
) -> Result<Vec<Verdict>> {
    let k = model.num_states();
    let tests = k * 2 + k;
    let alpha = bonferroni(0.01, tests);
    let mut verdicts = Vec::new();

    for i in 1..=k {
        for n in [0u64, 1] {
            let mut stream =
                PointStream::new(seed ^ 0x4f52_4143, (i as u64) << 8 | n, stream_height(resolution))?;
            let prm =
                holding_time_samples(model, resolution, &mut stream, i, n, samples)?;
            let mut oracle = OracleSampler::new(model, seed ^ 0x4f52_4144, (i as u64) << 8 | n);
            let direct: Vec<f64> = (0..samples)
                .map(|_| oracle.sample_sojourn(i, n))
                .collect::<smpsim::Result<_>>()?;
            let ks = ks_two_sample(
                &EmpiricalDistribution::from_samples(prm)?,
                &EmpiricalDistribution::from_samples(direct)?,
            )?;
            verdicts.push(Verdict::p_value(
                format!("sojourn_ks_state_{i}_count_{n}"),
                ks.p_value,
                alpha,
            ));
        }
    }

    // first-transition target distribution, both samplers truncated at the
    // same horizon
    for i in 1..=k {
        let horizon = horizon_for_first_jump(model, i)?;
        let root = PointStream::new(seed ^ 0x4f52_4145, i as u64, stream_height(resolution))?;
        let mut prm_counts = vec![0u64; k];
        for r in 0..samples {
            let mut stream = root.fork_child(r as u64);
            let traj = simulate_path(
                model,
                resolution,
                &mut stream,
                AugmentedState::new(i),
                horizon,
            )?;
            if let Some(first) = traj.jumps().first() {
                prm_counts[first.state - 1] += 1;
            }
        }
        let mut oracle = OracleSampler::new(model, seed ^ 0x4f52_4146, i as u64);
        let mut oracle_counts = vec![0u64; k];
        for _ in 0..samples {
            let traj = oracle.simulate_path(AugmentedState::new(i), horizon)?;
            if let Some(first) = traj.jumps().first() {
                oracle_counts[first.state - 1] += 1;
            }
        }
        let chi = chi_square_two_sample(&prm_counts, &oracle_counts)?;
        verdicts.push(Verdict::p_value(
            format!("first_transition_chi2_state_{i}"),
            chi.p_value,
            alpha,
        ));
    }
    Ok(verdicts)
}

/// Horizon by which the first jump from `state` has happened except with
/// probability about `e^{−16}`.
fn horizon_for_first_jump(model: &RateModel, state: usize) -> Result<f64> {
    Ok(invert_gamma(model, state, 0, 16.0, 1e-6, 1e9)?.max(1.0))
}

/// Coupled-run sanity: identical initials give identical paths, the coupled
/// first marginal keeps the solo first-jump law, and the generator splits
/// across components when states differ.
fn suite_coupling(
    model: &RateModel,
    resolution: &MarkResolution,
    samples: usize,
    seed: u64,
) -> Result<Vec<Verdict>> {
    let k = model.num_states();
    let mut verdicts = Vec::new();

    // identical initials
    let root = PointStream::new(seed ^ 0x4350_4c31, 0, stream_height(resolution))?;
    let mut mismatches = 0u64;
    for r in 0..200.min(samples) {
        let mut stream = root.fork_child(r as u64);
        let path = simulate_coupled(
            model,
            resolution,
            &mut stream,
            AugmentedState::new(1),
            AugmentedState::new(1),
            2.0,
        )?;
        if path.first().jumps() != path.second().jumps() || path.merge_time() != Some(0.0) {
            mismatches += 1;
        }
    }
    verdicts.push(Verdict::upper_bound(
        "identical_initials_mismatches",
        mismatches as f64,
        0.0,
    ));

    // coupled first marginal vs solo run: first-jump time from state 1 with
    // the partner started in the farthest state
    let partner = k;
    let horizon = horizon_for_first_jump(model, 1)?;
    let coupled_root = PointStream::new(seed ^ 0x4350_4c32, 1, stream_height(resolution))?;
    let solo_root = PointStream::new(seed ^ 0x4350_4c33, 2, stream_height(resolution))?;
    let mut coupled_t1 = Vec::new();
    let mut solo_t1 = Vec::new();
    for r in 0..samples {
        let mut cs = coupled_root.fork_child(r as u64);
        let path = simulate_coupled(
            model,
            resolution,
            &mut cs,
            AugmentedState::new(1),
            AugmentedState::new(partner),
            horizon,
        )?;
        if let Some(first) = path.first().jumps().first() {
            coupled_t1.push(first.time);
        }
        let mut ss = solo_root.fork_child(r as u64);
        let traj = simulate_path(model, resolution, &mut ss, AugmentedState::new(1), horizon)?;
        if let Some(first) = traj.jumps().first() {
            solo_t1.push(first.time);
        }
    }
    let ks = ks_two_sample(
        &EmpiricalDistribution::from_samples(coupled_t1)?,
        &EmpiricalDistribution::from_samples(solo_t1)?,
    )?;
    verdicts.push(Verdict::p_value(
        "coupled_marginal_first_jump_ks",
        ks.p_value,
        0.01,
    ));

    // generator additivity across distinct states
    if k >= 2 {
        let phi = TestFunction::both_states_are(1, 1);
        let z1 = AugmentedState::new(1).with_age(0.3);
        let z2 = AugmentedState {
            state: 2,
            age: 0.7,
            count: 1,
        };
        let joint = smpsim::coupling::generator_apply(model, &phi, &z1, &z2);
        let marginal = |z: &AugmentedState, other: &AugmentedState, first: bool| -> f64 {
            let mut acc = 0.0;
            for j in 1..=k {
                if j == z.state {
                    continue;
                }
                let lam = model.rate(z.state, j, z.age, z.count);
                let jumped = AugmentedState {
                    state: j,
                    age: 0.0,
                    count: z.count + 1,
                };
                let (before, after) = if first {
                    (phi.eval(z, other), phi.eval(&jumped, other))
                } else {
                    (phi.eval(other, z), phi.eval(other, &jumped))
                };
                acc += lam * (after - before);
            }
            acc
        };
        let split = marginal(&z1, &z2, true) + marginal(&z2, &z1, false);
        verdicts.push(Verdict::upper_bound(
            "generator_case1_additivity_gap",
            (joint - split).abs(),
            1e-12,
        ));
    }
    Ok(verdicts)
}
