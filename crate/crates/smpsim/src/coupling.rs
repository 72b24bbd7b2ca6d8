//! Two solutions driven by one shared point stream.
//!
//! Offering every point to both components couples them: while the
//! components occupy different states their acceptance intervals are
//! disjoint, so at most one moves per point; once they share a state, a mark
//! in the overlap of their (same-left-endpoint) intervals moves both to the
//! same target simultaneously. Each marginal taken alone keeps the exact
//! single-path law.
//!
//! [`generator_apply`] evaluates the infinitesimal generator of the
//! augmented pair process on a test function, and [`dynkin_residual`]
//! Monte-Carlo-checks it against `(E[φ(Z_h)] − φ(z₀))/h`.

use serde::Serialize;

use crate::layout::MarkResolution;
use crate::prm::PointStream;
use crate::rates::RateModel;
use crate::solver::{AugmentedState, Jump, Trajectory, DEFAULT_MAX_JUMPS};
use crate::{Error, Result};

/// Which component(s) a coupled event moved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mover {
    First,
    Second,
    Both,
}

/// One accepted point of a coupled run, with the states after it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoupledEvent {
    pub time: f64,
    pub mover: Mover,
    pub state_first: usize,
    pub state_second: usize,
}

/// Two trajectories driven by the identical point sequence.
#[derive(Debug, Clone)]
pub struct CoupledPath {
    first: Trajectory,
    second: Trajectory,
    events: Vec<CoupledEvent>,
    meet_time: Option<f64>,
    merge_time: Option<f64>,
}

impl CoupledPath {
    pub fn first(&self) -> &Trajectory {
        &self.first
    }

    pub fn second(&self) -> &Trajectory {
        &self.second
    }

    pub fn events(&self) -> &[CoupledEvent] {
        &self.events
    }

    /// First time both components occupy the same state (0 when they start
    /// together), if it happened before the horizon.
    pub fn meet_time(&self) -> Option<f64> {
        self.meet_time
    }

    /// First time states and ages coincide — and counts too when the model
    /// reads them — after which the components evolve identically.
    pub fn merge_time(&self) -> Option<f64> {
        self.merge_time
    }

    pub fn simultaneous_jumps(&self) -> usize {
        self.events
            .iter()
            .filter(|e| e.mover == Mover::Both)
            .count()
    }
}

/// Runs the pair from `(init1, init2)` to `horizon` on a single stream.
pub fn simulate_coupled(
    model: &RateModel,
    resolution: &MarkResolution,
    stream: &mut PointStream,
    init1: AugmentedState,
    init2: AugmentedState,
    horizon: f64,
) -> Result<CoupledPath> {
    for init in [&init1, &init2] {
        if init.state < 1 || init.state > model.num_states() {
            return Err(Error::StateOutOfRange {
                state: init.state,
                num_states: model.num_states(),
            });
        }
        if !(init.age.is_finite() && init.age >= 0.0) {
            return Err(Error::InvalidModel(format!(
                "initial age must be finite and nonnegative, got {}",
                init.age
            )));
        }
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::TimeOutOfRange { t: horizon, horizon });
    }

    let counts_matter = model.depends_on_count();
    let mut state = [init1.state, init2.state];
    let mut count = [init1.count, init2.count];
    let mut last = [-init1.age, -init2.age];
    let mut jumps: [Vec<Jump>; 2] = [Vec::new(), Vec::new()];
    let mut events = Vec::new();

    let merged_now = |state: &[usize; 2], count: &[u64; 2], age_equal: bool| {
        state[0] == state[1] && age_equal && (!counts_matter || count[0] == count[1])
    };
    let mut meet_time = (state[0] == state[1]).then_some(0.0);
    let mut merge_time = merged_now(&state, &count, init1.age == init2.age).then_some(0.0);

    loop {
        let point = stream.next_point();
        if point.time > horizon {
            break;
        }
        let hit = [0, 1].map(|k| {
            resolution.resolve_mark(state[k], point.time - last[k], count[k], point.mark)
        });
        let mover = match (hit[0], hit[1]) {
            (None, None) => continue,
            (Some(_), None) => Mover::First,
            (None, Some(_)) => Mover::Second,
            (Some(a), Some(b)) => {
                // distinct rows are disjoint and same-pair intervals share
                // left endpoints, so a shared point shares its target
                debug_assert_eq!(a, b);
                debug_assert_eq!(state[0], state[1]);
                let _ = (a, b);
                Mover::Both
            }
        };
        for (k, target) in hit.into_iter().enumerate() {
            if let Some(j) = target {
                state[k] = j;
                count[k] += 1;
                last[k] = point.time;
                jumps[k].push(Jump {
                    time: point.time,
                    state: j,
                });
                if jumps[k].len() as u64 >= DEFAULT_MAX_JUMPS {
                    return Err(Error::ExplosionSuspected {
                        model: model.name().to_string(),
                        limit: DEFAULT_MAX_JUMPS,
                        horizon,
                    });
                }
            }
        }
        events.push(CoupledEvent {
            time: point.time,
            mover,
            state_first: state[0],
            state_second: state[1],
        });
        if meet_time.is_none() && state[0] == state[1] {
            meet_time = Some(point.time);
        }
        if merge_time.is_none()
            && mover == Mover::Both
            && merged_now(&state, &count, true)
        {
            merge_time = Some(point.time);
        }
    }

    let [jumps1, jumps2] = jumps;
    Ok(CoupledPath {
        first: Trajectory::assemble(init1, horizon, jumps1),
        second: Trajectory::assemble(init2, horizon, jumps2),
        events,
        meet_time,
        merge_time,
    })
}

type Phi = dyn Fn(&AugmentedState, &AugmentedState) -> f64 + Send + Sync;

/// A bounded test function `φ(z₁, z₂)`, continuously differentiable in the
/// two age variables, with optional analytic age-partials (finite
/// differences otherwise).
pub struct TestFunction {
    value: Box<Phi>,
    dy_first: Option<Box<Phi>>,
    dy_second: Option<Box<Phi>>,
    fd_step: f64,
}

impl TestFunction {
    pub fn new(f: impl Fn(&AugmentedState, &AugmentedState) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            value: Box::new(f),
            dy_first: None,
            dy_second: None,
            fd_step: 1e-6,
        }
    }

    pub fn with_partials(
        mut self,
        dy_first: impl Fn(&AugmentedState, &AugmentedState) -> f64 + Send + Sync + 'static,
        dy_second: impl Fn(&AugmentedState, &AugmentedState) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.dy_first = Some(Box::new(dy_first));
        self.dy_second = Some(Box::new(dy_second));
        self
    }

    /// `φ ≡ c`.
    pub fn constant(c: f64) -> Self {
        Self::new(move |_, _| c).with_partials(|_, _| 0.0, |_, _| 0.0)
    }

    /// Indicator that the first component's state equals `target`.
    pub fn first_state_is(target: usize) -> Self {
        Self::new(move |z1: &AugmentedState, _: &AugmentedState| if z1.state == target { 1.0 } else { 0.0 })
            .with_partials(|_, _| 0.0, |_, _| 0.0)
    }

    /// Indicator that the second component's state equals `target`.
    pub fn second_state_is(target: usize) -> Self {
        Self::new(move |_: &AugmentedState, z2: &AugmentedState| if z2.state == target { 1.0 } else { 0.0 })
            .with_partials(|_, _| 0.0, |_, _| 0.0)
    }

    /// Product indicator: both components sit on their targets.
    pub fn both_states_are(target_first: usize, target_second: usize) -> Self {
        Self::new(move |z1: &AugmentedState, z2: &AugmentedState| {
            if z1.state == target_first && z2.state == target_second { 1.0 } else { 0.0 }
        })
        .with_partials(|_, _| 0.0, |_, _| 0.0)
    }

    pub fn eval(&self, z1: &AugmentedState, z2: &AugmentedState) -> f64 {
        (self.value)(z1, z2)
    }

    /// `∂φ/∂y₁`, analytic when supplied, central differences otherwise
    /// (one-sided next to the age-zero boundary).
    pub fn dy_first(&self, z1: &AugmentedState, z2: &AugmentedState) -> f64 {
        match &self.dy_first {
            Some(d) => d(z1, z2),
            None => self.fd(z1, z2, true),
        }
    }

    /// `∂φ/∂y₂`.
    pub fn dy_second(&self, z1: &AugmentedState, z2: &AugmentedState) -> f64 {
        match &self.dy_second {
            Some(d) => d(z1, z2),
            None => self.fd(z1, z2, false),
        }
    }

    fn fd(&self, z1: &AugmentedState, z2: &AugmentedState, first: bool) -> f64 {
        let h = self.fd_step;
        let at = |age: f64| {
            let mut a = *z1;
            let mut b = *z2;
            if first {
                a.age = age;
            } else {
                b.age = age;
            }
            (self.value)(&a, &b)
        };
        let age = if first { z1.age } else { z2.age };
        if age >= h {
            (at(age + h) - at(age - h)) / (2.0 * h)
        } else {
            (at(age + h) - at(age)) / h
        }
    }
}

fn after_jump(z: &AugmentedState, target: usize) -> AugmentedState {
    AugmentedState {
        state: target,
        age: 0.0,
        count: z.count + 1,
    }
}

/// Evaluates the generator of the augmented pair process on `φ` at
/// `(z₁, z₂)`: the two age-drift terms, the two lone-jump sums weighted by
/// the positive parts `(λ¹ − δ λ²)⁺`, and — when the states coincide — the
/// simultaneous-jump sum weighted by `min(λ¹, λ²)`.
pub fn generator_apply(
    model: &RateModel,
    phi: &TestFunction,
    z1: &AugmentedState,
    z2: &AugmentedState,
) -> f64 {
    let base = phi.eval(z1, z2);
    let same = z1.state == z2.state;
    let mut acc = phi.dy_first(z1, z2) + phi.dy_second(z1, z2);
    for j in 1..=model.num_states() {
        let lam1 = if j != z1.state {
            model.rate(z1.state, j, z1.age, z1.count)
        } else {
            0.0
        };
        let lam2 = if j != z2.state {
            model.rate(z2.state, j, z2.age, z2.count)
        } else {
            0.0
        };
        if j != z1.state {
            let coeff = if same { (lam1 - lam2).max(0.0) } else { lam1 };
            if coeff > 0.0 {
                acc += coeff * (phi.eval(&after_jump(z1, j), z2) - base);
            }
        }
        if j != z2.state {
            let coeff = if same { (lam2 - lam1).max(0.0) } else { lam2 };
            if coeff > 0.0 {
                acc += coeff * (phi.eval(z1, &after_jump(z2, j)) - base);
            }
        }
        if same && j != z1.state {
            let coeff = lam1.min(lam2);
            if coeff > 0.0 {
                acc += coeff * (phi.eval(&after_jump(z1, j), &after_jump(z2, j)) - base);
            }
        }
    }
    acc
}

/// Monte Carlo estimate of `(E[φ(Z_h)] − φ(z₀))/h − Aφ(z₀)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DynkinEstimate {
    pub residual: f64,
    pub std_error: f64,
    pub generator_value: f64,
    pub mean_final: f64,
    pub reps: usize,
}

/// Simulates `reps` coupled paths from `(z1, z2)` over `[0, h]` on forked
/// substreams of `stream` and compares the empirical drift of `φ` with the
/// generator value.
#[allow(clippy::too_many_arguments)]
pub fn dynkin_residual(
    model: &RateModel,
    resolution: &MarkResolution,
    phi: &TestFunction,
    z1: AugmentedState,
    z2: AugmentedState,
    h: f64,
    reps: usize,
    stream: &PointStream,
) -> Result<DynkinEstimate> {
    if reps == 0 {
        return Err(Error::UndersizedSample { got: 0, need: 1 });
    }
    let phi0 = phi.eval(&z1, &z2);
    let generator_value = generator_apply(model, phi, &z1, &z2);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for r in 0..reps {
        let mut child = stream.fork_child(r as u64);
        let path = simulate_coupled(model, resolution, &mut child, z1, z2, h)?;
        let zf1 = path.first().state_at(h)?;
        let zf2 = path.second().state_at(h)?;
        let v = phi.eval(&zf1, &zf2);
        sum += v;
        sum_sq += v * v;
    }
    let n = reps as f64;
    let mean_final = sum / n;
    let var = ((sum_sq - n * mean_final * mean_final) / (n - 1.0).max(1.0)).max(0.0);
    let se_mean = (var / n).sqrt();
    Ok(DynkinEstimate {
        residual: (mean_final - phi0) / h - generator_value,
        std_error: se_mean / h,
        generator_value,
        mean_final,
        reps,
    })
}

/// Result of the two-window generator check.
#[derive(Debug, Clone, Serialize)]
pub struct DynkinCheck {
    /// `(h, estimate)` pairs, largest window first.
    pub estimates: Vec<(f64, DynkinEstimate)>,
    /// First-order drift slope estimated from the largest window.
    pub slope_bound: f64,
    /// `3·se + slope_bound·h` at the smallest window.
    pub bound_at_smallest: f64,
    pub residual_at_smallest: f64,
    /// Whether shrinking the window shrank the residual proportionally
    /// (within Monte Carlo error).
    pub trend_ok: bool,
    pub pass: bool,
}

/// Runs [`dynkin_residual`] at each window length (largest first), bounds
/// the first-order bias slope from the largest window, and requires the
/// smallest window's residual to fit inside `3·se + slope·h` with a
/// proportional shrink between the two windows.
#[allow(clippy::too_many_arguments)]
pub fn dynkin_check(
    model: &RateModel,
    resolution: &MarkResolution,
    phi: &TestFunction,
    z1: AugmentedState,
    z2: AugmentedState,
    h_values: &[f64],
    reps: usize,
    stream: &PointStream,
) -> Result<DynkinCheck> {
    if h_values.is_empty() {
        return Err(Error::UndersizedSample { got: 0, need: 1 });
    }
    let mut windows: Vec<f64> = h_values.to_vec();
    windows.sort_by(|a, b| b.partial_cmp(a).expect("finite windows"));
    let mut estimates = Vec::with_capacity(windows.len());
    for (k, h) in windows.iter().enumerate() {
        let sub = stream.fork_child(k as u64);
        estimates.push((
            *h,
            dynkin_residual(model, resolution, phi, z1, z2, *h, reps, &sub)?,
        ));
    }
    let (h_big, big) = &estimates[0];
    let (h_small, small) = estimates.last().expect("non-empty");
    let slope_bound = (big.residual.abs() + 3.0 * big.std_error) / h_big;
    let bound_at_smallest = 3.0 * small.std_error + slope_bound * h_small;
    let residual_at_smallest = small.residual;
    let trend_ok = if estimates.len() < 2 {
        true
    } else {
        let ratio = h_small / h_big;
        (small.residual - big.residual * ratio).abs()
            <= 3.0 * (small.std_error + big.std_error * ratio)
    };
    let pass = residual_at_smallest.abs() <= bound_at_smallest && trend_ok;
    Ok(DynkinCheck {
        estimates,
        slope_bound,
        bound_at_smallest,
        residual_at_smallest,
        trend_ok,
        pass,
    })
}

/// Aggregate meeting/merging behavior over a batch of coupled paths.
#[derive(Debug, Clone, Serialize)]
pub struct MeetingSummary {
    pub paths: usize,
    pub met: usize,
    pub met_fraction: f64,
    pub mean_meeting_time: Option<f64>,
    pub merged: usize,
    pub merged_fraction: f64,
    pub mean_merge_time: Option<f64>,
    pub merged_at_first_event: usize,
    pub simultaneous_jumps_total: usize,
}

pub fn meeting_stats(paths: &[CoupledPath]) -> MeetingSummary {
    let met: Vec<f64> = paths.iter().filter_map(|p| p.meet_time()).collect();
    let merged: Vec<f64> = paths.iter().filter_map(|p| p.merge_time()).collect();
    let merged_at_first_event = paths
        .iter()
        .filter(|p| match (p.merge_time(), p.events().first()) {
            (Some(m), Some(e)) => m == e.time,
            (Some(m), None) => m == 0.0,
            _ => false,
        })
        .count();
    let mean = |xs: &[f64]| {
        if xs.is_empty() {
            None
        } else {
            Some(xs.iter().sum::<f64>() / xs.len() as f64)
        }
    };
    MeetingSummary {
        paths: paths.len(),
        met: met.len(),
        met_fraction: met.len() as f64 / paths.len().max(1) as f64,
        mean_meeting_time: mean(&met),
        merged: merged.len(),
        merged_fraction: merged.len() as f64 / paths.len().max(1) as f64,
        mean_merge_time: mean(&merged),
        merged_at_first_event,
        simultaneous_jumps_total: paths.iter().map(|p| p.simultaneous_jumps()).sum(),
    }
}
