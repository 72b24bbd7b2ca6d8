//! Path-by-path construction of the jump process from a point stream.
//!
//! The algorithm scans the stream's points in time order. At a point
//! `(u, v)` the path sits in state `i` with age `y = u − T_N` and count `n`;
//! if the mark `v` falls inside `Λ_ij(y, n)` the path jumps to `j`, the age
//! resets to zero and the count increments. Points whose marks miss every
//! interval of the current row leave the path unchanged.
//!
//! Boundedness of the rate field rules out explosion, so the jump-count
//! circuit breaker tripping indicates a model or validation bug, not a
//! simulation limitation.

use crate::layout::MarkResolution;
use crate::prm::PointStream;
use crate::rates::RateModel;
use crate::{Error, Result};

/// Circuit breaker: jumps allowed on a single path before the solver
/// declares the model explosion-suspect.
pub const DEFAULT_MAX_JUMPS: u64 = 10_000_000;

/// Points inspected while waiting for a single jump before giving up.
const POINT_BUDGET_PER_SOJOURN: u64 = 10_000_000;

/// Augmented state `z = (state, age, count)` of the Markov lift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentedState {
    pub state: usize,
    pub age: f64,
    pub count: u64,
}

impl AugmentedState {
    /// Fresh start in `state` with zero age and count.
    pub fn new(state: usize) -> Self {
        Self {
            state,
            age: 0.0,
            count: 0,
        }
    }

    pub fn with_age(mut self, age: f64) -> Self {
        self.age = age;
        self
    }

    pub fn with_count(mut self, count: u64) -> Self {
        self.count = count;
        self
    }
}

/// One recorded transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub time: f64,
    pub state: usize,
}

/// A completed sojourn: the state held, the count it was entered with, and
/// its full duration (for the first sojourn this includes the initial age).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sojourn {
    pub state: usize,
    pub count_at_entry: u64,
    pub duration: f64,
}

/// A realized path on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    start: AugmentedState,
    horizon: f64,
    jumps: Vec<Jump>,
}

impl Trajectory {
    /// Assembles a trajectory from raw parts. Samplers in this crate use it;
    /// jump times must be strictly increasing and within the horizon.
    pub(crate) fn assemble(start: AugmentedState, horizon: f64, jumps: Vec<Jump>) -> Self {
        debug_assert!(jumps.windows(2).all(|w| w[0].time < w[1].time));
        Self {
            start,
            horizon,
            jumps,
        }
    }

    pub fn start(&self) -> AugmentedState {
        self.start
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    pub fn num_jumps(&self) -> usize {
        self.jumps.len()
    }

    /// Time of the virtual zeroth transition, `−` the initial age.
    pub fn origin_time(&self) -> f64 {
        // + 0.0 keeps a zero initial age from printing as −0
        -self.start.age + 0.0
    }

    /// Right-continuous evaluation of `(state, age, count)` at `t`.
    pub fn state_at(&self, t: f64) -> Result<AugmentedState> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::TimeOutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        let idx = self.jumps.partition_point(|j| j.time <= t);
        if idx == 0 {
            Ok(AugmentedState {
                state: self.start.state,
                age: self.start.age + t,
                count: self.start.count,
            })
        } else {
            let last = self.jumps[idx - 1];
            Ok(AugmentedState {
                state: last.state,
                age: t - last.time,
                count: self.start.count + idx as u64,
            })
        }
    }

    /// Sojourns closed by a jump, in order. The final partial sojourn is
    /// censored by the horizon and excluded; see [`Trajectory::censored`].
    pub fn completed_sojourns(&self) -> Vec<Sojourn> {
        let mut out = Vec::with_capacity(self.jumps.len());
        let mut entered = self.origin_time();
        let mut state = self.start.state;
        let mut count = self.start.count;
        for jump in &self.jumps {
            out.push(Sojourn {
                state,
                count_at_entry: count,
                duration: jump.time - entered,
            });
            entered = jump.time;
            state = jump.state;
            count += 1;
        }
        out
    }

    /// The horizon-censored tail: state occupied at the end, its entry count,
    /// and the time spent in it by the horizon.
    pub fn censored(&self) -> Sojourn {
        match self.jumps.last() {
            Some(last) => Sojourn {
                state: last.state,
                count_at_entry: self.start.count + self.jumps.len() as u64,
                duration: self.horizon - last.time,
            },
            None => Sojourn {
                state: self.start.state,
                count_at_entry: self.start.count,
                duration: self.horizon - self.origin_time(),
            },
        }
    }
}

fn check_start(model: &RateModel, start: &AugmentedState) -> Result<()> {
    if start.state < 1 || start.state > model.num_states() {
        return Err(Error::StateOutOfRange {
            state: start.state,
            num_states: model.num_states(),
        });
    }
    if !(start.age.is_finite() && start.age >= 0.0) {
        return Err(Error::InvalidModel(format!(
            "initial age must be finite and nonnegative, got {}",
            start.age
        )));
    }
    Ok(())
}

/// Runs one path from `start` to `horizon`, consuming points from `stream`.
pub fn simulate_path(
    model: &RateModel,
    resolution: &MarkResolution,
    stream: &mut PointStream,
    start: AugmentedState,
    horizon: f64,
) -> Result<Trajectory> {
    check_start(model, &start)?;
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::TimeOutOfRange { t: horizon, horizon });
    }
    let mut state = start.state;
    let mut count = start.count;
    let mut last_jump_time = -start.age;
    let mut jumps = Vec::new();
    loop {
        let point = stream.next_point();
        if point.time > horizon {
            break;
        }
        let age = point.time - last_jump_time;
        if let Some(target) = resolution.resolve_mark(state, age, count, point.mark) {
            state = target;
            count += 1;
            last_jump_time = point.time;
            jumps.push(Jump {
                time: point.time,
                state: target,
            });
            if jumps.len() as u64 >= DEFAULT_MAX_JUMPS {
                return Err(Error::ExplosionSuspected {
                    model: model.name().to_string(),
                    limit: DEFAULT_MAX_JUMPS,
                    horizon,
                });
            }
        }
    }
    Ok(Trajectory {
        start,
        horizon,
        jumps,
    })
}

/// Draws i.i.d. sojourn durations, each generated by the point-acceptance
/// mechanism starting fresh in `state` at age zero with count `count`.
pub fn holding_time_samples(
    model: &RateModel,
    resolution: &MarkResolution,
    stream: &mut PointStream,
    state: usize,
    count: u64,
    num_samples: usize,
) -> Result<Vec<f64>> {
    check_start(model, &AugmentedState::new(state))?;
    let mut out = Vec::with_capacity(num_samples);
    for _ in 0..num_samples {
        let entered = stream.cursor();
        let mut inspected = 0u64;
        loop {
            let point = stream.next_point();
            let age = point.time - entered;
            if resolution
                .resolve_mark(state, age, count, point.mark)
                .is_some()
            {
                out.push(age);
                break;
            }
            inspected += 1;
            if inspected >= POINT_BUDGET_PER_SOJOURN {
                return Err(Error::PointBudgetExceeded {
                    state,
                    budget: POINT_BUDGET_PER_SOJOURN,
                });
            }
        }
    }
    Ok(out)
}
