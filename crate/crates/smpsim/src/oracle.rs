//! Independent direct sampler of the same semi-Markov law.
//!
//! No point stream is involved: a sojourn is drawn by inverse transform on
//! the holding-time cdf (bisection on the monotone cumulative hazard), then
//! the next state is drawn from the embedded transition row at the realized
//! age. Agreement between this sampler and the point-acceptance solver is the
//! crate's main distributional cross-check, so the two deliberately share no
//! RNG material and no sampling mechanism.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::prm::derive_stream_id;
use crate::rates::RateModel;
use crate::solver::{AugmentedState, Jump, Trajectory};
use crate::{Error, Result};

/// Default absolute tolerance (in age) of the inverse-cdf bisection.
pub const DEFAULT_INVERSE_TOL: f64 = 1e-10;

/// Ages are never searched beyond this cap; hitting it signals a
/// non-divergent cumulative hazard.
pub const DEFAULT_AGE_CAP: f64 = 1e9;

/// Stream-id salt keeping oracle RNG disjoint from every point stream.
const ORACLE_STREAM_SALT: u64 = 0x6f72_6163;

/// Finds the age `y` with `γ_i(y, n) = target` by exponential bracket growth
/// followed by a safeguarded Newton iteration on the nondecreasing hazard
/// (the slope is the exit rate; steps leaving the bracket fall back to
/// bisection).
pub fn invert_gamma(
    model: &RateModel,
    state: usize,
    count: u64,
    target: f64,
    tol: f64,
    age_cap: f64,
) -> Result<f64> {
    if target <= 0.0 {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while model.gamma(state, hi, count)? < target {
        lo = hi;
        hi *= 2.0;
        if hi > age_cap {
            return Err(Error::BracketNotFound {
                state,
                count,
                target,
                cap: age_cap,
            });
        }
    }
    let mut y = 0.5 * (lo + hi);
    let mut iter = 0u32;
    while hi - lo > tol && iter < 200 {
        iter += 1;
        if y <= lo || y >= hi {
            y = 0.5 * (lo + hi);
            if y <= lo || y >= hi {
                break;
            }
        }
        let g = model.gamma(state, y, count)?;
        let slope = model.exit_rate(state, y, count);
        if slope > 0.0 && (g - target).abs() <= 0.5 * slope * tol {
            return Ok(y);
        }
        if g < target {
            lo = y;
        } else {
            hi = y;
        }
        let newton = y - (g - target) / slope;
        // every other step bisects, so the bracket provably shrinks
        y = if iter.is_multiple_of(2) && slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Ok(0.5 * (lo + hi))
}

/// Direct sampler state: the model, its own RNG stream, and the inversion
/// tolerances.
#[derive(Debug, Clone)]
pub struct OracleSampler<'a> {
    model: &'a RateModel,
    rng: ChaCha8Rng,
    inverse_tol: f64,
    age_cap: f64,
    degenerate_draws: u64,
}

impl<'a> OracleSampler<'a> {
    pub fn new(model: &'a RateModel, seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(derive_stream_id(stream_id, ORACLE_STREAM_SALT));
        Self {
            model,
            rng,
            inverse_tol: DEFAULT_INVERSE_TOL,
            age_cap: DEFAULT_AGE_CAP,
            degenerate_draws: 0,
        }
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.inverse_tol = tol;
        self
    }

    pub fn model(&self) -> &RateModel {
        self.model
    }

    /// Number of degenerate next-state draws seen so far (zero exit rate at
    /// the sampled age; the draw returns the current state unchanged).
    pub fn degenerate_draws(&self) -> u64 {
        self.degenerate_draws
    }

    /// Draws one holding time in `state` at count `count` by inverse
    /// transform: solve `γ(y) = −log(1 − u)` for a uniform `u`.
    pub fn sample_sojourn(&mut self, state: usize, count: u64) -> Result<f64> {
        let u: f64 = self.rng.random();
        let target = -(-u).ln_1p(); // −ln(1 − u), u in [0, 1)
        invert_gamma(
            self.model,
            state,
            count,
            target,
            self.inverse_tol,
            self.age_cap,
        )
    }

    /// Categorical draw of the next state from the embedded row at `(y, n)`.
    pub fn sample_next_state(&mut self, state: usize, age: f64, count: u64) -> usize {
        let probs = self.model.embedded_probs(state, age, count);
        if probs[state - 1] == 1.0 {
            self.degenerate_draws += 1;
            return state;
        }
        let u: f64 = self.rng.random();
        let mut acc = 0.0;
        let mut chosen = 0;
        for (k, p) in probs.iter().enumerate() {
            if *p <= 0.0 {
                continue;
            }
            acc += p;
            chosen = k + 1;
            if u < acc {
                break;
            }
        }
        chosen
    }

    /// Chains sojourn and next-state draws into a full path on
    /// `[0, horizon]`, producing the same trajectory type as the solver.
    ///
    /// A positive initial age conditions the first sojourn on survival past
    /// it: the total age at the first jump solves
    /// `γ(y) = γ(age₀) − ln(1 − u)`.
    pub fn simulate_path(&mut self, start: AugmentedState, horizon: f64) -> Result<Trajectory> {
        if start.state < 1 || start.state > self.model.num_states() {
            return Err(Error::StateOutOfRange {
                state: start.state,
                num_states: self.model.num_states(),
            });
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::TimeOutOfRange { t: horizon, horizon });
        }
        let mut jumps = Vec::new();
        let mut state = start.state;
        let mut count = start.count;
        let mut clock = 0.0;
        let mut pending_age = start.age;
        while clock <= horizon {
            // an exit hazard that stays at zero over the whole remaining
            // window cannot fire; stop instead of failing the bracket search
            let locally_live = self.model.exit_rate(state, pending_age, count) > 0.0;
            if !locally_live
                && self
                    .model
                    .gamma(state, pending_age + (horizon - clock) + 1.0, count)?
                    <= self.model.gamma(state, pending_age, count)?
            {
                break;
            }
            let u: f64 = self.rng.random();
            let offset = if pending_age > 0.0 {
                self.model.gamma(state, pending_age, count)?
            } else {
                0.0
            };
            let target = offset - (-u).ln_1p();
            let total_age = match invert_gamma(
                self.model,
                state,
                count,
                target,
                self.inverse_tol,
                self.age_cap,
            ) {
                Ok(age) => age,
                // the draw asked for more hazard than the model accumulates
                // below the cap; the jump lies far beyond any usable horizon
                Err(Error::BracketNotFound { .. }) => break,
                Err(e) => return Err(e),
            };
            let wait = total_age - pending_age;
            let jump_time = clock + wait;
            if jump_time > horizon {
                break;
            }
            let next = self.sample_next_state(state, total_age, count);
            jumps.push(Jump {
                time: jump_time,
                state: next,
            });
            state = next;
            count += 1;
            clock = jump_time;
            pending_age = 0.0;
        }
        Ok(Trajectory::assemble(start, horizon, jumps))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::{RateFn, RateModel};

    fn ctmc2() -> RateModel {
        RateModel::new(
            "ctmc2",
            2,
            vec![(1, 2, RateFn::Constant(2.0)), (2, 1, RateFn::Constant(3.0))],
        )
        .unwrap()
    }

    fn age_linear() -> RateModel {
        RateModel::new(
            "agelin",
            2,
            vec![
                (
                    1,
                    2,
                    RateFn::LinearCapped {
                        slope: 1.0,
                        cap: 2.0,
                    },
                ),
                (2, 1, RateFn::Constant(3.0)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn invert_gamma_closed_forms() {
        // target −ln(1−u) = 1 with constant rate 2 → y = 0.5
        let model = ctmc2();
        let y = invert_gamma(&model, 1, 0, 1.0, 1e-10, 1e9).unwrap();
        assert!((y - 0.5).abs() < 1e-8, "y = {y}");

        // target 0.5 with λ(y) = min(y, 2): y²/2 = 0.5 → y = 1
        let y = invert_gamma(&age_linear(), 1, 0, 0.5, 1e-10, 1e9).unwrap();
        assert!((y - 1.0).abs() < 1e-8, "y = {y}");

        // u → 0⁺ gives y → 0⁺
        let y = invert_gamma(&model, 1, 0, 1e-14, 1e-12, 1e9).unwrap();
        assert!((0.0..1e-10).contains(&y));
    }

    #[test]
    fn invert_gamma_reports_flat_hazard() {
        let model = RateModel::new("dead", 2, vec![]).unwrap();
        let err = invert_gamma(&model, 1, 0, 1.0, 1e-10, 1e6);
        assert!(matches!(err, Err(Error::BracketNotFound { state: 1, .. })));
    }

    #[test]
    fn sojourn_round_trip_through_cdf() {
        // F(inverse(u)) − u vanishes: the literal inverse-transform contract
        use rand::{Rng, SeedableRng};
        let model = age_linear();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x7274);
        for _ in 0..1000 {
            let u: f64 = rng.random();
            let target = -(-u).ln_1p();
            let y = invert_gamma(&model, 1, 0, target, 1e-10, 1e9).unwrap();
            let back = model.holding_cdf(1, y, 0).unwrap();
            assert!((back - u).abs() < 1e-8, "F(y)={back}, u={u}");
        }
        // and the sampler's own draws are positive and finite
        let mut oracle = OracleSampler::new(&model, 99, 0);
        for _ in 0..100 {
            let s = oracle.sample_sojourn(1, 0).unwrap();
            assert!(s > 0.0 && s.is_finite());
        }
    }

    #[test]
    fn next_state_frequencies_follow_rate_ratios() {
        let model = RateModel::new(
            "split3",
            3,
            vec![
                (1, 2, RateFn::Constant(2.0)),
                (1, 3, RateFn::Constant(1.0)),
                (2, 1, RateFn::Constant(1.0)),
                (3, 1, RateFn::Constant(1.0)),
            ],
        )
        .unwrap();
        let mut oracle = OracleSampler::new(&model, 7, 0);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| oracle.sample_next_state(1, 0.4, 0) == 2)
            .count() as f64;
        let p = hits / n as f64;
        let se = (2.0 / 3.0 * (1.0 / 3.0) / n as f64).sqrt();
        assert!((p - 2.0 / 3.0).abs() < 3.0 * se, "p = {p}");
        assert_eq!(oracle.degenerate_draws(), 0);
    }

    #[test]
    fn two_state_always_switches() {
        let model = ctmc2();
        let mut oracle = OracleSampler::new(&model, 3, 0);
        for _ in 0..100 {
            assert_eq!(oracle.sample_next_state(1, 0.2, 0), 2);
            assert_eq!(oracle.sample_next_state(2, 1.2, 4), 1);
        }
    }

    #[test]
    fn degenerate_row_returns_same_state_with_flag() {
        // λ_12(y) = min(y, 2) is zero at y = 0: row 1 is degenerate there
        let model = age_linear();
        let mut oracle = OracleSampler::new(&model, 3, 0);
        assert_eq!(oracle.sample_next_state(1, 0.0, 0), 1);
        assert_eq!(oracle.degenerate_draws(), 1);
    }

    #[test]
    fn oracle_path_is_deterministic_and_alternates() {
        let model = ctmc2();
        let run = || {
            let mut oracle = OracleSampler::new(&model, 11, 4);
            oracle.simulate_path(AugmentedState::new(1), 30.0).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a, b);
        assert!(a.num_jumps() > 20);
        let mut prev = 1;
        let mut prev_t = 0.0;
        for j in a.jumps() {
            assert_ne!(j.state, prev);
            assert!(j.time > prev_t);
            prev = j.state;
            prev_t = j.time;
        }
    }

    #[test]
    fn zero_rate_override_gives_no_jumps() {
        let model = RateModel::new("dead", 2, vec![]).unwrap();
        let mut oracle = OracleSampler::new(&model, 5, 0);
        let traj = oracle
            .simulate_path(AugmentedState::new(2).with_age(0.5), 10.0)
            .unwrap();
        assert_eq!(traj.num_jumps(), 0);
    }

    #[test]
    fn initial_age_conditions_first_sojourn() {
        // constant rate: residual holding after age 5 is still Exp(2)
        let model = ctmc2();
        let mut oracle = OracleSampler::new(&model, 17, 0);
        let n = 20_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let traj = oracle
                .simulate_path(AugmentedState::new(1).with_age(5.0), 8.0)
                .unwrap();
            sum += traj.jumps()[0].time;
        }
        let mean = sum / n as f64;
        let se = 0.5 / (n as f64).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * se, "mean {mean}");
    }
}
