//! Simulation of non-homogeneous semi-Markov processes driven by a Poisson
//! random measure on a time × mark strip.
//!
//! A jump process on states `1..=K` is built path-by-path: marks of a unit
//! Poisson random measure are matched against a family of disjoint intervals
//! whose lengths equal the age- and count-dependent transition rates
//! `λ_ij(y, n)`. A mark landing in the interval of pair `(i, j)` while the
//! path sits in state `i` triggers a jump to `j` and resets the age clock.
//!
//! The crate provides:
//!
//! - [`rates`]: the rate field with its derived analytic quantities
//!   (cumulative hazard, holding-time cdf/pdf, embedded transition matrix,
//!   semi-Markov kernel),
//! - [`layout`]: the mark-interval layout and mark resolution,
//! - [`prm`]: reproducible, splittable point streams realizing the random
//!   measure,
//! - [`solver`]: the path construction (scan points, accept, jump, reset),
//! - [`oracle`]: an independent direct sampler of the same law by inverse
//!   transform, used for cross-validation,
//! - [`coupling`]: two paths driven by one shared point stream, the generator
//!   of the augmented pair process, and meeting/merging measurements,
//! - [`harness`]: empirical distributions, KS and chi-square machinery, and
//!   the built-in model catalog,
//! - [`config`]: the JSON schema for declaring rate models.

pub mod config;
pub mod coupling;
pub mod harness;
pub mod layout;
pub mod oracle;
pub mod prm;
pub mod rates;
pub mod solver;

use thiserror::Error;

/// Errors surfaced by simulation and numeric routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("quadrature did not converge for state {state}, count {count}, age {age}")]
    QuadratureNonConvergence { state: usize, count: u64, age: f64 },

    #[error("no age below {cap} reaches cumulative hazard {target} for state {state}, count {count}; exit rates may not accumulate")]
    BracketNotFound {
        state: usize,
        count: u64,
        target: f64,
        cap: f64,
    },

    #[error("path exceeded {limit} jumps before horizon {horizon} in model '{model}'; explosion suspected (model or validation bug)")]
    ExplosionSuspected {
        model: String,
        limit: u64,
        horizon: f64,
    },

    #[error("exhausted {budget} candidate points without a jump from state {state}; exit rate may be zero")]
    PointBudgetExceeded { state: usize, budget: u64 },

    #[error("state {state} out of range 1..={num_states}")]
    StateOutOfRange { state: usize, num_states: usize },

    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("mark strip height must be positive and finite, got {0}")]
    BadStripHeight(f64),

    #[error("sample too small: got {got}, need at least {need}")]
    UndersizedSample { got: usize, need: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),
}

pub type Result<T> = std::result::Result<T, Error>;
