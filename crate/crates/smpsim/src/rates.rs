//! Transition-rate field `λ_ij(y, n)` and its derived analytic quantities.
//!
//! A [`RateModel`] holds one rate function per ordered state pair, the exact
//! sup-norms `‖λ_ij‖_∞`, and computes the cumulative exit hazard
//! `γ_i(y, n) = ∫_0^y λ_i(s, n) ds`, the holding-time cdf
//! `F(y|i, n) = 1 − e^{−γ_i(y, n)}` and its density, the embedded transition
//! matrix `p_ij(y, n) = λ_ij / λ_i`, and the semi-Markov kernel
//! `Q_ij(y, n) = ∫_0^y e^{−γ_i(s, n)} λ_ij(s, n) ds`.
//!
//! Step-grid rates integrate exactly (rectangle sums); everything else goes
//! through adaptive Simpson quadrature with absolute tolerance control.

use serde::Serialize;

use crate::{Error, Result};

/// Default absolute quadrature tolerance.
pub const DEFAULT_QUAD_TOL: f64 = 1e-10;
/// Maximum adaptive-bisection depth before quadrature gives up.
pub const MAX_QUAD_DEPTH: u32 = 40;

/// Count classes probed by [`RateModel::validate`].
const VALIDATION_COUNTS: [u64; 4] = [0, 1, 2, 7];
/// Age grid size used by [`RateModel::validate`].
const VALIDATION_GRID: usize = 129;

/// One step-interpolated rate table for a band of transition counts.
///
/// `values[m]` applies on `[breaks[m], breaks[m+1])` and the last value
/// extends to infinity; the interpolation is right-continuous in `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepClass {
    /// Applies to counts `n <= upto_count`; `None` catches every count.
    pub upto_count: Option<u64>,
    pub breaks: Vec<f64>,
    pub values: Vec<f64>,
}

impl StepClass {
    fn segment_value(&self, y: f64) -> f64 {
        // right-continuous lookup; breaks are strictly increasing with breaks[0] == 0
        let mut v = *self.values.last().expect("non-empty step class");
        for m in 0..self.breaks.len() {
            let hi = self.breaks.get(m + 1).copied().unwrap_or(f64::INFINITY);
            if y >= self.breaks[m] && y < hi {
                v = self.values[m];
                break;
            }
        }
        v
    }

    fn integral_to(&self, y: f64) -> f64 {
        let mut total = 0.0;
        for m in 0..self.breaks.len() {
            let lo = self.breaks[m];
            if y <= lo {
                break;
            }
            let hi = self.breaks.get(m + 1).copied().unwrap_or(f64::INFINITY);
            total += self.values[m] * (y.min(hi) - lo);
        }
        total
    }
}

/// A single pair's rate function `λ_ij(y, n)`.
#[derive(Debug, Clone, PartialEq)]
pub enum RateFn {
    /// Identically zero (the pair never fires).
    Zero,
    /// Constant in both age and count.
    Constant(f64),
    /// `min(slope · y, cap)` — age-linear with a bound.
    LinearCapped { slope: f64, cap: f64 },
    /// `min(coeff · y^exponent, cap)` — Weibull-like hazard with a bound.
    PowerCapped {
        coeff: f64,
        exponent: f64,
        cap: f64,
    },
    /// `base / (1 + n)` — constant in age, decaying in the jump count.
    CountDecaying { base: f64 },
    /// Tabulated step function in age, per count class.
    Step(Vec<StepClass>),
}

impl RateFn {
    pub fn eval(&self, y: f64, n: u64) -> f64 {
        match self {
            RateFn::Zero => 0.0,
            RateFn::Constant(a) => *a,
            RateFn::LinearCapped { slope, cap } => (slope * y).min(*cap),
            RateFn::PowerCapped {
                coeff,
                exponent,
                cap,
            } => (coeff * y.powf(*exponent)).min(*cap),
            RateFn::CountDecaying { base } => base / (1.0 + n as f64),
            RateFn::Step(classes) => Self::class_for(classes, n).segment_value(y),
        }
    }

    fn class_for(classes: &[StepClass], n: u64) -> &StepClass {
        classes
            .iter()
            .find(|c| c.upto_count.is_none_or(|upto| n <= upto))
            .unwrap_or_else(|| classes.last().expect("non-empty step classes"))
    }

    /// Exact essential sup over all ages and counts.
    pub fn sup_norm(&self) -> f64 {
        match self {
            RateFn::Zero => 0.0,
            RateFn::Constant(a) => *a,
            RateFn::LinearCapped { slope, cap } => {
                if *slope > 0.0 {
                    *cap
                } else {
                    0.0
                }
            }
            RateFn::PowerCapped { coeff, cap, .. } => {
                if *coeff > 0.0 {
                    *cap
                } else {
                    0.0
                }
            }
            RateFn::CountDecaying { base } => *base,
            RateFn::Step(classes) => classes
                .iter()
                .flat_map(|c| c.values.iter().copied())
                .fold(0.0, f64::max),
        }
    }

    /// Ages at which the function has a corner or a discontinuity, for the
    /// given count. Quadrature splits its intervals here.
    pub fn breakpoints(&self, n: u64) -> Vec<f64> {
        match self {
            RateFn::Zero | RateFn::Constant(_) | RateFn::CountDecaying { .. } => Vec::new(),
            RateFn::LinearCapped { slope, cap } => {
                if *slope > 0.0 && *cap > 0.0 {
                    vec![cap / slope]
                } else {
                    Vec::new()
                }
            }
            RateFn::PowerCapped {
                coeff,
                exponent,
                cap,
            } => {
                if *coeff > 0.0 && *cap > 0.0 && *exponent > 0.0 {
                    vec![(cap / coeff).powf(1.0 / exponent)]
                } else {
                    Vec::new()
                }
            }
            RateFn::Step(classes) => Self::class_for(classes, n).breaks.clone(),
        }
    }

    /// Exact integral `∫_0^y` for representations that admit one (step
    /// tables and the zero function). Callables return `None` and are
    /// integrated numerically.
    pub fn exact_integral(&self, y: f64, n: u64) -> Option<f64> {
        match self {
            RateFn::Zero => Some(0.0),
            RateFn::Step(classes) => Some(Self::class_for(classes, n).integral_to(y)),
            _ => None,
        }
    }

    pub fn depends_on_count(&self) -> bool {
        match self {
            RateFn::CountDecaying { .. } => true,
            RateFn::Step(classes) => classes.len() > 1,
            _ => false,
        }
    }
}

/// Enumerates ordered pairs `(i, j)`, `i ≠ j`, in the lexicographic order
/// induced by the natural order on states `1..=num_states`.
pub fn ordered_pairs(num_states: usize) -> impl Iterator<Item = (usize, usize)> {
    (1..=num_states)
        .flat_map(move |i| (1..=num_states).filter(move |&j| j != i).map(move |j| (i, j)))
}

/// Position of `(i, j)` in [`ordered_pairs`].
pub fn pair_index(num_states: usize, i: usize, j: usize) -> usize {
    debug_assert!(i != j && i >= 1 && j >= 1 && i <= num_states && j <= num_states);
    (i - 1) * (num_states - 1) + (j - 1) - usize::from(j > i)
}

/// The transition-rate field for a finite state space `1..=K`.
#[derive(Debug, Clone)]
pub struct RateModel {
    name: String,
    num_states: usize,
    rates: Vec<RateFn>,
    sup_norms: Vec<f64>,
    n_dependent: bool,
    quad_tol: f64,
}

impl RateModel {
    /// Builds a model from `(from, to, rate)` entries; missing pairs are zero.
    /// Sup-norms are derived exactly from the rate representations.
    pub fn new(
        name: impl Into<String>,
        num_states: usize,
        entries: Vec<(usize, usize, RateFn)>,
    ) -> Result<Self> {
        let mut model = Self::skeleton(name, num_states)?;
        for (i, j, f) in entries {
            model.check_state(i)?;
            model.check_state(j)?;
            if i == j {
                return Err(Error::InvalidModel(format!(
                    "diagonal entry ({i}, {j}) is not a transition"
                )));
            }
            let idx = pair_index(num_states, i, j);
            model.sup_norms[idx] = f.sup_norm();
            model.rates[idx] = f;
        }
        model.n_dependent = model.rates.iter().any(RateFn::depends_on_count);
        model.check_sups()?;
        Ok(model)
    }

    /// As [`RateModel::new`] but with caller-declared sup-norms (a matrix in
    /// state order, diagonal ignored). Declared values are trusted; the
    /// validation suite reports rates observed above them.
    pub fn with_declared_sup_norms(
        name: impl Into<String>,
        num_states: usize,
        entries: Vec<(usize, usize, RateFn)>,
        sup_norms: &[Vec<f64>],
    ) -> Result<Self> {
        let mut model = Self::new(name, num_states, entries)?;
        model.declare_sup_norms(sup_norms)?;
        Ok(model)
    }

    /// Replaces the derived sup-norms with a declared matrix (state order,
    /// diagonal ignored).
    pub fn declare_sup_norms(&mut self, sup_norms: &[Vec<f64>]) -> Result<()> {
        let num_states = self.num_states;
        if sup_norms.len() != num_states || sup_norms.iter().any(|r| r.len() != num_states) {
            return Err(Error::InvalidModel(format!(
                "sup_norms must be a {num_states}x{num_states} matrix"
            )));
        }
        for (i, j) in ordered_pairs(num_states) {
            self.sup_norms[pair_index(num_states, i, j)] = sup_norms[i - 1][j - 1];
        }
        self.check_sups()
    }

    fn skeleton(name: impl Into<String>, num_states: usize) -> Result<Self> {
        if num_states < 2 {
            return Err(Error::InvalidModel(format!(
                "need at least 2 states, got {num_states}"
            )));
        }
        let pairs = num_states * (num_states - 1);
        Ok(Self {
            name: name.into(),
            num_states,
            rates: vec![RateFn::Zero; pairs],
            sup_norms: vec![0.0; pairs],
            n_dependent: false,
            quad_tol: DEFAULT_QUAD_TOL,
        })
    }

    fn check_sups(&self) -> Result<()> {
        for (p, &s) in self.sup_norms.iter().enumerate() {
            if !s.is_finite() || s < 0.0 {
                return Err(Error::InvalidModel(format!(
                    "sup norm at pair index {p} must be finite and nonnegative, got {s}"
                )));
            }
        }
        Ok(())
    }

    fn check_state(&self, i: usize) -> Result<()> {
        if i < 1 || i > self.num_states {
            return Err(Error::StateOutOfRange {
                state: i,
                num_states: self.num_states,
            });
        }
        Ok(())
    }

    pub fn with_quadrature_tolerance(mut self, tol: f64) -> Self {
        self.quad_tol = tol;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    /// Whether any rate actually varies with the transition count.
    pub fn depends_on_count(&self) -> bool {
        self.n_dependent
    }

    pub fn quad_tol(&self) -> f64 {
        self.quad_tol
    }

    /// `λ_ij(y, n)`; zero on the diagonal.
    pub fn rate(&self, i: usize, j: usize, y: f64, n: u64) -> f64 {
        if i == j {
            return 0.0;
        }
        self.rates[pair_index(self.num_states, i, j)].eval(y, n)
    }

    pub fn rate_fn(&self, i: usize, j: usize) -> &RateFn {
        &self.rates[pair_index(self.num_states, i, j)]
    }

    /// `‖λ_ij‖_∞`; zero on the diagonal.
    pub fn sup_norm(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        self.sup_norms[pair_index(self.num_states, i, j)]
    }

    /// Total exit rate `λ_i(y, n) = Σ_{j≠i} λ_ij(y, n)`.
    pub fn exit_rate(&self, i: usize, y: f64, n: u64) -> f64 {
        (1..=self.num_states)
            .filter(|&j| j != i)
            .map(|j| self.rate(i, j, y, n))
            .sum()
    }

    /// `c_i = Σ_{j≠i} ‖λ_ij‖_∞`.
    pub fn exit_sup(&self, i: usize) -> f64 {
        (1..=self.num_states)
            .filter(|&j| j != i)
            .map(|j| self.sup_norm(i, j))
            .sum()
    }

    /// `c = max_i c_i`.
    pub fn max_exit_sup(&self) -> f64 {
        (1..=self.num_states)
            .map(|i| self.exit_sup(i))
            .fold(0.0, f64::max)
    }

    /// Sum of sup-norms over every ordered pair — the mark strip height.
    pub fn sup_total(&self) -> f64 {
        self.sup_norms.iter().sum()
    }

    /// Corner/discontinuity ages of row `i` at count `n`, sorted and deduped.
    pub fn row_breakpoints(&self, i: usize, n: u64) -> Vec<f64> {
        let mut pts: Vec<f64> = (1..=self.num_states)
            .filter(|&j| j != i)
            .flat_map(|j| self.rates[pair_index(self.num_states, i, j)].breakpoints(n))
            .filter(|p| p.is_finite() && *p > 0.0)
            .collect();
        pts.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
        pts.dedup();
        pts
    }

    /// Cumulative exit hazard `γ_i(y, n) = ∫_0^y λ_i(s, n) ds`.
    ///
    /// Exact rectangle sums when every entry of row `i` is tabulated or zero,
    /// adaptive Simpson quadrature otherwise.
    pub fn gamma(&self, i: usize, y: f64, n: u64) -> Result<f64> {
        debug_assert!(y >= 0.0, "age must be nonnegative");
        if y <= 0.0 {
            return Ok(0.0);
        }
        let row: Vec<&RateFn> = (1..=self.num_states)
            .filter(|&j| j != i)
            .map(|j| &self.rates[pair_index(self.num_states, i, j)])
            .collect();
        if let Some(exact) = row
            .iter()
            .map(|f| f.exact_integral(y, n))
            .try_fold(0.0, |acc, v| v.map(|v| acc + v))
        {
            return Ok(exact);
        }
        quad::integrate(
            |s| self.exit_rate(i, s, n),
            y,
            &self.row_breakpoints(i, n),
            self.quad_tol,
        )
        .map_err(|_| Error::QuadratureNonConvergence {
            state: i,
            count: n,
            age: y,
        })
    }

    /// Holding-time cdf `F(y|i, n) = 1 − e^{−γ_i(y, n)}`.
    pub fn holding_cdf(&self, i: usize, y: f64, n: u64) -> Result<f64> {
        Ok(-(-self.gamma(i, y, n)?).exp_m1())
    }

    /// Holding-time density `f(y|i, n) = λ_i(y, n) e^{−γ_i(y, n)}`.
    pub fn holding_pdf(&self, i: usize, y: f64, n: u64) -> Result<f64> {
        Ok(self.exit_rate(i, y, n) * (-self.gamma(i, y, n)?).exp())
    }

    /// Row `i` of the embedded transition matrix at `(y, n)`:
    /// `p_ij = λ_ij / λ_i` off the diagonal, with the degenerate row
    /// `p_ii = 1` exactly when `λ_i(y, n) = 0`.
    pub fn embedded_probs(&self, i: usize, y: f64, n: u64) -> Vec<f64> {
        let total = self.exit_rate(i, y, n);
        let mut row = vec![0.0; self.num_states];
        if total > 0.0 {
            for j in 1..=self.num_states {
                if j != i {
                    row[j - 1] = self.rate(i, j, y, n) / total;
                }
            }
        } else {
            row[i - 1] = 1.0;
        }
        row
    }

    /// Semi-Markov kernel `Q_ij(y, n) = ∫_0^y e^{−γ_i(s, n)} λ_ij(s, n) ds`,
    /// the joint probability of next state `j` and holding time `≤ y`.
    pub fn kernel(&self, i: usize, j: usize, y: f64, n: u64) -> Result<f64> {
        if i == j || y <= 0.0 {
            return Ok(0.0);
        }
        let integrand = |s: f64| -> f64 {
            let g = self
                .gamma(i, s, n)
                .expect("inner hazard quadrature converges where the outer one is probed");
            (-g).exp() * self.rate(i, j, s, n)
        };
        quad::integrate(integrand, y, &self.row_breakpoints(i, n), self.quad_tol).map_err(|_| {
            Error::QuadratureNonConvergence {
                state: i,
                count: n,
                age: y,
            }
        })
    }

    /// Residual of the hazard identity `p_ij f / (1 − F) − λ_ij` (zero for
    /// `i = j` by definition). The caller keeps `y` where `F < 1` numerically.
    pub fn rate_identity_residual(&self, i: usize, j: usize, y: f64, n: u64) -> Result<f64> {
        if i == j {
            return Ok(0.0);
        }
        let p = self.embedded_probs(i, y, n)[j - 1];
        let f = self.holding_pdf(i, y, n)?;
        let survivor = 1.0 - self.holding_cdf(i, y, n)?;
        Ok(p * f / survivor - self.rate(i, j, y, n))
    }

    /// Checks boundedness of the rate field and divergence of the cumulative
    /// hazard on a probe grid. Violations are reported as data, not errors.
    pub fn validate(&self, y_check: f64, gamma_min: f64) -> ValidationReport {
        let mut violations = Vec::new();
        for (i, j) in ordered_pairs(self.num_states) {
            let sup = self.sup_norm(i, j);
            let slack = 1e-12 * sup.max(1.0);
            for &n in &VALIDATION_COUNTS {
                for g in 0..VALIDATION_GRID {
                    let y = y_check * g as f64 / (VALIDATION_GRID - 1) as f64;
                    let value = self.rate(i, j, y, n);
                    if !value.is_finite() || value < 0.0 {
                        violations.push(Violation::NegativeRate { i, j, y, n, value });
                    } else if value > sup + slack {
                        violations.push(Violation::RateAboveSupNorm {
                            i,
                            j,
                            y,
                            n,
                            value,
                            sup,
                        });
                    }
                }
            }
        }
        for i in 1..=self.num_states {
            if !self.exit_sup(i).is_finite() {
                violations.push(Violation::UnboundedExitSup { i });
            }
            for &n in &VALIDATION_COUNTS {
                match self.gamma(i, y_check, n) {
                    Ok(g) if g > gamma_min => {}
                    Ok(g) => violations.push(Violation::HazardNotDiverging {
                        i,
                        n,
                        y_check,
                        gamma_min,
                        gamma: g,
                    }),
                    Err(e) => violations.push(Violation::HazardEvaluationFailed {
                        i,
                        n,
                        y_check,
                        detail: e.to_string(),
                    }),
                }
            }
        }
        ValidationReport {
            violations,
            per_state_exit_sup: (1..=self.num_states).map(|i| self.exit_sup(i)).collect(),
            max_exit_sup: self.max_exit_sup(),
        }
    }
}

/// A single failed model assumption, with its witness point.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NegativeRate {
        i: usize,
        j: usize,
        y: f64,
        n: u64,
        value: f64,
    },
    RateAboveSupNorm {
        i: usize,
        j: usize,
        y: f64,
        n: u64,
        value: f64,
        sup: f64,
    },
    UnboundedExitSup {
        i: usize,
    },
    HazardNotDiverging {
        i: usize,
        n: u64,
        y_check: f64,
        gamma_min: f64,
        gamma: f64,
    },
    HazardEvaluationFailed {
        i: usize,
        n: u64,
        y_check: f64,
        detail: String,
    },
}

/// Outcome of [`RateModel::validate`].
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// `c_i` per state, in state order.
    pub per_state_exit_sup: Vec<f64>,
    /// `c = max_i c_i`.
    pub max_exit_sup: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Adaptive Simpson quadrature with interval pre-splitting at breakpoints.
mod quad {
    pub struct NonConvergent;

    /// Integrates `f` over `[0, upper]`, splitting first at the supplied
    /// breakpoints so each adaptive pass sees a smooth piece.
    pub fn integrate(
        f: impl Fn(f64) -> f64,
        upper: f64,
        breakpoints: &[f64],
        tol: f64,
    ) -> Result<f64, NonConvergent> {
        if upper <= 0.0 {
            return Ok(0.0);
        }
        let mut cuts = vec![0.0];
        cuts.extend(breakpoints.iter().copied().filter(|&p| p > 0.0 && p < upper));
        cuts.push(upper);
        let pieces = cuts.len() - 1;
        let piece_tol = tol / pieces as f64;
        let mut total = 0.0;
        for w in cuts.windows(2) {
            total += simpson_piece(&f, w[0], w[1], piece_tol)?;
        }
        Ok(total)
    }

    fn simpson_piece(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        tol: f64,
    ) -> Result<f64, NonConvergent> {
        if b <= a {
            return Ok(0.0);
        }
        let m = 0.5 * (a + b);
        // integrands are right-continuous: a piece ending at a breakpoint
        // must sample its own left limit there, not the next segment
        let fb = f(b - (b - a) * 1e-13);
        let (fa, fm) = (f(a), f(m));
        let whole = simpson(a, b, fa, fm, fb);
        adapt(f, a, b, fa, fm, fb, whole, tol, super::MAX_QUAD_DEPTH)
    }

    fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }

    #[allow(clippy::too_many_arguments)]
    fn adapt(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64, NonConvergent> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(a, m, fa, flm, fm);
        let right = simpson(m, b, fm, frm, fb);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol || (b - a) < 1e-300 {
            return Ok(left + right + delta / 15.0);
        }
        if depth == 0 {
            return Err(NonConvergent);
        }
        let l = adapt(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?;
        let r = adapt(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?;
        Ok(l + r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state(r12: RateFn, r21: RateFn) -> RateModel {
        RateModel::new("test2", 2, vec![(1, 2, r12), (2, 1, r21)]).unwrap()
    }

    fn ctmc2() -> RateModel {
        two_state(RateFn::Constant(2.0), RateFn::Constant(3.0))
    }

    fn age_linear() -> RateModel {
        two_state(
            RateFn::LinearCapped {
                slope: 1.0,
                cap: 2.0,
            },
            RateFn::Constant(3.0),
        )
    }

    fn three_state() -> RateModel {
        RateModel::new(
            "test3",
            3,
            vec![
                (1, 2, RateFn::Constant(2.0)),
                (1, 3, RateFn::Constant(1.0)),
                (2, 1, RateFn::Constant(1.5)),
                (2, 3, RateFn::Constant(0.5)),
                (3, 1, RateFn::Constant(1.0)),
                (3, 2, RateFn::Constant(2.0)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn pair_index_is_lexicographic() {
        let pairs: Vec<_> = ordered_pairs(3).collect();
        assert_eq!(
            pairs,
            vec![(1, 2), (1, 3), (2, 1), (2, 3), (3, 1), (3, 2)]
        );
        for (k, (i, j)) in pairs.iter().enumerate() {
            assert_eq!(pair_index(3, *i, *j), k);
        }
    }

    #[test]
    fn constant_model_validates_with_c_three() {
        let report = ctmc2().validate(10.0, 1.0);
        assert!(report.passed(), "violations: {:?}", report.violations);
        assert_eq!(report.max_exit_sup, 3.0);
        assert_eq!(report.per_state_exit_sup, vec![2.0, 3.0]);
    }

    #[test]
    fn zero_rate_row_reports_hazard_violation() {
        let model = two_state(RateFn::Zero, RateFn::Constant(3.0));
        let report = model.validate(10.0, 1.0);
        assert!(!report.passed());
        let hits: Vec<_> = report
            .violations
            .iter()
            .filter(|v| matches!(v, Violation::HazardNotDiverging { i: 1, .. }))
            .collect();
        assert_eq!(hits.len(), VALIDATION_COUNTS.len());
        assert!(!report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::HazardNotDiverging { i: 2, .. })));
    }

    #[test]
    fn age_linear_validates_with_exact_sup() {
        let model = age_linear();
        let report = model.validate(10.0, 1.0);
        assert!(report.passed(), "violations: {:?}", report.violations);
        assert_eq!(model.sup_norm(1, 2), 2.0);
        assert_eq!(model.exit_sup(1), 2.0);
    }

    #[test]
    fn declared_sup_norms_override_derived() {
        let model = RateModel::with_declared_sup_norms(
            "corrupt",
            2,
            vec![
                (1, 2, RateFn::Constant(2.0)),
                (2, 1, RateFn::Constant(3.0)),
            ],
            &[vec![0.0, 0.5], vec![3.0, 0.0]],
        )
        .unwrap();
        assert_eq!(model.sup_norm(1, 2), 0.5);
        let report = model.validate(5.0, 0.5);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::RateAboveSupNorm { i: 1, j: 2, .. })));
    }

    #[test]
    fn gamma_constant_rate() {
        let g = ctmc2().gamma(1, 0.5, 0).unwrap();
        assert!((g - 1.0).abs() < 1e-9, "gamma = {g}");
    }

    #[test]
    fn gamma_at_zero_age_is_zero() {
        assert_eq!(ctmc2().gamma(1, 0.0, 0).unwrap(), 0.0);
        assert_eq!(age_linear().gamma(1, 0.0, 5).unwrap(), 0.0);
    }

    #[test]
    fn gamma_age_linear_closed_form() {
        // single exit λ(y) = min(y, 2): γ(1) = 1/2, γ(3) = 2 + (3−2)·2
        let model = two_state(
            RateFn::LinearCapped {
                slope: 1.0,
                cap: 2.0,
            },
            RateFn::Constant(1.0),
        );
        let g1 = model.gamma(1, 1.0, 0).unwrap();
        assert!((g1 - 0.5).abs() < 1e-9, "gamma(1) = {g1}");
        let g3 = model.gamma(1, 3.0, 0).unwrap();
        assert!((g3 - 4.0).abs() < 1e-9, "gamma(3) = {g3}");
    }

    #[test]
    fn holding_cdf_matches_closed_forms() {
        let c = ctmc2().holding_cdf(1, 0.5, 0).unwrap();
        assert!((c - (1.0 - (-1.0f64).exp())).abs() < 1e-9);
        assert_eq!(ctmc2().holding_cdf(1, 0.0, 0).unwrap(), 0.0);
        let a = age_linear().holding_cdf(1, 1.0, 0).unwrap();
        assert!((a - (1.0 - (-0.5f64).exp())).abs() < 1e-9);
    }

    #[test]
    fn holding_pdf_closed_form() {
        // f = λ e^{−γ}: constant rate 2 at y = 0.5 gives 2e^{−1}
        let f = ctmc2().holding_pdf(1, 0.5, 0).unwrap();
        assert!((f - 2.0 * (-1.0f64).exp()).abs() < 1e-9, "f = {f}");
        // density vanishes where the exit rate does
        assert_eq!(age_linear().holding_pdf(1, 0.0, 0).unwrap(), 0.0);
    }

    #[test]
    fn holding_cdf_monotone_and_proper_on_grid() {
        for model in [ctmc2(), age_linear(), three_state()] {
            for i in 1..=model.num_states() {
                let mut prev = 0.0;
                for g in 0..=60 {
                    let y = 0.1 * g as f64;
                    let c = model.holding_cdf(i, y, 0).unwrap();
                    assert!((0.0..1.0).contains(&c), "cdf {c} at y={y}");
                    assert!(c + 1e-12 >= prev, "cdf decreased at y={y}");
                    prev = c;
                }
            }
        }
    }

    #[test]
    fn embedded_probs_ratio_and_degenerate_rows() {
        let p = three_state().embedded_probs(1, 0.3, 0);
        assert!((p[0] - 0.0).abs() < 1e-12);
        assert!((p[1] - 2.0 / 3.0).abs() < 1e-12);
        assert!((p[2] - 1.0 / 3.0).abs() < 1e-12);

        let degenerate = two_state(RateFn::Zero, RateFn::Constant(1.0));
        assert_eq!(degenerate.embedded_probs(1, 1.0, 0), vec![1.0, 0.0]);

        assert_eq!(ctmc2().embedded_probs(1, 0.7, 0), vec![0.0, 1.0]);
    }

    #[test]
    fn embedded_rows_sum_to_one() {
        for model in [ctmc2(), three_state(), age_linear()] {
            for i in 1..=model.num_states() {
                for g in 0..40 {
                    let y = 0.17 * g as f64;
                    let sum: f64 = model.embedded_probs(i, y, 1).iter().sum();
                    assert!((sum - 1.0).abs() < 1e-12, "row sum {sum}");
                }
            }
        }
    }

    #[test]
    fn kernel_constant_rate_closed_form() {
        let q = ctmc2().kernel(1, 2, 0.5, 0).unwrap();
        assert!((q - (1.0 - (-1.0f64).exp())).abs() < 1e-9, "Q = {q}");
        assert_eq!(ctmc2().kernel(1, 2, 0.0, 0).unwrap(), 0.0);
    }

    #[test]
    fn kernel_long_run_split() {
        // λ_12 = 2, λ_13 = 1: Q_12(y) = (2/3)(1 − e^{−3y}) → 2/3
        let q = three_state().kernel(1, 2, 10.0, 0).unwrap();
        assert!((q - 2.0 / 3.0).abs() < 1e-9, "Q = {q}");
    }

    #[test]
    fn kernel_rows_sum_to_holding_cdf() {
        for model in [ctmc2(), three_state(), age_linear()] {
            for i in 1..=model.num_states() {
                let y = 0.8;
                let total: f64 = (1..=model.num_states())
                    .filter(|&j| j != i)
                    .map(|j| model.kernel(i, j, y, 0).unwrap())
                    .sum();
                let cdf = model.holding_cdf(i, y, 0).unwrap();
                assert!((total - cdf).abs() < 1e-8, "sum {total} vs cdf {cdf}");
            }
        }
    }

    #[test]
    fn rate_identity_residual_vanishes() {
        for model in [ctmc2(), age_linear(), three_state()] {
            for (i, j) in ordered_pairs(model.num_states()) {
                for g in 1..=20 {
                    let y = 0.08 * g as f64;
                    let r = model.rate_identity_residual(i, j, y, 0).unwrap();
                    assert!(r.abs() < 1e-9, "residual {r} at ({i},{j}) y={y}");
                }
            }
        }
        let r = ctmc2().rate_identity_residual(1, 1, 0.4, 0).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn instantaneous_rate_from_kernel_derivative() {
        // central difference of Q against λ·(1 − F), away from corners
        let model = age_linear();
        let h = 1e-4;
        for g in 1..=20 {
            let y = 0.09 * g as f64; // stays below the cap corner at y = 2
            let up = model.kernel(1, 2, y + h, 0).unwrap();
            let down = model.kernel(1, 2, y - h, 0).unwrap();
            let survivor = 1.0 - model.holding_cdf(1, y, 0).unwrap();
            let fd = (up - down) / (2.0 * h) / survivor;
            let lam = model.rate(1, 2, y, 0);
            assert!((fd - lam).abs() < 1e-5, "fd {fd} vs λ {lam} at y={y}");
        }
    }

    #[test]
    fn step_grid_exact_integral_and_lookup() {
        let step = RateFn::Step(vec![StepClass {
            upto_count: None,
            breaks: vec![0.0, 1.0, 2.5],
            values: vec![0.5, 2.0, 1.0],
        }]);
        assert_eq!(step.eval(0.0, 0), 0.5);
        assert_eq!(step.eval(0.999, 3), 0.5);
        assert_eq!(step.eval(1.0, 0), 2.0);
        assert_eq!(step.eval(7.0, 0), 1.0);
        assert_eq!(step.exact_integral(2.0, 0), Some(0.5 + 2.0));
        assert_eq!(step.exact_integral(4.0, 0), Some(0.5 + 3.0 + 1.5));
        assert_eq!(step.sup_norm(), 2.0);

        let model = two_state(step, RateFn::Constant(1.0));
        let g = model.gamma(1, 4.0, 0).unwrap();
        assert_eq!(g, 5.0);
    }

    #[test]
    fn kernel_handles_step_discontinuities() {
        // single exit: Q_12(y) = F(y) = 1 − e^{−γ(y)}, γ(1) = 0.25 + 1.0
        let step = RateFn::Step(vec![StepClass {
            upto_count: None,
            breaks: vec![0.0, 0.5],
            values: vec![0.5, 2.0],
        }]);
        let model = two_state(step, RateFn::Constant(3.0));
        let q = model.kernel(1, 2, 1.0, 0).unwrap();
        let want = 1.0 - (-1.25f64).exp();
        assert!((q - want).abs() < 1e-9, "Q = {q}, want {want}");
    }

    #[test]
    fn step_grid_count_classes_select_in_order() {
        let step = RateFn::Step(vec![
            StepClass {
                upto_count: Some(1),
                breaks: vec![0.0],
                values: vec![4.0],
            },
            StepClass {
                upto_count: None,
                breaks: vec![0.0],
                values: vec![1.0],
            },
        ]);
        assert_eq!(step.eval(0.5, 0), 4.0);
        assert_eq!(step.eval(0.5, 1), 4.0);
        assert_eq!(step.eval(0.5, 2), 1.0);
        assert!(step.depends_on_count());
    }

    #[test]
    fn count_decaying_rate() {
        let model = two_state(
            RateFn::CountDecaying { base: 2.0 },
            RateFn::Constant(1.0),
        );
        assert_eq!(model.rate(1, 2, 3.0, 0), 2.0);
        assert_eq!(model.rate(1, 2, 3.0, 1), 1.0);
        assert!(model.depends_on_count());
        let g = model.gamma(1, 2.0, 3).unwrap();
        assert!((g - 1.0).abs() < 1e-9);
    }

    #[test]
    fn diagonal_entry_rejected() {
        let err = RateModel::new("bad", 2, vec![(1, 1, RateFn::Constant(1.0))]);
        assert!(err.is_err());
    }

    #[test]
    fn single_state_rejected() {
        assert!(RateModel::new("tiny", 1, vec![]).is_err());
    }
}
