//! Statistical machinery shared by the verification suites: empirical
//! distributions, one- and two-sample Kolmogorov–Smirnov tests, chi-square
//! goodness-of-fit and homogeneity tests, and the built-in model catalog.
//!
//! Critical values and p-values use the asymptotic formulas throughout; the
//! suites run at sample sizes where those are accurate.

pub mod catalog;

use serde::Serialize;

use crate::{Error, Result};

/// Smallest sample size the KS machinery accepts.
pub const MIN_KS_SAMPLE: usize = 50;

/// Cells with expected count below this are merged before chi-square.
pub const MIN_EXPECTED_CELL: f64 = 5.0;

/// A sorted sample with empirical-cdf queries.
#[derive(Debug, Clone)]
pub struct EmpiricalDistribution {
    sorted: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn from_samples(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::UndersizedSample { got: 0, need: 1 });
        }
        if samples.iter().any(|x| x.is_nan()) {
            return Err(Error::InvalidModel("sample contains NaN".into()));
        }
        samples.sort_by(|a, b| a.partial_cmp(b).expect("no NaN after check"));
        Ok(Self { sorted: samples })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// Right-continuous step ecdf: the fraction of the sample `≤ x`.
    pub fn ecdf(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&s| s <= x) as f64 / self.sorted.len() as f64
    }

    /// Order-statistic quantile for `q` in `[0, 1]`.
    pub fn quantile(&self, q: f64) -> f64 {
        let n = self.sorted.len();
        let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
        self.sorted[rank - 1]
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().sum::<f64>() / self.sorted.len() as f64
    }

    pub fn std_error(&self) -> f64 {
        let n = self.sorted.len() as f64;
        let mean = self.mean();
        let var = self
            .sorted
            .iter()
            .map(|x| (x - mean) * (x - mean))
            .sum::<f64>()
            / (n - 1.0).max(1.0);
        (var / n).sqrt()
    }
}

/// Outcome of a KS test.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    /// `n` for one-sample, `nm/(n+m)` for two-sample.
    pub effective_n: f64,
    pub p_value: f64,
    pub critical_1pct: f64,
    pub critical_5pct: f64,
}

impl KsResult {
    fn from_statistic(d: f64, effective_n: f64) -> Self {
        Self {
            statistic: d,
            effective_n,
            p_value: kolmogorov_sf(effective_n.sqrt() * d),
            critical_1pct: ks_critical_value(0.01, effective_n),
            critical_5pct: ks_critical_value(0.05, effective_n),
        }
    }

    pub fn passes_at(&self, alpha: f64) -> bool {
        self.p_value >= alpha
    }
}

/// Asymptotic KS critical value `sqrt(−ln(α/2)/2) / sqrt(n_eff)`.
pub fn ks_critical_value(alpha: f64, effective_n: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / effective_n.sqrt()
}

/// One-sample KS statistic of a sample against a reference cdf.
pub fn ks_one_sample(
    sample: &EmpiricalDistribution,
    cdf: impl Fn(f64) -> f64,
) -> Result<KsResult> {
    let n = sample.len();
    if n < MIN_KS_SAMPLE {
        return Err(Error::UndersizedSample {
            got: n,
            need: MIN_KS_SAMPLE,
        });
    }
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (k, &x) in sample.sorted().iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - k as f64 / nf).max((k + 1) as f64 / nf - f);
    }
    Ok(KsResult::from_statistic(d, nf))
}

/// Two-sample KS statistic; symmetric in its arguments.
pub fn ks_two_sample(
    a: &EmpiricalDistribution,
    b: &EmpiricalDistribution,
) -> Result<KsResult> {
    let (n, m) = (a.len(), b.len());
    if n < MIN_KS_SAMPLE || m < MIN_KS_SAMPLE {
        return Err(Error::UndersizedSample {
            got: n.min(m),
            need: MIN_KS_SAMPLE,
        });
    }
    let (xs, ys) = (a.sorted(), b.sorted());
    let (nf, mf) = (n as f64, m as f64);
    let mut d: f64 = 0.0;
    let (mut i, mut j) = (0usize, 0usize);
    while i < n && j < m {
        let cut = xs[i].min(ys[j]);
        while i < n && xs[i] <= cut {
            i += 1;
        }
        while j < m && ys[j] <= cut {
            j += 1;
        }
        d = d.max((i as f64 / nf - j as f64 / mf).abs());
    }
    let effective_n = nf * mf / (nf + mf);
    Ok(KsResult::from_statistic(d, effective_n))
}

/// Outcome of a chi-square test.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

impl ChiSquareResult {
    pub fn passes_at(&self, alpha: f64) -> bool {
        self.p_value >= alpha
    }
}

/// Goodness of fit of observed counts against expected cell probabilities.
/// Cells with expected count below [`MIN_EXPECTED_CELL`] are merged into
/// their right neighbor (the trailing remainder folds left).
pub fn chi_square(observed: &[u64], expected_probs: &[f64]) -> Result<ChiSquareResult> {
    if observed.len() != expected_probs.len() || observed.is_empty() {
        return Err(Error::InvalidModel(
            "observed and expected lengths differ or are empty".into(),
        ));
    }
    let total: u64 = observed.iter().sum();
    if total == 0 {
        return Err(Error::UndersizedSample { got: 0, need: 1 });
    }
    let prob_sum: f64 = expected_probs.iter().sum();
    if expected_probs.iter().any(|p| *p < 0.0) || prob_sum <= 0.0 {
        return Err(Error::InvalidModel(
            "expected probabilities must be nonnegative with positive sum".into(),
        ));
    }
    let cells: Vec<(f64, f64)> = observed
        .iter()
        .zip(expected_probs)
        .map(|(&o, &p)| (o as f64, total as f64 * p / prob_sum))
        .collect();
    let merged = merge_small_cells(&cells);
    let statistic: f64 = merged
        .iter()
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    let dof = merged.len().saturating_sub(1);
    Ok(ChiSquareResult {
        statistic,
        dof,
        p_value: chi_square_sf(statistic, dof),
    })
}

/// Homogeneity of two count vectors over the same cells (2×m contingency
/// table); columns with small expected counts are merged as in
/// [`chi_square`].
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> Result<ChiSquareResult> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::InvalidModel(
            "count vectors must be non-empty and of equal length".into(),
        ));
    }
    let (ta, tb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    if ta == 0.0 || tb == 0.0 {
        return Err(Error::UndersizedSample { got: 0, need: 1 });
    }
    let grand = ta + tb;
    // merge by pooled expectation so both rows keep their cells aligned
    let pooled: Vec<(f64, f64)> = a
        .iter()
        .zip(b)
        .map(|(&oa, &ob)| {
            let col = (oa + ob) as f64;
            (oa as f64, col)
        })
        .collect();
    let mut cols: Vec<(f64, f64, f64)> = Vec::new(); // (obs_a, obs_b, col_total)
    let mut acc = (0.0, 0.0, 0.0);
    for ((oa, col), &ob) in pooled.iter().zip(b) {
        acc.0 += oa;
        acc.1 += ob as f64;
        acc.2 += col;
        let min_expected = (acc.2 * ta / grand).min(acc.2 * tb / grand);
        if min_expected >= MIN_EXPECTED_CELL {
            cols.push(acc);
            acc = (0.0, 0.0, 0.0);
        }
    }
    if acc.2 > 0.0 {
        match cols.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
                last.2 += acc.2;
            }
            None => cols.push(acc),
        }
    }
    let mut statistic = 0.0;
    for (oa, ob, col) in &cols {
        let ea = col * ta / grand;
        let eb = col * tb / grand;
        statistic += (oa - ea) * (oa - ea) / ea + (ob - eb) * (ob - eb) / eb;
    }
    let dof = cols.len().saturating_sub(1);
    Ok(ChiSquareResult {
        statistic,
        dof,
        p_value: chi_square_sf(statistic, dof),
    })
}

fn merge_small_cells(cells: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut merged: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for (o, e) in cells {
        acc.0 += o;
        acc.1 += e;
        if acc.1 >= MIN_EXPECTED_CELL {
            merged.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.1 > 0.0 {
        match merged.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => merged.push(acc),
        }
    }
    merged
}

/// Survival function of the Kolmogorov distribution,
/// `P(sup|B(t)| > x)` for the Brownian bridge sup.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        // theta-function form converges fast for small arguments
        let factor = (2.0 * std::f64::consts::PI).sqrt() / x;
        let t = std::f64::consts::PI * std::f64::consts::PI / (8.0 * x * x);
        let mut cdf = 0.0;
        for k in 0..20 {
            let odd = (2 * k + 1) as f64;
            cdf += (-odd * odd * t).exp();
        }
        (1.0 - factor * cdf).clamp(0.0, 1.0)
    } else {
        let mut sf = 0.0;
        for k in 1..=20 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * x * x).exp();
            sf += if k % 2 == 1 { term } else { -term };
        }
        (2.0 * sf).clamp(0.0, 1.0)
    }
}

/// Upper-tail probability of the chi-square distribution with `dof` degrees
/// of freedom (1.0 when `dof` is zero: nothing to test).
pub fn chi_square_sf(x: f64, dof: usize) -> f64 {
    if dof == 0 || x <= 0.0 {
        return 1.0;
    }
    gamma_q(dof as f64 / 2.0, x / 2.0)
}

/// Regularized upper incomplete gamma `Q(a, x)` by series / continued
/// fraction.
fn gamma_q(a: f64, x: f64) -> f64 {
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_contfrac(a, x)
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..500 {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * 1e-15 {
            break;
        }
    }
    (sum * (-x + a * x.ln() - ln_gamma(a)).exp()).clamp(0.0, 1.0)
}

fn gamma_q_contfrac(a: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-15 {
            break;
        }
    }
    ((-x + a * x.ln() - ln_gamma(a)).exp() * h).clamp(0.0, 1.0)
}

fn ln_gamma(x: f64) -> f64 {
    // Lanczos approximation, g = 7
    const COEFFS: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEFFS[0];
    for (i, c) in COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// One pass/fail record of a verification suite.
#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub test: String,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Verdict {
    /// Passes when the statistic does not exceed the threshold.
    pub fn upper_bound(test: impl Into<String>, statistic: f64, threshold: f64) -> Self {
        Self {
            test: test.into(),
            statistic,
            threshold,
            pass: statistic <= threshold,
        }
    }

    /// Passes when the p-value clears the (already adjusted) level.
    pub fn p_value(test: impl Into<String>, p: f64, alpha: f64) -> Self {
        Self {
            test: test.into(),
            statistic: p,
            threshold: alpha,
            pass: p >= alpha,
        }
    }
}

/// Bonferroni-adjusted per-test level for `m` simultaneous tests.
pub fn bonferroni(alpha: f64, tests: usize) -> f64 {
    alpha / tests.max(1) as f64
}
