//! Built-in rate models used by the verification suites and the CLI.
//!
//! Each entry constructs a [`RateModel`] from a small named parameter set and
//! carries the closed-form cumulative exit hazard where one exists, so the
//! quadrature route can be cross-checked against an independent formula.

use std::collections::BTreeMap;

use crate::rates::{RateFn, RateModel};
use crate::{Error, Result};

/// Closed-form `γ_i(y, n)` for a catalog entry.
pub type ClosedGamma = Box<dyn Fn(usize, f64, u64) -> f64 + Send + Sync>;

/// A named model plus its independently-coded hazard formula.
pub struct CatalogModel {
    pub name: &'static str,
    pub model: RateModel,
    pub closed_gamma: Option<ClosedGamma>,
}

/// Names accepted by [`build`].
pub fn names() -> &'static [&'static str] {
    &["ctmc2", "ctmc3", "agelinear", "weibull", "ndecay", "island4"]
}

/// Builds a catalog model by name with parameter overrides. Unknown names
/// and unknown or non-finite parameters are rejected.
pub fn build(name: &str, params: &BTreeMap<String, f64>) -> Result<CatalogModel> {
    let mut p = Params::new(params);
    let built = match name {
        "ctmc2" => ctmc2(&mut p),
        "ctmc3" => ctmc3(&mut p),
        "agelinear" => agelinear(&mut p),
        "weibull" => weibull(&mut p),
        "ndecay" => ndecay(&mut p),
        "island4" => island4(&mut p),
        other => {
            return Err(Error::InvalidModel(format!(
                "unknown catalog model '{other}' (expected one of {:?})",
                names()
            )))
        }
    }?;
    p.finish()?;
    Ok(built)
}

/// Every catalog model at its default parameters.
pub fn standard() -> Vec<CatalogModel> {
    names()
        .iter()
        .map(|n| build(n, &BTreeMap::new()).expect("defaults are valid"))
        .collect()
}

struct Params {
    values: BTreeMap<String, f64>,
}

impl Params {
    fn new(values: &BTreeMap<String, f64>) -> Self {
        Self {
            values: values.clone(),
        }
    }

    fn take(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.values.remove(key) {
            None => Ok(default),
            Some(v) if v.is_finite() && v >= 0.0 => Ok(v),
            Some(v) => Err(Error::InvalidModel(format!(
                "parameter '{key}' must be finite and nonnegative, got {v}"
            ))),
        }
    }

    fn finish(self) -> Result<()> {
        if let Some(key) = self.values.keys().next() {
            return Err(Error::InvalidModel(format!(
                "unknown catalog parameter '{key}'"
            )));
        }
        Ok(())
    }
}

fn ctmc2(p: &mut Params) -> Result<CatalogModel> {
    let r12 = p.take("r12", 2.0)?;
    let r21 = p.take("r21", 3.0)?;
    let model = RateModel::new(
        "ctmc2",
        2,
        vec![(1, 2, RateFn::Constant(r12)), (2, 1, RateFn::Constant(r21))],
    )?;
    Ok(CatalogModel {
        name: "ctmc2",
        model,
        closed_gamma: Some(Box::new(move |i, y, _| match i {
            1 => r12 * y,
            _ => r21 * y,
        })),
    })
}

fn ctmc3(p: &mut Params) -> Result<CatalogModel> {
    let r12 = p.take("r12", 2.0)?;
    let r13 = p.take("r13", 1.0)?;
    let r21 = p.take("r21", 1.5)?;
    let r23 = p.take("r23", 0.5)?;
    let r31 = p.take("r31", 1.0)?;
    let r32 = p.take("r32", 2.0)?;
    let model = RateModel::new(
        "ctmc3",
        3,
        vec![
            (1, 2, RateFn::Constant(r12)),
            (1, 3, RateFn::Constant(r13)),
            (2, 1, RateFn::Constant(r21)),
            (2, 3, RateFn::Constant(r23)),
            (3, 1, RateFn::Constant(r31)),
            (3, 2, RateFn::Constant(r32)),
        ],
    )?;
    let exits = [r12 + r13, r21 + r23, r31 + r32];
    Ok(CatalogModel {
        name: "ctmc3",
        model,
        closed_gamma: Some(Box::new(move |i, y, _| exits[i - 1] * y)),
    })
}

/// `∫_0^y min(slope·s, cap) ds`.
fn capped_linear_integral(slope: f64, cap: f64, y: f64) -> f64 {
    if slope <= 0.0 || cap <= 0.0 {
        return 0.0;
    }
    let corner = cap / slope;
    if y <= corner {
        0.5 * slope * y * y
    } else {
        0.5 * cap * corner + cap * (y - corner)
    }
}

fn agelinear(p: &mut Params) -> Result<CatalogModel> {
    let slope12 = p.take("slope12", 1.0)?;
    let cap12 = p.take("cap12", 2.0)?;
    let slope21 = p.take("slope21", 1.5)?;
    let cap21 = p.take("cap21", 2.5)?;
    let model = RateModel::new(
        "agelinear",
        2,
        vec![
            (
                1,
                2,
                RateFn::LinearCapped {
                    slope: slope12,
                    cap: cap12,
                },
            ),
            (
                2,
                1,
                RateFn::LinearCapped {
                    slope: slope21,
                    cap: cap21,
                },
            ),
        ],
    )?;
    Ok(CatalogModel {
        name: "agelinear",
        model,
        closed_gamma: Some(Box::new(move |i, y, _| match i {
            1 => capped_linear_integral(slope12, cap12, y),
            _ => capped_linear_integral(slope21, cap21, y),
        })),
    })
}

/// `∫_0^y min(coeff·s^k, cap) ds`.
fn capped_power_integral(coeff: f64, k: f64, cap: f64, y: f64) -> f64 {
    if coeff <= 0.0 || cap <= 0.0 {
        return 0.0;
    }
    let corner = (cap / coeff).powf(1.0 / k);
    if y <= corner {
        coeff * y.powf(k + 1.0) / (k + 1.0)
    } else {
        coeff * corner.powf(k + 1.0) / (k + 1.0) + cap * (y - corner)
    }
}

fn weibull(p: &mut Params) -> Result<CatalogModel> {
    let coeff12 = p.take("coeff12", 1.5)?;
    let exp12 = p.take("exp12", 1.5)?;
    let cap12 = p.take("cap12", 4.0)?;
    let coeff21 = p.take("coeff21", 0.8)?;
    let exp21 = p.take("exp21", 2.0)?;
    let cap21 = p.take("cap21", 3.0)?;
    for (key, e) in [("exp12", exp12), ("exp21", exp21)] {
        if e <= 0.0 {
            return Err(Error::InvalidModel(format!(
                "parameter '{key}' must be positive, got {e}"
            )));
        }
    }
    let model = RateModel::new(
        "weibull",
        2,
        vec![
            (
                1,
                2,
                RateFn::PowerCapped {
                    coeff: coeff12,
                    exponent: exp12,
                    cap: cap12,
                },
            ),
            (
                2,
                1,
                RateFn::PowerCapped {
                    coeff: coeff21,
                    exponent: exp21,
                    cap: cap21,
                },
            ),
        ],
    )?;
    Ok(CatalogModel {
        name: "weibull",
        model,
        closed_gamma: Some(Box::new(move |i, y, _| match i {
            1 => capped_power_integral(coeff12, exp12, cap12, y),
            _ => capped_power_integral(coeff21, exp21, cap21, y),
        })),
    })
}

fn ndecay(p: &mut Params) -> Result<CatalogModel> {
    let base12 = p.take("base12", 2.0)?;
    let base21 = p.take("base21", 3.0)?;
    let model = RateModel::new(
        "ndecay",
        2,
        vec![
            (1, 2, RateFn::CountDecaying { base: base12 }),
            (2, 1, RateFn::CountDecaying { base: base21 }),
        ],
    )?;
    Ok(CatalogModel {
        name: "ndecay",
        model,
        closed_gamma: Some(Box::new(move |i, y, n| {
            let base = if i == 1 { base12 } else { base21 };
            base * y / (1.0 + n as f64)
        })),
    })
}

/// Two closed two-state classes, `{1, 2}` and `{3, 4}`: components started
/// on different islands can never occupy a common state, which makes every
/// coupled run free of simultaneous jumps.
fn island4(p: &mut Params) -> Result<CatalogModel> {
    let r12 = p.take("r12", 2.0)?;
    let r21 = p.take("r21", 3.0)?;
    let r34 = p.take("r34", 1.0)?;
    let r43 = p.take("r43", 2.0)?;
    let model = RateModel::new(
        "island4",
        4,
        vec![
            (1, 2, RateFn::Constant(r12)),
            (2, 1, RateFn::Constant(r21)),
            (3, 4, RateFn::Constant(r34)),
            (4, 3, RateFn::Constant(r43)),
        ],
    )?;
    let exits = [r12, r21, r34, r43];
    Ok(CatalogModel {
        name: "island4",
        model,
        closed_gamma: Some(Box::new(move |i, y, _| exits[i - 1] * y)),
    })
}
