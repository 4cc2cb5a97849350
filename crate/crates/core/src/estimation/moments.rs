//! Method of moments.
//!
//! With `g(s) = mu s + sigma^2 s^2 / 2` the cumulant generating function
//! of an increment over `dt` is `dt * l(g(s))`. Differentiating through
//! the composition gives the first four cumulants in terms of
//! `l^(n)(0)`, and the raw moments follow from the usual moment-cumulant
//! relations. The same formulas serve both subordinator families.

use crate::error::{Error, Result};
use crate::optim::{levenberg_marquardt, OptimOptions};
use crate::regime::{RegimeParams, SubordinatorFamily};
use crate::subordinator::SubordinatorSpec;

use super::{check_sample, FitReport, ParamBounds};

/// Sample raw moments `E[z^k]`, k = 1..=4.
pub fn raw_moments(returns: &[f64]) -> [f64; 4] {
    let n = returns.len() as f64;
    let mut m = [0.0; 4];
    for z in returns {
        let mut p = 1.0;
        for mk in m.iter_mut() {
            p *= z;
            *mk += p;
        }
    }
    m.map(|v| v / n)
}

fn cumulants(params: &RegimeParams, family: SubordinatorFamily, dt: f64) -> [f64; 4] {
    let l = SubordinatorSpec::of(family, params).derivatives_at_zero();
    let (mu, s2) = (params.mu, params.sigma * params.sigma);
    [
        dt * l[0] * mu,
        dt * (l[1] * mu * mu + l[0] * s2),
        dt * (l[2] * mu.powi(3) + 3.0 * l[1] * mu * s2),
        dt * (l[3] * mu.powi(4) + 6.0 * l[2] * mu * mu * s2 + 3.0 * l[1] * s2 * s2),
    ]
}

/// Raw moments of an increment over `dt`.
pub fn theoretical_moments(params: &RegimeParams, family: SubordinatorFamily, dt: f64) -> [f64; 4] {
    let [k1, k2, k3, k4] = cumulants(params, family, dt);
    [
        k1,
        k2 + k1 * k1,
        k3 + 3.0 * k2 * k1 + k1.powi(3),
        k4 + 4.0 * k3 * k1 + 3.0 * k2 * k2 + 6.0 * k2 * k1 * k1 + k1.powi(4),
    ]
}

pub fn mom_fit(
    returns: &[f64],
    dt: f64,
    family: SubordinatorFamily,
    bounds: &ParamBounds,
    init: &RegimeParams,
) -> Result<FitReport> {
    check_sample(returns, 4)?;
    mom_fit_moments(raw_moments(returns), dt, family, bounds, init)
}

/// Solves `theoretical_moments(theta) = target` from `init`.
///
/// Equation `k` is divided by `s^k` with `s` the target standard deviation,
/// so all four residuals are of order one.
pub fn mom_fit_moments(
    target: [f64; 4],
    dt: f64,
    family: SubordinatorFamily,
    bounds: &ParamBounds,
    init: &RegimeParams,
) -> Result<FitReport> {
    if family == SubordinatorFamily::Identity {
        return Err(Error::Invalid(
            "the moment system needs a gamma or inverse Gaussian subordinator".into(),
        ));
    }
    if target.iter().any(|m| !m.is_finite()) {
        return Err(Error::Invalid("sample moments are not finite".into()));
    }
    let var = target[1] - target[0] * target[0];
    if !(var > 0.0) {
        return Err(Error::DegenerateSample("zero variance"));
    }
    let sd = var.sqrt();
    let residual = |x: &[f64]| -> Result<Vec<f64>> {
        let p = RegimeParams::from_array([x[0], x[1], x[2], x[3]]);
        let m = theoretical_moments(&p, family, dt);
        Ok((0..4).map(|k| (m[k] - target[k]) / sd.powi(k as i32 + 1)).collect())
    };
    let opts = OptimOptions {
        max_iters: 2000,
        f_tol: 1e-13,
        step_tol: 1e-15,
        ..Default::default()
    };
    let x0 = bounds.project(init).to_array();
    let rep = levenberg_marquardt(residual, &x0, &bounds.to_box(), &opts)?;
    if !rep.reason.converged() {
        return Err(Error::NonConvergence {
            method: "method of moments",
            iterations: rep.iterations,
            residual: rep.value,
        });
    }
    Ok(FitReport::new(&rep.x, rep.value, rep.iterations, rep.reason))
}
