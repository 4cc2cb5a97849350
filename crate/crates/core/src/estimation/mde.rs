//! Minimum distance between model and empirical characteristic functions.
//!
//! The distance is the `L^2` norm of `phi(u; theta) - phi_hat(u)` under a
//! standard normal weight on `u`, computed with Gauss-Hermite quadrature.

use num_complex::Complex64;

use crate::charfn::regime_char_exponent;
use crate::error::Result;
use crate::optim::{projected_bfgs, OptimOptions};
use crate::quadrature::gauss_hermite_normal;
use crate::regime::{RegimeParams, SubordinatorFamily};

use super::{check_sample, empirical_cf, FitReport, ParamBounds, MIN_REGIME_OBS};

pub const MDE_NODES: usize = 64;

fn model_cf(params: &RegimeParams, family: SubordinatorFamily, dt: f64, u: f64) -> Result<Complex64> {
    Ok((dt * regime_char_exponent(params, family, Complex64::new(u, 0.0))?).exp())
}

/// `|| phi(.; theta) - target ||` under the standard normal weight.
pub fn cf_distance<F>(params: &RegimeParams, family: SubordinatorFamily, dt: f64, target: F) -> Result<f64>
where
    F: Fn(f64) -> Complex64,
{
    let (nodes, weights) = gauss_hermite_normal(MDE_NODES);
    let mut sum = 0.0;
    for (u, w) in nodes.iter().zip(&weights) {
        sum += w * (model_cf(params, family, dt, *u)? - target(*u)).norm_sqr();
    }
    Ok(sum.sqrt())
}

pub fn mde_fit(
    returns: &[f64],
    dt: f64,
    family: SubordinatorFamily,
    bounds: &ParamBounds,
    init: &RegimeParams,
) -> Result<FitReport> {
    check_sample(returns, MIN_REGIME_OBS)?;
    let (nodes, weights) = gauss_hermite_normal(MDE_NODES);
    let target: Vec<Complex64> = nodes.iter().map(|&u| empirical_cf(returns, u)).collect();
    // differences are O(var^2) for daily data; normalise for the optimiser
    let var = super::descriptive_stats(returns)?.variance;
    let scale = 1.0 / (var * var);

    let objective = |x: &[f64]| -> Result<f64> {
        let p = RegimeParams::from_array([x[0], x[1], x[2], x[3]]);
        let mut sum = 0.0;
        for ((u, w), t) in nodes.iter().zip(&weights).zip(&target) {
            sum += w * (model_cf(&p, family, dt, *u)? - t).norm_sqr();
        }
        Ok(sum * scale)
    };
    let x0 = bounds.project(init).to_array();
    let typical = [x0[0].abs().max(0.01), x0[1], x0[2], x0[3]];
    let opts = OptimOptions {
        max_iters: 1000,
        fd_step: 1e-6,
        grad_tol: 1e-12,
        step_tol: 1e-12,
        ..Default::default()
    };
    let rep = projected_bfgs(objective, &x0, &typical, &bounds.to_box(), &opts)?;
    let distance = (rep.value / scale).sqrt();
    Ok(FitReport::new(&rep.x, distance, rep.iterations, rep.reason))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::simulate_increments;
    use crate::quadrature::integrate;
    use crate::regime::TRADING_DAY;

    fn truth() -> RegimeParams {
        RegimeParams::new(0.05, 0.3, 10.0, 10.0).unwrap()
    }

    #[test]
    fn hermite_distance_matches_adaptive_quadrature() {
        let (p, q) = (truth(), RegimeParams::new(0.1, 0.5, 4.0, 5.0).unwrap());
        let fam = SubordinatorFamily::InverseGaussian;
        let target = |u: f64| model_cf(&q, fam, 1.0, u).unwrap();
        let gh = cf_distance(&p, fam, 1.0, target).unwrap();
        let w = |u: f64| (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let adaptive = integrate(
            |u| w(u) * (model_cf(&p, fam, 1.0, u).unwrap() - target(u)).norm_sqr(),
            -12.0,
            12.0,
            1e-14,
        )
        .sqrt();
        assert!((gh - adaptive).abs() < 1e-8, "{gh} vs {adaptive}");
    }

    #[test]
    fn distance_to_itself_vanishes() {
        let p = truth();
        let fam = SubordinatorFamily::Gamma;
        let d = cf_distance(&p, fam, TRADING_DAY, |u| model_cf(&p, fam, TRADING_DAY, u).unwrap()).unwrap();
        assert!(d < 1e-14);
    }

    #[test]
    fn objective_prefers_truth() {
        let fam = SubordinatorFamily::InverseGaussian;
        let z = simulate_increments(&truth(), fam, TRADING_DAY, 20_000, 3).unwrap();
        let ecf = |u: f64| empirical_cf(&z, u);
        let at_truth = cf_distance(&truth(), fam, TRADING_DAY, ecf).unwrap();
        let off = RegimeParams::from_array(truth().to_array().map(|v| 1.5 * v));
        assert!(at_truth < cf_distance(&off, fam, TRADING_DAY, ecf).unwrap());
    }

    #[test]
    fn distance_shrinks_like_root_n() {
        let fam = SubordinatorFamily::Gamma;
        let p = RegimeParams::new(0.5, 1.0, 2.0, 2.0).unwrap();
        let d = |n| {
            let z = simulate_increments(&p, fam, 1.0, n, 21).unwrap();
            cf_distance(&p, fam, 1.0, |u| empirical_cf(&z, u)).unwrap()
        };
        let ratio = d(1_000) / d(100_000);
        // sqrt(100) = 10, allowing for sampling noise in both distances
        assert!((4.0..25.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn fit_moves_toward_truth_and_respects_bounds() {
        let fam = SubordinatorFamily::InverseGaussian;
        let z = simulate_increments(&truth(), fam, TRADING_DAY, 20_000, 5).unwrap();
        let init = RegimeParams::new(0.02, 0.4, 6.0, 14.0).unwrap();
        let bounds = ParamBounds::default();
        let fit = mde_fit(&z, TRADING_DAY, fam, &bounds, &init).unwrap();
        assert!(bounds.contains(&fit.params));
        let d_init = cf_distance(&init, fam, TRADING_DAY, |u| empirical_cf(&z, u)).unwrap();
        assert!(fit.objective < d_init);
        let var = |p: &RegimeParams| crate::estimation::theoretical_moments(p, fam, TRADING_DAY)[1];
        assert!((var(&fit.params) / var(&truth()) - 1.0).abs() < 0.1, "{:?}", fit.params);
    }
}
