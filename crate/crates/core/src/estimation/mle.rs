//! Simulated maximum likelihood.
//!
//! For each candidate `theta` a fixed number of increments is simulated,
//! the density is estimated by a Gaussian kernel, and the data are scored
//! against it. Simulation `i` always draws from stream `i` of the same
//! seed, so the objective is a deterministic function of `theta`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::mc::path_rng;
use crate::optim::{projected_bfgs, OptimOptions};
use crate::regime::{RegimeParams, SubordinatorFamily};
use crate::subordinator::SubordinatorSpec;

use super::{check_sample, BinnedKde, FitReport, ParamBounds, MIN_REGIME_OBS};

/// Densities are floored here before taking logs.
pub const DENSITY_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleConfig {
    pub n_sim: usize,
    pub seed: u64,
}

impl Default for MleConfig {
    fn default() -> Self {
        MleConfig { n_sim: 20_000, seed: 0 }
    }
}

impl MleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_sim < 10_000 {
            return Err(Error::InvalidParameter {
                name: "n_sim",
                value: self.n_sim as f64,
                constraint: ">= 10000",
            });
        }
        Ok(())
    }
}

/// `n` independent increments over `dt` of a single-regime process.
pub fn simulate_increments(
    params: &RegimeParams,
    family: SubordinatorFamily,
    dt: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    ensure_positive("dt", dt)?;
    params.validate()?;
    let sub = SubordinatorSpec::of(family, params);
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i as u64);
            let dl = sub.sample_increment(dt, &mut rng);
            let z: f64 = rng.sample(StandardNormal);
            params.mu * dl + params.sigma * dl.sqrt() * z
        })
        .collect())
}

/// Simulated log-likelihood `sum_k log f_hat(z_k; theta)`.
pub fn log_likelihood(
    returns: &[f64],
    params: &RegimeParams,
    family: SubordinatorFamily,
    dt: f64,
    config: &MleConfig,
) -> Result<f64> {
    config.validate()?;
    let sims = simulate_increments(params, family, dt, config.n_sim, config.seed)?;
    let density = BinnedKde::new(&sims)?;
    let mut all_floored = true;
    let total = returns
        .iter()
        .map(|&z| {
            let f = density.eval(z);
            if f > DENSITY_FLOOR {
                all_floored = false;
                f.ln()
            } else {
                DENSITY_FLOOR.ln()
            }
        })
        .sum();
    if all_floored {
        return Err(Error::LikelihoodUnderflow);
    }
    Ok(total)
}

pub fn mle_fit(
    returns: &[f64],
    dt: f64,
    family: SubordinatorFamily,
    bounds: &ParamBounds,
    init: &RegimeParams,
    config: &MleConfig,
) -> Result<FitReport> {
    check_sample(returns, MIN_REGIME_OBS)?;
    config.validate()?;
    let n = returns.len() as f64;
    let objective = |x: &[f64]| -> Result<f64> {
        let p = RegimeParams::from_array([x[0], x[1], x[2], x[3]]);
        Ok(-log_likelihood(returns, &p, family, dt, config)? / n)
    };
    let x0 = bounds.project(init).to_array();
    let typical = [x0[0].abs().max(0.01), x0[1], x0[2], x0[3]];
    // the simulated objective is only piecewise smooth, so use wide differences
    let opts = OptimOptions {
        max_iters: 200,
        f_tol: f64::NEG_INFINITY,
        fd_step: 1e-3,
        grad_tol: 1e-7,
        step_tol: 1e-8,
    };
    let rep = projected_bfgs(objective, &x0, &typical, &bounds.to_box(), &opts)?;
    Ok(FitReport::new(&rep.x, rep.value, rep.iterations, rep.reason))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::kde::normal_pdf;
    use crate::regime::TRADING_DAY;

    #[test]
    fn likelihood_is_reproducible() {
        let p = RegimeParams::new(0.05, 0.3, 10.0, 10.0).unwrap();
        let fam = SubordinatorFamily::Gamma;
        let z = simulate_increments(&p, fam, TRADING_DAY, 2_000, 1).unwrap();
        let c = MleConfig { n_sim: 10_000, seed: 7 };
        let a = log_likelihood(&z, &p, fam, TRADING_DAY, &c).unwrap();
        let b = log_likelihood(&z, &p, fam, TRADING_DAY, &c).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert!(MleConfig { n_sim: 100, seed: 0 }.validate().is_err());
    }

    #[test]
    fn truth_beats_doubled_sigma() {
        let p = RegimeParams::new(0.05, 0.3, 60.0, 60.0).unwrap();
        let fam = SubordinatorFamily::Gamma;
        let z = simulate_increments(&p, fam, TRADING_DAY, 50_000, 2).unwrap();
        let c = MleConfig::default();
        let wide = RegimeParams { sigma: 0.6, ..p };
        assert!(
            log_likelihood(&z, &p, fam, TRADING_DAY, &c).unwrap()
                > log_likelihood(&z, &wide, fam, TRADING_DAY, &c).unwrap()
        );
    }

    #[test]
    fn far_data_underflows() {
        let p = RegimeParams::new(0.0, 0.1, 1.0, 1.0).unwrap();
        let r = log_likelihood(
            &[50.0, 60.0],
            &p,
            SubordinatorFamily::Identity,
            TRADING_DAY,
            &MleConfig::default(),
        );
        assert!(matches!(r, Err(Error::LikelihoodUnderflow)));
    }

    #[test]
    fn gaussian_case_matches_closed_form_optimum() {
        let truth = RegimeParams::new(0.2, 0.4, 1.0, 1.0).unwrap();
        let fam = SubordinatorFamily::Identity;
        let z = simulate_increments(&truth, fam, TRADING_DAY, 5_000, 9).unwrap();
        let n = z.len() as f64;
        let mean = z.iter().sum::<f64>() / n;
        let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let exact: f64 = z.iter().map(|v| normal_pdf(*v, mean, var.sqrt()).ln()).sum();

        let init = RegimeParams::new(0.1, 0.5, 1.0, 1.0).unwrap();
        let cfg = MleConfig { n_sim: 20_000, seed: 4 };
        let fit = mle_fit(&z, TRADING_DAY, fam, &ParamBounds::default(), &init, &cfg).unwrap();
        let simulated = -fit.objective * n;
        assert!((simulated - exact).abs() < 0.01 * exact.abs(), "{simulated} vs {exact}");
        assert!((fit.params.sigma / 0.4 - 1.0).abs() < 0.05, "{:?}", fit.params);
    }
}
