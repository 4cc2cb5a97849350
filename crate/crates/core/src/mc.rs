//! Monte Carlo simulation of switching time-changed paths.
//!
//! The chain is drawn first and its switch times are merged into the
//! regular grid, so every step lies inside a single regime. Within a step
//! of length `h` in regime `j` the log-price moves by
//! `mu_j dL + sigma_j sqrt(dL) N(0, 1)` with `dL` a subordinator increment
//! over `h`.
//!
//! Each path owns a ChaCha stream keyed by its index, so results for a
//! given seed do not depend on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cos::{ContractSpec, OptionKind};
use crate::error::{ensure_positive, Error, Result};
use crate::regime::{simulate_regime_path, Regime, RegimePath, SwitchingModel, TRADING_DAY};
use crate::subordinator::SubordinatorSpec;

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959964;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n_paths: 100_000,
            dt: TRADING_DAY,
            seed: 0,
        }
    }
}

/// A simulated path. `regimes[i]` is active on `[times[i], times[i+1])`.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePath {
    pub times: Vec<f64>,
    /// `log(S_t / S_0)` at each grid time.
    pub log_prices: Vec<f64>,
    pub regimes: Vec<Regime>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub price: f64,
    pub std_error: f64,
    pub ci95: (f64, f64),
    pub n_paths: usize,
    pub seed: u64,
}

impl McResult {
    pub fn from_samples(values: &[f64], seed: u64) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let se = (var / n).sqrt();
        McResult {
            price: mean,
            std_error: se,
            ci95: (mean - Z_95 * se, mean + Z_95 * se),
            n_paths: values.len(),
            seed,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.ci95.0 <= x && x <= self.ci95.1
    }

    pub fn ci_width(&self) -> f64 {
        self.ci95.1 - self.ci95.0
    }
}

/// Independent reproducible stream for path `index`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn check_grid(horizon: f64, dt: f64) -> Result<()> {
    ensure_positive("horizon", horizon)?;
    ensure_positive("dt", dt)?;
    if dt > horizon * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter {
            name: "dt",
            value: dt,
            constraint: "dt <= horizon",
        });
    }
    Ok(())
}

/// Calls `step(start, end, regime)` for each step of the merged grid.
fn for_each_step(path: &RegimePath, dt: f64, mut step: impl FnMut(f64, f64, Regime)) {
    let merge = 1e-9 * dt;
    for (s, e, regime) in path.segments() {
        let mut t = s;
        let mut k = (s / dt).floor() + 1.0;
        while e - t > merge {
            let mut next = k * dt;
            if next <= t + merge {
                k += 1.0;
                continue;
            }
            if next >= e - merge {
                next = e;
            } else {
                k += 1.0;
            }
            step(t, next, regime);
            t = next;
        }
    }
}

fn increment<R: Rng + ?Sized>(model: &SwitchingModel, regime: Regime, h: f64, rng: &mut R) -> f64 {
    let p = model.params(regime);
    let dl = SubordinatorSpec::of(model.family, p).sample_increment(h, rng);
    let n: f64 = rng.sample(StandardNormal);
    p.mu * dl + p.sigma * dl.sqrt() * n
}

pub fn simulate_path<R: Rng + ?Sized>(model: &SwitchingModel, horizon: f64, dt: f64, rng: &mut R) -> Result<PricePath> {
    check_grid(horizon, dt)?;
    let chain = simulate_regime_path(model, horizon, rng);
    let mut out = PricePath {
        times: vec![0.0],
        log_prices: vec![0.0],
        regimes: Vec::new(),
    };
    let mut z = 0.0;
    for_each_step(&chain, dt, |start, end, regime| {
        z += increment(model, regime, end - start, rng);
        out.times.push(end);
        out.log_prices.push(z);
        out.regimes.push(regime);
    });
    Ok(out)
}

/// `Z_T = log(S_T / S_0)` for one path, without storing the grid.
pub fn simulate_terminal<R: Rng + ?Sized>(model: &SwitchingModel, horizon: f64, dt: f64, rng: &mut R) -> Result<f64> {
    check_grid(horizon, dt)?;
    let chain = simulate_regime_path(model, horizon, rng);
    let mut z = 0.0;
    for_each_step(&chain, dt, |s, e, regime| z += increment(model, regime, e - s, rng));
    Ok(z)
}

/// Terminal log-returns of `n` paths, path `i` drawn from `path_rng(seed, i)`.
pub fn terminal_log_returns(model: &SwitchingModel, horizon: f64, dt: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    check_grid(horizon, dt)?;
    (0..n)
        .into_par_iter()
        .map(|i| simulate_terminal(model, horizon, dt, &mut path_rng(seed, i as u64)))
        .collect()
}

pub fn price_european_mc(model: &SwitchingModel, contract: &ContractSpec, config: &McConfig) -> Result<McResult> {
    if config.n_paths < 100 {
        return Err(Error::InvalidParameter {
            name: "n_paths",
            value: config.n_paths as f64,
            constraint: ">= 100",
        });
    }
    let dt = config.dt.min(contract.maturity);
    let z = terminal_log_returns(model, contract.maturity, dt, config.n_paths, config.seed)?;
    let disc = (-model.r * contract.maturity).exp();
    let payoffs: Vec<f64> = z
        .iter()
        .map(|z| disc * contract.kind.payoff(model.s0 * z.exp(), contract.strike))
        .collect();
    Ok(McResult::from_samples(&payoffs, config.seed))
}

/// Discounted mean of `S_T`, which equals `S_0` for risk-neutral drifts.
pub fn discounted_forward_mc(model: &SwitchingModel, horizon: f64, config: &McConfig) -> Result<McResult> {
    let z = terminal_log_returns(model, horizon, config.dt.min(horizon), config.n_paths, config.seed)?;
    let disc = (-model.r * horizon).exp();
    let v: Vec<f64> = z.iter().map(|z| disc * model.s0 * z.exp()).collect();
    Ok(McResult::from_samples(&v, config.seed))
}

/// Convenience for call/put prices on a strike grid sharing one set of paths.
pub fn price_grid_mc(
    model: &SwitchingModel,
    maturity: f64,
    strikes: &[(f64, OptionKind)],
    config: &McConfig,
) -> Result<Vec<McResult>> {
    ensure_positive("maturity", maturity)?;
    let z = terminal_log_returns(model, maturity, config.dt.min(maturity), config.n_paths, config.seed)?;
    let disc = (-model.r * maturity).exp();
    Ok(strikes
        .iter()
        .map(|&(k, kind)| {
            let v: Vec<f64> = z.iter().map(|z| disc * kind.payoff(model.s0 * z.exp(), k)).collect();
            McResult::from_samples(&v, config.seed)
        })
        .collect())
}
