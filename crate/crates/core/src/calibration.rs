//! Calibration of both regimes' parameters to option quotes.
//!
//! The objective is the root-mean-squared pricing error over the quote
//! table. In-the-money and near-the-money rows are priced by COS;
//! out-of-the-money rows fall back to Monte Carlo with a fixed seed, so
//! the objective is a deterministic function of the parameters.
//! Switching intensities, spot and rate are held fixed.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::cos::{CosConfig, CosPricer, OptionKind};
use crate::error::{ensure_positive, Error, Result};
use crate::estimation::ParamBounds;
use crate::mc::{price_grid_mc, McConfig};
use crate::optim::BoxBounds;
use crate::regime::{RegimeParams, SwitchingModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quote {
    pub maturity: f64,
    pub strike: f64,
    pub kind: OptionKind,
    pub mid: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct QuoteTable {
    rows: Vec<Quote>,
}

impl QuoteTable {
    pub fn new(rows: Vec<Quote>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (i, q) in rows.iter().enumerate() {
            let bad = |what: &str| Error::Parse {
                line: i + 1,
                message: format!("{what} must be positive and finite"),
            };
            if !(q.maturity.is_finite() && q.maturity > 0.0) {
                return Err(bad("maturity"));
            }
            if !(q.strike.is_finite() && q.strike > 0.0) {
                return Err(bad("strike"));
            }
            if !(q.mid.is_finite() && q.mid >= 0.0) {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "quoted price must be finite and non-negative".into(),
                });
            }
            if !seen.insert((q.maturity.to_bits(), q.strike.to_bits(), q.kind)) {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("duplicate quote (T={}, K={}, {})", q.maturity, q.strike, q.kind.name()),
                });
            }
        }
        Ok(QuoteTable { rows })
    }

    pub fn rows(&self) -> &[Quote] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn mean_quote(&self) -> f64 {
        self.rows.iter().map(|q| q.mid).sum::<f64>() / self.rows.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibConfig {
    pub step_tolerance: f64,
    pub max_iters: usize,
    /// Calls with `K / S0` above this are priced by Monte Carlo.
    pub otm_call: f64,
    /// Puts with `K / S0` below this are priced by Monte Carlo.
    pub otm_put: f64,
    pub mc_paths: usize,
    pub mc_seed: u64,
    /// Monte Carlo step; European payoffs are exact with one step per regime segment.
    pub mc_dt: Option<f64>,
    pub fd_step: f64,
    pub cos: CosConfig,
}

impl Default for CalibConfig {
    fn default() -> Self {
        CalibConfig {
            step_tolerance: 1e-10,
            max_iters: 1000,
            otm_call: 1.05,
            otm_put: 0.95,
            mc_paths: 20_000,
            mc_seed: 0,
            mc_dt: None,
            fd_step: 1e-6,
            cos: CosConfig::default(),
        }
    }
}

impl CalibConfig {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("step_tolerance", self.step_tolerance)?;
        ensure_positive("fd_step", self.fd_step)?;
        ensure_positive("otm_call", self.otm_call)?;
        ensure_positive("otm_put", self.otm_put)?;
        if self.mc_paths < 100 {
            return Err(Error::InvalidParameter {
                name: "mc_paths",
                value: self.mc_paths as f64,
                constraint: ">= 100",
            });
        }
        self.cos.validate()
    }

    pub fn is_otm(&self, quote: &Quote, s0: f64) -> bool {
        let m = quote.strike / s0;
        match quote.kind {
            OptionKind::Call => m > self.otm_call,
            OptionKind::Put => m < self.otm_put,
        }
    }
}

/// Model prices for every row, in table order.
pub fn model_prices(model: &SwitchingModel, quotes: &QuoteTable, config: &CalibConfig) -> Result<Vec<f64>> {
    let mut by_maturity: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, q) in quotes.rows.iter().enumerate() {
        by_maturity.entry(q.maturity.to_bits()).or_default().push(i);
    }
    let mut prices = vec![0.0; quotes.len()];
    for (bits, rows) in by_maturity {
        let t = f64::from_bits(bits);
        let (mc_rows, cos_rows): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&i| config.is_otm(&quotes.rows[i], model.s0));
        if !cos_rows.is_empty() {
            let row_err = |e: Error| Error::QuoteRow {
                row: cos_rows[0] + 1,
                source: Box::new(e),
            };
            let pricer = CosPricer::new(model, t, &config.cos).map_err(row_err)?;
            for &i in &cos_rows {
                let q = &quotes.rows[i];
                prices[i] = pricer.price(q.strike, q.kind).map_err(|e| Error::QuoteRow {
                    row: i + 1,
                    source: Box::new(e),
                })?;
            }
        }
        if !mc_rows.is_empty() {
            let mc = McConfig {
                n_paths: config.mc_paths,
                dt: config.mc_dt.unwrap_or(t),
                seed: config.mc_seed,
            };
            let strikes: Vec<(f64, OptionKind)> = mc_rows
                .iter()
                .map(|&i| (quotes.rows[i].strike, quotes.rows[i].kind))
                .collect();
            let results = price_grid_mc(model, t, &strikes, &mc).map_err(|e| Error::QuoteRow {
                row: mc_rows[0] + 1,
                source: Box::new(e),
            })?;
            for (&i, r) in mc_rows.iter().zip(results) {
                prices[i] = r.price;
            }
        }
    }
    Ok(prices)
}

/// Root-mean-squared error between model prices and quotes.
pub fn calib_objective(model: &SwitchingModel, quotes: &QuoteTable, config: &CalibConfig) -> Result<f64> {
    if quotes.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let prices = model_prices(model, quotes, config)?;
    let sse: f64 = prices.iter().zip(&quotes.rows).map(|(p, q)| (p - q.mid).powi(2)).sum();
    Ok((sse / quotes.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibStop {
    StepTolerance,
    MaxIterations,
    /// No decrease along the search direction even for tiny steps.
    NoDescent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibReport {
    pub model: SwitchingModel,
    pub objective: f64,
    pub initial_objective: f64,
    pub iterations: usize,
    pub last_step: f64,
    pub stop: CalibStop,
}

fn with_params(base: &SwitchingModel, x: &[f64]) -> SwitchingModel {
    let mut m = base.clone();
    m.regimes = [
        RegimeParams::from_array([x[0], x[1], x[2], x[3]]),
        RegimeParams::from_array([x[4], x[5], x[6], x[7]]),
    ];
    m
}

/// Projected gradient descent on `J^2` over both regimes' parameters.
///
/// Gradients are forward differences with a relative step. Each variable
/// is scaled by its starting magnitude, the trial step length comes from
/// the Barzilai-Borwein rule, and backtracking enforces a sufficient
/// decrease. Iteration stops once an accepted step is shorter than
/// `step_tolerance` in the Euclidean norm.
pub fn calibrate(
    quotes: &QuoteTable,
    init: &SwitchingModel,
    bounds: &ParamBounds,
    config: &CalibConfig,
) -> Result<CalibReport> {
    config.validate()?;
    init.validate()?;
    let bx = BoxBounds {
        lower: [bounds.lower, bounds.lower].concat(),
        upper: [bounds.upper, bounds.upper].concat(),
    };
    let mut x: Vec<f64> = [init.regimes[0].to_array(), init.regimes[1].to_array()].concat();
    if !bx.contains(&x) {
        return Err(Error::Invalid("initial parameters lie outside the bounds".into()));
    }
    let scale: Vec<f64> = x.iter().map(|v| v.abs().max(1e-2)).collect();
    let cost = |x: &[f64]| -> Result<f64> { Ok(calib_objective(&with_params(init, x), quotes, config)?.powi(2)) };
    let soft = |x: &[f64]| cost(x).ok().filter(|v| v.is_finite()).unwrap_or(f64::INFINITY);

    let mut f = cost(&x)?;
    let initial = f.sqrt();
    let n = x.len();
    let gradient = |x: &[f64], fx: f64| -> Vec<f64> {
        (0..n)
            .map(|j| {
                let mut h = config.fd_step * x[j].abs().max(1e-3);
                if x[j] + h > bx.upper[j] {
                    h = -h;
                }
                let mut xp = x.to_vec();
                xp[j] += h;
                let fp = soft(&xp);
                if fp.is_finite() {
                    (fp - fx) / h
                } else {
                    0.0
                }
            })
            .collect()
    };

    let mut g = gradient(&x, f);
    let mut t = 1e-2;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut stop = CalibStop::MaxIterations;
    let mut last_step = f64::INFINITY;
    let mut iterations = 0;

    while iterations < config.max_iters {
        iterations += 1;
        // search direction in scaled coordinates: d_i = -g_i s_i^2
        let d: Vec<f64> = g.iter().zip(&scale).map(|(g, s)| -g * s * s).collect();
        if let Some((dx, dg)) = &prev {
            let sy: f64 = dx.iter().zip(dg).map(|(a, b)| a * b).sum();
            let ss: f64 = dx.iter().zip(&scale).map(|(a, s)| (a / s).powi(2)).sum();
            if sy > 0.0 {
                t = ss / sy;
            } else {
                t *= 2.0;
            }
        }
        let mut accepted = None;
        let mut trial_t = t;
        for _ in 0..60 {
            let mut trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + trial_t * b).collect();
            bx.project(&mut trial);
            let moved: f64 = trial.iter().zip(&x).zip(&g).map(|((a, b), g)| (a - b) * g).sum();
            if moved >= 0.0 {
                trial_t *= 0.5;
                continue;
            }
            let ft = soft(&trial);
            if ft <= f + 1e-4 * moved {
                accepted = Some((trial, ft));
                break;
            }
            trial_t *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            stop = CalibStop::NoDescent;
            break;
        };
        t = trial_t;
        let dx: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        last_step = dx.iter().map(|v| v * v).sum::<f64>().sqrt();
        let g_new = gradient(&x_new, f_new);
        let dg: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        prev = Some((dx, dg));
        x = x_new;
        f = f_new;
        g = g_new;
        if last_step < config.step_tolerance {
            stop = CalibStop::StepTolerance;
            break;
        }
    }
    Ok(CalibReport {
        model: with_params(init, &x),
        objective: f.sqrt(),
        initial_objective: initial,
        iterations,
        last_step,
        stop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regime::SubordinatorFamily;

    fn model() -> SwitchingModel {
        let p1 = RegimeParams::new(0.05, 0.25, 6.0, 6.0).unwrap();
        let p2 = RegimeParams::new(-0.05, 0.45, 4.0, 5.0).unwrap();
        SwitchingModel::new([p1, p2], 2.0, 3.0, SubordinatorFamily::Gamma, 20.0, 0.03).unwrap()
    }

    fn synthetic(m: &SwitchingModel, cfg: &CalibConfig) -> QuoteTable {
        let mut rows = Vec::new();
        for t in [0.5, 1.0] {
            for k in [16.0, 19.0, 20.0, 21.0, 24.0] {
                rows.push(Quote {
                    maturity: t,
                    strike: k,
                    kind: OptionKind::Call,
                    mid: 0.0,
                });
            }
        }
        let table = QuoteTable::new(rows).unwrap();
        let prices = model_prices(m, &table, cfg).unwrap();
        let rows = table
            .rows
            .iter()
            .zip(prices)
            .map(|(q, p)| Quote { mid: p, ..*q })
            .collect();
        QuoteTable::new(rows).unwrap()
    }

    #[test]
    fn table_validation() {
        let q = |t, k, mid| Quote {
            maturity: t,
            strike: k,
            kind: OptionKind::Put,
            mid,
        };
        assert_eq!(QuoteTable::new(vec![q(1.0, 20.0, 1.0)]).unwrap().len(), 1);
        assert!(QuoteTable::new(vec![q(1.0, 20.0, 1.0), q(1.0, 20.0, 2.0)]).is_err());
        assert!(QuoteTable::new(vec![q(1.0, -20.0, 1.0)]).is_err());
        assert!(QuoteTable::new(vec![q(0.0, 20.0, 1.0)]).is_err());
    }

    #[test]
    fn objective_arithmetic_and_permutation() {
        let m = model();
        let cfg = CalibConfig::default();
        let price = CosPricer::new(&m, 1.0, &cfg.cos).unwrap().call(20.0).unwrap();
        let one = QuoteTable::new(vec![Quote {
            maturity: 1.0,
            strike: 20.0,
            kind: OptionKind::Call,
            mid: price + 2.0,
        }])
        .unwrap();
        assert!((calib_objective(&m, &one, &cfg).unwrap() - 2.0).abs() < 1e-12);

        let table = synthetic(&m, &cfg);
        assert!(calib_objective(&m, &table, &cfg).unwrap() < 1e-12);
        let mut rows = table.rows().to_vec();
        rows.reverse();
        rows.iter_mut().for_each(|q| q.mid *= 1.01);
        let reversed = QuoteTable::new(rows.clone()).unwrap();
        rows.reverse();
        let forward = QuoteTable::new(rows).unwrap();
        assert_eq!(
            calib_objective(&m, &reversed, &cfg).unwrap(),
            calib_objective(&m, &forward, &cfg).unwrap()
        );
    }

    #[test]
    fn otm_rule() {
        let cfg = CalibConfig::default();
        let q = |k, kind| Quote {
            maturity: 1.0,
            strike: k,
            kind,
            mid: 1.0,
        };
        assert!(cfg.is_otm(&q(21.1, OptionKind::Call), 20.0));
        assert!(!cfg.is_otm(&q(21.0, OptionKind::Call), 20.0));
        assert!(cfg.is_otm(&q(18.9, OptionKind::Put), 20.0));
        assert!(!cfg.is_otm(&q(21.1, OptionKind::Put), 20.0));
    }

    #[test]
    fn fixed_point_converges_immediately() {
        let m = model();
        let cfg = CalibConfig {
            max_iters: 20,
            ..Default::default()
        };
        let table = synthetic(&m, &cfg);
        let r = calibrate(&table, &m, &ParamBounds::default(), &cfg).unwrap();
        assert!(r.objective < 1e-10, "{r:?}");
        assert!(r.iterations <= 2);
    }

    #[test]
    fn perturbed_start_reduces_error() {
        let m = model();
        let cfg = CalibConfig {
            max_iters: 150,
            ..Default::default()
        };
        let table = synthetic(&m, &cfg);
        let mut init = m.clone();
        for (j, r) in init.regimes.iter_mut().enumerate() {
            let s = if j == 0 { 1.1 } else { 0.9 };
            *r = RegimeParams::from_array(r.to_array().map(|v| v * s));
        }
        let r = calibrate(&table, &init, &ParamBounds::default(), &cfg).unwrap();
        assert!(r.objective < 0.01 * table.mean_quote(), "{r:?}");
        assert!(r.objective < r.initial_objective);
        assert!(ParamBounds::default().contains(&r.model.regimes[0]));
    }
}
