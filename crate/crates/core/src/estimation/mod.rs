//! Estimation of regime parameters from historical log-returns.
//!
//! Returns are split into two regimes by a labelling rule, holding times
//! are estimated from the runs of labels, and each regime's subsample is
//! fitted as a single time-changed process observed at spacing `dt`.

mod kde;
mod mde;
mod mle;
mod moments;

pub use kde::{kde, silverman_bandwidth, BinnedKde};
pub use mde::{cf_distance, mde_fit, MDE_NODES};
pub use mle::{log_likelihood, mle_fit, simulate_increments, MleConfig, DENSITY_FLOOR};
pub use moments::{mom_fit, mom_fit_moments, raw_moments, theoretical_moments};

use chrono::NaiveDate;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{BoxBounds, StopReason};
use crate::regime::{Regime, RegimeParams, TRADING_DAY};

/// Minimum subsample size for fitting a regime.
pub const MIN_REGIME_OBS: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    /// Date of the later price in each return; may be empty for synthetic data.
    pub dates: Vec<NaiveDate>,
    pub log_returns: Vec<f64>,
    pub dt: f64,
}

impl ReturnSeries {
    pub fn from_prices(dates: &[NaiveDate], prices: &[f64]) -> Result<Self> {
        if dates.len() != prices.len() {
            return Err(Error::Invalid("dates and prices differ in length".into()));
        }
        if prices.len() < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: prices.len(),
            });
        }
        if prices.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::Invalid("prices must be finite and positive".into()));
        }
        let log_returns = prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
        Ok(ReturnSeries {
            dates: dates[1..].to_vec(),
            log_returns,
            dt: TRADING_DAY,
        })
    }

    pub fn from_returns(log_returns: Vec<f64>, dt: f64) -> Result<Self> {
        if log_returns.iter().any(|z| !z.is_finite()) {
            return Err(Error::Invalid("log-returns must be finite".into()));
        }
        Ok(ReturnSeries {
            dates: Vec::new(),
            log_returns,
            dt,
        })
    }

    pub fn len(&self) -> usize {
        self.log_returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_returns.is_empty()
    }

    /// Returns carrying the given label.
    pub fn subsample(&self, labels: &RegimeLabels, regime: Regime) -> Result<Vec<f64>> {
        if labels.0.len() != self.len() {
            return Err(Error::Invalid("labels and returns differ in length".into()));
        }
        Ok(self
            .log_returns
            .iter()
            .zip(&labels.0)
            .filter(|(_, l)| **l == regime)
            .map(|(z, _)| *z)
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegimeLabels(pub Vec<Regime>);

impl RegimeLabels {
    pub fn from_labels(labels: &[u8]) -> Result<Self> {
        labels
            .iter()
            .map(|&l| Regime::from_label(l).ok_or_else(|| Error::Invalid(format!("regime label {l} is not 1 or 2"))))
            .collect::<Result<Vec<_>>>()
            .map(RegimeLabels)
    }

    pub fn count(&self, regime: Regime) -> usize {
        self.0.iter().filter(|&&r| r == regime).count()
    }
}

/// Box constraints on `(mu, sigma, alpha, beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBounds {
    pub lower: [f64; 4],
    pub upper: [f64; 4],
}

impl Default for ParamBounds {
    fn default() -> Self {
        ParamBounds {
            lower: [-1.0, 1e-6, 1e-6, 1e-6],
            upper: [1.0, 5.0, 100.0, 100.0],
        }
    }
}

impl ParamBounds {
    pub fn to_box(&self) -> BoxBounds {
        BoxBounds {
            lower: self.lower.to_vec(),
            upper: self.upper.to_vec(),
        }
    }

    pub fn contains(&self, p: &RegimeParams) -> bool {
        self.to_box().contains(&p.to_array())
    }

    pub fn project(&self, p: &RegimeParams) -> RegimeParams {
        let mut x = p.to_array();
        self.to_box().project(&mut x);
        RegimeParams::from_array(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub params: RegimeParams,
    /// Scaled residual norm (moments), CF distance (mde) or mean negative log-likelihood (mle).
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stop_reason: String,
}

impl FitReport {
    pub(crate) fn new(x: &[f64], objective: f64, iterations: usize, reason: StopReason) -> Self {
        FitReport {
            params: RegimeParams::from_array([x[0], x[1], x[2], x[3]]),
            objective,
            iterations,
            converged: reason.converged(),
            stop_reason: reason.describe().to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveStats {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub std_dev: f64,
    pub skewness: f64,
    /// Non-excess; 3 for a normal sample.
    pub kurtosis: f64,
}

pub fn descriptive_stats(returns: &[f64]) -> Result<DescriptiveStats> {
    let n = returns.len();
    if n < 4 {
        return Err(Error::InsufficientData { needed: 4, got: n });
    }
    let nf = n as f64;
    let mean = returns.iter().sum::<f64>() / nf;
    let central = |k: i32| returns.iter().map(|z| (z - mean).powi(k)).sum::<f64>() / nf;
    let (m2, m3, m4) = (central(2), central(3), central(4));
    if !(m2 > 0.0) {
        return Err(Error::DegenerateSample("zero variance"));
    }
    let variance = m2 * nf / (nf - 1.0);
    Ok(DescriptiveStats {
        n,
        mean,
        variance,
        std_dev: variance.sqrt(),
        skewness: m3 / m2.powf(1.5),
        kurtosis: m4 / (m2 * m2),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SegmentationRule {
    /// Regime 2 iff `|z| > c`.
    AbsThreshold(f64),
    /// Inclusive date windows labelled regime 1; everything else is regime 2.
    DateWindows(Vec<(NaiveDate, NaiveDate)>),
}

pub fn segment_regimes(series: &ReturnSeries, rule: &SegmentationRule) -> Result<RegimeLabels> {
    match rule {
        SegmentationRule::AbsThreshold(c) => {
            if !(c.is_finite() && *c >= 0.0) {
                return Err(Error::Invalid(format!(
                    "threshold must be a non-negative number, got {c}"
                )));
            }
            Ok(RegimeLabels(
                series
                    .log_returns
                    .iter()
                    .map(|z| if z.abs() > *c { Regime::Two } else { Regime::One })
                    .collect(),
            ))
        }
        SegmentationRule::DateWindows(windows) => {
            let (Some(first), Some(last)) = (series.dates.first(), series.dates.last()) else {
                return Err(Error::Invalid("date windows need a dated series".into()));
            };
            if series.dates.len() != series.len() {
                return Err(Error::Invalid("series dates and returns differ in length".into()));
            }
            for (a, b) in windows {
                if a > b || b < first || a > last {
                    return Err(Error::Invalid(format!(
                        "window {a}..{b} lies outside the series {first}..{last}"
                    )));
                }
            }
            Ok(RegimeLabels(
                series
                    .dates
                    .iter()
                    .map(|d| {
                        if windows.iter().any(|(a, b)| a <= d && d <= b) {
                            Regime::One
                        } else {
                            Regime::Two
                        }
                    })
                    .collect(),
            ))
        }
    }
}

/// Mean sojourn per regime in years and the matching intensities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoldingRates {
    /// Mean sojourn of regime 1 and regime 2, in years.
    pub sojourn: [f64; 2],
    pub runs: [usize; 2],
    pub days: [usize; 2],
}

impl HoldingRates {
    /// Rate of leaving regime 1 (`lambda12`).
    pub fn lambda12(&self) -> f64 {
        1.0 / self.sojourn[0]
    }

    /// Rate of leaving regime 2 (`lambda21`).
    pub fn lambda21(&self) -> f64 {
        1.0 / self.sojourn[1]
    }
}

/// Days in regime `j` over the number of maximal runs of `j`, times `dt`.
pub fn holding_rates(labels: &RegimeLabels, dt: f64) -> Result<HoldingRates> {
    crate::error::ensure_positive("dt", dt)?;
    let mut runs = [0usize; 2];
    let mut days = [0usize; 2];
    let mut prev: Option<Regime> = None;
    for &r in &labels.0 {
        days[r.index()] += 1;
        if prev != Some(r) {
            runs[r.index()] += 1;
        }
        prev = Some(r);
    }
    for r in [Regime::One, Regime::Two] {
        if runs[r.index()] == 0 {
            return Err(Error::RegimeAbsent(r.label()));
        }
    }
    Ok(HoldingRates {
        sojourn: [0, 1].map(|j| days[j] as f64 / runs[j] as f64 * dt),
        runs,
        days,
    })
}

pub fn empirical_cf(returns: &[f64], u: f64) -> Complex64 {
    if returns.is_empty() {
        return Complex64::new(1.0, 0.0);
    }
    let (c, s) = returns.iter().fold((0.0, 0.0), |(c, s), z| {
        let (sin, cos) = (u * z).sin_cos();
        (c + cos, s + sin)
    });
    let n = returns.len() as f64;
    Complex64::new(c / n, s / n)
}

pub(crate) fn check_sample(returns: &[f64], needed: usize) -> Result<()> {
    if returns.len() < needed {
        return Err(Error::InsufficientData {
            needed,
            got: returns.len(),
        });
    }
    if returns.iter().any(|z| !z.is_finite()) {
        return Err(Error::Invalid("log-returns must be finite".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::path_rng;
    use crate::regime::{simulate_regime_path, SubordinatorFamily, SwitchingModel};
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn labels(v: &[u8]) -> RegimeLabels {
        RegimeLabels::from_labels(v).unwrap()
    }

    #[test]
    fn stats_of_constant_series_fail() {
        assert!(matches!(descriptive_stats(&[1.0; 10]), Err(Error::DegenerateSample(_))));
        assert!(descriptive_stats(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn normal_kurtosis_is_three() {
        let mut rng = path_rng(4, 0);
        let x: Vec<f64> = (0..1_000_000).map(|_| rng.sample(StandardNormal)).collect();
        let s = descriptive_stats(&x).unwrap();
        assert!((s.kurtosis - 3.0).abs() < 0.02, "{}", s.kurtosis);
        assert!(s.skewness.abs() < 0.01 && (s.variance - 1.0).abs() < 0.01);
    }

    #[test]
    fn threshold_segmentation() {
        let s = ReturnSeries::from_returns(vec![1.0, 4.0, -5.0, 0.0], TRADING_DAY).unwrap();
        let l = segment_regimes(&s, &SegmentationRule::AbsThreshold(3.0)).unwrap();
        assert_eq!(l, labels(&[1, 2, 2, 1]));
        let calm = ReturnSeries::from_returns(vec![0.1, -2.9, 2.0], TRADING_DAY).unwrap();
        let l = segment_regimes(&calm, &SegmentationRule::AbsThreshold(3.0)).unwrap();
        assert_eq!(l.count(Regime::One), 3);
    }

    #[test]
    fn window_segmentation() {
        let d = |y, m, day| NaiveDate::from_ymd_opt(y, m, day).unwrap();
        let dates: Vec<NaiveDate> = (0..8).map(|k| d(2013, 1, 1) + chrono::Days::new(k * 30)).collect();
        let prices: Vec<f64> = (0..8).map(|k| 10.0 + k as f64).collect();
        let s = ReturnSeries::from_prices(&dates, &prices).unwrap();
        let w = SegmentationRule::DateWindows(vec![(d(2013, 2, 1), d(2013, 4, 15))]);
        let l = segment_regimes(&s, &w).unwrap();
        // return dates: Jan 31, Mar 2, Apr 1, May 1, ...
        assert_eq!(l, labels(&[2, 1, 1, 2, 2, 2, 2]));
        let outside = SegmentationRule::DateWindows(vec![(d(2020, 1, 1), d(2020, 2, 1))]);
        assert!(segment_regimes(&s, &outside).is_err());
    }

    #[test]
    fn holding_rate_counting() {
        let h = holding_rates(&labels(&[1, 1, 2, 1, 2, 2]), 1.0).unwrap();
        assert_eq!(h.sojourn, [1.5, 1.5]);
        assert_eq!(h.runs, [2, 2]);
        assert!(matches!(
            holding_rates(&labels(&[1, 1, 1, 1]), TRADING_DAY),
            Err(Error::RegimeAbsent(2))
        ));
        let h = holding_rates(&labels(&[1, 1, 1, 1, 2]), TRADING_DAY).unwrap();
        assert!((h.sojourn[0] - 0.016).abs() < 1e-15);
    }

    #[test]
    fn holding_rates_recover_simulated_chain() {
        let p = RegimeParams::new(0.0, 0.1, 1.0, 1.0).unwrap();
        let m = SwitchingModel::new([p, p], 5.0, 2.0, SubordinatorFamily::Gamma, 1.0, 0.0).unwrap();
        let horizon = 400.0;
        let path = simulate_regime_path(&m, horizon, &mut path_rng(12, 0));
        let dt = TRADING_DAY;
        let n = (horizon / dt) as usize;
        let l = RegimeLabels((0..n).map(|k| path.regime_at((k as f64 + 0.5) * dt)).collect());
        let h = holding_rates(&l, dt).unwrap();
        for (j, truth) in [(0, 0.2), (1, 0.5)] {
            // exponential sojourns: sd = mean
            let se = truth / (h.runs[j] as f64).sqrt();
            assert!(
                (h.sojourn[j] - truth).abs() < 3.0 * se,
                "regime {j}: {} vs {truth}",
                h.sojourn[j]
            );
        }
    }

    #[test]
    fn empirical_cf_properties() {
        assert_eq!(empirical_cf(&[0.3, -1.0], 0.0), Complex64::new(1.0, 0.0));
        let z = 0.7;
        let e = empirical_cf(&[z], 2.0);
        assert!((e - Complex64::new(0.0, 2.0 * z).exp()).norm() < 1e-15);

        let mut rng = path_rng(6, 0);
        let x: Vec<f64> = (0..1_000_000).map(|_| rng.sample(StandardNormal)).collect();
        let phi = empirical_cf(&x, 1.0);
        // Var(cos X) = (1 + e^{-2})/2 - e^{-1}
        let se = ((0.5 * (1.0 + (-2.0f64).exp()) - (-1.0f64).exp()) / 1e6).sqrt();
        assert!((phi.re - (-0.5f64).exp()).abs() < 3.0 * se);
        let neg = empirical_cf(&x, -1.0);
        assert!((neg - phi.conj()).norm() < 1e-12 && phi.norm() <= 1.0);
    }
}
