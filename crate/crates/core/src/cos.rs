//! Fourier-cosine pricing of European options.
//!
//! The density of `y = log(S_T / K)` is expanded in a cosine series on a
//! truncation interval `[a, b]`. Puts are priced directly because their
//! payoff coefficients stay bounded as `b` grows; calls come from parity
//! against the model forward.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::charfn::{switching_cf, CharFn};
use crate::error::{ensure_positive, Error, Result};
use crate::regime::SwitchingModel;

/// Raw sums down to this (times `max(K, 1)`) are rounding noise and clip to zero.
pub const NEGATIVE_PRICE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CosConfig {
    pub n_terms: usize,
    /// Fixed interval for `log(S_T / K)`; chosen from cumulants when absent.
    pub interval: Option<(f64, f64)>,
    pub cumulant_scale: f64,
}

impl Default for CosConfig {
    fn default() -> Self {
        CosConfig {
            n_terms: 512,
            interval: None,
            cumulant_scale: 10.0,
        }
    }
}

impl CosConfig {
    pub fn with_terms(n_terms: usize) -> Self {
        CosConfig {
            n_terms,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_terms < 16 {
            return Err(Error::Invalid(format!(
                "n_terms must be at least 16, got {}",
                self.n_terms
            )));
        }
        ensure_positive("cumulant_scale", self.cumulant_scale)?;
        if let Some((a, b)) = self.interval {
            if !(a < 0.0 && 0.0 < b) {
                return Err(Error::DegenerateInterval { a, b });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Call,
    Put,
}

impl OptionKind {
    pub fn name(self) -> &'static str {
        match self {
            OptionKind::Call => "call",
            OptionKind::Put => "put",
        }
    }

    pub fn payoff(self, spot: f64, strike: f64) -> f64 {
        match self {
            OptionKind::Call => (spot - strike).max(0.0),
            OptionKind::Put => (strike - spot).max(0.0),
        }
    }
}

impl std::str::FromStr for OptionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "call" | "c" => Ok(OptionKind::Call),
            "put" | "p" => Ok(OptionKind::Put),
            other => Err(Error::Invalid(format!("unknown option kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractSpec {
    pub strike: f64,
    pub maturity: f64,
    pub kind: OptionKind,
}

impl ContractSpec {
    pub fn new(strike: f64, maturity: f64, kind: OptionKind) -> Result<Self> {
        ensure_positive("strike", strike)?;
        ensure_positive("maturity", maturity)?;
        Ok(ContractSpec { strike, maturity, kind })
    }
}

const C4_NOISE_FLOOR: f64 = 1e-6;

/// First, second and fourth cumulants of the variable whose CF is `cf`.
///
/// `c1` and `c2` come from central differences of `log phi` with step
/// `1e-4` and one Richardson step. The fourth cumulant is taken from the
/// CF re-centred at `c1`, with a step scaled to the standard deviation so
/// that rounding does not swamp the fourth difference for narrow laws.
pub fn cumulants(cf: &CharFn) -> Result<[f64; 3]> {
    let logcf = |u: f64| -> Result<Complex64> { Ok(cf.eval(Complex64::new(u, 0.0))?.ln()) };

    let d1 = |h: f64| -> Result<f64> { Ok((logcf(h)? - logcf(-h)?).im / (2.0 * h)) };
    let d2 = |h: f64| -> Result<f64> { Ok(-(logcf(h)? + logcf(-h)?).re / (h * h)) };
    let h = 1e-4;
    let c1 = (4.0 * d1(0.5 * h)? - d1(h)?) / 3.0;
    let c2_rough = (4.0 * d2(0.5 * h)? - d2(h)?) / 3.0;
    check_finite(1, c1)?;
    check_finite(2, c2_rough)?;

    let sd = c2_rough.abs().max(1e-300).sqrt();
    // even part of the centred cumulant function
    let even = |u: f64| -> Result<f64> {
        let z = cf.eval(Complex64::new(u, 0.0))? * Complex64::new(0.0, -u * c1).exp();
        Ok(z.norm().ln())
    };
    let c2_at = |lo: f64, hi: f64, hh: f64| -(16.0 * lo - hi) / (6.0 * hh * hh);
    let c4_at = |lo: f64, hi: f64, hh: f64| 2.0 * (hi - 4.0 * lo) / hh.powi(4);
    // the fourth difference needs a wider step than the second
    let richardson = |step: f64, f: &dyn Fn(f64, f64, f64) -> f64| -> Result<f64> {
        let (e1, e2, e4) = (even(0.5 * step)?, even(step)?, even(2.0 * step)?);
        Ok((4.0 * f(e1, e2, 0.5 * step) - f(e2, e4, step)) / 3.0)
    };
    let c2 = richardson(0.01 / sd, &c2_at)?;
    let c4 = richardson(0.05 / sd, &c4_at)?;
    check_finite(2, c2)?;
    check_finite(4, c4)?;
    // below this the fourth difference is rounding noise
    let c4 = if c4.abs() < C4_NOISE_FLOOR * c2 * c2 { 0.0 } else { c4 };
    Ok([c1, c2.max(0.0), c4])
}

fn check_finite(order: u8, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteCumulant { order, value })
    }
}

fn interval_from_cumulants(c: [f64; 3], scale: f64) -> Result<(f64, f64)> {
    let half = scale * (c[1] + c[2].abs().sqrt()).sqrt();
    let (a, b) = (c[0] - half, c[0] + half);
    if !(half > 0.0 && a < b) {
        return Err(Error::DegenerateInterval { a, b });
    }
    Ok((a, b))
}

pub fn truncation_interval(cf: &CharFn, config: &CosConfig) -> Result<(f64, f64)> {
    if let Some(iv) = config.interval {
        return Ok(iv);
    }
    interval_from_cumulants(cumulants(cf)?, config.cumulant_scale)
}

/// Cosine coefficients of the put payoff `K (1 - e^y)^+` on `[a, b]`.
///
/// The payoff vanishes for `y > 0`, so the integral runs over
/// `[a, min(b, 0)]` and every coefficient is zero once `a >= 0`.
pub fn put_coefficients(strike: f64, a: f64, b: f64, n_terms: usize) -> Result<Vec<f64>> {
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::DegenerateInterval { a, b });
    }
    let d = b.min(0.0);
    if a >= d {
        return Ok(vec![0.0; n_terms]);
    }
    let width = b - a;
    let scale = 2.0 * strike / width;
    let (ea, ed) = (a.exp(), d.exp());
    Ok((0..n_terms)
        .map(|k| {
            let w = k as f64 * PI / width;
            let (sd, cd) = (w * (d - a)).sin_cos();
            // (c - a) = 0 at the lower limit
            let chi = (cd * ed - ea + w * sd * ed) / (1.0 + w * w);
            let psi = if k == 0 { d - a } else { sd / w };
            scale * (psi - chi)
        })
        .collect())
}

fn clip(raw: f64, strike: f64) -> Result<f64> {
    if raw >= 0.0 {
        Ok(raw)
    } else if raw >= -NEGATIVE_PRICE_TOLERANCE * strike.max(1.0) {
        Ok(0.0)
    } else {
        Err(Error::NegativePrice { raw })
    }
}

fn cos_sum(cf_terms: impl Iterator<Item = Complex64>, coeffs: &[f64]) -> f64 {
    cf_terms
        .zip(coeffs)
        .enumerate()
        .map(|(k, (z, v))| {
            let w = if k == 0 { 0.5 } else { 1.0 };
            w * z.re * v
        })
        .sum()
}

fn check_cf(cf: &CharFn, contract: &ContractSpec) -> Result<()> {
    let x = (cf.model.s0 / contract.strike).ln();
    if (cf.t - contract.maturity).abs() > 1e-12 * contract.maturity.max(1.0) {
        return Err(Error::Invalid(format!(
            "characteristic function horizon {} does not match maturity {}",
            cf.t, contract.maturity
        )));
    }
    if (cf.y0 - x).abs() > 1e-12 * x.abs().max(1.0) {
        return Err(Error::Invalid(format!(
            "characteristic function must be centred at log(S0/K) = {x}, got {}",
            cf.y0
        )));
    }
    Ok(())
}

/// Put price from a CF of `log(S_T / K)`, see [`CharFn::log_moneyness`].
pub fn price_put(cf: &CharFn, contract: &ContractSpec, config: &CosConfig) -> Result<f64> {
    config.validate()?;
    check_cf(cf, contract)?;
    let (a, b) = truncation_interval(cf, config)?;
    let v = put_coefficients(contract.strike, a, b, config.n_terms)?;
    let width = b - a;
    let terms = (0..config.n_terms).map(|k| {
        let u = k as f64 * PI / width;
        switching_cf(cf, Complex64::new(u, 0.0)).map(|phi| phi * Complex64::new(0.0, -u * a).exp())
    });
    let terms: Vec<Complex64> = terms.collect::<Result<_>>()?;
    let raw = (-cf.model.r * contract.maturity).exp() * cos_sum(terms.into_iter(), &v);
    clip(raw, contract.strike)
}

/// Call price by parity, `C = P + e^{-rT} (F - K)`. `F = E[S_T]` is
/// `S0 e^{rT}` under risk-neutral drifts.
pub fn price_call(cf: &CharFn, contract: &ContractSpec, config: &CosConfig) -> Result<f64> {
    let put = price_put(cf, contract, config)?;
    let fwd = cf.model.forward(contract.maturity)?;
    let disc = (-cf.model.r * contract.maturity).exp();
    clip(put + disc * (fwd - contract.strike), contract.strike)
}

pub fn price(cf: &CharFn, contract: &ContractSpec, config: &CosConfig) -> Result<f64> {
    match contract.kind {
        OptionKind::Put => price_put(cf, contract, config),
        OptionKind::Call => price_call(cf, contract, config),
    }
}

/// Black-Scholes price.
pub fn bs_closed_form(s0: f64, strike: f64, r: f64, sigma: f64, t: f64, kind: OptionKind) -> f64 {
    let disc_k = strike * (-r * t).exp();
    let vol = sigma * t.sqrt();
    if vol <= 0.0 {
        return kind.payoff(s0, disc_k);
    }
    let n = Normal::standard();
    let d1 = ((s0 / strike).ln() + (r + 0.5 * sigma * sigma) * t) / vol;
    let d2 = d1 - vol;
    match kind {
        OptionKind::Call => s0 * n.cdf(d1) - disc_k * n.cdf(d2),
        OptionKind::Put => disc_k * n.cdf(-d2) - s0 * n.cdf(-d1),
    }
}

/// Prices every strike of one maturity from a single set of CF values.
///
/// With the cumulant rule the interval for `log(S_T/K)` is the interval of
/// `Z_T` shifted by `log(S0/K)`, so `phi_Z(u_k)` is shared by all strikes.
#[derive(Debug, Clone)]
pub struct CosPricer {
    model: SwitchingModel,
    maturity: f64,
    config: CosConfig,
    /// interval of `Z_T` (cumulant rule) or of `log(S_T/K)` (fixed interval)
    interval: (f64, f64),
    cf_values: Vec<Complex64>,
    forward: f64,
}

impl CosPricer {
    pub fn new(model: &SwitchingModel, maturity: f64, config: &CosConfig) -> Result<Self> {
        config.validate()?;
        let cf = CharFn::log_return(model, maturity)?;
        let interval = truncation_interval(&cf, config)?;
        let width = interval.1 - interval.0;
        let cf_values = (0..config.n_terms)
            .map(|k| cf.eval(Complex64::new(k as f64 * PI / width, 0.0)))
            .collect::<Result<Vec<_>>>()?;
        Ok(CosPricer {
            model: model.clone(),
            maturity,
            config: *config,
            interval,
            cf_values,
            forward: model.forward(maturity)?,
        })
    }

    pub fn maturity(&self) -> f64 {
        self.maturity
    }

    pub fn forward(&self) -> f64 {
        self.forward
    }

    /// Truncation interval for `log(S_T / K)` at this strike.
    pub fn interval_for(&self, strike: f64) -> (f64, f64) {
        match self.config.interval {
            Some(iv) => iv,
            None => {
                let x = (self.model.s0 / strike).ln();
                (self.interval.0 + x, self.interval.1 + x)
            }
        }
    }

    pub fn put(&self, strike: f64) -> Result<f64> {
        ensure_positive("strike", strike)?;
        let x = (self.model.s0 / strike).ln();
        let (a, b) = self.interval_for(strike);
        let width = b - a;
        let v = put_coefficients(strike, a, b, self.config.n_terms)?;
        // phi_y(u) e^{-iua} = phi_Z(u) e^{iu(x - a)}
        let terms = self
            .cf_values
            .iter()
            .enumerate()
            .map(|(k, z)| z * Complex64::new(0.0, k as f64 * PI / width * (x - a)).exp());
        let raw = (-self.model.r * self.maturity).exp() * cos_sum(terms, &v);
        clip(raw, strike)
    }

    pub fn call(&self, strike: f64) -> Result<f64> {
        let put = self.put(strike)?;
        let disc = (-self.model.r * self.maturity).exp();
        clip(put + disc * (self.forward - strike), strike)
    }

    pub fn price(&self, strike: f64, kind: OptionKind) -> Result<f64> {
        match kind {
            OptionKind::Put => self.put(strike),
            OptionKind::Call => self.call(strike),
        }
    }
}

/// Single contract through [`CosPricer`].
pub fn price_contract(model: &SwitchingModel, contract: &ContractSpec, config: &CosConfig) -> Result<f64> {
    CosPricer::new(model, contract.maturity, config)?.price(contract.strike, contract.kind)
}
