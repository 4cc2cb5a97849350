//! Characteristic functions of the time-changed regimes and of the
//! switching process.
//!
//! In regime `j`, `Y_t = mu L_t + sigma B(L_t)`, so conditioning on the
//! clock gives `E[exp(iuY_t)] = exp(t l(i mu u - sigma^2 u^2 / 2))` where
//! `l` is the subordinator's Laplace exponent. The switching process uses
//! `Phi(u) = Q + diag(Psi_1(u), Psi_2(u))` and, started in regime 1,
//! `E[exp(iuZ_t)] = e_1' exp(t Phi(u)) 1` (the first row sum).

use num_complex::Complex64;

use crate::error::{ensure_positive, Error, Result};
use crate::matrix::{matrix_exp, ComplexMatrix2};
use crate::regime::{generator_matrix, RegimeParams, SubordinatorFamily, SwitchingModel};
use crate::subordinator::SubordinatorSpec;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Characteristic exponent `Psi(u)` of one regime, per unit time.
pub fn regime_char_exponent(params: &RegimeParams, family: SubordinatorFamily, u: Complex64) -> Result<Complex64> {
    let s = I * params.mu * u - 0.5 * params.sigma * params.sigma * u * u;
    SubordinatorSpec::of(family, params).laplace_exponent(s)
}

pub fn phi_matrix(model: &SwitchingModel, u: Complex64) -> Result<ComplexMatrix2> {
    let psi1 = regime_char_exponent(&model.regimes[0], model.family, u)?;
    let psi2 = regime_char_exponent(&model.regimes[1], model.family, u)?;
    let q = ComplexMatrix2::from_real(generator_matrix(model));
    Ok(q + ComplexMatrix2::diag(psi1, psi2))
}

/// Characteristic function of `y0 + Z_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct CharFn {
    pub model: SwitchingModel,
    pub t: f64,
    pub y0: f64,
}

impl CharFn {
    /// CF of the log price, `y0 = log(s0)`.
    pub fn new(model: &SwitchingModel, t: f64) -> Result<Self> {
        Self::with_offset(model, t, model.s0.ln())
    }

    /// CF of the log return `Z_t` alone.
    pub fn log_return(model: &SwitchingModel, t: f64) -> Result<Self> {
        Self::with_offset(model, t, 0.0)
    }

    /// CF of the log-moneyness at expiry, `log(S_t / K)`.
    pub fn log_moneyness(model: &SwitchingModel, t: f64, strike: f64) -> Result<Self> {
        ensure_positive("strike", strike)?;
        Self::with_offset(model, t, (model.s0 / strike).ln())
    }

    pub fn with_offset(model: &SwitchingModel, t: f64, y0: f64) -> Result<Self> {
        ensure_positive("t", t)?;
        model.validate()?;
        Ok(CharFn {
            model: model.clone(),
            t,
            y0,
        })
    }

    pub fn eval(&self, u: Complex64) -> Result<Complex64> {
        switching_cf(self, u)
    }
}

pub fn switching_cf(cf: &CharFn, u: Complex64) -> Result<Complex64> {
    let phi = phi_matrix(&cf.model, u)?;
    let semigroup = matrix_exp(&phi.scale_real(cf.t));
    Ok((I * u * cf.y0).exp() * semigroup.row_sum(0))
}

/// Drift making regime `j` a discounted martingale, `Psi(-i) = r`.
///
/// `Psi(-i) = l(mu + sigma^2/2)` is increasing in `mu`, so the root is
/// bracketed and bisected on the exponent itself.
pub fn risk_neutral_drift(params: &RegimeParams, family: SubordinatorFamily, r: f64) -> Result<f64> {
    params.validate()?;
    let half_var = 0.5 * params.sigma * params.sigma;
    let (alpha, beta) = (params.alpha, params.beta);
    let psi_at = |mu: f64| -> Result<f64> {
        let p = RegimeParams { mu, ..*params };
        Ok(regime_char_exponent(&p, family, Complex64::new(0.0, -1.0))?.re)
    };

    let mut hi = match family {
        SubordinatorFamily::Identity => return Ok(r - half_var),
        SubordinatorFamily::InverseGaussian => {
            let edge = 0.5 * beta * beta;
            let mut mu_max = edge - half_var;
            // rounding can put mu_max + half_var one ulp past the branch point
            while mu_max + half_var > edge {
                mu_max = mu_max.next_down();
            }
            // l(beta^2/2) = alpha * beta is the largest attainable rate.
            if alpha * beta < r {
                return Err(Error::NoSolution(format!(
                    "inverse Gaussian regime needs beta >= r/alpha (beta = {beta}, r/alpha = {})",
                    r / alpha
                )));
            }
            mu_max
        }
        SubordinatorFamily::Gamma => {
            let mut k = 1;
            loop {
                let mu = beta * (1.0 - 10f64.powi(-k)) - half_var;
                if psi_at(mu)? >= r || k >= 15 {
                    break mu;
                }
                k += 1;
            }
        }
    };
    let mut lo = hi - 1.0;
    let mut width = 1.0;
    while psi_at(lo)? > r {
        width *= 2.0;
        lo = hi - width;
        if !lo.is_finite() {
            return Err(Error::NoSolution("could not bracket the risk-neutral drift".into()));
        }
    }
    if psi_at(hi)? < r {
        return Err(Error::NoSolution(format!(
            "rate {r} exceeds the largest attainable exponential moment"
        )));
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if psi_at(mid)? < r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (rl, rh) = ((psi_at(lo)? - r).abs(), (psi_at(hi)? - r).abs());
    Ok(if rl <= rh { lo } else { hi })
}

impl SwitchingModel {
    /// Copy of the model with both drifts replaced by their risk-neutral values.
    pub fn risk_neutral(&self) -> Result<SwitchingModel> {
        let mut m = self.clone();
        for p in m.regimes.iter_mut() {
            p.mu = risk_neutral_drift(p, self.family, self.r)?;
        }
        Ok(m)
    }

    /// Forward `E[S_t] = s0 * E[exp(Z_t)]`, from the CF at `u = -i`.
    pub fn forward(&self, t: f64) -> Result<f64> {
        let cf = CharFn::log_return(self, t)?;
        let v = switching_cf(&cf, Complex64::new(0.0, -1.0))?;
        if !(v.re.is_finite() && v.re > 0.0) {
            return Err(Error::NoSolution(format!("E[exp(Z_{t})] is not finite")));
        }
        Ok(self.s0 * v.re)
    }
}

/// Characteristic exponent after the exponential tilt `dQ/dP = exp(theta X_t - t l(theta))`:
/// `Psi_theta(u) = Psi(u - i theta) - Psi(-i theta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EsscherExponent {
    pub params: RegimeParams,
    pub family: SubordinatorFamily,
    pub theta: f64,
    shift: Complex64,
}

impl EsscherExponent {
    pub fn eval(&self, u: Complex64) -> Result<Complex64> {
        Ok(regime_char_exponent(&self.params, self.family, u - I * self.theta)? - self.shift)
    }
}

/// The real part of the clock argument is largest at `u = 0`, so checking
/// that the exponential moment `Psi(-i theta)` exists covers every real `u`.
pub fn esscher_tilt(params: &RegimeParams, family: SubordinatorFamily, theta: f64) -> Result<EsscherExponent> {
    let shift = regime_char_exponent(params, family, Complex64::new(0.0, -theta))
        .map_err(|_| Error::NoSolution(format!("exponential moment of order {theta} does not exist")))?;
    if !(shift.re.is_finite() && shift.im.is_finite()) {
        return Err(Error::NoSolution(format!(
            "exponential moment of order {theta} is infinite"
        )));
    }
    Ok(EsscherExponent {
        params: *params,
        family,
        theta,
        shift,
    })
}
