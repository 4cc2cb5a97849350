//! European option pricing under a two-regime Markov-switching,
//! time-changed Brownian motion with drift.
//!
//! The log-price in regime `i` evolves as `mu_i L_t + sigma_i W_{L_t}`,
//! where `L` is a gamma or inverse Gaussian subordinator. Prices come from
//! the Fourier-cosine expansion of the switching characteristic function,
//! with Monte Carlo as a benchmark, plus estimation and calibration tools.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` guards also reject NaN

pub mod calibration;
pub mod charfn;
pub mod cli;
pub mod cos;
pub mod data_io;
pub mod error;
pub mod estimation;
pub mod matrix;
pub mod mc;
pub mod optim;
pub mod quadrature;
pub mod regime;
pub mod subordinator;

pub use charfn::{esscher_tilt, risk_neutral_drift, switching_cf, CharFn};
pub use cos::{bs_closed_form, price_call, price_put, ContractSpec, CosConfig, CosPricer, OptionKind};
pub use error::{Error, Result};
pub use regime::{Regime, RegimeParams, SubordinatorFamily, SwitchingModel};
