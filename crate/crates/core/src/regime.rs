//! Two-state continuous-time Markov chain and the model's domain types.
//!
//! Switching intensities (`lambda12`, `lambda21`) are rates per year. The
//! mean sojourn in a regime is the reciprocal of the intensity of leaving
//! it; [`mean_sojourn`] and [`intensity_from_sojourn`] convert between the
//! two so that the units never get mixed up.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error, Result};

/// Trading days per year.
pub const TRADING_DAYS: f64 = 250.0;

/// One trading day in years.
pub const TRADING_DAY: f64 = 1.0 / TRADING_DAYS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    One,
    Two,
}

impl Regime {
    pub fn index(self) -> usize {
        match self {
            Regime::One => 0,
            Regime::Two => 1,
        }
    }

    /// Label as used in data files, 1 or 2.
    pub fn label(self) -> u8 {
        self.index() as u8 + 1
    }

    pub fn other(self) -> Regime {
        match self {
            Regime::One => Regime::Two,
            Regime::Two => Regime::One,
        }
    }

    pub fn from_label(label: u8) -> Option<Regime> {
        match label {
            1 => Some(Regime::One),
            2 => Some(Regime::Two),
            _ => None,
        }
    }
}

/// Per-regime parameters: drift and diffusion of the Brownian motion that
/// runs on the subordinated clock, and the clock's shape and rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeParams {
    pub mu: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl RegimeParams {
    pub fn new(mu: f64, sigma: f64, alpha: f64, beta: f64) -> Result<Self> {
        let p = RegimeParams { mu, sigma, alpha, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("mu", self.mu)?;
        ensure_positive("sigma", self.sigma)?;
        ensure_positive("alpha", self.alpha)?;
        ensure_positive("beta", self.beta)
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.mu, self.sigma, self.alpha, self.beta]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        RegimeParams {
            mu: v[0],
            sigma: v[1],
            alpha: v[2],
            beta: v[3],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubordinatorFamily {
    Gamma,
    InverseGaussian,
    /// Calendar time, `L_t = t`. Reduces each regime to Black-Scholes.
    Identity,
}

impl SubordinatorFamily {
    pub fn name(self) -> &'static str {
        match self {
            SubordinatorFamily::Gamma => "gamma",
            SubordinatorFamily::InverseGaussian => "inverse_gaussian",
            SubordinatorFamily::Identity => "identity",
        }
    }
}

impl std::str::FromStr for SubordinatorFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gamma" => Ok(SubordinatorFamily::Gamma),
            "ig" | "inverse_gaussian" | "inverse-gaussian" => Ok(SubordinatorFamily::InverseGaussian),
            "identity" | "bs" => Ok(SubordinatorFamily::Identity),
            other => Err(Error::Invalid(format!("unknown subordinator family `{other}`"))),
        }
    }
}

/// The full switching model. The chain always starts in regime 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchingModel {
    pub regimes: [RegimeParams; 2],
    pub lambda12: f64,
    pub lambda21: f64,
    pub family: SubordinatorFamily,
    pub s0: f64,
    pub r: f64,
}

impl SwitchingModel {
    pub fn new(
        regimes: [RegimeParams; 2],
        lambda12: f64,
        lambda21: f64,
        family: SubordinatorFamily,
        s0: f64,
        r: f64,
    ) -> Result<Self> {
        let m = SwitchingModel {
            regimes,
            lambda12,
            lambda21,
            family,
            s0,
            r,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        for p in &self.regimes {
            p.validate()?;
        }
        for (name, v) in [("lambda12", self.lambda12), ("lambda21", self.lambda21)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    value: v,
                    constraint: "switching intensity must be finite and >= 0",
                });
            }
        }
        ensure_positive("s0", self.s0)?;
        ensure_finite("r", self.r)
    }

    pub fn params(&self, regime: Regime) -> &RegimeParams {
        &self.regimes[regime.index()]
    }

    /// Intensity of leaving `regime`.
    pub fn exit_rate(&self, regime: Regime) -> f64 {
        match regime {
            Regime::One => self.lambda12,
            Regime::Two => self.lambda21,
        }
    }

    /// Single-regime model: both regimes share `params` and never switch.
    pub fn single_regime(params: RegimeParams, family: SubordinatorFamily, s0: f64, r: f64) -> Result<Self> {
        SwitchingModel::new([params, params], 0.0, 0.0, family, s0, r)
    }
}

/// Infinitesimal generator `[[-l12, l12], [l21, -l21]]`.
pub fn generator_matrix(model: &SwitchingModel) -> [[f64; 2]; 2] {
    [[-model.lambda12, model.lambda12], [model.lambda21, -model.lambda21]]
}

/// Mean sojourn (years) for a given exit intensity. Infinite for an absorbing state.
pub fn mean_sojourn(intensity: f64) -> f64 {
    1.0 / intensity
}

pub fn intensity_from_sojourn(mean_sojourn: f64) -> f64 {
    1.0 / mean_sojourn
}

/// A realisation of the chain on `[0, horizon]`.
///
/// `states[0]` is active on `[0, switch_times[0])`, `states[i]` on
/// `[switch_times[i-1], switch_times[i])`, and the last state runs to the
/// horizon. Hence `states.len() == switch_times.len() + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimePath {
    pub horizon: f64,
    pub switch_times: Vec<f64>,
    pub states: Vec<Regime>,
}

impl RegimePath {
    pub fn constant(horizon: f64) -> Self {
        RegimePath {
            horizon,
            switch_times: Vec::new(),
            states: vec![Regime::One],
        }
    }

    /// Builds a path starting in regime 1 with the given switch times.
    pub fn from_switch_times(horizon: f64, switch_times: Vec<f64>) -> Result<Self> {
        let mut prev = 0.0;
        for &t in &switch_times {
            if t <= prev || t > horizon || t.is_nan() {
                return Err(Error::Invalid(format!(
                    "switch times must be strictly increasing in (0, {horizon}]"
                )));
            }
            prev = t;
        }
        let mut states = Vec::with_capacity(switch_times.len() + 1);
        let mut s = Regime::One;
        states.push(s);
        for _ in &switch_times {
            s = s.other();
            states.push(s);
        }
        Ok(RegimePath {
            horizon,
            switch_times,
            states,
        })
    }

    /// Iterates `(start, end, regime)` over the maximal constant segments.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, Regime)> + '_ {
        let n = self.states.len();
        (0..n).map(move |i| {
            let start = if i == 0 { 0.0 } else { self.switch_times[i - 1] };
            let end = if i + 1 == n { self.horizon } else { self.switch_times[i] };
            (start, end, self.states[i])
        })
    }

    pub fn regime_at(&self, t: f64) -> Regime {
        let idx = self.switch_times.partition_point(|&s| s <= t);
        self.states[idx]
    }

    pub fn n_switches(&self) -> usize {
        self.switch_times.len()
    }
}

/// Draws a chain path on `[0, horizon]` by summing exponential holding
/// times whose rates alternate between `lambda12` and `lambda21`.
pub fn simulate_regime_path<R: Rng + ?Sized>(model: &SwitchingModel, horizon: f64, rng: &mut R) -> RegimePath {
    let mut switch_times = Vec::new();
    let mut states = vec![Regime::One];
    let mut t = 0.0;
    let mut current = Regime::One;
    loop {
        let rate = model.exit_rate(current);
        if rate <= 0.0 {
            break;
        }
        let e: f64 = Exp1.sample(rng);
        t += e / rate;
        if t >= horizon {
            break;
        }
        current = current.other();
        switch_times.push(t);
        states.push(current);
    }
    RegimePath {
        horizon,
        switch_times,
        states,
    }
}

/// Fraction of `[0, horizon]` spent in regime 1.
pub fn occupation_fraction(path: &RegimePath, horizon: f64) -> f64 {
    if horizon <= 0.0 {
        return 1.0;
    }
    let in_one: f64 = path
        .segments()
        .filter(|&(_, _, r)| r == Regime::One)
        .map(|(s, e, _)| (e.min(horizon) - s.min(horizon)).max(0.0))
        .sum();
    (in_one / horizon).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(l12: f64, l21: f64) -> SwitchingModel {
        let p = RegimeParams::new(0.0, 0.2, 1.0, 1.0).unwrap();
        SwitchingModel::new([p, p], l12, l21, SubordinatorFamily::Gamma, 1.0, 0.0).unwrap()
    }

    #[test]
    fn generator_examples() {
        assert_eq!(generator_matrix(&model(5.0, 2.0)), [[-5.0, 5.0], [2.0, -2.0]]);
        assert_eq!(generator_matrix(&model(0.0, 0.0)), [[0.0, 0.0], [0.0, 0.0]]);
        let q = generator_matrix(&model(4.0, 4.0));
        assert_eq!(q, [[-4.0, 4.0], [4.0, -4.0]]);
        for row in q {
            assert_eq!(row[0] + row[1], 0.0);
        }
    }

    #[test]
    fn rejects_negative_intensity() {
        let p = RegimeParams::new(0.0, 0.2, 1.0, 1.0).unwrap();
        assert!(SwitchingModel::new([p, p], -1.0, 0.0, SubordinatorFamily::Gamma, 1.0, 0.0).is_err());
        assert!(RegimeParams::new(0.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn absorbing_regime_one_never_switches() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = model(0.0, 3.0);
        for _ in 0..100 {
            let p = simulate_regime_path(&m, 10.0, &mut rng);
            assert_eq!(p.n_switches(), 0);
            assert_eq!(p.states, vec![Regime::One]);
        }
    }

    #[test]
    fn paths_alternate_and_increase() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = model(5.0, 2.0);
        for _ in 0..500 {
            let p = simulate_regime_path(&m, 3.0, &mut rng);
            assert_eq!(p.states[0], Regime::One);
            assert_eq!(p.states.len(), p.switch_times.len() + 1);
            for w in p.states.windows(2) {
                assert_ne!(w[0], w[1]);
            }
            for w in p.switch_times.windows(2) {
                assert!(w[1] > w[0]);
            }
            assert!(p.switch_times.iter().all(|&t| t > 0.0 && t <= 3.0));
        }
    }

    #[test]
    fn occupation_examples() {
        assert_eq!(occupation_fraction(&RegimePath::constant(1.0), 1.0), 1.0);
        let half = RegimePath::from_switch_times(1.0, vec![0.5]).unwrap();
        assert!((occupation_fraction(&half, 1.0) - 0.5).abs() < 1e-15);
        let p = RegimePath::from_switch_times(1.0, vec![0.25, 0.75]).unwrap();
        assert!((occupation_fraction(&p, 1.0) - 0.5).abs() < 1e-15);
    }

    // Discretised chain with step 1e-4: expected number of 1->2 jumps is
    // sum_k P(state 1 at step k) * l12 * dt.
    fn dtmc_expected_12_switches(l12: f64, l21: f64, horizon: f64, dt: f64) -> f64 {
        let steps = (horizon / dt).round() as usize;
        let mut p1 = 1.0;
        let mut expected = 0.0;
        for _ in 0..steps {
            expected += p1 * l12 * dt;
            p1 = p1 * (1.0 - l12 * dt) + (1.0 - p1) * l21 * dt;
        }
        expected
    }

    #[test]
    fn mean_switch_count_matches_discretised_chain() {
        let m = model(5.0, 2.0);
        let oracle = dtmc_expected_12_switches(5.0, 2.0, 1.0, 1e-4);
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 10_000;
        let counts: Vec<f64> = (0..n)
            .map(|_| {
                let p = simulate_regime_path(&m, 1.0, &mut rng);
                p.states.windows(2).filter(|w| w[0] == Regime::One).count() as f64
            })
            .collect();
        let mean = counts.iter().sum::<f64>() / n as f64;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let se = (var / n as f64).sqrt();
        assert!((mean - oracle).abs() < 3.0 * se, "mean {mean} oracle {oracle} se {se}");
    }

    #[test]
    fn symmetric_intensities_split_time_evenly() {
        let m = model(4.0, 4.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 4000;
        let fr: Vec<f64> = (0..n)
            .map(|_| occupation_fraction(&simulate_regime_path(&m, 50.0, &mut rng), 50.0))
            .collect();
        let mean = fr.iter().sum::<f64>() / n as f64;
        let var = fr.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let se = (var / n as f64).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * se + 2.5e-3, "mean {mean} se {se}");
    }

    #[test]
    fn holding_times_have_exponential_means() {
        let m = model(5.0, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut soj = [Vec::new(), Vec::new()];
        while soj[0].len() < 10_000 || soj[1].len() < 10_000 {
            let p = simulate_regime_path(&m, 20.0, &mut rng);
            // drop the final, censored segment
            let segs: Vec<_> = p.segments().collect();
            for &(s, e, r) in &segs[..segs.len() - 1] {
                soj[r.index()].push(e - s);
            }
        }
        for (j, rate) in [(0, 5.0), (1, 2.0)] {
            let v = &soj[j];
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            assert!((mean - 1.0 / rate).abs() < 3.0 * sd / n.sqrt(), "regime {j}: {mean}");
        }
    }
}
