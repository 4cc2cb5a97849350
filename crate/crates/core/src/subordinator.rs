//! Gamma and inverse Gaussian subordinators.
//!
//! Both are parameterised by shape `alpha` and rate `beta` so that
//! `E[L_t] = alpha t / beta`. The Laplace exponent `l(s)` satisfies
//! `E[exp(s L_t)] = exp(t l(s))`:
//!
//! * Gamma: `l(s) = -alpha log(1 - s/beta)`, variance rate `alpha / beta^2`
//! * inverse Gaussian: `l(s) = -alpha (sqrt(beta^2 - 2s) - beta)`, variance rate `alpha / beta^3`
//! * identity: `l(s) = s`

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{ensure_positive, Error, Result};
use crate::regime::{RegimeParams, SubordinatorFamily};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubordinatorSpec {
    pub family: SubordinatorFamily,
    pub alpha: f64,
    pub beta: f64,
}

impl SubordinatorSpec {
    pub fn new(family: SubordinatorFamily, alpha: f64, beta: f64) -> Result<Self> {
        ensure_positive("alpha", alpha)?;
        ensure_positive("beta", beta)?;
        Ok(SubordinatorSpec { family, alpha, beta })
    }

    pub fn of(family: SubordinatorFamily, params: &RegimeParams) -> Self {
        SubordinatorSpec {
            family,
            alpha: params.alpha,
            beta: params.beta,
        }
    }

    pub fn laplace_exponent(&self, s: Complex64) -> Result<Complex64> {
        let (a, b) = (self.alpha, self.beta);
        match self.family {
            SubordinatorFamily::Identity => Ok(s),
            SubordinatorFamily::Gamma => {
                let z = Complex64::new(1.0, 0.0) - s / b;
                if !(z.re > 0.0) {
                    return Err(Error::BranchCut {
                        family: "gamma",
                        arg: s,
                    });
                }
                Ok(-a * z.ln())
            }
            SubordinatorFamily::InverseGaussian => {
                let z = Complex64::new(b * b, 0.0) - 2.0 * s;
                if !(z.re >= 0.0) {
                    return Err(Error::BranchCut {
                        family: "inverse gaussian",
                        arg: s,
                    });
                }
                Ok(-a * (z.sqrt() - b))
            }
        }
    }

    /// `l^(n)(0)` for n = 1..=4, i.e. the cumulants of `L_1`.
    pub fn derivatives_at_zero(&self) -> [f64; 4] {
        let (a, b) = (self.alpha, self.beta);
        match self.family {
            SubordinatorFamily::Identity => [1.0, 0.0, 0.0, 0.0],
            SubordinatorFamily::Gamma => [a / b, a / b.powi(2), 2.0 * a / b.powi(3), 6.0 * a / b.powi(4)],
            SubordinatorFamily::InverseGaussian => [a / b, a / b.powi(3), 3.0 * a / b.powi(5), 15.0 * a / b.powi(7)],
        }
    }

    pub fn mean_rate(&self) -> f64 {
        self.derivatives_at_zero()[0]
    }

    pub fn variance_rate(&self) -> f64 {
        self.derivatives_at_zero()[1]
    }

    /// Draws `L_{t+dt} - L_t`.
    pub fn sample_increment<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> f64 {
        match self.family {
            SubordinatorFamily::Identity => dt,
            SubordinatorFamily::Gamma => {
                let shape = self.alpha * dt;
                // Parameters were validated on construction.
                Gamma::new(shape, 1.0 / self.beta).map(|g| g.sample(rng)).unwrap_or(0.0)
            }
            SubordinatorFamily::InverseGaussian => {
                let mean = self.alpha * dt / self.beta;
                let shape = (self.alpha * dt).powi(2);
                sample_inverse_gaussian(mean, shape, rng)
            }
        }
    }
}

/// Michael-Schucany-Haas transformation, written through the product of
/// the two quadratic roots so that tiny shapes do not cancel to zero.
pub fn sample_inverse_gaussian<R: Rng + ?Sized>(mean: f64, shape: f64, rng: &mut R) -> f64 {
    let nu: f64 = rng.sample(StandardNormal);
    let u: f64 = rng.random();
    inverse_gaussian_from_uniforms(mean, shape, nu, u)
}

pub(crate) fn inverse_gaussian_from_uniforms(mean: f64, shape: f64, nu: f64, u: f64) -> f64 {
    let phi = mean * nu * nu / (2.0 * shape);
    // g = x_large / mean = mean / x_small
    let g = 1.0 + phi + (phi * (phi + 2.0)).sqrt();
    if u * (g + 1.0) <= g {
        mean / g
    } else {
        mean * g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(f: SubordinatorFamily, a: f64, b: f64) -> SubordinatorSpec {
        SubordinatorSpec::new(f, a, b).unwrap()
    }

    const FAMILIES: [SubordinatorFamily; 3] = [
        SubordinatorFamily::Gamma,
        SubordinatorFamily::InverseGaussian,
        SubordinatorFamily::Identity,
    ];

    struct Moments {
        mean: f64,
        var: f64,
        se_mean: f64,
        se_var: f64,
    }

    fn moments(x: &[f64]) -> Moments {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let m4 = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
        Moments {
            mean,
            var: m2 * n / (n - 1.0),
            se_mean: (m2 / n).sqrt(),
            se_var: ((m4 - m2 * m2) / n).sqrt(),
        }
    }

    #[test]
    fn exponent_vanishes_at_zero() {
        for f in FAMILIES {
            let l = spec(f, 0.7, 2.3).laplace_exponent(Complex64::new(0.0, 0.0)).unwrap();
            assert_eq!(l, Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn branch_cut_is_reported() {
        let g = spec(SubordinatorFamily::Gamma, 1.0, 2.0);
        assert!(matches!(
            g.laplace_exponent(Complex64::new(2.5, 0.0)),
            Err(Error::BranchCut { .. })
        ));
        let ig = spec(SubordinatorFamily::InverseGaussian, 1.0, 2.0);
        assert!(ig.laplace_exponent(Complex64::new(2.0, 0.0)).is_ok());
        assert!(ig.laplace_exponent(Complex64::new(2.1, 0.3)).is_err());
    }

    #[test]
    fn identity_increment_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            spec(SubordinatorFamily::Identity, 1.0, 1.0).sample_increment(0.5, &mut rng),
            0.5
        );
    }

    #[test]
    fn ig_mean_rate_by_finite_differences() {
        let s = spec(SubordinatorFamily::InverseGaussian, 0.1, 10.0);
        let h = 1e-5;
        let d = (s.laplace_exponent(Complex64::new(h, 0.0)).unwrap()
            - s.laplace_exponent(Complex64::new(-h, 0.0)).unwrap())
        .re / (2.0 * h);
        assert!((d - 0.01).abs() < 1e-6, "{d}");
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        for f in [SubordinatorFamily::Gamma, SubordinatorFamily::InverseGaussian] {
            let s = spec(f, 0.8, 1.7);
            let l = |x: f64| s.laplace_exponent(Complex64::new(x, 0.0)).unwrap().re;
            let h = 1e-3;
            let d1 = (l(h) - l(-h)) / (2.0 * h);
            let d2 = (l(h) - 2.0 * l(0.0) + l(-h)) / (h * h);
            let d = s.derivatives_at_zero();
            assert!((d1 - d[0]).abs() < 1e-5 * d[0].abs().max(1.0));
            assert!((d2 - d[1]).abs() < 1e-4 * d[1].abs().max(1.0));
        }
    }

    #[test]
    fn gamma_mgf_matches_monte_carlo() {
        let g = spec(SubordinatorFamily::Gamma, 0.1, 0.1);
        let s = 0.03;
        let exact = g.laplace_exponent(Complex64::new(s, 0.0)).unwrap().re.exp();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let draws: Vec<f64> = (0..1_000_000)
            .map(|_| (s * g.sample_increment(1.0, &mut rng)).exp())
            .collect();
        let m = moments(&draws);
        assert!((m.mean - exact).abs() < 3.0 * m.se_mean, "{} vs {exact}", m.mean);
    }

    #[test]
    fn gamma_sample_mean() {
        let g = spec(SubordinatorFamily::Gamma, 0.1, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let draws: Vec<f64> = (0..1_000_000).map(|_| g.sample_increment(1.0, &mut rng)).collect();
        let m = moments(&draws);
        assert!(draws.iter().all(|&x| x >= 0.0));
        assert!((m.mean - 1.0).abs() < 3.0 * m.se_mean, "{}", m.mean);
    }

    #[test]
    fn ig_sample_variance() {
        let ig = spec(SubordinatorFamily::InverseGaussian, 0.1, 0.1);
        // Second derivative of l at 0, numerically, cross-checks alpha / beta^3.
        let l = |x: f64| ig.laplace_exponent(Complex64::new(x, 0.0)).unwrap().re;
        let h = 1e-6;
        let d2 = (l(h) - 2.0 * l(0.0) + l(-h)) / (h * h);
        assert!((d2 - 100.0).abs() < 1e-2, "{d2}");

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let draws: Vec<f64> = (0..1_000_000).map(|_| ig.sample_increment(1.0, &mut rng)).collect();
        assert!(draws.iter().all(|&x| x > 0.0));
        let m = moments(&draws);
        assert!((m.var - 100.0).abs() < 3.0 * m.se_var, "var {} se {}", m.var, m.se_var);
    }

    #[test]
    fn daily_cumulants_match_samples() {
        // Small shapes are the common case at daily steps.
        let dt = 1.0 / 250.0;
        for (f, seed) in [
            (SubordinatorFamily::Gamma, 3u64),
            (SubordinatorFamily::InverseGaussian, 4),
        ] {
            let s = spec(f, 2.0, 5.0);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let draws: Vec<f64> = (0..1_000_000).map(|_| s.sample_increment(dt, &mut rng)).collect();
            let m = moments(&draws);
            let d = s.derivatives_at_zero();
            assert!((m.mean - d[0] * dt).abs() < 3.0 * m.se_mean, "{f:?} mean {}", m.mean);
            assert!((m.var - d[1] * dt).abs() < 3.0 * m.se_var, "{f:?} var {}", m.var);
        }
    }

    #[test]
    fn ig_variance_exceeds_gamma_below_unit_rate() {
        for beta in [0.01, 0.1, 0.5, 0.99, 1.01, 2.0, 10.0] {
            let g = spec(SubordinatorFamily::Gamma, 0.1, beta).variance_rate();
            let ig = spec(SubordinatorFamily::InverseGaussian, 0.1, beta).variance_rate();
            assert_eq!(ig > g, beta < 1.0, "beta {beta}");
        }
    }

    #[test]
    fn stable_ig_transform_keeps_tiny_shapes_positive() {
        // mean 1.6e-5, shape 6.4e-9: the textbook formula cancels to zero here
        let x = inverse_gaussian_from_uniforms(1.6e-5, 6.4e-9, 4.0, 0.1);
        assert!(x > 0.0 && x < 1.6e-5);
    }
}
