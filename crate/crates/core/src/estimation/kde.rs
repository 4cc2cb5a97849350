//! Gaussian kernel density estimates with Silverman's bandwidth.

use crate::error::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Kernel is treated as zero beyond this many bandwidths.
const KERNEL_CUTOFF: f64 = 8.0;

/// `1.06 * s * n^(-1/5)` with `s` the sample standard deviation.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    if !(var > 0.0) || !var.is_finite() {
        return Err(Error::DegenerateSample(
            "kernel density needs a positive sample variance",
        ));
    }
    Ok(1.06 * var.sqrt() * nf.powf(-0.2))
}

/// Direct evaluation of the density estimate at `x`.
pub fn kde(samples: &[f64], x: f64) -> Result<f64> {
    let h = silverman_bandwidth(samples)?;
    let s: f64 = samples
        .iter()
        .map(|z| {
            let t = (x - z) / h;
            (-0.5 * t * t).exp()
        })
        .sum();
    Ok(s * INV_SQRT_2PI / (samples.len() as f64 * h))
}

/// Density estimate tabulated on a uniform grid.
///
/// Samples are linearly binned, the bin weights are convolved with the
/// kernel, and values between grid points are interpolated linearly.
/// With the grid spacing at `h / 16` the error is far below the
/// statistical error of the estimate itself.
#[derive(Debug, Clone)]
pub struct BinnedKde {
    lo: f64,
    delta: f64,
    values: Vec<f64>,
    bandwidth: f64,
}

impl BinnedKde {
    const POINTS_PER_BANDWIDTH: f64 = 16.0;
    const MAX_GRID: usize = 1 << 20;

    pub fn new(samples: &[f64]) -> Result<Self> {
        let h = silverman_bandwidth(samples)?;
        Self::with_bandwidth(samples, h)
    }

    pub fn with_bandwidth(samples: &[f64], h: f64) -> Result<Self> {
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::DegenerateSample("kernel density samples must be finite"));
        }
        let (min, max) = samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        let lo = min - KERNEL_CUTOFF * h;
        let hi = max + KERNEL_CUTOFF * h;
        let mut delta = h / Self::POINTS_PER_BANDWIDTH;
        if (hi - lo) / delta > Self::MAX_GRID as f64 {
            delta = (hi - lo) / Self::MAX_GRID as f64;
        }
        let m = ((hi - lo) / delta).ceil() as usize + 2;

        let mut bins = vec![0.0; m];
        for &x in samples {
            let pos = (x - lo) / delta;
            let i = pos.floor() as usize;
            let frac = pos - i as f64;
            bins[i] += 1.0 - frac;
            bins[i + 1] += frac;
        }

        let taps = (KERNEL_CUTOFF * h / delta).ceil() as usize;
        let kernel: Vec<f64> = (0..=taps)
            .map(|j| {
                let t = j as f64 * delta / h;
                (-0.5 * t * t).exp()
            })
            .collect();
        let norm = INV_SQRT_2PI / (samples.len() as f64 * h);
        let occupied: Vec<usize> = (0..m).filter(|&i| bins[i] != 0.0).collect();
        let mut values = vec![0.0; m];
        for &k in &occupied {
            let w = bins[k] * norm;
            let start = k.saturating_sub(taps);
            let end = (k + taps).min(m - 1);
            for (i, v) in values.iter_mut().enumerate().take(end + 1).skip(start) {
                *v += w * kernel[i.abs_diff(k)];
            }
        }
        Ok(BinnedKde {
            lo,
            delta,
            values,
            bandwidth: h,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn eval(&self, x: f64) -> f64 {
        let pos = (x - self.lo) / self.delta;
        if !(pos >= 0.0) {
            return 0.0;
        }
        let i = pos.floor() as usize;
        if i + 1 >= self.values.len() {
            return 0.0;
        }
        let frac = pos - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }
}

/// Normal density, for test oracles.
#[cfg(test)]
pub(crate) fn normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let t = (x - mean) / sd;
    (-0.5 * t * t).exp() * INV_SQRT_2PI / sd
}
