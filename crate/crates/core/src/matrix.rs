//! 2x2 complex matrices and the matrix exponential.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Padé degree (numerator and denominator).
pub const PADE_ORDER: usize = 6;

/// Scaled matrices have infinity norm at most this before the Padé step.
pub const SCALING_THRESHOLD: f64 = 0.5;

/// Row-major 2x2 complex matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexMatrix2(pub [[Complex64; 2]; 2]);

impl ComplexMatrix2 {
    pub const fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Self {
        ComplexMatrix2([[a, b], [c, d]])
    }

    pub fn from_real(m: [[f64; 2]; 2]) -> Self {
        ComplexMatrix2::new(
            Complex64::new(m[0][0], 0.0),
            Complex64::new(m[0][1], 0.0),
            Complex64::new(m[1][0], 0.0),
            Complex64::new(m[1][1], 0.0),
        )
    }

    pub const fn zero() -> Self {
        ComplexMatrix2([[ZERO, ZERO], [ZERO, ZERO]])
    }

    pub const fn identity() -> Self {
        ComplexMatrix2([[ONE, ZERO], [ZERO, ONE]])
    }

    pub fn diag(a: Complex64, d: Complex64) -> Self {
        ComplexMatrix2::new(a, ZERO, ZERO, d)
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.0[i][j]
    }

    pub fn scale(&self, k: Complex64) -> Self {
        let m = &self.0;
        ComplexMatrix2::new(m[0][0] * k, m[0][1] * k, m[1][0] * k, m[1][1] * k)
    }

    pub fn scale_real(&self, k: f64) -> Self {
        self.scale(Complex64::new(k, 0.0))
    }

    pub fn trace(&self) -> Complex64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> Complex64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        self.0
            .iter()
            .map(|row| row[0].norm() + row[1].norm())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn row_sum(&self, i: usize) -> Complex64 {
        self.0[i][0] + self.0[i][1]
    }

    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        if det == ZERO {
            return None;
        }
        let m = &self.0;
        let inv = det.inv();
        Some(ComplexMatrix2::new(
            m[1][1] * inv,
            -m[0][1] * inv,
            -m[1][0] * inv,
            m[0][0] * inv,
        ))
    }
}

impl Add for ComplexMatrix2 {
    type Output = ComplexMatrix2;

    fn add(self, o: Self) -> Self {
        let (a, b) = (self.0, o.0);
        ComplexMatrix2::new(
            a[0][0] + b[0][0],
            a[0][1] + b[0][1],
            a[1][0] + b[1][0],
            a[1][1] + b[1][1],
        )
    }
}

impl Sub for ComplexMatrix2 {
    type Output = ComplexMatrix2;

    fn sub(self, o: Self) -> Self {
        self + o.scale_real(-1.0)
    }
}

impl Mul for ComplexMatrix2 {
    type Output = ComplexMatrix2;

    fn mul(self, o: Self) -> Self {
        let (a, b) = (self.0, o.0);
        ComplexMatrix2::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

/// Coefficients of the diagonal `[m/m]` Padé approximant of `exp(x)`:
/// `c_j = (2m - j)! m! / ((2m)! j! (m - j)!)`. The numerator is
/// `sum c_j x^j`, the denominator `sum c_j (-x)^j`.
fn pade_coefficients() -> [f64; PADE_ORDER + 1] {
    let m = PADE_ORDER;
    let mut c = [0.0; PADE_ORDER + 1];
    c[0] = 1.0;
    // c_{j+1} / c_j = (m - j) / ((2m - j)(j + 1))
    for j in 0..m {
        c[j + 1] = c[j] * (m - j) as f64 / (((2 * m - j) * (j + 1)) as f64);
    }
    c
}

/// `exp(A)` by scaling and squaring: `A` is halved `s` times until its
/// infinity norm is at most [`SCALING_THRESHOLD`], the `[6/6]` Padé
/// approximant is applied, and the result is squared `s` times.
pub fn matrix_exp(a: &ComplexMatrix2) -> ComplexMatrix2 {
    let mut norm = a.inf_norm();
    let mut s = 0u32;
    while norm > SCALING_THRESHOLD && s < 1100 {
        norm *= 0.5;
        s += 1;
    }
    let scaled = a.scale_real(0.5f64.powi(s as i32));

    let c = pade_coefficients();
    let mut num = ComplexMatrix2::identity().scale_real(c[0]);
    let mut den = num;
    let mut power = ComplexMatrix2::identity();
    for (j, &cj) in c.iter().enumerate().skip(1) {
        power = power * scaled;
        let term = power.scale_real(cj);
        num = num + term;
        den = if j % 2 == 0 { den + term } else { den - term };
    }
    // den is within 0.5-norm of the identity after scaling, so it is invertible.
    let mut r = den.inverse().unwrap_or_else(ComplexMatrix2::zero) * num;
    for _ in 0..s {
        r = r * r;
    }
    r
}
