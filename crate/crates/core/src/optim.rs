//! Box-constrained local optimisers.
//!
//! * [`levenberg_marquardt`] for square or overdetermined nonlinear systems,
//!   with Marquardt diagonal scaling and projection onto the box.
//! * [`projected_bfgs`] for smooth scalar objectives, with an active set
//!   for variables pinned at a bound and a projected Armijo search.
//!
//! Both use finite-difference derivatives. A failed evaluation at a trial
//! point is treated as an infinitely bad value; at the starting point it
//! is returned as an error.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BoxBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::Invalid("bounds must satisfy lower <= upper elementwise".into()));
        }
        Ok(BoxBounds { lower, upper })
    }

    pub fn unbounded(n: usize) -> Self {
        BoxBounds {
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn project(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .enumerate()
            .all(|(i, v)| self.lower[i] <= *v && *v <= self.upper[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Objective or residual below the absolute tolerance.
    Tolerance,
    /// Step shorter than the step tolerance.
    StepTolerance,
    /// Projected gradient vanished.
    Stationary,
    MaxIterations,
}

impl StopReason {
    pub fn converged(self) -> bool {
        self != StopReason::MaxIterations
    }

    pub fn describe(self) -> &'static str {
        match self {
            StopReason::Tolerance => "objective tolerance reached",
            StopReason::StepTolerance => "step tolerance reached",
            StopReason::Stationary => "projected gradient vanished",
            StopReason::MaxIterations => "iteration limit reached",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimReport {
    pub x: Vec<f64>,
    /// Objective value, or the residual norm for least squares.
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub reason: StopReason,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimOptions {
    pub max_iters: usize,
    /// Absolute tolerance on the objective (least squares: residual norm).
    pub f_tol: f64,
    /// Stop when `|dx|_inf` falls below this, relative to `max(|x|_inf, 1)`.
    pub step_tol: f64,
    pub grad_tol: f64,
    /// Relative finite-difference step.
    pub fd_step: f64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        OptimOptions {
            max_iters: 500,
            f_tol: 0.0,
            step_tol: 1e-10,
            grad_tol: 1e-10,
            fd_step: 1e-7,
        }
    }
}

fn fd_width(x: f64, rel: f64) -> f64 {
    rel * x.abs().max(1e-3)
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Minimises `|r(x)|^2` over the box.
pub fn levenberg_marquardt<F>(residual: F, x0: &[f64], bounds: &BoxBounds, opts: &OptimOptions) -> Result<OptimReport>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    bounds.project(&mut x);
    let mut evals = 1;
    let mut r = residual(&x)?;
    let mut cost = sum_sq(&r);
    if !cost.is_finite() {
        return Err(Error::Invalid("residual is not finite at the starting point".into()));
    }
    let m = r.len();
    let mut lambda = 1e-3;
    let mut reason = StopReason::MaxIterations;
    let mut iter = 0;

    while iter < opts.max_iters {
        iter += 1;
        if cost.sqrt() <= opts.f_tol {
            reason = StopReason::Tolerance;
            break;
        }
        // one-sided differences pointing into the box
        let mut jac = DMatrix::<f64>::zeros(m, n);
        for j in 0..n {
            let mut h = fd_width(x[j], opts.fd_step);
            if x[j] + h > bounds.upper[j] {
                h = -h;
            }
            let mut xp = x.clone();
            xp[j] += h;
            let rp = residual(&xp)?;
            evals += 1;
            for i in 0..m {
                jac[(i, j)] = (rp[i] - r[i]) / h;
            }
        }
        let rv = DVector::from_column_slice(&r);
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &rv;
        if inf_norm(g.as_slice()) <= opts.grad_tol * cost {
            reason = StopReason::Stationary;
            break;
        }

        let mut accepted = false;
        for _ in 0..40 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
            }
            let Some(delta) = a.lu().solve(&(-&g)) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
            bounds.project(&mut trial);
            let step: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            let step_norm = inf_norm(&step);
            if step_norm <= opts.step_tol * inf_norm(&x).max(1.0) {
                reason = StopReason::StepTolerance;
                break;
            }
            let rt = residual(&trial);
            evals += 1;
            let ct = rt.as_ref().map(|r| sum_sq(r)).unwrap_or(f64::INFINITY);
            if ct.is_finite() && ct < cost {
                x = trial;
                r = rt?;
                cost = ct;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            if reason == StopReason::MaxIterations {
                reason = StopReason::StepTolerance;
            }
            break;
        }
    }
    if reason == StopReason::MaxIterations && cost.sqrt() <= opts.f_tol {
        reason = StopReason::Tolerance;
    }
    Ok(OptimReport {
        x,
        value: cost.sqrt(),
        iterations: iter,
        evaluations: evals,
        reason,
    })
}

/// Central-difference gradient, one-sided at active bounds.
pub fn numerical_gradient<F>(f: &F, x: &[f64], fx: f64, bounds: &BoxBounds, rel: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for j in 0..x.len() {
        let h = fd_width(x[j], rel);
        let up = x[j] + h <= bounds.upper[j];
        let down = x[j] - h >= bounds.lower[j];
        g[j] = match (up, down) {
            (true, true) => {
                xp[j] = x[j] + h;
                let fp = f(&xp)?;
                xp[j] = x[j] - h;
                let fm = f(&xp)?;
                (fp - fm) / (2.0 * h)
            }
            (true, false) => {
                xp[j] = x[j] + h;
                (f(&xp)? - fx) / h
            }
            (false, true) => {
                xp[j] = x[j] - h;
                (fx - f(&xp)?) / h
            }
            (false, false) => 0.0,
        };
        xp[j] = x[j];
    }
    Ok(g)
}

/// Variables at a bound whose gradient pushes outward are held fixed.
fn free_mask(x: &[f64], g: &[f64], bounds: &BoxBounds) -> Vec<bool> {
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            let at_lo = v <= bounds.lower[i] && g[i] > 0.0;
            let at_hi = v >= bounds.upper[i] && g[i] < 0.0;
            !(at_lo || at_hi)
        })
        .collect()
}

fn projected_gradient_norm(x: &[f64], g: &[f64], bounds: &BoxBounds) -> f64 {
    let mut p: Vec<f64> = x.iter().zip(g).map(|(x, g)| x - g).collect();
    bounds.project(&mut p);
    p.iter().zip(x).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
}

/// Quasi-Newton minimisation of `f` over the box.
///
/// `scale` gives the typical magnitude of each variable; the search runs
/// in `x / scale` so that badly scaled parameters share one step length.
pub fn projected_bfgs<F>(
    f: F,
    x0: &[f64],
    scale: &[f64],
    bounds: &BoxBounds,
    opts: &OptimOptions,
) -> Result<OptimReport>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let n = x0.len();
    let sc: Vec<f64> = scale.iter().map(|s| s.abs().max(1e-12)).collect();
    let to_x = |y: &[f64]| -> Vec<f64> { y.iter().zip(&sc).map(|(y, s)| y * s).collect() };
    let sb = BoxBounds {
        lower: bounds.lower.iter().zip(&sc).map(|(l, s)| l / s).collect(),
        upper: bounds.upper.iter().zip(&sc).map(|(u, s)| u / s).collect(),
    };
    let evals = std::cell::Cell::new(0usize);
    let fy = |y: &[f64]| -> Result<f64> {
        evals.set(evals.get() + 1);
        f(&to_x(y))
    };
    // trial points that fail to evaluate count as +inf
    let fy_soft = |y: &[f64]| fy(y).ok().filter(|v| v.is_finite()).unwrap_or(f64::INFINITY);

    let mut y: Vec<f64> = x0.iter().zip(&sc).map(|(x, s)| x / s).collect();
    sb.project(&mut y);
    let mut fval = fy(&y)?;
    if !fval.is_finite() {
        return Err(Error::Invalid("objective is not finite at the starting point".into()));
    }
    let rel = opts.fd_step.max(1e-8);
    let mut g = numerical_gradient(&fy, &y, fval, &sb, rel)?;
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut reason = StopReason::MaxIterations;
    let mut iter = 0;

    while iter < opts.max_iters {
        iter += 1;
        if fval <= opts.f_tol {
            reason = StopReason::Tolerance;
            break;
        }
        if projected_gradient_norm(&y, &g, &sb) <= opts.grad_tol {
            reason = StopReason::Stationary;
            break;
        }
        let free = free_mask(&y, &g, &sb);
        let gv = DVector::from_iterator(n, g.iter().zip(&free).map(|(g, f)| if *f { *g } else { 0.0 }));
        let mut d = -(&h * &gv);
        for i in 0..n {
            if !free[i] {
                d[i] = 0.0;
            }
        }
        let mut slope = d.dot(&gv);
        if !(slope < 0.0) {
            h = DMatrix::identity(n, n);
            d = -gv.clone();
            slope = d.dot(&gv);
        }

        let mut t = 1.0;
        let mut next = None;
        for _ in 0..60 {
            let mut trial: Vec<f64> = y.iter().zip(d.iter()).map(|(a, b)| a + t * b).collect();
            sb.project(&mut trial);
            let ft = fy_soft(&trial);
            let moved: f64 = trial.iter().zip(&y).zip(&g).map(|((a, b), g)| (a - b) * g).sum();
            if ft < fval && ft <= fval + 1e-4 * moved {
                next = Some((trial, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((y_new, f_new)) = next else {
            if h != DMatrix::identity(n, n) {
                // retry once along the scaled steepest descent
                h = DMatrix::identity(n, n);
                continue;
            }
            reason = StopReason::StepTolerance;
            break;
        };

        let s: Vec<f64> = y_new.iter().zip(&y).map(|(a, b)| a - b).collect();
        let step = inf_norm(&s);
        let g_new = numerical_gradient(&fy, &y_new, f_new, &sb, rel)?;
        let sv = DVector::from_column_slice(&s);
        let yv = DVector::from_iterator(n, g_new.iter().zip(&g).map(|(a, b)| a - b));
        let sy = sv.dot(&yv);
        if sy > 1e-12 * sv.norm() * yv.norm() {
            let rho = 1.0 / sy;
            let i = DMatrix::<f64>::identity(n, n);
            let left = &i - rho * &sv * yv.transpose();
            let right = &i - rho * &yv * sv.transpose();
            h = &left * &h * &right + rho * &sv * sv.transpose();
        }
        let df = fval - f_new;
        y = y_new;
        g = g_new;
        fval = f_new;
        if step <= opts.step_tol * inf_norm(&y).max(1.0) || df <= 1e-15 * fval.abs().max(1e-300) {
            reason = StopReason::StepTolerance;
            break;
        }
    }
    Ok(OptimReport {
        x: to_x(&y),
        value: fval,
        iterations: iter,
        evaluations: evals.get(),
        reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bfgs_rosenbrock() {
        let f = |x: &[f64]| Ok((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2));
        let b = BoxBounds::unbounded(2);
        let r = projected_bfgs(f, &[-1.2, 1.0], &[1.0, 1.0], &b, &OptimOptions::default()).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{r:?}");
    }

    #[test]
    fn bfgs_respects_bounds() {
        // unconstrained minimum at (3, -2)
        let f = |x: &[f64]| Ok((x[0] - 3.0).powi(2) + (x[1] + 2.0).powi(2) + 0.5 * x[0] * x[1]);
        let b = BoxBounds::new(vec![0.0, 0.0], vec![2.0, 5.0]).unwrap();
        let r = projected_bfgs(f, &[1.0, 1.0], &[1.0, 1.0], &b, &OptimOptions::default()).unwrap();
        assert!((r.x[0] - 2.0).abs() < 1e-8 && r.x[1].abs() < 1e-8, "{r:?}");
        assert!(b.contains(&r.x));
    }

    #[test]
    fn bfgs_handles_bad_scaling() {
        let f = |x: &[f64]| Ok(((x[0] - 1e-3) / 1e-3).powi(2) + ((x[1] - 50.0) / 50.0).powi(2));
        let b = BoxBounds::new(vec![1e-6, 1e-6], vec![1.0, 100.0]).unwrap();
        let r = projected_bfgs(f, &[5e-4, 20.0], &[5e-4, 20.0], &b, &OptimOptions::default()).unwrap();
        assert!((r.x[0] - 1e-3).abs() < 1e-8 && (r.x[1] - 50.0).abs() < 1e-4, "{r:?}");
    }

    #[test]
    fn lm_solves_nonlinear_system() {
        // x^2 + y^2 = 4, x y = 1 with x, y > 0 and x > y
        let res = |x: &[f64]| Ok(vec![x[0] * x[0] + x[1] * x[1] - 4.0, x[0] * x[1] - 1.0]);
        let b = BoxBounds::new(vec![0.0, 0.0], vec![10.0, 10.0]).unwrap();
        let opts = OptimOptions {
            f_tol: 1e-12,
            ..Default::default()
        };
        let r = levenberg_marquardt(res, &[2.0, 0.3], &b, &opts).unwrap();
        let x = (6.0f64.sqrt() + 2.0f64.sqrt()) / 2.0;
        assert!((r.x[0] - x).abs() < 1e-9 && (r.x[1] - 1.0 / x).abs() < 1e-9, "{r:?}");
        assert!(r.reason.converged() && r.value < 1e-9, "{r:?}");
    }

    #[test]
    fn lm_projects_onto_box() {
        let res = |x: &[f64]| Ok(vec![x[0] - 5.0, x[1] - 0.5]);
        let b = BoxBounds::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let r = levenberg_marquardt(res, &[0.5, 0.9], &b, &OptimOptions::default()).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-12 && (r.x[1] - 0.5).abs() < 1e-8, "{r:?}");
    }

    #[test]
    fn invalid_bounds_rejected() {
        assert!(BoxBounds::new(vec![1.0], vec![0.0]).is_err());
    }
}
