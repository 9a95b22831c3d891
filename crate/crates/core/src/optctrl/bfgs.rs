//! BFGS with Armijo backtracking and central-difference gradients.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::error::Error;

type Vector = DVector<f64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsOptions {
    /// Stop when the gradient norm falls below this.
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Central-difference step.
    pub fd_step: f64,
    /// Length of the first trial step.
    pub first_step: f64,
    /// Iterations taken before the gradient test applies, e.g. to move off a
    /// saddle where the gradient is tiny but nonzero.
    pub min_iter: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions {
            grad_tol: 1e-6,
            max_iter: 2000,
            fd_step: 1e-6,
            first_step: 1.0,
            min_iter: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsResult {
    pub x: Vector,
    pub f: f64,
    pub grad: Vector,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

pub fn fd_gradient<F: Fn(&Vector) -> f64>(f: &F, x: &Vector, step: f64) -> Vector {
    let mut g = Vector::zeros(x.len());
    let mut xp = x.clone();
    for i in 0..x.len() {
        let xi = x[i];
        xp[i] = xi + step;
        let fp = f(&xp);
        xp[i] = xi - step;
        let fm = f(&xp);
        xp[i] = xi;
        g[i] = (fp - fm) / (2.0 * step);
    }
    g
}

/// Minimizes `f` from `x0`. Returns the last iterate even when the iteration
/// budget runs out (`converged == false`); non-finite objective values abort.
pub fn minimize<F: Fn(&Vector) -> f64>(f: F, x0: Vector, opts: &BfgsOptions) -> Result<BfgsResult> {
    let n = x0.len();
    let mut x = x0;
    let mut fx = f(&x);
    if !fx.is_finite() {
        return Err(Error::InvalidInput("objective is not finite at the initial point".into()));
    }
    let mut evals = 1;
    let mut g = fd_gradient(&f, &x, opts.fd_step);
    evals += 2 * n;
    let mut hinv = DMatrix::<f64>::identity(n, n);
    let mut scaled = false;
    for it in 0..opts.max_iter {
        let gn = g.norm();
        if gn == 0.0 {
            return Ok(BfgsResult { x, f: fx, grad: g, iterations: it, evaluations: evals, converged: true });
        }
        if gn <= opts.grad_tol && it >= opts.min_iter {
            return Ok(BfgsResult { x, f: fx, grad: g, iterations: it, evaluations: evals, converged: true });
        }
        let mut d = -(&hinv * &g);
        let mut slope = g.dot(&d);
        if slope >= 0.0 {
            hinv.fill_with_identity();
            scaled = false;
            d = -g.clone();
            slope = -gn * gn;
        }
        let mut alpha = if scaled { 1.0 } else { opts.first_step / d.norm() };
        let mut accepted = None;
        while alpha * d.norm() > 1e-16 * (1.0 + x.norm()) {
            let xc = &x + &d * alpha;
            let fc = f(&xc);
            evals += 1;
            if fc.is_finite() && fc <= fx + 1e-4 * alpha * slope {
                accepted = Some((xc, fc));
                break;
            }
            alpha *= 0.5;
        }
        let Some((xn, fn_)) = accepted else {
            return Ok(BfgsResult { x, f: fx, grad: g, iterations: it, evaluations: evals, converged: false });
        };
        let gn_ = fd_gradient(&f, &xn, opts.fd_step);
        evals += 2 * n;
        let s = &xn - &x;
        let y = &gn_ - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if !scaled {
                hinv = DMatrix::identity(n, n) * (sy / y.norm_squared());
                scaled = true;
            }
            let rho = 1.0 / sy;
            let hy = &hinv * &y;
            let yhy = y.dot(&hy);
            // H ← (I - ρsyᵀ) H (I - ρysᵀ) + ρssᵀ
            hinv += (&s * s.transpose()) * (rho * rho * yhy + rho) - (&hy * s.transpose() + &s * hy.transpose()) * rho;
        }
        x = xn;
        fx = fn_;
        g = gn_;
    }
    let converged = g.norm() <= opts.grad_tol;
    Ok(BfgsResult { x, f: fx, grad: g, iterations: opts.max_iter, evaluations: evals, converged })
}
