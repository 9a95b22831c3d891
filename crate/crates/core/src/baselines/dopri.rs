//! Dormand-Prince 5(4) with Hairer's continuous extension.

use nalgebra::DVector;

use crate::error::{Error, Result};

type Vector = DVector<f64>;

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order solution minus embedded fourth-order solution.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Initial value problem `ẏ = f(t, y)`, `y(t0) = y0`, on `[t0, tf]`.
pub struct OdeProblem<F> {
    pub f: F,
    pub y0: Vector,
    pub t0: f64,
    pub tf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rk45Options {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; chosen automatically when `None`.
    pub h0: Option<f64>,
    pub max_steps: usize,
}

impl Default for Rk45Options {
    fn default() -> Self {
        Rk45Options {
            rtol: 1e-3,
            atol: 1e-6,
            h0: None,
            max_steps: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub y: Vec<Vector>,
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

fn stages<F>(f: &F, t: f64, y: &Vector, k1: Vector, h: f64) -> ([Vector; 7], Vector)
where
    F: Fn(f64, &Vector) -> Vector,
{
    let mut k: [Vector; 7] = std::array::from_fn(|_| Vector::zeros(0));
    k[0] = k1;
    let mut y1 = y.clone();
    for s in 1..7 {
        let mut ys = y.clone();
        for (j, kj) in k.iter().enumerate().take(s) {
            if A[s][j] != 0.0 {
                ys.axpy(h * A[s][j], kj, 1.0);
            }
        }
        k[s] = f(t + C[s] * h, &ys);
        if s == 6 {
            y1 = ys;
        }
    }
    (k, y1)
}

/// Scaled RMS norm with weights `atol + rtol·max(|a|, |b|)`.
fn err_norm(e: &Vector, a: &Vector, b: &Vector, rtol: f64, atol: f64) -> f64 {
    let n = e.len().max(1) as f64;
    let s: f64 = e
        .iter()
        .zip(a.iter().zip(b.iter()))
        .map(|(ei, (ai, bi))| {
            let sk = atol + rtol * ai.abs().max(bi.abs());
            (ei / sk).powi(2)
        })
        .sum();
    (s / n).sqrt()
}

fn initial_step<F>(f: &F, t0: f64, y0: &Vector, f0: &Vector, span: f64, opts: &Rk45Options) -> f64
where
    F: Fn(f64, &Vector) -> Vector,
{
    let zero = Vector::zeros(y0.len());
    let d0 = err_norm(y0, y0, &zero, opts.rtol, opts.atol);
    let d1 = err_norm(f0, y0, &zero, opts.rtol, opts.atol);
    let h0 = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let y1 = y0 + f0 * h0;
    let f1 = f(t0 + h0, &y1);
    let d2 = err_norm(&(f1 - f0), y0, &zero, opts.rtol, opts.atol) / h0;
    let dm = d1.max(d2);
    let h1 = if dm <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / dm).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span)
}

/// Adaptive Dormand-Prince integration. The solution is reported at each of
/// `samples` (ascending, inside `[t0, tf]`) via dense output, or at every
/// accepted step when `samples` is empty.
pub fn rk45_integrate<F>(prob: &OdeProblem<F>, samples: &[f64], opts: &Rk45Options) -> Result<Trajectory>
where
    F: Fn(f64, &Vector) -> Vector,
{
    if !(opts.rtol > 0.0 && opts.atol > 0.0) {
        return Err(Error::InvalidInput("rtol and atol must be positive".into()));
    }
    let span = prob.tf - prob.t0;
    if span.is_nan() || span <= 0.0 {
        return Err(Error::InvalidInput("integration span must be positive".into()));
    }
    let f = &prob.f;
    let mut out = Trajectory {
        t: Vec::with_capacity(samples.len()),
        y: Vec::with_capacity(samples.len()),
        accepted: 0,
        rejected: 0,
        evaluations: 0,
    };
    let mut t = prob.t0;
    let mut y = prob.y0.clone();
    let mut k1 = f(t, &y);
    out.evaluations += 1;
    let mut next = 0;
    while next < samples.len() && samples[next] <= t {
        out.t.push(samples[next]);
        out.y.push(y.clone());
        next += 1;
    }
    if samples.is_empty() {
        out.t.push(t);
        out.y.push(y.clone());
    }
    let mut h = match opts.h0 {
        Some(h) => h.min(span),
        None => {
            out.evaluations += 1;
            initial_step(f, t, &y, &k1, span, opts)
        }
    };
    let h_min = 1e-14 * span;
    let mut last_rejected = false;
    while t < prob.tf {
        if out.accepted + out.rejected >= opts.max_steps {
            return Err(Error::MaxIterations(opts.max_steps));
        }
        if h < h_min {
            return Err(Error::StepUnderflow { t, h });
        }
        let last = t + h >= prob.tf;
        if last {
            h = prob.tf - t;
        }
        let (k, y1) = stages(f, t, &y, k1.clone(), h);
        out.evaluations += 6;
        let mut e = Vector::zeros(y.len());
        for (s, ks) in k.iter().enumerate() {
            if E[s] != 0.0 {
                e.axpy(h * E[s], ks, 1.0);
            }
        }
        let err = err_norm(&e, &y, &y1, opts.rtol, opts.atol);
        if err <= 1.0 {
            let t1 = if last { prob.tf } else { t + h };
            // dense output coefficients
            let ydiff = &y1 - &y;
            let bspl = &k[0] * h - &ydiff;
            let r4 = &ydiff - &k[6] * h - &bspl;
            let mut r5 = Vector::zeros(y.len());
            for (s, ks) in k.iter().enumerate() {
                if D[s] != 0.0 {
                    r5.axpy(h * D[s], ks, 1.0);
                }
            }
            while next < samples.len() && samples[next] <= t1 {
                let th = (samples[next] - t) / h;
                let th1 = 1.0 - th;
                let ys = &y + (&ydiff + (&bspl + (&r4 + &r5 * th1) * th) * th1) * th;
                out.t.push(samples[next]);
                out.y.push(ys);
                next += 1;
            }
            t = t1;
            y = y1;
            k1 = k[6].clone();
            out.accepted += 1;
            if samples.is_empty() {
                out.t.push(t);
                out.y.push(y.clone());
            }
            let mut fac = (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            h *= fac;
            last_rejected = false;
        } else {
            out.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).max(0.2);
            last_rejected = true;
        }
    }
    Ok(out)
}

/// `n` fixed steps of the fifth-order Dormand-Prince formula.
pub fn rk45_fixed<F>(f: F, t0: f64, y0: &Vector, h: f64, n: usize) -> Vector
where
    F: Fn(f64, &Vector) -> Vector,
{
    let mut y = y0.clone();
    let mut t = t0;
    for _ in 0..n {
        let k1 = f(t, &y);
        y = stages(&f, t, &y, k1, h).1;
        t += h;
    }
    y
}
