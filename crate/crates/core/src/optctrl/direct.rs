//! Direct optimal control (DMOC) of the spherical pendulum.
//!
//! Controls are moments `u_k = q_k × w_k`. The forced discrete dynamics add
//! `(h/2)u_k` and `(h/2)u_{k+1}` as left and right discrete forces, so that
//!
//! ```text
//! a  = hω + (h²/2)[(g/l) q×e₃ + u_k/ml²]
//! ω₊ = ω + (h/2)[(g/l)(q×e₃ + q₊×e₃) + (u_k + u_{k+1})/ml²]
//! ```
//!
//! The optimizer works on `w/(ml²)` and on the cost divided by `(ml²)²`, so its
//! tolerances are those of the pendulum with unit moment of inertia. The
//! dynamics only depend on `g/l` and `u/(ml²)`, so this is exact rescaling.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::bfgs::{self, BfgsOptions};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::models::spherical::{self, SphericalParams, SphericalPendState};

type Vector = DVector<f64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwingUpProblem {
    pub params: SphericalParams,
    pub initial: SphericalPendState,
    pub desired: SphericalPendState,
    pub steps: usize,
    pub h: f64,
}

/// Per-step control parameters `w_0 … w_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSchedule {
    pub w: Vec<Vec3>,
}

impl ControlSchedule {
    pub fn zeros(steps: usize) -> Self {
        ControlSchedule {
            w: vec![Vec3::zeros(); steps + 1],
        }
    }

    /// Realized moments `u_k = q_k × w_k` along `traj`.
    pub fn moments(&self, traj: &[SphericalPendState]) -> Vec<Vec3> {
        traj.iter().zip(&self.w).map(|(s, w)| s.q.vector().cross(w)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DmocOptions {
    /// Bound on `‖q_N - q^d‖` and `‖ω_N - ω^d‖`.
    pub constraint_tol: f64,
    /// Bound on the Lagrangian gradient of the rescaled problem.
    pub stationarity_tol: f64,
    pub initial_penalty: f64,
    pub max_outer: usize,
    pub inner: BfgsOptions,
    /// Amplitude of the uniform noise added to `w_0` to leave symmetric saddles.
    pub noise: f64,
    pub seed: u64,
}

impl Default for DmocOptions {
    fn default() -> Self {
        DmocOptions {
            constraint_tol: 1e-7,
            stationarity_tol: 1e-5,
            initial_penalty: 10.0,
            max_outer: 40,
            inner: BfgsOptions {
                grad_tol: 1e-7,
                max_iter: 3000,
                fd_step: 1e-6,
                first_step: 1.0,
                min_iter: 1,
            },
            noise: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DmocReport {
    /// Total quasi-Newton iterations over all outer loops.
    pub iterations: usize,
    pub outer_iterations: usize,
    pub evaluations: usize,
    pub cost: f64,
    /// `max(‖q_N - q^d‖, ‖ω_N - ω^d‖)`
    pub constraint_violation: f64,
    pub stationarity: f64,
    pub multipliers: [f64; 6],
}

#[derive(Debug, Clone, PartialEq)]
pub struct DmocSolution {
    pub schedule: ControlSchedule,
    pub trajectory: Vec<SphericalPendState>,
    pub report: DmocReport,
}

fn inertia(p: &SphericalParams) -> f64 {
    p.m * p.l * p.l
}

/// Rollout of the forced dynamics. `w` must have `steps + 1` entries.
pub fn forced_rollout(p: &SwingUpProblem, w: &ControlSchedule) -> Result<Vec<SphericalPendState>> {
    if w.w.len() != p.steps + 1 {
        return Err(Error::InvalidInput(format!(
            "control schedule has {} entries, expected {}",
            w.w.len(),
            p.steps + 1
        )));
    }
    rollout_scaled(p, &w.w, 1.0 / inertia(&p.params))
}

/// `b_k = u_k · scale` is the angular acceleration contributed by the control.
fn rollout_scaled(p: &SwingUpProblem, w: &[Vec3], scale: f64) -> Result<Vec<SphericalPendState>> {
    let mut out = Vec::with_capacity(p.steps + 1);
    let mut s = p.initial;
    out.push(s);
    let mut b0 = s.q.vector().cross(&w[0]) * scale;
    for k in 0..p.steps {
        // q₊ only depends on b0; b1 needs q₊
        let probe = spherical::step_forced(&p.params, &s, p.h, &b0, &Vec3::zeros())?;
        let b1 = probe.q.vector().cross(&w[k + 1]) * scale;
        s = SphericalPendState {
            q: probe.q,
            omega: probe.omega + b1 * (0.5 * p.h),
        };
        out.push(s);
        b0 = b1;
    }
    Ok(out)
}

/// `Σ_{k=0}^{N} (h/2)|q_k × w_k|²` along the forced rollout.
pub fn cost(p: &SwingUpProblem, w: &ControlSchedule) -> Result<f64> {
    let traj = forced_rollout(p, w)?;
    Ok(quadrature(p.h, &traj, &w.w))
}

fn quadrature(h: f64, traj: &[SphericalPendState], w: &[Vec3]) -> f64 {
    traj.iter()
        .zip(w)
        .map(|(s, w)| 0.5 * h * s.q.vector().cross(w).norm_squared())
        .sum()
}

/// `[q_N - q^d; ω_N - ω^d]`
pub fn terminal_error(p: &SwingUpProblem, w: &ControlSchedule) -> Result<[f64; 6]> {
    let traj = forced_rollout(p, w)?;
    Ok(terminal(p, traj.last().expect("nonempty")))
}

fn terminal(p: &SwingUpProblem, s: &SphericalPendState) -> [f64; 6] {
    let dq = s.q.vector() - p.desired.q.vector();
    let dw = s.omega - p.desired.omega;
    [dq.x, dq.y, dq.z, dw.x, dw.y, dw.z]
}

fn violation(c: &[f64; 6]) -> f64 {
    let q = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
    let w = (c[3] * c[3] + c[4] * c[4] + c[5] * c[5]).sqrt();
    q.max(w)
}

/// Rescaled problem over `x = vec(w)/(ml²)`.
struct Scaled<'a> {
    p: &'a SwingUpProblem,
}

impl Scaled<'_> {
    fn unpack(x: &Vector) -> Vec<Vec3> {
        x.as_slice().chunks(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect()
    }

    /// Cost and terminal error; `None` if the rollout fails.
    fn eval(&self, x: &Vector) -> Option<(f64, [f64; 6])> {
        let w = Self::unpack(x);
        let traj = rollout_scaled(self.p, &w, 1.0).ok()?;
        Some((quadrature(self.p.h, &traj, &w), terminal(self.p, traj.last()?)))
    }

    fn augmented(&self, x: &Vector, lambda: &[f64; 6], rho: f64) -> f64 {
        match self.eval(x) {
            Some((j, c)) => j + (0..6).map(|i| lambda[i] * c[i] + 0.5 * rho * c[i] * c[i]).sum::<f64>(),
            None => f64::INFINITY,
        }
    }
}

/// `J + λᵀc + (ρ/2)|c|²` of the rescaled problem, with `w` in physical units.
pub fn augmented_objective(p: &SwingUpProblem, w: &ControlSchedule, lambda: &[f64; 6], rho: f64) -> f64 {
    Scaled { p }.augmented(&pack(w, 1.0 / inertia(&p.params)), lambda, rho)
}

/// Gradient used by the optimizer: central differences of
/// [`augmented_objective`] in the rescaled variables `w/(ml²)`.
pub fn augmented_gradient(p: &SwingUpProblem, w: &ControlSchedule, lambda: &[f64; 6], rho: f64) -> Vector {
    let sc = Scaled { p };
    let x = pack(w, 1.0 / inertia(&p.params));
    bfgs::fd_gradient(&|x: &Vector| sc.augmented(x, lambda, rho), &x, DmocOptions::default().inner.fd_step)
}

fn pack(w: &ControlSchedule, scale: f64) -> Vector {
    Vector::from_iterator(w.w.len() * 3, w.w.iter().flat_map(|v| [v.x * scale, v.y * scale, v.z * scale]))
}

fn schedule_of(x: &Vector, scale: f64) -> ControlSchedule {
    ControlSchedule {
        w: Scaled::unpack(x).into_iter().map(|v| v * scale).collect(),
    }
}

/// Gauss-Newton projection of `w` onto `{q_N = q^d, ω_N = ω^d}` using the
/// minimum-norm correction (pseudo-inverse of the constraint Jacobian).
pub fn project_feasible(p: &SwingUpProblem, w: &ControlSchedule, tol: f64, max_iter: usize) -> Result<ControlSchedule> {
    let ml2 = inertia(&p.params);
    let sc = Scaled { p };
    let mut x = pack(w, 1.0 / ml2);
    let constraint = |x: &Vector| -> Vector {
        match sc.eval(x) {
            Some((_, c)) => Vector::from_column_slice(&c),
            None => Vector::from_element(6, f64::NAN),
        }
    };
    for _ in 0..max_iter {
        let c = constraint(&x);
        if !c.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("projection left the feasible step range".into()));
        }
        if c.norm() <= tol {
            return Ok(schedule_of(&x, ml2));
        }
        let step = 1e-6;
        let mut jac = nalgebra::DMatrix::zeros(6, x.len());
        for i in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += step;
            xm[i] -= step;
            jac.set_column(i, &((constraint(&xp) - constraint(&xm)) / (2.0 * step)));
        }
        // the radial parts of q_N and ω_N are second-order, so the Jacobian
        // has two near-null directions that must not be inverted
        let svd = jac.svd(true, true);
        let cut = 1e-6 * svd.singular_values.max();
        let pinv = svd
            .pseudo_inverse(cut)
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        x -= pinv * c;
    }
    let c = constraint(&x);
    Err(Error::NoConvergence {
        solver: "terminal constraint projection",
        iterations: max_iter,
        residual: c.norm(),
    })
}

/// Augmented-Lagrangian outer loop around BFGS. Starts from `w0` (zeros if
/// `None`); if that start is not already optimal, uniform noise of amplitude
/// `opts.noise` is added to `w_0`.
pub fn solve_swingup(p: &SwingUpProblem, w0: Option<ControlSchedule>, opts: &DmocOptions) -> Result<DmocSolution> {
    if p.steps == 0 || p.h.is_nan() || p.h <= 0.0 {
        return Err(Error::InvalidInput("swing-up needs steps >= 1 and h > 0".into()));
    }
    let ml2 = inertia(&p.params);
    let sc = Scaled { p };
    let w0 = w0.unwrap_or_else(|| ControlSchedule::zeros(p.steps));
    if w0.w.len() != p.steps + 1 {
        return Err(Error::InvalidInput("initial schedule has the wrong length".into()));
    }
    let mut x = pack(&w0, 1.0 / ml2);
    let mut lambda = [0.0; 6];
    let mut rho = opts.initial_penalty;

    let (_, c0) = sc
        .eval(&x)
        .ok_or_else(|| Error::InvalidInput("initial schedule is not feasible for the integrator".into()))?;
    let g0 = bfgs::fd_gradient(&|x: &Vector| sc.augmented(x, &lambda, 0.0), &x, opts.inner.fd_step);
    let (mut iterations, mut evaluations) = (0, 1 + 2 * x.len());
    let mut stationarity = g0.norm();
    let mut outer = 0;
    if violation(&c0) > opts.constraint_tol || stationarity > opts.stationarity_tol {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        for i in 0..3 {
            x[i] += opts.noise * rng.random_range(-1.0..=1.0);
        }
        let mut prev = f64::INFINITY;
        let mut inner = opts.inner;
        loop {
            if outer == opts.max_outer {
                let (_, c) = sc.eval(&x).expect("iterate was evaluated before");
                return Err(Error::InfeasibleOrStalled {
                    violation: violation(&c),
                    iterations,
                });
            }
            outer += 1;
            let lam = lambda;
            let r = bfgs::minimize(|x: &Vector| sc.augmented(x, &lam, rho), x, &inner)?;
            iterations += r.iterations;
            evaluations += r.evaluations;
            x = r.x;
            let (_, c) = sc.eval(&x).expect("accepted iterate has a finite objective");
            for i in 0..6 {
                lambda[i] += rho * c[i];
            }
            stationarity = r.grad.norm();
            let v = violation(&c);
            if v <= opts.constraint_tol && stationarity <= opts.stationarity_tol {
                break;
            }
            if v > opts.constraint_tol && v > 0.25 * prev {
                rho *= 10.0;
            }
            prev = v;
            // later inner solves start near a minimizer
            inner.first_step = inner.first_step.min(0.1);
            inner.min_iter = 0;
        }
    }
    let schedule = schedule_of(&x, ml2);
    let trajectory = forced_rollout(p, &schedule)?;
    let c = terminal(p, trajectory.last().expect("nonempty"));
    let report = DmocReport {
        iterations,
        outer_iterations: outer,
        evaluations,
        cost: quadrature(p.h, &trajectory, &schedule.w),
        constraint_violation: violation(&c),
        stationarity,
        multipliers: lambda,
    };
    Ok(DmocSolution {
        schedule,
        trajectory,
        report,
    })
}
