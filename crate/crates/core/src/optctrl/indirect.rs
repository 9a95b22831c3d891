//! Indirect optimal control of a rigid body in a central field: first-order
//! controlled Lie group step, its linearization, the discrete costate
//! recursion and a Newton shooting solver on the initial costate.
//!
//! Variations of a state are written `z = [zeta; dx; dOmega; dv]` with
//! `dR = R hat(zeta)`. The costate `p` used for propagation is dual to `z`.
//! [`Multiplier12`] holds the same covector in momentum form, where the
//! optimal controls read `u_f = -W_f^-1 l2` and `u_m = -W_m^-1 l4`.

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};
use crate::geom::{hat3, skew_jacobian, solve_skew_so3, Mat3, Rot3, SkewSolveOptions, Vec3};
use crate::models::{DumbbellPotential, RigidParams, RigidState};

pub type Mat12 = SMatrix<f64, 12, 12>;
pub type Vec12 = SVector<f64, 12>;

/// Condition number above which the forward costate step is refused.
pub const MAX_CONDITION: f64 = 1e12;

/// Costate in momentum form: `l1` pairs with position, `l2` with linear
/// momentum, `l3` with the attitude variation and `l4` with angular momentum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Multiplier12 {
    pub l1: Vec3,
    pub l2: Vec3,
    pub l3: Vec3,
    pub l4: Vec3,
}

impl Multiplier12 {
    pub fn from_costate(p: &Vec12, params: &RigidParams) -> Self {
        let (zeta, x, w, v) = blocks(p);
        Multiplier12 {
            l1: x,
            l2: v / params.m,
            l3: zeta,
            l4: params.j_inv * w,
        }
    }

    pub fn to_costate(&self, params: &RigidParams) -> Vec12 {
        join(&self.l3, &self.l1, &(params.j * self.l4), &(self.l2 * params.m))
    }
}

fn blocks(z: &Vec12) -> (Vec3, Vec3, Vec3, Vec3) {
    (
        z.fixed_rows::<3>(0).into(),
        z.fixed_rows::<3>(3).into(),
        z.fixed_rows::<3>(6).into(),
        z.fixed_rows::<3>(9).into(),
    )
}

fn join(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> Vec12 {
    let mut z = Vec12::zeros();
    z.fixed_rows_mut::<3>(0).copy_from(a);
    z.fixed_rows_mut::<3>(3).copy_from(b);
    z.fixed_rows_mut::<3>(6).copy_from(c);
    z.fixed_rows_mut::<3>(9).copy_from(d);
    z
}

/// `u_f = -W_f^-1 l2`, `u_m = -W_m^-1 l4`.
pub fn optimal_controls(l: &Multiplier12, w_f: &Mat3, w_m: &Mat3) -> Result<(Vec3, Vec3)> {
    let wf = w_f
        .try_inverse()
        .ok_or_else(|| Error::InvalidInput("force weight is singular".into()))?;
    let wm = w_m
        .try_inverse()
        .ok_or_else(|| Error::InvalidInput("moment weight is singular".into()))?;
    Ok((-(wf * l.l2), -(wm * l.l4)))
}

/// One step of the first-order scheme
/// `h hat(J Omega) = F Jd - Jd F^T`, `R+ = R F`, `x+ = x + h v`,
/// `J Omega+ = F^T J Omega + h (M+ + u_m)`, `m v+ = m v + h (-dU+/dx + u_f)`.
pub fn controlled_step(
    params: &RigidParams,
    pot: &DumbbellPotential,
    s: &RigidState,
    u_f: &Vec3,
    u_m: &Vec3,
    h: f64,
) -> Result<RigidState> {
    let jw = params.j * s.omega;
    let f = solve_skew_so3(&(jw * h), &params.jd, &SkewSolveOptions::default())?;
    let r = s.r * f;
    let x = s.x + s.v * h;
    let e = pot.eval(&r, &x)?;
    let jw1 = f.matrix().tr_mul(&jw) + (e.moment + u_m) * h;
    let v = s.v + (u_f - e.du_dx) * (h / params.m);
    Ok(RigidState {
        r,
        x,
        omega: params.j_inv * jw1,
        v,
    })
}

/// Second derivatives of the potential at `(R, x)`: returns
/// `(G_zeta, G_x, M_zeta, M_x)` with `dG = G_zeta zeta + G_x dx` for the
/// gradient `G = dU/dx` and likewise for the moment.
fn potential_jacobians(pot: &DumbbellPotential, r: &Rot3, x: &Vec3) -> Result<(Mat3, Mat3, Mat3, Mat3)> {
    let rm = r.matrix();
    let mut gz = Mat3::zeros();
    let mut gx = Mat3::zeros();
    let mut mz = Mat3::zeros();
    let mut mx = Mat3::zeros();
    for (&m, rho) in pot.masses.iter().zip(&pot.offsets) {
        let ri = x + rm * rho;
        let d = ri.norm();
        if d < 1e-9 {
            return Err(Error::SingularConfiguration(format!(
                "point mass at distance {d:e} from the attracting center"
            )));
        }
        let k = pot.mu * m;
        let hess = (Mat3::identity() / d.powi(3) - ri * ri.transpose() * (3.0 / d.powi(5))) * k;
        let g = ri * (k / d.powi(3));
        let dr_dzeta = -(rm * hat3(rho));
        let rho_hat = hat3(rho);
        let b_hat = hat3(&rm.tr_mul(&g));
        gx += hess;
        gz += hess * dr_dzeta;
        mx -= rho_hat * rm.transpose() * hess;
        mz -= rho_hat * (b_hat + rm.transpose() * hess * dr_dzeta);
    }
    Ok((gz, gx, mz, mx))
}

/// Linearization `A` of the uncontrolled first-order step at `s`, so that
/// `z_{k+1} = A z_k`. Controls enter additively and do not affect it.
pub fn sensitivity_matrix(params: &RigidParams, pot: &DumbbellPotential, s: &RigidState, h: f64) -> Result<Mat12> {
    let jw = params.j * s.omega;
    let f = solve_skew_so3(&(jw * h), &params.jd, &SkewSolveOptions::default())?;
    let fm = *f.matrix();
    let ft = fm.transpose();
    let b = skew_jacobian(&fm, &params.jd);
    let b_inv = b
        .try_inverse()
        .ok_or(Error::IllConditioned { condition: f64::INFINITY })?;
    // xi = b_xi dOmega is the right increment of F
    let b_xi = b_inv * params.j * h;
    let r1 = s.r * f;
    let x1 = s.x + s.v * h;
    let (gz, gx, mz, mx) = potential_jacobians(pot, &r1, &x1)?;

    let i3 = Mat3::identity();
    let z3 = Mat3::zeros();
    // zeta+ = F^T zeta + b_xi dOmega ; dx+ = dx + h dv
    let zeta_row = [ft, z3, b_xi, z3];
    let x_row = [z3, i3, z3, i3 * h];
    let mut w_row = [z3; 4];
    let mut v_row = [z3; 4];
    for c in 0..4 {
        let dmom = (mz * zeta_row[c] + mx * x_row[c]) * h;
        w_row[c] = params.j_inv * dmom;
        v_row[c] = -(gz * zeta_row[c] + gx * x_row[c]) * (h / params.m);
    }
    w_row[2] += params.j_inv * (hat3(&(ft * jw)) * b_xi + ft * params.j);
    v_row[3] += i3;

    let mut a = Mat12::zeros();
    for (r, row) in [zeta_row, x_row, w_row, v_row].iter().enumerate() {
        for (c, blk) in row.iter().enumerate() {
            a.fixed_view_mut::<3, 3>(3 * r, 3 * c).copy_from(blk);
        }
    }
    Ok(a)
}

/// `s (+) z`: perturbs a state along a variation.
pub fn perturb(s: &RigidState, z: &Vec12) -> RigidState {
    let (zeta, x, w, v) = blocks(z);
    RigidState {
        r: s.r * Rot3::exp(&zeta),
        x: s.x + x,
        omega: s.omega + w,
        v: s.v + v,
    }
}

/// `a (-) b`: the variation taking `b` to `a`.
pub fn difference(a: &RigidState, b: &RigidState) -> Result<Vec12> {
    let zeta = (b.r.transpose() * a.r).log()?;
    Ok(join(&zeta, &(a.x - b.x), &(a.omega - b.omega), &(a.v - b.v)))
}

/// Central finite-difference version of [`sensitivity_matrix`], perturbing
/// one variation coordinate at a time by `eps`.
pub fn sensitivity_matrix_fd(
    params: &RigidParams,
    pot: &DumbbellPotential,
    s: &RigidState,
    h: f64,
    eps: f64,
) -> Result<Mat12> {
    let zero = Vec3::zeros();
    let base = controlled_step(params, pot, s, &zero, &zero, h)?;
    let mut a = Mat12::zeros();
    for i in 0..12 {
        let e = Vec12::ith(i, eps);
        let sp = controlled_step(params, pot, &perturb(s, &e), &zero, &zero, h)?;
        let sm = controlled_step(params, pot, &perturb(s, &-e), &zero, &zero, h)?;
        let col = (difference(&sp, &base)? - difference(&sm, &base)?) / (2.0 * eps);
        a.set_column(i, &col);
    }
    Ok(a)
}

fn condition_1(a: &Mat12, a_inv: &Mat12) -> f64 {
    let norm1 = |m: &Mat12| m.column_iter().map(|c| c.abs().sum()).fold(0.0, f64::max);
    norm1(a) * norm1(a_inv)
}

/// Forward costate step: solves `A_{k+1}^T p_{k+1} = p_k`.
pub fn multiplier_step(p: &Vec12, a_next: &Mat12) -> Result<Vec12> {
    let inv = a_next
        .try_inverse()
        .ok_or(Error::IllConditioned { condition: f64::INFINITY })?;
    let cond = condition_1(a_next, &inv);
    if cond.is_nan() || cond > MAX_CONDITION {
        return Err(Error::IllConditioned { condition: cond });
    }
    Ok(inv.tr_mul(p))
}

/// Backward costate step `p_k = A_{k+1}^T p_{k+1}`.
pub fn multiplier_step_backward(p_next: &Vec12, a_next: &Mat12) -> Vec12 {
    a_next.tr_mul(p_next)
}

#[derive(Debug, Clone)]
pub struct TransferProblem {
    pub params: RigidParams,
    pub potential: DumbbellPotential,
    pub initial: RigidState,
    pub desired: RigidState,
    pub steps: usize,
    pub h: f64,
    pub w_f: Mat3,
    pub w_m: Mat3,
}

/// State, control and costate sequences generated by one initial costate.
/// `controls[k]` drives the step from `states[k]` and is computed from
/// `costates[k]`.
#[derive(Debug, Clone)]
pub struct Extremal {
    pub states: Vec<RigidState>,
    pub controls: Vec<(Vec3, Vec3)>,
    pub costates: Vec<Vec12>,
}

/// Forward pass of the state and costate recursions from `p0`.
pub fn propagate(prob: &TransferProblem, p0: &Vec12) -> Result<Extremal> {
    let n = prob.steps;
    let mut states = Vec::with_capacity(n + 1);
    let mut controls = Vec::with_capacity(n);
    let mut costates = Vec::with_capacity(n);
    let mut s = prob.initial;
    let mut p = *p0;
    states.push(s);
    for k in 0..n {
        let u = optimal_controls(&Multiplier12::from_costate(&p, &prob.params), &prob.w_f, &prob.w_m)?;
        s = controlled_step(&prob.params, &prob.potential, &s, &u.0, &u.1, prob.h)?;
        states.push(s);
        controls.push(u);
        costates.push(p);
        if k + 1 < n {
            let a = sensitivity_matrix(&prob.params, &prob.potential, &s, prob.h)?;
            p = multiplier_step(&p, &a)?;
        }
    }
    Ok(Extremal {
        states,
        controls,
        costates,
    })
}

/// Terminal error `desired (-) final` in variation coordinates.
pub fn shooting_residual(prob: &TransferProblem, p0: &Vec12) -> Result<Vec12> {
    let ext = propagate(prob, p0)?;
    difference(&prob.desired, ext.states.last().expect("nonempty"))
}

/// `sum (h/2) (u_f^T W_f u_f + u_m^T W_m u_m)`.
pub fn control_cost(prob: &TransferProblem, controls: &[(Vec3, Vec3)]) -> f64 {
    controls
        .iter()
        .map(|(f, m)| 0.5 * prob.h * (f.dot(&(prob.w_f * f)) + m.dot(&(prob.w_m * m))))
        .sum()
}

/// Rolls the controlled step forward under given controls.
pub fn rollout_controls(prob: &TransferProblem, controls: &[(Vec3, Vec3)]) -> Result<Vec<RigidState>> {
    let mut out = Vec::with_capacity(controls.len() + 1);
    let mut s = prob.initial;
    out.push(s);
    for (f, m) in controls {
        s = controlled_step(&prob.params, &prob.potential, &s, f, m, prob.h)?;
        out.push(s);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Forward-difference step, scaled per component by `1 + |p_i|`.
    pub fd_step: f64,
    pub armijo: f64,
    pub min_step: f64,
}

impl Default for ShootOptions {
    fn default() -> Self {
        ShootOptions {
            tol: 1e-12,
            max_iter: 100,
            fd_step: 1e-6,
            armijo: 1e-4,
            min_step: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ShootSolution {
    pub costate0: Vec12,
    pub multipliers0: Multiplier12,
    pub extremal: Extremal,
    pub cost: f64,
    pub iterations: usize,
    /// Residual norm before each Newton correction and after the last one.
    pub residual_history: Vec<f64>,
}

/// Newton iteration with Armijo backtracking on the initial costate.
pub fn shoot(prob: &TransferProblem, p_guess: &Vec12, opts: &ShootOptions) -> Result<ShootSolution> {
    if prob.steps == 0 {
        return Err(Error::InvalidInput("shooting needs at least one step".into()));
    }
    let mut p = *p_guess;
    let mut r = shooting_residual(prob, &p)?;
    let mut rn = r.norm();
    let mut history = vec![rn];
    let mut it = 0;
    while rn > opts.tol {
        if it == opts.max_iter {
            return Err(Error::MaxIterations(opts.max_iter));
        }
        let mut jac = Mat12::zeros();
        for i in 0..12 {
            let d = opts.fd_step * (1.0 + p[i].abs());
            let mut pp = p;
            pp[i] += d;
            let rp = shooting_residual(prob, &pp)?;
            jac.set_column(i, &((rp - r) / d));
        }
        let dp = jac
            .lu()
            .solve(&(-r))
            .ok_or(Error::IllConditioned { condition: f64::INFINITY })?;
        let mut t = 1.0;
        loop {
            let pc = p + dp * t;
            if let Ok(rc) = shooting_residual(prob, &pc) {
                let rcn = rc.norm();
                if rcn <= (1.0 - opts.armijo * t) * rn {
                    p = pc;
                    r = rc;
                    rn = rcn;
                    break;
                }
            }
            t *= 0.5;
            if t < opts.min_step {
                return Err(Error::LineSearchStalled {
                    iteration: it,
                    residual: rn,
                });
            }
        }
        it += 1;
        history.push(rn);
    }
    let extremal = propagate(prob, &p)?;
    Ok(ShootSolution {
        costate0: p,
        multipliers0: Multiplier12::from_costate(&p, &prob.params),
        cost: control_cost(prob, &extremal.controls),
        extremal,
        iterations: it,
        residual_history: history,
    })
}
