//! Kinetic shaping of the pendulum on a cart by discrete controlled
//! Lagrangians.
//!
//! Configuration `q = (theta, s)`, `theta = 0` the upright position.
//! `L = 1/2 (alpha th'^2 + 2 beta(theta) th' s' + gamma s'^2) - V(theta)` with
//! `alpha = m l^2`, `beta = m l cos(theta)`, `gamma = M + m`,
//! `V = m g l cos(theta)`.

use nalgebra::{DVector, Matrix2};

use crate::dmech::{del_step, legendre_minus, step_from_momentum, Config, DiscreteLagrangian, Lagrangian, Midpoint};
use crate::error::{Error, Result};
use crate::solve::{newton, NewtonOptions};

/// Newton settings for every implicit solve in this module.
pub const CLAG_NEWTON: NewtonOptions = NewtonOptions {
    tol: 1e-11,
    max_iter: 50,
    fd_step: 1e-7,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartPendParams {
    /// Pendulum mass.
    pub m: f64,
    /// Cart mass.
    pub cart: f64,
    pub l: f64,
    pub g: f64,
}

impl CartPendParams {
    pub fn new(m: f64, cart: f64, l: f64, g: f64) -> Result<Self> {
        if !(m >= 0.0 && cart > 0.0 && l > 0.0 && g >= 0.0) || !(m + cart + l + g).is_finite() {
            return Err(Error::InvalidInput(format!(
                "cart-pendulum parameters m={m}, M={cart}, l={l}, g={g}"
            )));
        }
        Ok(CartPendParams { m, cart, l, g })
    }

    pub fn alpha(&self) -> f64 {
        self.m * self.l * self.l
    }

    pub fn beta(&self, theta: f64) -> f64 {
        self.m * self.l * theta.cos()
    }

    fn beta_prime(&self, theta: f64) -> f64 {
        -self.m * self.l * theta.sin()
    }

    pub fn gamma(&self) -> f64 {
        self.m + self.cart
    }

    pub fn potential(&self, theta: f64) -> f64 {
        self.m * self.g * self.l * theta.cos()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapingGains {
    pub kappa: f64,
    pub sigma: f64,
}

impl ShapingGains {
    /// Gains satisfying `sigma = -1/(gamma kappa)`.
    pub fn new(kappa: f64, gamma: f64) -> Result<Self> {
        if kappa == 0.0 || !kappa.is_finite() || gamma.is_nan() || gamma <= 0.0 {
            return Err(Error::InvalidInput(format!("shaping gain kappa={kappa}, gamma={gamma}")));
        }
        if 1.0 + gamma * kappa == 0.0 {
            return Err(Error::DegenerateGain(0.0));
        }
        Ok(ShapingGains {
            kappa,
            sigma: -1.0 / (gamma * kappa),
        })
    }

    pub fn tau(&self, p: &CartPendParams, theta: f64) -> f64 {
        self.kappa * p.beta(theta)
    }
}

/// Open-loop Lagrangian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartPendulum(pub CartPendParams);

/// Controlled Lagrangian `L(theta, th', s' + tau th') + 1/2 sigma gamma (tau th')^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapedCartPendulum(pub CartPendParams, pub ShapingGains);

impl Lagrangian for CartPendulum {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, q: &Config, qd: &Config) -> f64 {
        let p = &self.0;
        0.5 * (p.alpha() * qd[0] * qd[0] + 2.0 * p.beta(q[0]) * qd[0] * qd[1] + p.gamma() * qd[1] * qd[1])
            - p.potential(q[0])
    }

    fn dq(&self, q: &Config, qd: &Config) -> Config {
        let p = &self.0;
        let th = q[0];
        DVector::from_vec(vec![
            p.beta_prime(th) * qd[0] * qd[1] + p.m * p.g * p.l * th.sin(),
            0.0,
        ])
    }

    fn dqdot(&self, q: &Config, qd: &Config) -> Config {
        let p = &self.0;
        let b = p.beta(q[0]);
        DVector::from_vec(vec![p.alpha() * qd[0] + b * qd[1], b * qd[0] + p.gamma() * qd[1]])
    }
}

impl Lagrangian for ShapedCartPendulum {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, q: &Config, qd: &Config) -> f64 {
        let (p, k) = (&self.0, &self.1);
        let tau = k.tau(p, q[0]);
        let shifted = DVector::from_vec(vec![qd[0], qd[1] + tau * qd[0]]);
        CartPendulum(*p).value(q, &shifted) + 0.5 * k.sigma * p.gamma() * (tau * qd[0]).powi(2)
    }

    fn dq(&self, q: &Config, qd: &Config) -> Config {
        let (p, k) = (&self.0, &self.1);
        let th = q[0];
        let (b, bp, gam) = (p.beta(th), p.beta_prime(th), p.gamma());
        let tau = k.kappa * b;
        let tau_p = k.kappa * bp;
        let w = qd[1] + tau * qd[0];
        let dth = bp * qd[0] * w
            + (b * qd[0] + gam * w) * tau_p * qd[0]
            + k.sigma * gam * tau * tau_p * qd[0] * qd[0]
            + p.m * p.g * p.l * th.sin();
        DVector::from_vec(vec![dth, 0.0])
    }

    fn dqdot(&self, q: &Config, qd: &Config) -> Config {
        let (p, k) = (&self.0, &self.1);
        let (b, gam) = (p.beta(q[0]), p.gamma());
        let tau = k.kappa * b;
        let w = qd[1] + tau * qd[0];
        let ds = b * qd[0] + gam * w;
        let dth = p.alpha() * qd[0] + b * w + ds * tau + k.sigma * gam * tau * tau * qd[0];
        DVector::from_vec(vec![dth, ds])
    }
}

pub fn controlled_lagrangian(p: &CartPendParams, k: &ShapingGains, q: &Config, qdot: &Config) -> f64 {
    ShapedCartPendulum(*p, *k).value(q, qdot)
}

/// Midpoint discrete Lagrangians `(L_d, L_d^{tau,sigma})`.
pub fn discrete_lagrangians(p: &CartPendParams, k: &ShapingGains, q0: &Config, q1: &Config, h: f64) -> (f64, f64) {
    (
        Midpoint(CartPendulum(*p)).value(q0, q1, h),
        Midpoint(ShapedCartPendulum(*p, *k)).value(q0, q1, h),
    )
}

/// Discrete controlled momentum
/// `p_k = ((1 + gamma kappa) beta(theta_{k+1/2}) dtheta_k + gamma ds_k) / h`.
pub fn controlled_momentum(p: &CartPendParams, k: &ShapingGains, q0: &Config, q1: &Config, h: f64) -> f64 {
    let th_mid = 0.5 * (q0[0] + q1[0]);
    let gam = p.gamma();
    ((1.0 + gam * k.kappa) * p.beta(th_mid) * (q1[0] - q0[0]) + gam * (q1[1] - q0[1])) / h
}

/// `(q_{k-1}, q_k) -> q_{k+1}` for the controlled Lagrangian.
pub fn controlled_step(p: &CartPendParams, k: &ShapingGains, q_prev: &Config, q: &Config, h: f64) -> Result<Config> {
    del_step(&Midpoint(ShapedCartPendulum(*p, *k)), q_prev, q, h, None, &CLAG_NEWTON)
}

/// Cart force `u_k` computed from three consecutive configurations.
pub fn control_input(p: &CartPendParams, k: &ShapingGains, q_prev: &Config, q: &Config, q_next: &Config, h: f64) -> f64 {
    let gam = p.gamma();
    let now = gam * (q_next[0] - q[0]) * k.tau(p, 0.5 * (q[0] + q_next[0]));
    let before = gam * (q[0] - q_prev[0]) * k.tau(p, 0.5 * (q_prev[0] + q[0]));
    -(now - before) / h
}

/// Residual of the open-loop DEL equations with the cart force applied:
/// the `theta` row is unforced, the `s` row carries `+u_k`.
pub fn forced_residual(
    p: &CartPendParams,
    k: &ShapingGains,
    q_prev: &Config,
    q: &Config,
    q_next: &Config,
    h: f64,
) -> Config {
    let ld = Midpoint(CartPendulum(*p));
    let mut r = ld.d2(q_prev, q, h) + ld.d1(q, q_next, h);
    r[1] += control_input(p, k, q_prev, q, q_next, h);
    r
}

/// `(q_{k-1}, q_k) -> q_{k+1}` for the open-loop system under the feedback
/// `u_k`, solved implicitly since `u_k` depends on `q_{k+1}`.
pub fn forced_step(p: &CartPendParams, k: &ShapingGains, q_prev: &Config, q: &Config, h: f64) -> Result<Config> {
    let opts = NewtonOptions {
        tol: CLAG_NEWTON.tol * (1.0 + q.norm()),
        ..CLAG_NEWTON
    };
    let (q_next, _) = newton(
        "forced cart-pendulum step",
        |x| forced_residual(p, k, q_prev, q, x, h),
        q * 2.0 - q_prev,
        &opts,
    )?;
    Ok(q_next)
}

/// Checks `sigma gamma kappa = -1` and returns the controlled momentum level
/// `mu = p / (1 + gamma kappa)` matching the open-loop level `p`.
pub fn matching_check(k: &ShapingGains, gamma: f64, p: f64) -> Result<(bool, f64)> {
    let d = 1.0 + gamma * k.kappa;
    if d == 0.0 || !d.is_finite() {
        return Err(Error::DegenerateGain(d));
    }
    let ok = (k.sigma * gamma * k.kappa + 1.0).abs() <= 1e-12;
    Ok((ok, p / d))
}

/// Solves `dL/dq'(q0, q0') + D1 L_d(q0, q1) = 0` for `q1`. Uses the
/// controlled Lagrangian when `gains` is given, the open-loop one otherwise.
pub fn init_from_velocity(
    p: &CartPendParams,
    gains: Option<&ShapingGains>,
    q0: &Config,
    qdot0: &Config,
    h: f64,
) -> Result<Config> {
    let guess = q0 + qdot0 * h;
    match gains {
        Some(k) => {
            let l = ShapedCartPendulum(*p, *k);
            step_from_momentum(&Midpoint(l), q0, &l.dqdot(q0, qdot0), guess, h, None, &CLAG_NEWTON)
        }
        None => {
            let l = CartPendulum(*p);
            step_from_momentum(&Midpoint(l), q0, &l.dqdot(q0, qdot0), guess, h, None, &CLAG_NEWTON)
        }
    }
}

/// Boundary residual `dL/dq'(q0, q0') + D1 L_d(q0, q1)` of the controlled system.
pub fn init_residual(p: &CartPendParams, k: &ShapingGains, q0: &Config, qdot0: &Config, q1: &Config, h: f64) -> Config {
    let l = ShapedCartPendulum(*p, *k);
    l.dqdot(q0, qdot0) - legendre_minus(&Midpoint(l), q0, q1, h)
}

/// Second configuration with the same `theta_1` whose controlled momentum
/// `(q0, q1)` equals `level`.
pub fn with_momentum(p: &CartPendParams, k: &ShapingGains, q0: &Config, theta1: f64, level: f64, h: f64) -> Config {
    let gam = p.gamma();
    let th_mid = 0.5 * (q0[0] + theta1);
    let ds = (level * h - (1.0 + gam * k.kappa) * p.beta(th_mid) * (theta1 - q0[0])) / gam;
    DVector::from_vec(vec![theta1, q0[1] + ds])
}

/// Spectral radius of the linearized controlled map of `theta` on the zero
/// momentum level about the upright equilibrium. `None` if the step cannot
/// be solved there.
pub fn linearized_radius(p: &CartPendParams, kappa: f64, h: f64) -> Option<f64> {
    let k = ShapingGains::new(kappa, p.gamma()).ok()?;
    let eps = 1e-6;
    // theta_{k+1} as a function of (theta_{k-1}, theta_k)
    let next = |a: f64, b: f64| -> Option<f64> {
        let q_prev = DVector::from_vec(vec![a, 0.0]);
        let q = with_momentum(p, &k, &q_prev, b, 0.0, h);
        controlled_step(p, &k, &q_prev, &q, h).ok().map(|x| x[0])
    };
    let c0 = (next(eps, 0.0)? - next(-eps, 0.0)?) / (2.0 * eps);
    let c1 = (next(0.0, eps)? - next(0.0, -eps)?) / (2.0 * eps);
    let m = Matrix2::new(0.0, 1.0, c0, c1);
    let ev = m.complex_eigenvalues();
    Some(ev.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Threshold stability gain: smallest `kappa` in `(0, 1000]` above which the
/// linearized `theta` map is non-expansive, bracketed to `1e-6`.
pub fn critical_kappa(p: &CartPendParams, h: f64) -> Result<f64> {
    let stable = |kappa: f64| linearized_radius(p, kappa, h).is_some_and(|r| r <= 1.0 + 1e-9);
    let (mut lo, mut hi) = (1e-6, 1e3);
    if stable(lo) || !stable(hi) {
        return Err(Error::NoBracket { lo: 0.0, hi });
    }
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if stable(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Controlled trajectory from `(q0, q0')`.
pub fn simulate(
    p: &CartPendParams,
    k: &ShapingGains,
    q0: &Config,
    qdot0: &Config,
    h: f64,
    steps: usize,
) -> Result<Vec<Config>> {
    let mut qs = Vec::with_capacity(steps + 1);
    qs.push(q0.clone());
    if steps == 0 {
        return Ok(qs);
    }
    qs.push(init_from_velocity(p, Some(k), q0, qdot0, h)?);
    while qs.len() <= steps {
        let n = qs.len();
        let q = controlled_step(p, k, &qs[n - 2], &qs[n - 1], h)?;
        qs.push(q);
    }
    Ok(qs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dmech::{del_residual, gradient_mismatch};

    fn reference_params() -> CartPendParams {
        CartPendParams::new(0.14, 0.44, 0.215, 9.81).unwrap()
    }

    fn v(a: f64, b: f64) -> Config {
        DVector::from_vec(vec![a, b])
    }

    #[test]
    fn shaped_lagrangian_spot_value() {
        let p = reference_params();
        let k = ShapingGains::new(5.0, p.gamma()).unwrap();
        let val = controlled_lagrangian(&p, &k, &v(0.1, 0.0), &v(0.2, 0.3));
        // expanded form: coefficients of th'^2, th's', s'^2
        let (b, a, g) = (p.beta(0.1), p.alpha(), p.gamma());
        let c11 = a + k.kappa * b * b + g * k.kappa * k.kappa * b * b;
        let c12 = (1.0 + g * k.kappa) * b;
        let alt = 0.5 * (c11 * 0.04 + 2.0 * c12 * 0.06 + g * 0.09) - p.potential(0.1);
        assert!((val - alt).abs() < 1e-15);
        assert!((val - (-0.26021836036630447)).abs() < 1e-14, "{val:.16}");
    }

    #[test]
    fn shift_vanishes_without_pendulum_motion() {
        let p = reference_params();
        let k = ShapingGains::new(7.0, p.gamma()).unwrap();
        let q = v(0.4, 1.0);
        let qd = v(0.0, -0.6);
        assert_eq!(controlled_lagrangian(&p, &k, &q, &qd), CartPendulum(p).value(&q, &qd));
        let tiny = ShapingGains::new(1e-12, p.gamma()).unwrap();
        let qd = v(0.3, -0.6);
        assert!((controlled_lagrangian(&p, &tiny, &q, &qd) - CartPendulum(p).value(&q, &qd)).abs() < 1e-12);
    }

    #[test]
    fn analytic_gradients_match_differences() {
        let p = reference_params();
        let k = ShapingGains::new(10.0, p.gamma()).unwrap();
        let (q0, q1) = (v(0.3, 0.1), v(0.35, 0.12));
        assert!(gradient_mismatch(&Midpoint(CartPendulum(p)), &q0, &q1, 0.05, 1e-6) < 1e-7);
        assert!(gradient_mismatch(&Midpoint(ShapedCartPendulum(p, k)), &q0, &q1, 0.05, 1e-6) < 1e-7);
    }

    #[test]
    fn discrete_lagrangian_at_rest_upright() {
        let p = reference_params();
        let k = ShapingGains::new(3.0, p.gamma()).unwrap();
        let q = v(0.0, 2.0);
        let (ld, lc) = discrete_lagrangians(&p, &k, &q, &q, 0.05);
        assert!((ld + 0.05 * 0.14 * 9.81 * 0.215).abs() < 1e-16);
        assert_eq!(ld, lc);
        let (ld, lc) = discrete_lagrangians(&p, &k, &v(0.2, 0.0), &v(0.2, 0.3), 0.05);
        assert_eq!(ld, lc);
    }

    #[test]
    fn quadrature_error_is_third_order() {
        let p = reference_params();
        let k = ShapingGains::new(3.0, p.gamma()).unwrap();
        let curve = |t: f64| (v(0.3 * t.sin(), 0.2 * t * t), v(0.3 * t.cos(), 0.4 * t));
        let exact = |t0: f64, t1: f64| {
            let n = 2000;
            let dt = (t1 - t0) / n as f64;
            let f = |t: f64| {
                let (q, qd) = curve(t);
                controlled_lagrangian(&p, &k, &q, &qd)
            };
            let mut s = f(t0) + f(t1);
            for i in 1..n {
                s += f(t0 + i as f64 * dt) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            s * dt / 3.0
        };
        let ratios: Vec<f64> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&h| {
                let (q0, q1) = (curve(0.7).0, curve(0.7 + h).0);
                let (_, lc) = discrete_lagrangians(&p, &k, &q0, &q1, h);
                (lc - exact(0.7, 0.7 + h)) / h.powi(3)
            })
            .collect();
        for w in ratios.windows(2) {
            assert!((w[1] / w[0] - 1.0).abs() < 0.1, "{ratios:?}");
        }
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let p = reference_params();
        let k = ShapingGains::new(12.0, p.gamma()).unwrap();
        let q = v(0.0, 1.5);
        assert_eq!(controlled_step(&p, &k, &q, &q, 0.05).unwrap(), q);
    }

    #[test]
    fn step_conserves_controlled_momentum() {
        let p = reference_params();
        let k = ShapingGains::new(12.0, p.gamma()).unwrap();
        let h = 0.05;
        let (q0, q1) = (v(0.1, 0.0), v(0.102, 0.004));
        let q2 = controlled_step(&p, &k, &q0, &q1, h).unwrap();
        let r = del_residual(&Midpoint(ShapedCartPendulum(p, k)), &q0, &q1, &q2, h);
        assert!(r.norm() < 1e-11);
        let (a, b) = (controlled_momentum(&p, &k, &q0, &q1, h), controlled_momentum(&p, &k, &q1, &q2, h));
        assert!((a - b).abs() < 1e-11);
    }

    #[test]
    fn momentum_formula_is_minus_d1() {
        let p = reference_params();
        let k = ShapingGains::new(4.0, p.gamma()).unwrap();
        let (q0, q1) = (v(0.3, 0.1), v(0.32, 0.15));
        let pm = legendre_minus(&Midpoint(ShapedCartPendulum(p, k)), &q0, &q1, 0.05);
        assert!((pm[1] - controlled_momentum(&p, &k, &q0, &q1, 0.05)).abs() < 1e-13);
    }

    #[test]
    fn control_vanishes_at_rest_and_for_symmetric_swing() {
        let p = reference_params();
        let k = ShapingGains::new(4.0, p.gamma()).unwrap();
        let q = v(0.2, 0.0);
        assert_eq!(control_input(&p, &k, &q, &q, &q, 0.05), 0.0);
        let u = control_input(&p, &k, &v(-0.1, 0.0), &v(0.0, 0.3), &v(0.1, 0.7), 0.05);
        assert_eq!(u, 0.0);
    }

    #[test]
    fn forced_row_matches_momentum_balance() {
        let p = reference_params();
        let k = ShapingGains::new(4.0, p.gamma()).unwrap();
        let h = 0.05;
        let (q0, q1) = (v(0.1, 0.0), v(0.105, 0.01));
        let q2 = forced_step(&p, &k, &q0, &q1, h).unwrap();
        assert!(forced_residual(&p, &k, &q0, &q1, &q2, h).norm() < 1e-11);
        let (a, b) = (controlled_momentum(&p, &k, &q0, &q1, h), controlled_momentum(&p, &k, &q1, &q2, h));
        assert!((a - b).abs() < 1e-11);
    }

    #[test]
    fn matching_examples() {
        let k = ShapingGains::new(10.0, 0.58).unwrap();
        assert!((k.sigma + 0.1724137931034483).abs() < 1e-15);
        let (ok, mu) = matching_check(&k, 0.58, 1.0).unwrap();
        assert!(ok);
        assert!((mu - 1.0 / 6.8).abs() < 1e-15);
        assert_eq!(matching_check(&k, 0.58, 0.0).unwrap().1, 0.0);
        let bad = ShapingGains { kappa: -2.0, sigma: 1.0 };
        assert!(matches!(matching_check(&bad, 0.5, 1.0), Err(Error::DegenerateGain(_))));
        assert!(matches!(ShapingGains::new(-2.0, 0.5), Err(Error::DegenerateGain(_))));
        assert!(ShapingGains::new(0.0, 0.5).is_err());
    }

    #[test]
    fn initialization_examples() {
        let p = reference_params();
        let k = ShapingGains::new(10.0, p.gamma()).unwrap();
        let h = 0.05;
        let q0 = v(0.0, 0.3);
        assert_eq!(init_from_velocity(&p, Some(&k), &q0, &v(0.0, 0.0), h).unwrap(), q0);

        let free = CartPendParams::new(0.0, 0.44, 0.215, 9.81).unwrap();
        let qd = v(0.2, 0.7);
        let q1 = init_from_velocity(&free, None, &q0, &qd, h).unwrap();
        assert_eq!(q1, &q0 + &qd * h);

        let (q0, qd) = (v(0.1, 0.0), v(-0.3, 0.2));
        for gains in [None, Some(&k)] {
            let q1 = init_from_velocity(&p, gains, &q0, &qd, h).unwrap();
            let want = match gains {
                Some(k) => ShapedCartPendulum(p, *k).dqdot(&q0, &qd),
                None => CartPendulum(p).dqdot(&q0, &qd),
            };
            let got = match gains {
                Some(k) => legendre_minus(&Midpoint(ShapedCartPendulum(p, *k)), &q0, &q1, h),
                None => legendre_minus(&Midpoint(CartPendulum(p)), &q0, &q1, h),
            };
            assert!((want - got).norm() < 1e-10);
        }
        let q1 = init_from_velocity(&p, Some(&k), &q0, &qd, h).unwrap();
        assert!(init_residual(&p, &k, &q0, &qd, &q1, h).norm() < 1e-11);
    }

    #[test]
    fn critical_gain_matches_zero_effective_inertia() {
        let p = reference_params();
        let h = 0.05;
        let kc = critical_kappa(&p, h).unwrap();
        // the reduced theta inertia alpha - kappa beta^2 - beta^2/gamma vanishes
        let want = p.cart / (p.m * p.gamma());
        assert!((kc - want).abs() < 2e-6, "{kc} vs {want}");
        assert!(linearized_radius(&p, 2.0 * kc, h).unwrap() <= 1.0 + 1e-9);
        assert!(linearized_radius(&p, 0.5 * kc, h).unwrap() > 1.0);
        let half = critical_kappa(&p, h / 2.0).unwrap();
        assert!((half / kc - 1.0).abs() < 0.05);
    }

    #[test]
    fn bad_parameters_rejected() {
        assert!(CartPendParams::new(0.1, 0.0, 1.0, 9.8).is_err());
        assert!(CartPendParams::new(-0.1, 1.0, 1.0, 9.8).is_err());
        assert!(CartPendParams::new(0.1, 1.0, f64::NAN, 9.8).is_err());
    }
}
