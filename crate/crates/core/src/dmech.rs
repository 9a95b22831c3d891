//! Discrete mechanics on vector-space configurations.
//!
//! A discrete Lagrangian `L_d(q_k, q_{k+1}, h)` approximates the action over
//! one step. Stationarity of the action sum gives the discrete Euler-Lagrange
//! (DEL) equation
//!
//! ```text
//! D2 L_d(q_{k-1}, q_k) + D1 L_d(q_k, q_{k+1}) = 0
//! ```
//!
//! and, with left/right discrete forces, its Lagrange-d'Alembert variant
//!
//! ```text
//! D2 L_d(q_{k-1}, q_k) + F⁺(q_{k-1}, q_k) + D1 L_d(q_k, q_{k+1}) + F⁻(q_k, q_{k+1}) = 0.
//! ```
//!
//! The discrete Legendre transforms `p_k = -D1 L_d - F⁻` and
//! `p_{k+1} = D2 L_d + F⁺` turn the two-step map into a position-momentum map.

use nalgebra::DVector;

use crate::error::Result;
use crate::solve::{newton, NewtonOptions};

pub type Config = DVector<f64>;

/// Discrete Lagrangian together with its slot gradients.
pub trait DiscreteLagrangian {
    fn dim(&self) -> usize;
    fn value(&self, q0: &Config, q1: &Config, h: f64) -> f64;
    /// Gradient with respect to the first slot.
    fn d1(&self, q0: &Config, q1: &Config, h: f64) -> Config;
    /// Gradient with respect to the second slot.
    fn d2(&self, q0: &Config, q1: &Config, h: f64) -> Config;
}

/// Left and right discrete forces acting over one step.
pub trait DiscreteForce {
    /// `F⁻(q_k, q_{k+1})`, paired with `δq_k`.
    fn minus(&self, q0: &Config, q1: &Config, h: f64) -> Config;
    /// `F⁺(q_k, q_{k+1})`, paired with `δq_{k+1}`.
    fn plus(&self, q0: &Config, q1: &Config, h: f64) -> Config;
}

/// Continuous Lagrangian `L(q, q̇)` with partial gradients.
pub trait Lagrangian {
    fn dim(&self) -> usize;
    fn value(&self, q: &Config, qdot: &Config) -> f64;
    fn dq(&self, q: &Config, qdot: &Config) -> Config;
    fn dqdot(&self, q: &Config, qdot: &Config) -> Config;
}

/// Midpoint-rule discrete Lagrangian `h·L((q0 + q1)/2, (q1 - q0)/h)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Midpoint<L>(pub L);

impl<L: Lagrangian> Midpoint<L> {
    fn mid(q0: &Config, q1: &Config, h: f64) -> (Config, Config) {
        ((q0 + q1) * 0.5, (q1 - q0) / h)
    }
}

impl<L: Lagrangian> DiscreteLagrangian for Midpoint<L> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn value(&self, q0: &Config, q1: &Config, h: f64) -> f64 {
        let (q, v) = Self::mid(q0, q1, h);
        h * self.0.value(&q, &v)
    }

    fn d1(&self, q0: &Config, q1: &Config, h: f64) -> Config {
        let (q, v) = Self::mid(q0, q1, h);
        self.0.dq(&q, &v) * (0.5 * h) - self.0.dqdot(&q, &v)
    }

    fn d2(&self, q0: &Config, q1: &Config, h: f64) -> Config {
        let (q, v) = Self::mid(q0, q1, h);
        self.0.dq(&q, &v) * (0.5 * h) + self.0.dqdot(&q, &v)
    }
}

/// Action sum `Σ L_d(q_k, q_{k+1})` over a trajectory.
pub fn action_sum<D: DiscreteLagrangian + ?Sized>(ld: &D, qs: &[Config], h: f64) -> f64 {
    qs.windows(2).map(|w| ld.value(&w[0], &w[1], h)).sum()
}

/// `D2 L_d(q_prev, q) + D1 L_d(q, q_next)`.
pub fn del_residual<D: DiscreteLagrangian + ?Sized>(
    ld: &D,
    q_prev: &Config,
    q: &Config,
    q_next: &Config,
    h: f64,
) -> Config {
    ld.d2(q_prev, q, h) + ld.d1(q, q_next, h)
}

/// DEL residual including the discrete forces of both adjacent steps.
pub fn forced_del_residual<D: DiscreteLagrangian + ?Sized>(
    ld: &D,
    force: Option<&dyn DiscreteForce>,
    q_prev: &Config,
    q: &Config,
    q_next: &Config,
    h: f64,
) -> Config {
    let mut r = del_residual(ld, q_prev, q, q_next, h);
    if let Some(f) = force {
        r += f.plus(q_prev, q, h) + f.minus(q, q_next, h);
    }
    r
}

/// Tolerance used by [`del_step`]: `tol · (1 + |q|)`.
pub fn del_tolerance(opts: &NewtonOptions, q: &Config) -> f64 {
    opts.tol * (1.0 + q.norm())
}

/// Advances the two-step map `(q_prev, q) ↦ q_next` by solving the (forced)
/// DEL equation with Newton's method from `2q - q_prev`.
pub fn del_step<D: DiscreteLagrangian + ?Sized>(
    ld: &D,
    q_prev: &Config,
    q: &Config,
    h: f64,
    force: Option<&dyn DiscreteForce>,
    opts: &NewtonOptions,
) -> Result<Config> {
    let guess = q * 2.0 - q_prev;
    let opts = NewtonOptions {
        tol: del_tolerance(opts, q),
        ..*opts
    };
    let (q_next, _) = newton(
        "discrete Euler-Lagrange step",
        |x| forced_del_residual(ld, force, q_prev, q, x, h),
        guess,
        &opts,
    )?;
    Ok(q_next)
}

/// `p0 = -D1 L_d(q0, q1)`.
pub fn legendre_minus<D: DiscreteLagrangian + ?Sized>(ld: &D, q0: &Config, q1: &Config, h: f64) -> Config {
    -ld.d1(q0, q1, h)
}

/// `p1 = D2 L_d(q0, q1)`.
pub fn legendre_plus<D: DiscreteLagrangian + ?Sized>(ld: &D, q0: &Config, q1: &Config, h: f64) -> Config {
    ld.d2(q0, q1, h)
}

/// Solves `p0 + D1 L_d(q0, q1) + F⁻(q0, q1) = 0` for `q1`, i.e. the first step
/// of the position-momentum map. `guess` is typically `q0 + h·q̇0`.
pub fn step_from_momentum<D: DiscreteLagrangian + ?Sized>(
    ld: &D,
    q0: &Config,
    p0: &Config,
    guess: Config,
    h: f64,
    force: Option<&dyn DiscreteForce>,
    opts: &NewtonOptions,
) -> Result<Config> {
    let opts = NewtonOptions {
        tol: del_tolerance(opts, q0),
        ..*opts
    };
    let (q1, _) = newton(
        "discrete Legendre boundary solve",
        |x| {
            let mut r = p0 + ld.d1(q0, x, h);
            if let Some(f) = force {
                r += f.minus(q0, x, h);
            }
            r
        },
        guess,
        &opts,
    )?;
    Ok(q1)
}

/// Largest relative mismatch between the analytic slot gradients and central
/// differences of `L_d` with step `eps`.
pub fn gradient_mismatch<D: DiscreteLagrangian + ?Sized>(
    ld: &D,
    q0: &Config,
    q1: &Config,
    h: f64,
    eps: f64,
) -> f64 {
    let n = ld.dim();
    let (g1, g2) = (ld.d1(q0, q1, h), ld.d2(q0, q1, h));
    let scale = 1.0 + g1.amax().max(g2.amax());
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let mut a = q0.clone();
        let mut b = q0.clone();
        a[i] += eps;
        b[i] -= eps;
        let fd1 = (ld.value(&a, q1, h) - ld.value(&b, q1, h)) / (2.0 * eps);
        let mut a = q1.clone();
        let mut b = q1.clone();
        a[i] += eps;
        b[i] -= eps;
        let fd2 = (ld.value(q0, &a, h) - ld.value(q0, &b, h)) / (2.0 * eps);
        worst = worst
            .max((fd1 - g1[i]).abs() / scale)
            .max((fd2 - g2[i]).abs() / scale);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::mass_spring::{self, MassSpringParams, MassSpringState, Spring};
    use approx::assert_abs_diff_eq;

    fn v(x: f64) -> Config {
        DVector::from_element(1, x)
    }

    fn spring(m: f64, kappa: f64) -> Midpoint<Spring> {
        Midpoint(Spring { m, kappa })
    }

    /// Constant force `c` split evenly between the two ends of a step.
    struct ConstantForce(f64);

    impl DiscreteForce for ConstantForce {
        fn minus(&self, _: &Config, _: &Config, h: f64) -> Config {
            v(0.5 * h * self.0)
        }
        fn plus(&self, _: &Config, _: &Config, h: f64) -> Config {
            v(0.5 * h * self.0)
        }
    }

    #[test]
    fn midpoint_matches_closed_form_spring_lagrangian() {
        let ld = spring(1.3, 0.7);
        let (q0, q1, h) = (0.4, -0.2, 0.1);
        let expect = 1.3 * (q1 - q0) * (q1 - q0) / (2.0 * h) - h * 0.7 / 8.0 * (q0 + q1) * (q0 + q1);
        assert_abs_diff_eq!(ld.value(&v(q0), &v(q1), h), expect, epsilon = 1e-15);
        assert!(gradient_mismatch(&ld, &v(q0), &v(q1), h, 1e-5) < 1e-6);
    }

    #[test]
    fn residual_examples() {
        let ld = spring(1.0, 1.0);
        let z = v(0.0);
        assert_eq!(del_residual(&ld, &z, &z, &z, 0.1), v(0.0));
        let r = del_residual(&ld, &z, &z, &v(1.0), 0.1);
        assert_abs_diff_eq!(r[0], -10.025, epsilon = 1e-12);
    }

    #[test]
    fn residual_vanishes_on_closed_form_triple() {
        let p = MassSpringParams { m: 1.0, kappa: 1.0 };
        let h = 0.1;
        let s0 = MassSpringState { q: 1.0, qdot: 0.0 };
        let s1 = mass_spring::step(&p, &s0, h);
        let s2 = mass_spring::step(&p, &s1, h);
        let r = del_residual(&spring(1.0, 1.0), &v(s0.q), &v(s1.q), &v(s2.q), h);
        assert!(r.norm() <= 1e-14, "{r}");
    }

    #[test]
    fn step_examples() {
        let ld = spring(1.0, 1.0);
        let opts = NewtonOptions::default();
        let z = v(0.0);
        assert_eq!(del_step(&ld, &z, &z, 0.1, None, &opts).unwrap(), z);

        let p = MassSpringParams { m: 1.0, kappa: 1.0 };
        let s1 = mass_spring::step(&p, &MassSpringState { q: 1.0, qdot: 0.0 }, 0.1);
        let s2 = mass_spring::step(&p, &s1, 0.1);
        let q2 = del_step(&ld, &v(1.0), &v(s1.q), 0.1, None, &opts).unwrap();
        assert_abs_diff_eq!(q2[0], s2.q, epsilon = 1e-12);
    }

    #[test]
    fn constant_force_gives_uniform_acceleration() {
        let (m, c, h) = (2.0, 3.0, 0.05);
        let ld = spring(m, 0.0);
        let f = ConstantForce(c);
        let (qp, q) = (0.3, 0.37);
        let qn = del_step(&ld, &v(qp), &v(q), h, Some(&f), &NewtonOptions::default()).unwrap();
        assert_abs_diff_eq!(qn[0], 2.0 * q - qp + h * h * c / m, epsilon = 1e-13);
    }

    #[test]
    fn zero_force_reduces_to_unforced() {
        let ld = spring(1.0, 2.0);
        let f = ConstantForce(0.0);
        let r0 = del_residual(&ld, &v(0.1), &v(0.2), &v(0.25), 0.1);
        let r1 = forced_del_residual(&ld, Some(&f), &v(0.1), &v(0.2), &v(0.25), 0.1);
        assert_eq!(r0, r1);
    }

    #[test]
    fn legendre_examples() {
        let ld = spring(1.0, 1.0);
        let z = v(0.0);
        assert_eq!(legendre_minus(&ld, &z, &z, 0.1), z);
        assert_eq!(legendre_plus(&ld, &z, &z, 0.1), z);

        let p = MassSpringParams { m: 1.0, kappa: 1.0 };
        let s1 = mass_spring::step(&p, &MassSpringState { q: 1.0, qdot: 0.0 }, 0.1);
        let p0 = legendre_minus(&ld, &v(1.0), &v(s1.q), 0.1);
        assert_abs_diff_eq!(p0[0], 0.0, epsilon = 1e-12);
        let p1 = legendre_plus(&ld, &v(1.0), &v(s1.q), 0.1);
        assert_abs_diff_eq!(p1[0], s1.qdot, epsilon = 1e-12);

        // translation invariance (κ = 0): p0 = p1
        let free = spring(1.7, 0.0);
        assert_eq!(
            legendre_minus(&free, &v(0.3), &v(0.9), 0.1),
            legendre_plus(&free, &v(0.3), &v(0.9), 0.1)
        );
    }

    #[test]
    fn noether_momentum_is_conserved_for_free_particle() {
        let ld = spring(1.7, 0.0);
        let opts = NewtonOptions::default();
        let h = 0.1;
        let (mut qp, mut q) = (v(0.0), v(0.13));
        let p_ref = legendre_minus(&ld, &qp, &q, h)[0];
        for _ in 0..100 {
            let qn = del_step(&ld, &qp, &q, h, None, &opts).unwrap();
            let p = legendre_minus(&ld, &q, &qn, h)[0];
            assert_abs_diff_eq!(p, p_ref, epsilon = 1e-12);
            qp = q;
            q = qn;
        }
    }

    #[test]
    fn momentum_boundary_solve_inverts_legendre() {
        let ld = spring(1.0, 1.0);
        let p0 = v(0.4);
        let q1 = step_from_momentum(&ld, &v(1.0), &p0, v(1.04), 0.1, None, &NewtonOptions::default()).unwrap();
        assert_abs_diff_eq!(legendre_minus(&ld, &v(1.0), &q1, 0.1)[0], 0.4, epsilon = 1e-12);
    }

    fn global_error(h: f64) -> f64 {
        // q(t) = √2 cos t for m = κ = 1, integrated to t = 2π.
        let ld = spring(1.0, 1.0);
        let opts = NewtonOptions::default();
        let n = (2.0 * std::f64::consts::PI / h).round() as usize;
        let q0 = v(2f64.sqrt());
        let q1 = step_from_momentum(&ld, &q0, &v(0.0), q0.clone(), h, None, &opts).unwrap();
        let (mut qp, mut q) = (q0, q1);
        let mut err: f64 = 0.0;
        for k in 2..=n {
            let qn = del_step(&ld, &qp, &q, h, None, &opts).unwrap();
            err = err.max((qn[0] - 2f64.sqrt() * (k as f64 * h).cos()).abs());
            qp = q;
            q = qn;
        }
        err
    }

    #[test]
    fn midpoint_rule_is_second_order() {
        let h = 2.0 * std::f64::consts::PI / 400.0;
        let ratio = global_error(h) / global_error(h / 2.0);
        assert!((ratio - 4.0).abs() <= 0.6, "ratio {ratio}");
    }
}
