//! Mass-spring oscillator `L = ½ m q̇² - ½ κ q²`.

use nalgebra::Matrix2;

use crate::dmech::{Config, Lagrangian};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassSpringParams {
    /// kg
    pub m: f64,
    /// kg/s²
    pub kappa: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassSpringState {
    pub q: f64,
    pub qdot: f64,
}

/// Continuous Lagrangian, for use with [`crate::dmech::Midpoint`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spring {
    pub m: f64,
    pub kappa: f64,
}

impl Lagrangian for Spring {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, q: &Config, qdot: &Config) -> f64 {
        0.5 * self.m * qdot[0] * qdot[0] - 0.5 * self.kappa * q[0] * q[0]
    }

    fn dq(&self, q: &Config, _: &Config) -> Config {
        q * -self.kappa
    }

    fn dqdot(&self, _: &Config, qdot: &Config) -> Config {
        qdot * self.m
    }
}

/// Velocity form of the midpoint variational integrator:
///
/// ```text
/// (1 + h²κ/4m) q₁ = h q̇₀ + (1 - h²κ/4m) q₀
/// q̇₁ = q̇₀ - (hκ/2m)(q₀ + q₁)
/// ```
pub fn step(p: &MassSpringParams, s: &MassSpringState, h: f64) -> MassSpringState {
    let a = h * h * p.kappa / (4.0 * p.m);
    let q = (h * s.qdot + (1.0 - a) * s.q) / (1.0 + a);
    let qdot = s.qdot - h * p.kappa / (2.0 * p.m) * (s.q + q);
    MassSpringState { q, qdot }
}

/// The linear one-step map `(q, q̇) ↦ (q₁, q̇₁)` as a matrix.
pub fn step_matrix(p: &MassSpringParams, h: f64) -> Matrix2<f64> {
    let a = h * h * p.kappa / (4.0 * p.m);
    let b = h * p.kappa / (2.0 * p.m);
    let (q_q, q_v) = ((1.0 - a) / (1.0 + a), h / (1.0 + a));
    Matrix2::new(q_q, q_v, -b * (1.0 + q_q), 1.0 - b * q_v)
}

pub fn energy(p: &MassSpringParams, s: &MassSpringState) -> f64 {
    0.5 * p.m * s.qdot * s.qdot + 0.5 * p.kappa * s.q * s.q
}

/// Runs `n` steps and returns all `n + 1` states.
pub fn rollout(p: &MassSpringParams, s0: MassSpringState, h: f64, n: usize) -> Vec<MassSpringState> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(s0);
    let mut s = s0;
    for _ in 0..n {
        s = step(p, &s, h);
        out.push(s);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const UNIT: MassSpringParams = MassSpringParams { m: 1.0, kappa: 1.0 };

    #[test]
    fn equilibrium_is_fixed() {
        let s = step(&UNIT, &MassSpringState { q: 0.0, qdot: 0.0 }, 0.1);
        assert_eq!(s, MassSpringState { q: 0.0, qdot: 0.0 });
    }

    #[test]
    fn one_step_values() {
        let s = step(&UNIT, &MassSpringState { q: 1.0, qdot: 0.0 }, 0.1);
        // q₁ = 0.9975 / 1.0025, q̇₁ = -0.05 (1 + q₁)
        let q1 = 0.9975 / 1.0025;
        assert_abs_diff_eq!(s.q, q1, epsilon = 1e-15);
        assert_abs_diff_eq!(s.q, 0.995_012_468_827_930_2, epsilon = 1e-15);
        assert_abs_diff_eq!(s.qdot, -0.099_750_623_441_396_5, epsilon = 1e-15);
    }

    #[test]
    fn update_matrix_is_area_preserving() {
        for &(m, k, h) in &[(1.0, 1.0, 0.1), (2.5, 0.3, 0.035), (0.7, 9.0, 0.2)] {
            let p = MassSpringParams { m, kappa: k };
            let a = step_matrix(&p, h);
            assert!((a.determinant() - 1.0).abs() <= 1e-15, "{}", a.determinant());
            let s = MassSpringState { q: 0.3, qdot: -1.1 };
            let t = step(&p, &s, h);
            let u = a * nalgebra::Vector2::new(s.q, s.qdot);
            assert_abs_diff_eq!(t.q, u[0], epsilon = 1e-15);
            assert_abs_diff_eq!(t.qdot, u[1], epsilon = 1e-15);
        }
    }

    #[test]
    fn energy_of_reference_state() {
        let s = MassSpringState { q: 2f64.sqrt(), qdot: 0.0 };
        assert_abs_diff_eq!(energy(&UNIT, &s), 1.0, epsilon = 1e-15);
    }
}
