//! Planar pendulum on SO(2). `R = I` is the hanging attitude and
//! `e₂ᵀ R e₁ = sin θ`.

use crate::error::Result;
use crate::geom::{solve_skew_so2, Rot2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarParams {
    pub m: f64,
    pub l: f64,
    pub g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarPendState {
    pub r: Rot2,
    /// rad/s
    pub omega: f64,
}

impl PlanarPendState {
    pub fn from_angle(theta: f64, omega: f64) -> Self {
        PlanarPendState {
            r: Rot2::from_angle(theta),
            omega,
        }
    }
}

fn sin_of(r: &Rot2) -> f64 {
    r.matrix()[(1, 0)]
}

/// One step of the discrete Hamiltonian map:
///
/// ```text
/// F - Fᵀ = (2hΩ - (h²g/l) e₂ᵀRe₁)^
/// R₊ = R F
/// Ω₊ = Ω - (hg/2l)(e₂ᵀRe₁ + e₂ᵀR₊e₁)
/// ```
pub fn step(p: &PlanarParams, s: &PlanarPendState, h: f64) -> Result<PlanarPendState> {
    let gl = p.g / p.l;
    let s0 = sin_of(&s.r);
    let f = solve_skew_so2(2.0 * h * s.omega - h * h * gl * s0)?;
    let r = s.r * f;
    let omega = s.omega - 0.5 * h * gl * (s0 + sin_of(&r));
    Ok(PlanarPendState { r, omega })
}

/// `½ m l² Ω² - m g l e₂ᵀ R e₂`
pub fn energy(p: &PlanarParams, s: &PlanarPendState) -> f64 {
    0.5 * p.m * p.l * p.l * s.omega * s.omega - p.m * p.g * p.l * s.r.matrix()[(1, 1)]
}

pub fn rollout(p: &PlanarParams, s0: PlanarPendState, h: f64, n: usize) -> Result<Vec<PlanarPendState>> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(s0);
    let mut s = s0;
    for _ in 0..n {
        s = step(p, &s, h)?;
        out.push(s);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    const P: PlanarParams = PlanarParams {
        m: 1.0,
        l: 9.81,
        g: 9.81,
    };

    #[test]
    fn equilibria_are_fixed() {
        let s = PlanarPendState::from_angle(0.0, 0.0);
        assert_eq!(step(&P, &s, 0.03).unwrap(), s);
        let s = PlanarPendState::from_angle(PI, 0.0);
        let t = step(&P, &s, 0.03).unwrap();
        assert_abs_diff_eq!(t.r.angle().abs(), PI, epsilon = 1e-15);
        assert!(t.omega.abs() <= 1e-17);
    }

    #[test]
    fn first_step_from_horizontal() {
        let h = 0.03;
        let s = step(&P, &PlanarPendState::from_angle(FRAC_PI_2, 0.0), h).unwrap();
        // sin Δθ = -(h²g/2l)
        let dtheta = (-0.5 * h * h).asin();
        assert_abs_diff_eq!(s.r.angle(), FRAC_PI_2 + dtheta, epsilon = 1e-15);
        assert!(s.r.ortho_error() <= 1e-13);
    }

    #[test]
    fn three_angles_satisfy_the_discrete_euler_lagrange_equation() {
        // sin Δθ_{k+1} - sin Δθ_k = -(h²g/l) sin θ_{k+1}
        let h = 0.03;
        let traj = rollout(&P, PlanarPendState::from_angle(FRAC_PI_2, 0.0), h, 50).unwrap();
        for w in traj.windows(3) {
            let d0 = (w[1].r.angle() - w[0].r.angle()).sin();
            let d1 = (w[2].r.angle() - w[1].r.angle()).sin();
            let rhs = -h * h * (P.g / P.l) * w[1].r.angle().sin();
            assert_abs_diff_eq!(d1 - d0, rhs, epsilon = 1e-14);
            // small-angle form of the same relation, off by about h·Δθ²/2; |Ω| < 1.5 here
            let th = [w[0].r.angle(), w[1].r.angle(), w[2].r.angle()];
            let lhs = (th[2] - 2.0 * th[1] + th[0]) / h;
            assert_abs_diff_eq!(lhs, -h * (P.g / P.l) * th[1].sin(), epsilon = h * (1.5 * h).powi(2));
        }
    }

    #[test]
    fn step_too_large_is_reported() {
        let err = step(&P, &PlanarPendState::from_angle(0.0, 40.0), 0.03).unwrap_err();
        assert!(matches!(err, Error::StepTooLarge { .. }));
    }

    #[test]
    fn energy_values() {
        assert_abs_diff_eq!(energy(&P, &PlanarPendState::from_angle(FRAC_PI_2, 0.0)), 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(energy(&P, &PlanarPendState::from_angle(0.0, 0.0)), -96.2361, epsilon = 1e-12);
    }
}
