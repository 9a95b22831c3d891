//! Spherical pendulum on S². Gravity points along `e₃`, so `q = e₃` hangs.

use crate::error::{Error, Result};
use crate::geom::{UnitVec3, Vec3};

/// Largest `|ω·q|` accepted for a state.
pub const TANGENCY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalParams {
    pub m: f64,
    pub l: f64,
    pub g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalPendState {
    pub q: UnitVec3,
    /// Angular velocity with `ω·q = 0`.
    pub omega: Vec3,
}

impl SphericalPendState {
    /// Rejects non-unit `q` and angular velocities with `|ω·q| > 1e-10`.
    pub fn new(q: Vec3, omega: Vec3) -> Result<Self> {
        let q = UnitVec3::new(q)?;
        let d = omega.dot(q.vector());
        if d.abs() > TANGENCY_TOL {
            return Err(Error::InvalidInput(format!(
                "angular velocity is not tangent to the sphere (omega.q = {d:e})"
            )));
        }
        Ok(SphericalPendState { q, omega })
    }

    /// Drops the component of `ω` along `q` (after normalizing `q`).
    pub fn projected(q: Vec3, omega: Vec3) -> Result<Self> {
        let q = UnitVec3::normalize(q)?;
        let u = q.vector();
        Ok(SphericalPendState {
            q,
            omega: omega - u * omega.dot(u),
        })
    }

    pub fn tangency_error(&self) -> f64 {
        self.omega.dot(self.q.vector()).abs()
    }
}

fn e3() -> Vec3 {
    Vec3::z()
}

/// Explicit discrete flow:
///
/// ```text
/// a  = hω + (h²g/2l) q×e₃
/// q₊ = a×q + √(1 - |a|²) q
/// ω₊ = ω + (hg/2l)(q×e₃ + q₊×e₃)
/// ```
pub fn step(p: &SphericalParams, s: &SphericalPendState, h: f64) -> Result<SphericalPendState> {
    step_forced(p, s, h, &Vec3::zeros(), &Vec3::zeros())
}

/// Step with additional angular accelerations `b0`, `b1` (rad/s²) applied at
/// the left and right ends of the step with the same trapezoidal weights as
/// gravity. `b` must be tangent at the corresponding point for the update to
/// stay on the tangent bundle.
pub fn step_forced(
    p: &SphericalParams,
    s: &SphericalPendState,
    h: f64,
    b0: &Vec3,
    b1: &Vec3,
) -> Result<SphericalPendState> {
    let (q, gl) = (s.q.vector(), p.g / p.l);
    let a = s.omega * h + (q.cross(&e3()) * gl + b0) * (0.5 * h * h);
    let a2 = a.norm_squared();
    if a2.sqrt() > 1.0 - 1e-12 {
        return Err(Error::StepTooLarge { value: a2.sqrt() });
    }
    let q1 = a.cross(q) + q * (1.0 - a2).sqrt();
    let omega = s.omega + (q.cross(&e3()) * gl + q1.cross(&e3()) * gl + b0 + b1) * (0.5 * h);
    Ok(SphericalPendState {
        q: UnitVec3::new_unchecked(q1),
        omega,
    })
}

/// `½ m l² |ω×q|² - m g l e₃·q`
pub fn energy(p: &SphericalParams, s: &SphericalPendState) -> f64 {
    let q = s.q.vector();
    0.5 * p.m * p.l * p.l * s.omega.cross(q).norm_squared() - p.m * p.g * p.l * q.z
}

pub fn rollout(p: &SphericalParams, s0: SphericalPendState, h: f64, n: usize) -> Result<Vec<SphericalPendState>> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(s0);
    let mut s = s0;
    for _ in 0..n {
        s = step(p, &s, h)?;
        out.push(s);
    }
    Ok(out)
}
