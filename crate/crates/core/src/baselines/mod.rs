//! Non-geometric reference integrators and drift diagnostics.

mod dopri;
pub mod systems;

pub use dopri::{rk45_fixed, rk45_integrate, OdeProblem, Rk45Options, Trajectory};

use nalgebra::Vector4;

use crate::geom::{hat3, Mat3, Rot3, Vec3};

/// Attitude quaternion, scalar first. Not renormalized during integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuatAttitude {
    pub p: Vector4<f64>,
}

impl QuatAttitude {
    pub fn identity() -> Self {
        QuatAttitude {
            p: Vector4::new(1.0, 0.0, 0.0, 0.0),
        }
    }

    /// Unit quaternion of a rotation matrix (Shepperd's method).
    pub fn from_rot3(r: &Rot3) -> Self {
        let m = r.matrix();
        let tr = m.trace();
        let cand = [tr, m[(0, 0)], m[(1, 1)], m[(2, 2)]];
        let i = (0..4).max_by(|&a, &b| cand[a].total_cmp(&cand[b])).unwrap_or(0);
        let p = match i {
            0 => {
                let s = 2.0 * (1.0 + tr).sqrt();
                Vector4::new(0.25 * s, (m[(2, 1)] - m[(1, 2)]) / s, (m[(0, 2)] - m[(2, 0)]) / s, (m[(1, 0)] - m[(0, 1)]) / s)
            }
            1 => {
                let s = 2.0 * (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt();
                Vector4::new((m[(2, 1)] - m[(1, 2)]) / s, 0.25 * s, (m[(0, 1)] + m[(1, 0)]) / s, (m[(0, 2)] + m[(2, 0)]) / s)
            }
            2 => {
                let s = 2.0 * (1.0 - m[(0, 0)] + m[(1, 1)] - m[(2, 2)]).sqrt();
                Vector4::new((m[(0, 2)] - m[(2, 0)]) / s, (m[(0, 1)] + m[(1, 0)]) / s, 0.25 * s, (m[(1, 2)] + m[(2, 1)]) / s)
            }
            _ => {
                let s = 2.0 * (1.0 - m[(0, 0)] - m[(1, 1)] + m[(2, 2)]).sqrt();
                Vector4::new((m[(1, 0)] - m[(0, 1)]) / s, (m[(0, 2)] + m[(2, 0)]) / s, (m[(1, 2)] + m[(2, 1)]) / s, 0.25 * s)
            }
        };
        QuatAttitude { p }
    }

    /// `R = (p₀² - |p_v|²) I + 2 p_v p_vᵀ + 2 p₀ p̂_v`, without normalizing `p`.
    /// For `|p| ≠ 1` the result is `|p|²` times a rotation, which is what
    /// exposes the drift in `ortho_error`.
    pub fn to_matrix(&self) -> Mat3 {
        let p0 = self.p[0];
        let pv = Vec3::new(self.p[1], self.p[2], self.p[3]);
        Mat3::identity() * (p0 * p0 - pv.norm_squared()) + pv * pv.transpose() * 2.0 + hat3(&pv) * (2.0 * p0)
    }
}

/// `ṗ = ½ p ⊗ (0, Ω)` with `Ω` in the body frame.
pub fn quat_kinematics_rhs(p: &QuatAttitude, omega: &Vec3) -> Vector4<f64> {
    let p0 = p.p[0];
    let pv = Vec3::new(p.p[1], p.p[2], p.p[3]);
    let v = omega * p0 + pv.cross(omega);
    Vector4::new(-pv.dot(omega), v.x, v.y, v.z) * 0.5
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftStats {
    /// `mean |sᵢ - s₀|`
    pub mean_abs_dev: f64,
    /// Least-squares slope of `sᵢ` against the index `i`.
    pub slope: f64,
}

/// Panics if `series.len() < 2`.
pub fn drift_stats(series: &[f64]) -> DriftStats {
    assert!(series.len() >= 2, "drift_stats needs at least two samples");
    let n = series.len() as f64;
    let s0 = series[0];
    let mean_abs_dev = series.iter().map(|s| (s - s0).abs()).sum::<f64>() / n;
    let im = (n - 1.0) / 2.0;
    let sm = series.iter().map(|s| s - s0).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, s) in series.iter().enumerate() {
        let dx = i as f64 - im;
        sxy += dx * (s - s0 - sm);
        sxx += dx * dx;
    }
    DriftStats {
        mean_abs_dev,
        slope: sxy / sxx,
    }
}
