//! Rotation-group and sphere primitives.
//!
//! Everything the integrators need from SO(2), SO(3) and S²: the hat/vee
//! isomorphism, the exponential and logarithm on SO(3), orthogonality
//! diagnostics, and the two implicit "skew equations" that determine the
//! relative rotation of a Lie group variational step:
//!
//! * SO(2): `F - Fᵀ = ĉ`
//! * SO(3): `F·Jd - Jd·Fᵀ = â`
//!
//! All functions are pure.

use std::ops::Mul;

use nalgebra::{Matrix2, Matrix3, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Tolerance used when checking the group invariants of `Rot2`/`Rot3`.
pub const GROUP_TOL: f64 = 1e-12;

/// Maps `v` to the antisymmetric matrix with `hat3(v) * y == v.cross(y)`.
pub fn hat3(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat3`]. Only the antisymmetric part of `m` is read.
pub fn vee3(m: &Mat3) -> Vec3 {
    Vec3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// 2×2 hat map: scalar to `[[0, -w], [w, 0]]`.
pub fn hat2(w: f64) -> Matrix2<f64> {
    Matrix2::new(0.0, -w, w, 0.0)
}

/// `‖I - mᵀm‖_F`. Zero exactly when `m` has orthonormal columns.
pub fn ortho_error(m: &Mat3) -> f64 {
    (Mat3::identity() - m.transpose() * m).norm()
}

/// Vector of three angular rates or moments, identified with so(3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Skew3(pub Vec3);

impl Skew3 {
    pub fn hat(&self) -> Mat3 {
        hat3(&self.0)
    }

    pub fn from_matrix(m: &Mat3) -> Self {
        Skew3(vee3(m))
    }
}

/// Element of SO(2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rot2 {
    m: Matrix2<f64>,
}

impl Rot2 {
    pub fn identity() -> Self {
        Rot2 {
            m: Matrix2::identity(),
        }
    }

    /// Counter-clockwise rotation by `theta` radians.
    pub fn from_angle(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Rot2 {
            m: Matrix2::new(c, -s, s, c),
        }
    }

    /// Wraps `m` after checking `mᵀm = I` and `det m = 1` to [`GROUP_TOL`].
    pub fn from_matrix(m: Matrix2<f64>) -> Result<Self> {
        let err = (Matrix2::identity() - m.transpose() * m).norm();
        if err > GROUP_TOL || (m.determinant() - 1.0).abs() > GROUP_TOL {
            return Err(Error::InvalidInput(format!(
                "matrix is not in SO(2) (orthogonality error {err:e})"
            )));
        }
        Ok(Rot2 { m })
    }

    pub fn matrix(&self) -> &Matrix2<f64> {
        &self.m
    }

    /// Rotation angle in `(-π, π]`.
    pub fn angle(&self) -> f64 {
        self.m[(1, 0)].atan2(self.m[(0, 0)])
    }

    pub fn transpose(&self) -> Self {
        Rot2 {
            m: self.m.transpose(),
        }
    }

    pub fn ortho_error(&self) -> f64 {
        (Matrix2::identity() - self.m.transpose() * self.m).norm()
    }
}

impl Mul for Rot2 {
    type Output = Rot2;

    fn mul(self, rhs: Rot2) -> Rot2 {
        Rot2 { m: self.m * rhs.m }
    }
}

/// Element of SO(3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rot3 {
    m: Mat3,
}

impl Rot3 {
    pub fn identity() -> Self {
        Rot3 { m: Mat3::identity() }
    }

    pub fn exp(v: &Vec3) -> Self {
        Rot3 { m: exp_so3(v) }
    }

    /// Wraps `m` after checking the group invariants to [`GROUP_TOL`].
    pub fn from_matrix(m: Mat3) -> Result<Self> {
        let err = ortho_error(&m);
        if err > GROUP_TOL || (m.determinant() - 1.0).abs() > GROUP_TOL {
            return Err(Error::InvalidInput(format!(
                "matrix is not in SO(3) (orthogonality error {err:e})"
            )));
        }
        Ok(Rot3 { m })
    }

    /// Wraps `m` without checking. Products of valid rotations stay valid up
    /// to rounding, which is what the integrators rely on.
    pub fn from_matrix_unchecked(m: Mat3) -> Self {
        Rot3 { m }
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.m
    }

    pub fn transpose(&self) -> Self {
        Rot3 {
            m: self.m.transpose(),
        }
    }

    pub fn log(&self) -> Result<Vec3> {
        log_so3(self)
    }

    pub fn ortho_error(&self) -> f64 {
        ortho_error(&self.m)
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.m * v
    }
}

impl Mul for Rot3 {
    type Output = Rot3;

    fn mul(self, rhs: Rot3) -> Rot3 {
        Rot3 { m: self.m * rhs.m }
    }
}

impl Mul<&Rot3> for &Rot3 {
    type Output = Rot3;

    fn mul(self, rhs: &Rot3) -> Rot3 {
        Rot3 { m: self.m * rhs.m }
    }
}

/// Point on the unit sphere S².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVec3 {
    q: Vec3,
}

impl UnitVec3 {
    /// Accepts `q` only if `|q·q - 1| ≤ 1e-12`.
    pub fn new(q: Vec3) -> Result<Self> {
        let e = (q.dot(&q) - 1.0).abs();
        if e > GROUP_TOL {
            return Err(Error::InvalidInput(format!(
                "vector is not unit length (|q.q - 1| = {e:e})"
            )));
        }
        Ok(UnitVec3 { q })
    }

    pub fn normalize(q: Vec3) -> Result<Self> {
        let n = q.norm();
        if n.is_nan() || n <= 0.0 || !n.is_finite() {
            return Err(Error::InvalidInput("cannot normalize a zero vector".into()));
        }
        Ok(UnitVec3 { q: q / n })
    }

    pub(crate) fn new_unchecked(q: Vec3) -> Self {
        UnitVec3 { q }
    }

    pub fn vector(&self) -> &Vec3 {
        &self.q
    }

    pub fn unit_length_error(&self) -> f64 {
        (self.q.dot(&self.q) - 1.0).abs()
    }
}

/// Rodrigues formula for the SO(3) exponential.
pub fn exp_so3(v: &Vec3) -> Mat3 {
    let t2 = v.norm_squared();
    let (a, b) = if t2 < 1e-8 {
        // Taylor expansions of sin(t)/t and (1 - cos t)/t²; the next terms are below 1e-20.
        (
            1.0 - t2 / 6.0 + t2 * t2 / 120.0,
            0.5 - t2 / 24.0 + t2 * t2 / 720.0,
        )
    } else {
        let t = t2.sqrt();
        (t.sin() / t, (1.0 - t.cos()) / t2)
    };
    let k = hat3(v);
    Mat3::identity() + k * a + k * k * b
}

/// Minimum trace accepted by [`log_so3`]; anything at or below is within
/// roughly 4e-5 rad of a half turn, where the axis sign is ambiguous.
pub const LOG_TRACE_MIN: f64 = -1.0 + 1e-9;

/// Principal logarithm on SO(3) as a rotation vector with norm below π.
pub fn log_so3(r: &Rot3) -> Result<Vec3> {
    let m = r.matrix();
    let tr = m.trace();
    if tr <= LOG_TRACE_MIN {
        return Err(Error::AngleNearPi { trace: tr });
    }
    let w = vee3(m);
    let s = w.norm();
    let c = 0.5 * (tr - 1.0);
    let theta = s.atan2(c);
    if theta < 1e-4 {
        // theta / sin(theta) ≈ 1 + θ²/6
        return Ok(w * (1.0 + theta * theta / 6.0));
    }
    if theta < 2.5 {
        return Ok(w * (theta / s));
    }
    // Close to a half turn the antisymmetric part is small; take the axis
    // from the symmetric part and the sign from `w`.
    let sym = (m + m.transpose()) * 0.5;
    let nn = (sym - Mat3::identity() * c) / (1.0 - c);
    let i = (0..3)
        .max_by(|&a, &b| nn[(a, a)].total_cmp(&nn[(b, b)]))
        .unwrap_or(0);
    let mut axis: Vec3 = nn.column(i).into();
    axis /= axis.norm();
    if axis.dot(&w) < 0.0 {
        axis = -axis;
    }
    Ok(axis * theta)
}

/// Solves `F - Fᵀ = ĉ` on SO(2): `F` is the rotation by `asin(c/2)`.
///
/// Only the principal branch is returned; `|c/2| > 1` has no solution and is
/// reported as a step that is too large for the current angular rate.
pub fn solve_skew_so2(c: f64) -> Result<Rot2> {
    let s = 0.5 * c;
    if s.is_nan() || s.abs() > 1.0 {
        return Err(Error::StepTooLarge { value: s });
    }
    Ok(Rot2::from_angle(s.asin()))
}

/// Non-standard inertia `Jd = ½ tr(J) I - J`.
pub fn jd_from_inertia(j: &Mat3) -> Mat3 {
    Mat3::identity() * (0.5 * j.trace()) - j
}

/// Stopping rules for [`solve_skew_so3`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewSolveOptions {
    /// Frobenius norm tolerance on `F·Jd - Jd·Fᵀ - â`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SkewSolveOptions {
    fn default() -> Self {
        SkewSolveOptions {
            tol: 1e-13,
            max_iter: 50,
        }
    }
}

fn skew_residual(f: &Mat3, jd: &Mat3, a: &Vec3) -> Vec3 {
    vee3(&(f * jd - jd * f.transpose())) - a
}

/// Derivative of `vee(F Jd - Jd Fᵀ)` under `F -> F exp(ξ̂)`, as a 3×3 matrix in ξ.
pub(crate) fn skew_jacobian(f: &Mat3, jd: &Mat3) -> Mat3 {
    let mut b = Mat3::zeros();
    for i in 0..3 {
        let e = hat3(&Vec3::ith(i, 1.0));
        let col = vee3(&(f * e * jd + jd * e * f.transpose()));
        b.set_column(i, &col);
    }
    b
}

/// Solves `F·Jd - Jd·Fᵀ = hat3(a)` for `F ∈ SO(3)` near the identity.
///
/// Newton's method on the group with right-trivialized corrections
/// `F ← F exp(δ)`, started from the linearized solution `exp(J⁻¹a)` where
/// `J = tr(Jd) I - Jd`. The Jacobian is exact. A backtracking safeguard halves
/// the correction when it fails to reduce the residual.
pub fn solve_skew_so3(a: &Vec3, jd: &Mat3, opts: &SkewSolveOptions) -> Result<Rot3> {
    let tol = opts.tol;
    let sqrt2 = std::f64::consts::SQRT_2;
    let j = Mat3::identity() * jd.trace() - jd;
    let f0 = match j.try_inverse() {
        Some(ji) => ji * a,
        None => Vec3::zeros(),
    };
    let mut f = exp_so3(&f0);
    let mut r = skew_residual(&f, jd, a);
    let mut rn = sqrt2 * r.norm();
    for _ in 0..opts.max_iter {
        if rn <= tol {
            return Ok(Rot3::from_matrix_unchecked(f));
        }
        let b = skew_jacobian(&f, jd);
        let Some(delta) = b.lu().solve(&(-r)) else {
            break;
        };
        let mut step = 1.0;
        let mut accepted = false;
        while step > 1e-10 {
            let cand = f * exp_so3(&(delta * step));
            let rc = skew_residual(&cand, jd, a);
            let rcn = sqrt2 * rc.norm();
            if rcn < rn {
                f = cand;
                r = rc;
                rn = rcn;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if rn <= tol {
        return Ok(Rot3::from_matrix_unchecked(f));
    }
    Err(Error::NoConvergence {
        solver: "skew solve on SO(3)",
        iterations: opts.max_iter,
        residual: rn,
    })
}
