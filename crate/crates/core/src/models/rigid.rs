//! Rigid body on SE(3) in a dumbbell (two point-mass) central gravity field.

use crate::error::{Error, Result};
use crate::geom::{jd_from_inertia, solve_skew_so3, Mat3, Rot3, SkewSolveOptions, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidParams {
    pub m: f64,
    pub j: Mat3,
    pub jd: Mat3,
    pub j_inv: Mat3,
}

impl RigidParams {
    /// Requires `J` symmetric positive definite.
    pub fn new(m: f64, j: Mat3) -> Result<Self> {
        if m.is_nan() || m <= 0.0 {
            return Err(Error::InvalidInput(format!("mass must be positive, got {m}")));
        }
        if (j - j.transpose()).norm() > 1e-12 * j.norm() {
            return Err(Error::InvalidInput("inertia matrix is not symmetric".into()));
        }
        if j.cholesky().is_none() {
            return Err(Error::InvalidInput("inertia matrix is not positive definite".into()));
        }
        let j_inv = j.try_inverse().expect("positive definite");
        Ok(RigidParams {
            m,
            j,
            jd: jd_from_inertia(&j),
            j_inv,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidState {
    pub r: Rot3,
    pub x: Vec3,
    /// body frame, rad/s
    pub omega: Vec3,
    /// inertial frame, m/s
    pub v: Vec3,
}

/// `U = -μ Σᵢ mᵢ / |x + R ρᵢ|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DumbbellPotential {
    pub mu: f64,
    pub masses: [f64; 2],
    pub offsets: [Vec3; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialEval {
    pub u: f64,
    /// `∂U/∂x`
    pub du_dx: Vec3,
    /// Body-frame moment, `M̂ = ∂U/∂Rᵀ R - Rᵀ ∂U/∂R`.
    pub moment: Vec3,
}

impl DumbbellPotential {
    /// Two equal masses at `±(length/2) e₁`.
    pub fn symmetric(mu: f64, mass_each: f64, length: f64) -> Self {
        let d = Vec3::x() * (0.5 * length);
        DumbbellPotential {
            mu,
            masses: [mass_each; 2],
            offsets: [d, -d],
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.masses[0] + self.masses[1]
    }

    /// Inertia about the origin of the body frame, treating each end as a
    /// uniform sphere of the given radius.
    pub fn inertia(&self, sphere_radius: f64) -> Mat3 {
        let mut j = Mat3::zeros();
        for (&m, rho) in self.masses.iter().zip(&self.offsets) {
            j += (Mat3::identity() * rho.norm_squared() - rho * rho.transpose()) * m;
            j += Mat3::identity() * (0.4 * m * sphere_radius * sphere_radius);
        }
        j
    }

    pub fn eval(&self, r: &Rot3, x: &Vec3) -> Result<PotentialEval> {
        let mut out = PotentialEval {
            u: 0.0,
            du_dx: Vec3::zeros(),
            moment: Vec3::zeros(),
        };
        for (&m, rho) in self.masses.iter().zip(&self.offsets) {
            let ri = x + r.rotate(rho);
            let d = ri.norm();
            if d < 1e-9 {
                return Err(Error::SingularConfiguration(format!(
                    "point mass at distance {d:e} from the attracting center"
                )));
            }
            let gi = ri * (self.mu * m / (d * d * d));
            out.u -= self.mu * m / d;
            out.du_dx += gi;
            out.moment += r.matrix().tr_mul(&gi).cross(rho);
        }
        Ok(out)
    }
}

/// One step of the Lie group variational integrator on SE(3):
///
/// ```text
/// h(JΩ)^ + (h²/2) M^ = F Jd - Jd Fᵀ
/// R₊  = R F
/// x₊  = x + h v - (h²/2m) ∂U/∂x
/// JΩ₊ = FᵀJΩ + (h/2) FᵀM + (h/2) M₊
/// m v₊ = m v - (h/2)(∂U/∂x + ∂U₊/∂x₊)
/// ```
pub fn step(p: &RigidParams, pot: &DumbbellPotential, s: &RigidState, h: f64) -> Result<RigidState> {
    let e0 = pot.eval(&s.r, &s.x)?;
    step_with(p, pot, s, &e0, h, &SkewSolveOptions::default()).map(|(s, _)| s)
}

/// [`step`] reusing the potential evaluated at `s`; also returns the
/// evaluation at the new state.
pub fn step_with(
    p: &RigidParams,
    pot: &DumbbellPotential,
    s: &RigidState,
    e0: &PotentialEval,
    h: f64,
    opts: &SkewSolveOptions,
) -> Result<(RigidState, PotentialEval)> {
    let jw = p.j * s.omega;
    let a = jw * h + e0.moment * (0.5 * h * h);
    let f = solve_skew_so3(&a, &p.jd, opts)?;
    let r = s.r * f;
    let x = s.x + s.v * h - e0.du_dx * (0.5 * h * h / p.m);
    let e1 = pot.eval(&r, &x)?;
    let ft = f.matrix().transpose();
    let jw1 = ft * (jw + e0.moment * (0.5 * h)) + e1.moment * (0.5 * h);
    let v = s.v - (e0.du_dx + e1.du_dx) * (0.5 * h / p.m);
    Ok((
        RigidState {
            r,
            x,
            omega: p.j_inv * jw1,
            v,
        },
        e1,
    ))
}

/// `½ m |v|² + ½ Ω·JΩ + U`
pub fn energy(p: &RigidParams, pot: &DumbbellPotential, s: &RigidState) -> Result<f64> {
    let u = pot.eval(&s.r, &s.x)?.u;
    Ok(0.5 * p.m * s.v.norm_squared() + 0.5 * s.omega.dot(&(p.j * s.omega)) + u)
}

pub fn rollout(
    p: &RigidParams,
    pot: &DumbbellPotential,
    s0: RigidState,
    h: f64,
    n: usize,
) -> Result<Vec<RigidState>> {
    let opts = SkewSolveOptions::default();
    let mut out = Vec::with_capacity(n + 1);
    out.push(s0);
    let mut s = s0;
    let mut e = pot.eval(&s.r, &s.x)?;
    for _ in 0..n {
        (s, e) = step_with(p, pot, &s, &e, h, &opts)?;
        out.push(s);
    }
    Ok(out)
}

/// Near-circular orbit of radius `radius` in the `e₁e₂` plane with a body
/// spin `spin` (body frame), starting at `x = radius·e₁`.
pub fn circular_orbit_state(pot: &DumbbellPotential, radius: f64, spin: Vec3) -> RigidState {
    let speed = (pot.mu / radius).sqrt();
    RigidState {
        r: Rot3::identity(),
        x: Vec3::x() * radius,
        omega: spin,
        v: Vec3::y() * speed,
    }
}
