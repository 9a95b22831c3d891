//! Continuous equations of motion as first-order ODEs, with conversions
//! between the packed ODE vectors and model states.

use nalgebra::{DVector, Vector4};

use super::{quat_kinematics_rhs, QuatAttitude};
use crate::geom::{hat3, Mat3, Rot3, UnitVec3, Vec3};
use crate::models::{
    DumbbellPotential, MassSpringParams, MassSpringState, PlanarParams, PlanarPendState, RigidParams, RigidState,
    SphericalParams, SphericalPendState,
};

type Vector = DVector<f64>;

/// `y = [q, q̇]`
pub fn mass_spring_rhs(p: MassSpringParams) -> impl Fn(f64, &Vector) -> Vector {
    move |_t, y| Vector::from_vec(vec![y[1], -p.kappa / p.m * y[0]])
}

pub fn mass_spring_pack(s: &MassSpringState) -> Vector {
    Vector::from_vec(vec![s.q, s.qdot])
}

pub fn mass_spring_unpack(y: &Vector) -> MassSpringState {
    MassSpringState { q: y[0], qdot: y[1] }
}

/// `y = [θ, Ω]`, `θ̈ = -(g/l) sin θ`
pub fn planar_rhs(p: PlanarParams) -> impl Fn(f64, &Vector) -> Vector {
    move |_t, y| Vector::from_vec(vec![y[1], -p.g / p.l * y[0].sin()])
}

pub fn planar_pack(s: &PlanarPendState) -> Vector {
    Vector::from_vec(vec![s.r.angle(), s.omega])
}

pub fn planar_unpack(y: &Vector) -> PlanarPendState {
    PlanarPendState::from_angle(y[0], y[1])
}

/// `y = [q, ω]`, `ω̇ = (g/l) q×e₃`, `q̇ = ω×q`
pub fn spherical_rhs(p: SphericalParams) -> impl Fn(f64, &Vector) -> Vector {
    move |_t, y| {
        let q = Vec3::new(y[0], y[1], y[2]);
        let w = Vec3::new(y[3], y[4], y[5]);
        let qd = w.cross(&q);
        let wd = q.cross(&Vec3::z()) * (p.g / p.l);
        Vector::from_vec(vec![qd.x, qd.y, qd.z, wd.x, wd.y, wd.z])
    }
}

pub fn spherical_pack(s: &SphericalPendState) -> Vector {
    let q = s.q.vector();
    Vector::from_vec(vec![q.x, q.y, q.z, s.omega.x, s.omega.y, s.omega.z])
}

/// The sphere constraint is not enforced on the returned state.
pub fn spherical_unpack(y: &Vector) -> SphericalPendState {
    SphericalPendState {
        q: UnitVec3::new_unchecked(Vec3::new(y[0], y[1], y[2])),
        omega: Vec3::new(y[3], y[4], y[5]),
    }
}

fn rigid_rates(p: &RigidParams, pot: &DumbbellPotential, r: &Mat3, x: &Vec3, w: &Vec3) -> (Vec3, Vec3) {
    match pot.eval(&Rot3::from_matrix_unchecked(*r), x) {
        Ok(e) => {
            let wd = p.j_inv * (e.moment - w.cross(&(p.j * w)));
            (wd, -e.du_dx / p.m)
        }
        Err(_) => (Vec3::repeat(f64::NAN), Vec3::repeat(f64::NAN)),
    }
}

/// `y = [vec(R) (column-major), x, Ω, v]` (18 entries), `Ṙ = RΩ̂`.
pub fn rigid_matrix_rhs(p: RigidParams, pot: DumbbellPotential) -> impl Fn(f64, &Vector) -> Vector {
    move |_t, y| {
        let r = Mat3::from_column_slice(&y.as_slice()[0..9]);
        let x = Vec3::new(y[9], y[10], y[11]);
        let w = Vec3::new(y[12], y[13], y[14]);
        let v = Vec3::new(y[15], y[16], y[17]);
        let rd = r * hat3(&w);
        let (wd, vd) = rigid_rates(&p, &pot, &r, &x, &w);
        let mut out = Vector::zeros(18);
        out.as_mut_slice()[0..9].copy_from_slice(rd.as_slice());
        out.fixed_rows_mut::<3>(9).copy_from(&v);
        out.fixed_rows_mut::<3>(12).copy_from(&wd);
        out.fixed_rows_mut::<3>(15).copy_from(&vd);
        out
    }
}

pub fn rigid_matrix_pack(s: &RigidState) -> Vector {
    let mut y = Vector::zeros(18);
    y.as_mut_slice()[0..9].copy_from_slice(s.r.matrix().as_slice());
    y.fixed_rows_mut::<3>(9).copy_from(&s.x);
    y.fixed_rows_mut::<3>(12).copy_from(&s.omega);
    y.fixed_rows_mut::<3>(15).copy_from(&s.v);
    y
}

/// The attitude matrix is returned as integrated, not reorthogonalized.
pub fn rigid_matrix_unpack(y: &Vector) -> RigidState {
    RigidState {
        r: Rot3::from_matrix_unchecked(Mat3::from_column_slice(&y.as_slice()[0..9])),
        x: Vec3::new(y[9], y[10], y[11]),
        omega: Vec3::new(y[12], y[13], y[14]),
        v: Vec3::new(y[15], y[16], y[17]),
    }
}

fn quat_of(y: &Vector) -> QuatAttitude {
    QuatAttitude {
        p: Vector4::new(y[0], y[1], y[2], y[3]),
    }
}

/// `y = [p, x, Ω, v]` (13 entries) with `ṗ = ½ p ⊗ (0, Ω)`.
pub fn rigid_quat_rhs(p: RigidParams, pot: DumbbellPotential) -> impl Fn(f64, &Vector) -> Vector {
    move |_t, y| {
        let q = quat_of(y);
        let x = Vec3::new(y[4], y[5], y[6]);
        let w = Vec3::new(y[7], y[8], y[9]);
        let v = Vec3::new(y[10], y[11], y[12]);
        let pd = quat_kinematics_rhs(&q, &w);
        let (wd, vd) = rigid_rates(&p, &pot, &q.to_matrix(), &x, &w);
        let mut out = Vector::zeros(13);
        out.fixed_rows_mut::<4>(0).copy_from(&pd);
        out.fixed_rows_mut::<3>(4).copy_from(&v);
        out.fixed_rows_mut::<3>(7).copy_from(&wd);
        out.fixed_rows_mut::<3>(10).copy_from(&vd);
        out
    }
}

pub fn rigid_quat_pack(s: &RigidState) -> Vector {
    let mut y = Vector::zeros(13);
    y.fixed_rows_mut::<4>(0).copy_from(&QuatAttitude::from_rot3(&s.r).p);
    y.fixed_rows_mut::<3>(4).copy_from(&s.x);
    y.fixed_rows_mut::<3>(7).copy_from(&s.omega);
    y.fixed_rows_mut::<3>(10).copy_from(&s.v);
    y
}

/// Converts the (unnormalized) quaternion with [`QuatAttitude::to_matrix`].
pub fn rigid_quat_unpack(y: &Vector) -> RigidState {
    RigidState {
        r: Rot3::from_matrix_unchecked(quat_of(y).to_matrix()),
        x: Vec3::new(y[4], y[5], y[6]),
        omega: Vec3::new(y[7], y[8], y[9]),
        v: Vec3::new(y[10], y[11], y[12]),
    }
}
