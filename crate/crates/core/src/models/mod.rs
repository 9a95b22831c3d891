//! Example systems and their discrete integrators.

pub mod mass_spring;
pub mod planar;
pub mod rigid;
pub mod spherical;

pub use mass_spring::{MassSpringParams, MassSpringState};
pub use planar::{PlanarParams, PlanarPendState};
pub use rigid::{DumbbellPotential, PotentialEval, RigidParams, RigidState};
pub use spherical::{SphericalParams, SphericalPendState};

/// A state paired with the parameters needed to evaluate its energy.
#[derive(Debug, Clone, Copy)]
pub enum TaggedState<'a> {
    MassSpring(&'a MassSpringParams, &'a MassSpringState),
    Planar(&'a PlanarParams, &'a PlanarPendState),
    Spherical(&'a SphericalParams, &'a SphericalPendState),
    Rigid(&'a RigidParams, &'a DumbbellPotential, &'a RigidState),
}

/// Total energy in joules.
pub fn energy(s: TaggedState<'_>) -> crate::Result<f64> {
    Ok(match s {
        TaggedState::MassSpring(p, s) => mass_spring::energy(p, s),
        TaggedState::Planar(p, s) => planar::energy(p, s),
        TaggedState::Spherical(p, s) => spherical::energy(p, s),
        TaggedState::Rigid(p, u, s) => rigid::energy(p, u, s)?,
    })
}
