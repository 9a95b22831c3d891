//! Discrete mechanics toolkit: variational and Lie group variational
//! integrators, reference Runge-Kutta baselines, discrete optimal control
//! (direct and indirect), and discrete controlled-Lagrangian stabilization.

pub mod baselines;
pub mod clag;
pub mod dmech;
pub mod error;
pub mod geom;
pub mod models;
pub mod optctrl;
mod solve;

pub use error::{Error, Result};
pub use solve::NewtonOptions;
