//! Discrete optimal control: direct (DMOC) and indirect (shooting).

pub mod bfgs;
pub mod direct;
pub mod indirect;
