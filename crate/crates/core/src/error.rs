use thiserror::Error;

/// Errors raised by the integrators, solvers and optimizers in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("rotation angle too close to pi for a unique logarithm (trace = {trace})")]
    AngleNearPi { trace: f64 },

    #[error("time step too large for the current rate: |sin| argument {value} exceeds 1")]
    StepTooLarge { value: f64 },

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("singular configuration: {0}")]
    SingularConfiguration(String),

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("optimizer stalled: constraint violation {violation:e} after {iterations} iterations")]
    InfeasibleOrStalled { violation: f64, iterations: usize },

    #[error("matrix is ill-conditioned (condition estimate {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("line search stalled at iteration {iteration} (residual {residual:e})")]
    LineSearchStalled { iteration: usize, residual: f64 },

    #[error("maximum iterations ({0}) reached")]
    MaxIterations(usize),

    #[error("degenerate shaping gain: 1 + gamma*kappa = {0}")]
    DegenerateGain(f64),

    #[error("no sign change of the stability indicator in the bracket ({lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
