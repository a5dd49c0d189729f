use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("permeability bound violated: k = {value} at (x1={x1}, x2={x2}, x3={x3}, t={t}) outside [{lower}, {upper}]")]
    BoundsViolation {
        value: f64,
        lower: f64,
        upper: f64,
        x1: f64,
        x2: f64,
        x3: f64,
        t: f64,
    },

    #[error("permeability time-derivative envelope exceeded: |dk/dt| = {observed} > K(t) = {envelope} at t={t}")]
    EnvelopeViolation { observed: f64, envelope: f64, t: f64 },

    #[error("permeability evaluation failed at (x1={x1}, x2={x2}, x3={x3}, t={t}): got {value}")]
    PermeabilityEval {
        value: f64,
        x1: f64,
        x2: f64,
        x3: f64,
        t: f64,
    },

    #[error("size error: {0}")]
    Size(String),

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("invalid time step: {0}")]
    Step(String),

    #[error("source regularity: {0}")]
    Regularity(String),

    #[error("singular resolvent block at mode ({m}, {n})")]
    SingularBlock { m: usize, n: usize },

    #[error("unsupported permeability for manufactured solution: {0}")]
    UnsupportedPermeability(String),

    #[error("layout mismatch: {0}")]
    Layout(String),
}
