use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },

    #[error("non-finite input in {0}")]
    NonFinite(&'static str),

    #[error("non-positive density {value} at x = {x}")]
    NonPositiveDensity { x: f64, value: f64 },

    #[error("double-beam initialization needs an even particle count per cell, got {0}")]
    OddBeamSplit(usize),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },

    #[error("potential overflow: |phi| = {max_abs_phi:e} exceeds the exp guard")]
    PotentialOverflow { max_abs_phi: f64 },

    #[error("singular linear system in {0}")]
    Singular(&'static str),

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },

    #[error("Lax-Friedrichs positivity failure at step {step}: n = {value} in cell {cell}")]
    Positivity {
        step: usize,
        cell: usize,
        value: f64,
    },

    #[error("Lax-Friedrichs CFL violated at step {step}: tau = {tau}, limit = {limit}")]
    Cfl { step: usize, tau: f64, limit: f64 },

    #[error("quadrature did not reach tolerance {tolerance:e}")]
    Quadrature { tolerance: f64 },

    #[error("zero reference vector in relative error")]
    ZeroReference,
}

impl Error {
    pub(crate) fn at_step(self, step: usize) -> Self {
        Error::AtStep {
            step,
            source: alloc::boxed::Box::new(self),
        }
    }
}
