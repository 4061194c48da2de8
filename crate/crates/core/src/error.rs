use thiserror::Error;

use crate::elliptic::SolveReport;

/// Errors raised by measure specs, operator builders, solvers and studies.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("integration failed for {what}: estimate {estimate:e}, error bound {error:e} after {intervals} intervals")]
    Integration {
        what: String,
        estimate: f64,
        error: f64,
        intervals: usize,
    },

    #[error("cell touches the measure singularity at the origin: {0}")]
    Singularity(String),

    #[error("unsupported measure: {0}")]
    UnsupportedMeasure(String),

    #[error("Lagrange order {0} is unsupported (need 1 <= k <= 7)")]
    OrderUnsupported(usize),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("{what} did not converge: {detail}")]
    Convergence { what: String, detail: String },

    #[error("elliptic solve did not converge after {} iterations (last residual {:e})", .0.iterations, .0.residual_history.last().copied().unwrap_or(f64::NAN))]
    EllipticConvergence(Box<SolveReport>),

    #[error("explicit step inadmissible: nonlinearity has unbounded slope on [-{range}, {range}] while the explicit measure has mass {mass}")]
    CflImpossible { range: f64, mass: f64 },

    #[error("CFL violated at step {step}: dt = {dt:e} exceeds the admissible {bound:e}")]
    CflViolation { step: usize, dt: f64, bound: f64 },

    #[error("oracle failure: {0}")]
    Oracle(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
