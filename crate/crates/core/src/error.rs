use thiserror::Error;

/// Errors raised by the analytic solvers, special functions and the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
    },

    #[error("singularity: {0}")]
    Singularity(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("no positive equilibrium: R0 = {r0} <= 1")]
    NoPositiveEquilibrium { r0: f64 },

    #[error("no root in bracket [{lo}, {hi}]")]
    NoRootInBracket { lo: f64, hi: f64 },

    #[error("{count} sign changes detected on the scan grid, root is not unique")]
    MultipleRootsDetected { count: usize },

    #[error("equation is degenerate: residual {residual} is independent of the unknown")]
    DegenerateEquation { residual: f64 },

    #[error("series truncation exceeded hard cap of {cap} terms")]
    TruncationFailure { cap: usize },

    #[error("all {n_traj} trajectories went extinct")]
    AllExtinct { n_traj: usize },

    #[error("event cap of {cap} exceeded at t = {time}")]
    EventCapExceeded { cap: usize, time: f64 },

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
