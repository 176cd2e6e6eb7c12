use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid Henneberg step: {0}")]
    InvalidStep(String),

    #[error("degenerate edge ({i}, {j}): endpoints closer than {tol:e}")]
    DegenerateEdge { i: usize, j: usize, tol: f64 },

    #[error("degenerate sites: robots {i} and {j} are closer than {tol:e}")]
    DegenerateSites { i: usize, j: usize, tol: f64 },

    #[error("degenerate mass: integrated density {mass:e} is below {tol:e}")]
    DegenerateMass { mass: f64, tol: f64 },

    #[error("no steady state found for position {position:?} after {iterations} Newton iterations")]
    NoSteadyState { position: Vec<f64>, iterations: usize },

    #[error("pair (A, B) is not stabilizable: {0}")]
    NotStabilizable(String),

    #[error("scaling constant c = {c} violates c < 1 - |lambda_max|^2 = {bound}")]
    InvalidScaling { c: f64, bound: f64 },

    #[error("terminal set is empty: {0}")]
    TerminalSetEmpty(String),

    #[error("recovery infeasible after losing vertex {lost}: {reason}")]
    RecoveryInfeasible { lost: usize, reason: String },

    #[error("rigidity recovery is only supported in the plane, got dimension {0}")]
    UnsupportedDimension(usize),

    #[error("optimal control problem infeasible: {0}")]
    Infeasible(String),

    #[error("recursive feasibility violated at step {step} for robot {robot}: {detail}")]
    RecursiveFeasibility {
        step: usize,
        robot: usize,
        detail: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::InvalidStep(_)
                | Error::Config(_)
                | Error::Json(_)
                | Error::Io { .. }
                | Error::UnsupportedDimension(_)
        )
    }
}
