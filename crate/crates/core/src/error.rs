use thiserror::Error;

/// Errors produced by the engine.
#[derive(Debug, Error)]
pub enum DimerError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Bi-orthogonality between left and right eigenvectors could not be
    /// established below the residual limit.
    #[error(
        "ill-conditioned spectrum: bi-orthogonality residual {residual:.3e} exceeds {limit:.3e}"
    )]
    IllConditionedSpectrum { residual: f64, limit: f64 },

    #[error("degenerate steady state: found {0} zero modes instead of 1")]
    DegenerateSteadyState(usize),

    /// A matrix element of the assembled Lindbladian connects two different
    /// gauge sectors. This signals an indexing bug, not roundoff.
    #[error("gauge-sector leakage of {magnitude:.3e} between sectors {nu_row} and {nu_col}")]
    SectorLeakage {
        nu_row: i64,
        nu_col: i64,
        magnitude: f64,
    },

    #[error("eigendecomposition failed: {0}")]
    Eigensolver(String),

    #[error("integrator step size underflow at t = {t:.6e}")]
    StepSizeUnderflow { t: f64 },

    #[error("semiclassical boundary singularity: |Z| = {z:.6e} reached N = {n:.6e}")]
    BoundarySingularity { z: f64, n: f64 },

    #[error("decay-rate fit rejected: {0}")]
    FitRejected(String),
}

pub type Result<T> = std::result::Result<T, DimerError>;
