use thiserror::Error;

use crate::fit::FitReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a documented precondition.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported dimension n = {got}; this operation requires n = {expected}")]
    UnsupportedDimension { got: usize, expected: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// |sin Phi_1| fell below the separatrix tolerance; I_2 diverges there.
    #[error("separatrix-singular point: |sin Phi1| = {sin_phi1:e}")]
    SeparatrixSingular { sin_phi1: f64 },

    #[error("connection-domain error: log argument D = {d:e} is not positive")]
    ConnectionDomain { d: f64 },

    #[error("correction-domain error: x - 2 u2^2 = {margin:e} is not positive at x = {x}")]
    CorrectionDomain { x: f64, margin: f64 },

    #[error("integration failed at x = {last_good_x}: {reason}")]
    IntegrationFailure { last_good_x: f64, reason: String },

    #[error("ambiguous sign: windowed mean {mean:e} below noise floor {floor:e}")]
    AmbiguousSign { mean: f64, floor: f64 },

    #[error("fit did not converge (best rms residual {:e})", .best.rms_residual)]
    FitFailure { best: Box<FitReport> },

    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for failures of a numerical procedure (as opposed to rejected input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SeparatrixSingular { .. }
                | Error::ConnectionDomain { .. }
                | Error::CorrectionDomain { .. }
                | Error::IntegrationFailure { .. }
                | Error::AmbiguousSign { .. }
                | Error::FitFailure { .. }
                | Error::Internal(_)
        )
    }
}
