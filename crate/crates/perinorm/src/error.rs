use crate::algebra::MultiIndex;

/// Crate-wide error type. The three families matter for process exit codes:
/// hypothesis violations (a system fails the structural assumptions the
/// reductions need), tolerance failures (an internal cross-check disagreed
/// beyond its budget, which signals an arithmetic bug rather than bad input),
/// and plain usage/schema errors.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("period mismatch: {left} vs {right}")]
    PeriodMismatch { left: f64, right: f64 },

    #[error("dimension mismatch in {context}: {left} vs {right}")]
    DimensionMismatch {
        context: &'static str,
        left: usize,
        right: usize,
    },

    #[error("degree-0 part present in substitution map")]
    DegreeZeroPart,

    #[error("{0}")]
    InvalidArgument(String),

    #[error(
        "non-resonance violation at alpha={alpha}, k={k}, component {j}: |divisor| = {divisor_abs:.3e}"
    )]
    NonResonance {
        alpha: MultiIndex,
        k: i64,
        j: usize,
        divisor_abs: f64,
    },

    #[error("ill-conditioned {what}: condition number {cond:.3e}")]
    IllConditioned { what: String, cond: f64 },

    #[error("tolerance failure in {what}: residual {residual:.3e} exceeds {tol:.3e}")]
    ToleranceFailure {
        what: String,
        residual: f64,
        tol: f64,
    },

    #[error("schema error at {field}: {message}")]
    Schema { field: String, message: String },

    #[error("integration blow-up at t = {t}")]
    NonFiniteState { t: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON parse error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code this error maps to: 2 for hypothesis violations,
    /// 3 for tolerance failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonResonance { .. } | Error::IllConditioned { .. } => 2,
            Error::ToleranceFailure { .. } | Error::NonFiniteState { .. } => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
