use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while validating or computing.
///
/// Variants split into two families: input validation failures and
/// breaches of a numerical contract during computation. [`Error::is_numerical`]
/// tells them apart.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix shape {rows}x{cols} is invalid: {reason}")]
    BadShape {
        rows: usize,
        cols: usize,
        reason: &'static str,
    },

    #[error("matrix is not Hermitian (max |m_st - conj(m_ts)| = {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue = {min_eigenvalue:.3e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("trace {trace:.6e} is outside (0, 1]")]
    BadTrace { trace: f64 },

    #[error("state is not normalized (squared norm = {norm_sqr:.15})")]
    NotNormalized { norm_sqr: f64 },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("dimension {dim} exceeds the configured cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("unknown outcome label {0:?}")]
    UnknownOutcome(String),

    #[error("duplicate outcome label {0:?}")]
    DuplicateOutcome(String),

    #[error("{0}")]
    Empty(&'static str),

    #[error("completeness violated: sum of A^dagger A deviates from identity by {deviation:.3e}")]
    NotComplete { deviation: f64 },

    #[error("POVM elements do not sum to identity (deviation {deviation:.3e})")]
    NotPovm { deviation: f64 },

    #[error("isometry rows are not orthonormal (max |UU^dagger - I| = {deviation:.3e})")]
    NotIsometry { deviation: f64 },

    #[error("matrix is not unitary (max |UU^dagger - I| = {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("padding for outcome {label:?} is not isometric (deviation {deviation:.3e})")]
    BadPadding { label: String, deviation: f64 },

    #[error("outcomes have different output dimensions; non-selective sum is undefined")]
    HeterogeneousOutputDims,

    #[error("no adapted intervention for prior outcome {0:?}")]
    MissingBranch(String),

    #[error("invalid environment model: {0}")]
    BadEnvironment(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("time step must be positive (got {dt})")]
    NegativeTime { dt: f64 },

    #[error("integrated state lost positivity (min eigenvalue = {min_eigenvalue:.3e})")]
    PositivityLoss { min_eigenvalue: f64 },

    #[error("Kraus step {delta_t} too large: I - dt * sum V^dagger V has min eigenvalue {min_eigenvalue:.3e}")]
    StepTooLarge { delta_t: f64, min_eigenvalue: f64 },

    #[error("orthogonal completion failed: produced {found} of {expected} rows")]
    CompletionFailure { expected: usize, found: usize },

    #[error("conditioning on outcome {label:?} with probability {probability:.3e}")]
    ZeroProbabilityBranch { label: String, probability: f64 },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Short stable identifier used in CLI diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NonFinite { .. } => "non-finite",
            Error::BadShape { .. } => "bad-shape",
            Error::NotHermitian { .. } => "not-hermitian",
            Error::NotPositive { .. } => "not-positive",
            Error::BadTrace { .. } => "bad-trace",
            Error::NotNormalized { .. } => "not-normalized",
            Error::DimMismatch { .. } => "dim-mismatch",
            Error::DimensionCap { .. } => "dimension-cap",
            Error::UnknownOutcome(_) => "unknown-outcome",
            Error::DuplicateOutcome(_) => "duplicate-outcome",
            Error::Empty(_) => "empty",
            Error::NotComplete { .. } => "not-complete",
            Error::NotPovm { .. } => "not-povm",
            Error::NotIsometry { .. } => "not-isometry",
            Error::NotUnitary { .. } => "not-unitary",
            Error::BadPadding { .. } => "bad-padding",
            Error::HeterogeneousOutputDims => "heterogeneous-output-dims",
            Error::MissingBranch(_) => "missing-branch",
            Error::BadEnvironment(_) => "bad-environment",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::NegativeTime { .. } => "negative-time",
            Error::PositivityLoss { .. } => "positivity-loss",
            Error::StepTooLarge { .. } => "step-too-large",
            Error::CompletionFailure { .. } => "completion-failure",
            Error::ZeroProbabilityBranch { .. } => "zero-probability-branch",
            Error::Parse(_) => "parse",
        }
    }

    /// True when the error is a breach of a numerical contract during a
    /// computation, as opposed to rejected input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::PositivityLoss { .. }
                | Error::StepTooLarge { .. }
                | Error::CompletionFailure { .. }
                | Error::ZeroProbabilityBranch { .. }
        )
    }

    pub(crate) fn dim(context: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::DimMismatch {
            context: context.into(),
            expected,
            found,
        }
    }
}
