use thiserror::Error;

/// Errors raised across the identification and analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("invalid scan at {location}: {message}")]
    InvalidScan { location: String, message: String },

    #[error("index ({row}, {col}) out of range for {rows}x{cols}")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty response")]
    EmptyResponse,

    #[error("{samples} samples cannot determine {unknowns} unknowns")]
    TooFewSamples { samples: usize, unknowns: usize },

    #[error("rank-deficient least-squares system (rank {rank} of {unknowns}, condition estimate {condition:.3e})")]
    RankDeficient {
        rank: usize,
        unknowns: usize,
        condition: f64,
    },

    #[error("residue {re}+j{im} on a real pole has a non-negligible imaginary part")]
    ComplexResidueOnRealPole { re: f64, im: f64 },

    #[error("complex pair requires a positive imaginary part, got {0}")]
    NonPositiveImag(f64),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite entry in {0}")]
    NonFinite(String),

    #[error("resolvent singular at s = {re}+j{im} (eigenvalue of A)")]
    Singular { re: f64, im: f64 },

    #[error("system is not Hurwitz: eigenvalue {re}+j{im} has non-negative real part")]
    Unstable { re: f64, im: f64 },

    #[error("Lyapunov operator near-singular (condition estimate {condition:.3e})")]
    IllConditionedLyapunov { condition: f64 },

    #[error("eigenvalue computation failed to converge")]
    NoConvergence,

    #[error("eigenvectors not normalized: max |L·R − I| = {0:.3e}; re-normalize left vectors against the right vectors")]
    NotNormalized(f64),

    #[error("mode {0} has a zero eigenvalue; step formula is singular")]
    ZeroEigenvalue(usize),

    #[error("unresolved port `{0}`")]
    UnresolvedPort(String),

    #[error("duplicate {kind} `{name}`")]
    Duplicate { kind: &'static str, name: String },

    #[error("unknown subsystem `{0}`")]
    UnknownSubsystem(String),

    #[error("algebraic loop through [{}] (feedthrough closure condition {condition:.3e})", subsystems.join(", "))]
    AlgebraicLoop {
        subsystems: Vec<String>,
        condition: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
