use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: String,
    },

    #[error("zero-norm vector ({0})")]
    ZeroNorm(String),

    #[error("non-finite value encountered ({0})")]
    NonFinite(String),

    #[error("invalid composite space: {0}")]
    InvalidSpace(String),

    #[error("unknown subsystem label `{0}`")]
    UnknownSubsystem(String),

    #[error("subsystem `{label}` has kind {kind}; operation requires {required}")]
    WrongKind {
        label: String,
        kind: &'static str,
        required: &'static str,
    },

    #[error("gaussian packet unresolvable: width {width} < 2 x grid spacing {spacing}")]
    Unresolvable { width: f64, spacing: f64 },

    #[error("gaussian packet leaks {mass:e} probability mass past the hard wall (limit 1e-10)")]
    BoundaryLeakage { mass: f64 },

    #[error("operator is not Hermitian: max |M - M^dagger| = {0:e}")]
    NotHermitian(f64),

    #[error("invalid operator specification: {0}")]
    InvalidOperator(String),

    #[error("stability guard violated: dt * |V|^2_max = {0} > 0.1")]
    StabilityGuard(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid bipartition: {0}")]
    InvalidPartition(String),

    #[error("density matrix has eigenvalue {0:e} below -1e-10")]
    NegativeEigenvalue(f64),

    #[error("quadrature failed to converge: {0}")]
    Quadrature(String),

    #[error("unknown observable `{0}`")]
    UnknownObservable(String),

    #[error("missing observable series `{0}`")]
    MissingSeries(String),

    #[error("unknown builtin scenario `{0}`")]
    UnknownScenario(String),

    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("config validation failed:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    #[error("audit refused: {0}")]
    AuditRefused(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(expected: usize, got: usize, context: impl Into<String>) -> Self {
        Error::DimensionMismatch {
            expected,
            got,
            context: context.into(),
        }
    }

    /// True for errors caused by user input rather than numerics or I/O.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Validation(_)
                | Error::UnknownScenario(_)
                | Error::UnknownSubsystem(_)
                | Error::UnknownObservable(_)
                | Error::InvalidSpace(_)
                | Error::InvalidOperator(_)
                | Error::InvalidParameter(_)
                | Error::InvalidPartition(_)
                | Error::WrongKind { .. }
        )
    }
}
