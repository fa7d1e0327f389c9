use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("degenerate parametrization on patch {patch} at ({u}, {v}): surface measure {measure:e}")]
    Degenerate { patch: usize, u: f64, v: f64, measure: f64 },

    #[error("kernel is not of positive type: pivot {pivot:e} below -{bound:e}")]
    KernelNotPositive { pivot: f64, bound: f64 },

    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("sample rejected: {0}")]
    SampleRejected(String),

    #[error("quadrature failure on cell pair ({0}, {1})")]
    Quadrature(usize, usize),

    #[error("singular linear system")]
    SingularSystem,

    #[error("solver residual {residual:e} exceeds tolerance {tolerance:e}")]
    Residual { residual: f64, tolerance: f64 },

    #[error("{dofs} degrees of freedom exceed the dense cap of {cap}")]
    TooManyDofs { dofs: usize, cap: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("estimator failure: {0}")]
    Estimator(String),

    #[error("sample count overflow: 2^{0} exceeds 2^31")]
    Overflow(u32),

    #[error("format error: {0}")]
    Format(String),

    #[error("cache corruption: {0}")]
    CacheCorrupt(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable category used for exit reporting.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Geometry(_) | Error::Degenerate { .. } => "geometry",
            Error::KernelNotPositive { .. } | Error::NotSpd(_) => "linear-algebra",
            Error::SampleRejected(_) => "sample-rejected",
            Error::Quadrature(..) => "quadrature",
            Error::SingularSystem | Error::Residual { .. } | Error::TooManyDofs { .. } => "solver",
            Error::DimensionMismatch { .. } => "dimension",
            Error::Estimator(_) | Error::Overflow(_) => "estimator",
            Error::Format(_) | Error::Json(_) => "format",
            Error::CacheCorrupt(_) => "cache",
            Error::Config(_) => "config",
            Error::Verification(_) => "verification",
            Error::Io(_) => "io",
        }
    }

    /// Process exit code associated with the category.
    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config" => 2,
            "io" => 3,
            "cache" => 4,
            "sample-rejected" => 5,
            "estimator" => 6,
            "solver" | "quadrature" | "linear-algebra" => 7,
            _ => 1,
        }
    }
}
