use thiserror::Error;

/// Errors produced anywhere in the compositional-tables pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid composition: {0}")]
    InvalidComposition(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionError { expected: usize, found: usize },

    #[error("vector is not in the clr plane (sum = {0:e})")]
    NotInClrPlane(f64),

    #[error("index {index} out of range 1..={max}")]
    IndexError { index: usize, max: usize },

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("degenerate biplot axis {axis}: eigenvalue is zero")]
    DegenerateAxis { axis: usize },

    #[error("models cannot be compared: {0}")]
    ComparisonError(String),

    #[error("incomplete table for sample '{sample_id}': missing cell '{cell}'")]
    IncompleteTable { sample_id: String, cell: String },

    #[error("heterogeneous factor levels: {0}")]
    HeterogeneousLevels(String),

    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used to pick a process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Data,
    Numeric,
    Config,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Stage { source, .. } => source.kind(),
            Error::RankDeficient(_)
            | Error::DegenerateData(_)
            | Error::DegenerateAxis { .. }
            | Error::NotInClrPlane(_) => ErrorKind::Numeric,
            Error::Config(_) | Error::InvalidSpec(_) | Error::ComparisonError(_) => {
                ErrorKind::Config
            }
            _ => ErrorKind::Data,
        }
    }

    /// Process exit code: 2 data error, 3 numeric degeneracy, 4 config error.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            ErrorKind::Data => 2,
            ErrorKind::Numeric => 3,
            ErrorKind::Config => 4,
        }
    }

    pub(crate) fn at(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub(crate) fn dim(expected: usize, found: usize) -> Error {
        Error::DimensionError { expected, found }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
