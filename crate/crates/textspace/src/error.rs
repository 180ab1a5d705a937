use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type. `status_slug` feeds the `failed:<reason>` cell in
/// results tables, so slugs stay short, stable and comma-free.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("corpus has no documents")]
    EmptyCorpus,

    #[error("vocabulary is empty after preprocessing")]
    EmptyVocabulary,

    #[error("dimension mismatch: {msg}")]
    DimensionMismatch { msg: String },

    #[error("document counts must be non-negative integers for this model (row {row}, col {col})")]
    NonIntegerCounts { row: usize, col: usize },

    #[error("model requires raw counts, not a weighted matrix")]
    WeightedInputRejected,

    #[error("term '{term}' (column {col}) occurs in no document")]
    ZeroColumn { term: String, col: usize },

    #[error("topic count {k} out of range for a {m}x{n} matrix")]
    TopicCountOutOfRange { k: usize, m: usize, n: usize },

    #[error("row {row} has zero norm; cosine distance undefined")]
    ZeroNormRow { row: usize },

    #[error("row {row} is not a probability distribution")]
    NotADistribution { row: usize },

    #[error("input has {m} points but {method} needs at least {min}")]
    TooFewPoints {
        method: &'static str,
        m: usize,
        min: usize,
    },

    #[error("perplexity {perplexity} infeasible for {m} points")]
    PerplexityInfeasible { perplexity: f64, m: usize },

    #[error("n_neighbors {k} infeasible for {m} points")]
    NeighborsInfeasible { k: usize, m: usize },

    #[error("point {row} is equidistant-degenerate: all distances are zero")]
    ZeroVarianceRow { row: usize },

    #[error("input matrix has zero total variance")]
    ZeroVariance,

    #[error("neighborhood size {k} too large for {m} points")]
    NeighborhoodTooLarge { k: usize, m: usize },

    #[error("distance vector is constant; rank correlation undefined")]
    ConstantDistances,

    #[error("need at least {min} distinct labels, found {found}")]
    TooFewClasses { found: usize, min: usize },

    #[error("theta row {row} is all zero after clamping")]
    AllZeroThetaRow { row: usize },

    #[error("grid expansion produced no configurations")]
    EmptyExpansion,

    #[error("unknown dataset '{name}'")]
    UnknownDataset { name: String },

    #[error("dataset '{name}' has no external embedding")]
    MissingExtEmbedding { name: String },

    #[error("group {key} has no finite values to normalize against")]
    NoFiniteInGroup { key: String },

    #[error("nothing to compare: {what}")]
    NoPairs { what: String },

    #[error("optimization produced non-finite coordinates")]
    Diverged,

    #[error("job exceeded its wall-clock budget")]
    Timeout,

    #[error("{msg}")]
    InvalidArgument { msg: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    pub fn dim(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch { msg: msg.into() }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument { msg: msg.into() }
    }

    /// Short machine-readable reason for `failed:<slug>` status cells.
    pub fn status_slug(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::EmptyCorpus => "empty-corpus",
            Error::EmptyVocabulary => "empty-vocabulary",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::NonIntegerCounts { .. } => "non-integer-counts",
            Error::WeightedInputRejected => "weighted-input-rejected",
            Error::ZeroColumn { .. } => "zero-column",
            Error::TopicCountOutOfRange { .. } => "k-out-of-range",
            Error::ZeroNormRow { .. } => "zero-norm-row",
            Error::NotADistribution { .. } => "not-a-distribution",
            Error::TooFewPoints { .. } => "too-few-points",
            Error::PerplexityInfeasible { .. } => "perplexity-infeasible",
            Error::NeighborsInfeasible { .. } => "neighbors-infeasible",
            Error::ZeroVarianceRow { .. } => "zero-variance-row",
            Error::ZeroVariance => "zero-variance",
            Error::NeighborhoodTooLarge { .. } => "neighborhood-too-large",
            Error::ConstantDistances => "constant-distances",
            Error::TooFewClasses { .. } => "too-few-classes",
            Error::AllZeroThetaRow { .. } => "all-zero-theta",
            Error::EmptyExpansion => "empty-expansion",
            Error::UnknownDataset { .. } => "unknown-dataset",
            Error::MissingExtEmbedding { .. } => "missing-ext-embedding",
            Error::NoFiniteInGroup { .. } => "no-finite-in-group",
            Error::NoPairs { .. } => "no-pairs",
            Error::Diverged => "diverged",
            Error::Timeout => "timeout",
            Error::InvalidArgument { .. } => "invalid-argument",
        }
    }
}
