use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("covariance rank {rank} is below the requested {requested} components; use a smaller component count")]
    RankDeficient { rank: usize, requested: usize },

    #[error("sinkhorn failed to stay finite with eps = {eps}")]
    SolverFailure { eps: f64 },

    #[error("low-rank coupling collapsed (g[{index}] = {value:e}); use a smaller rank or a larger step size")]
    RankCollapse { index: usize, value: f64 },

    #[error("outer iteration {iteration}: {source}")]
    OuterIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("no stored entries for task {0}")]
    EmptyStore(String),

    #[error("all {trials} trials failed; last error: {last_error}")]
    SearchFailed { trials: usize, last_error: String },

    #[error("dataset {id}: {source}")]
    Dataset {
        id: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn in_dataset(self, id: &str) -> Self {
        Error::Dataset {
            id: id.into(),
            source: Box::new(self),
        }
    }
}
