use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("pole {0} lies in the support of the measure")]
    PoleInSupport(String),
    #[error("Gram matrix is rank deficient: {0}")]
    RankDeficient(String),
    #[error("precision budget exhausted: {0}")]
    PrecisionExhausted(String),
    #[error("evaluation at a pole: {0}")]
    EvaluationAtPole(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("stage {stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 2 config, 3 numerical failure, 4 invariant violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) | Error::Io(_) | Error::InvalidInput(_) => 2,
            Error::PoleInSupport(_) => 2,
            Error::Invariant(_) => 4,
            Error::Stage { source, .. } => source.exit_code(),
            _ => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::Config(_) => "config",
            Error::PoleInSupport(_) => "pole_in_support",
            Error::RankDeficient(_) => "rank_deficient",
            Error::PrecisionExhausted(_) => "precision_exhausted",
            Error::EvaluationAtPole(_) => "evaluation_at_pole",
            Error::NoConvergence(_) => "no_convergence",
            Error::Invariant(_) => "invariant",
            Error::Stage { source, .. } => source.kind(),
            Error::Io(_) => "io",
            Error::Json(_) => "parse",
        }
    }

    pub fn in_stage(self, stage: &str) -> Error {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage { stage: stage.to_string(), source: Box::new(e) },
        }
    }
}
