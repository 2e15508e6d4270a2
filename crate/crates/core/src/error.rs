use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("calibration failure: {0}")]
    Calibration(String),
    #[error("frequency estimation failed: {0}")]
    FrequencyEstimation(String),
    #[error("ambiguous tone, candidates at {0:?} Hz")]
    AmbiguousTone(Vec<f64>),
    #[error("tracker dropout on {count} samples (first at {first})")]
    TrackerDropout { first: usize, count: usize },
    #[error("phase compensation dropout on {count} samples (first at {first})")]
    CompensationDropout { first: usize, count: usize },
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error("symbol synchronization failed: {0}")]
    Synchronization(String),
    #[error("equalizer diverged (weight norm {norm:.3e})")]
    Divergence { norm: f64 },
    #[error("channel unestimable (|g|^2 = {0:.3e})")]
    Unestimable(f64),
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
    #[error("numerical domain error: {0}")]
    Numerical(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Wraps an error with the pipeline stage that produced it.
    pub fn at(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping stage labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn is_config(&self) -> bool {
        matches!(self.root(), Error::Config(_) | Error::Parse { .. })
    }

    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        if self.is_config() {
            2
        } else {
            3
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.at(stage))
    }
}
