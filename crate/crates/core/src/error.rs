use std::path::PathBuf;

/// Errors produced anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("stream key field `{field}` = {value} exceeds the counter range (max {max})")]
    KeyRange {
        field: &'static str,
        value: u64,
        max: u64,
    },

    #[error("element range [{offset}, {end}) exceeds the per-stream counter capacity of {capacity} elements")]
    CounterOverflow { offset: u64, end: u64, capacity: u64 },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite activation in layer {layer}")]
    NonFinite { layer: usize },

    #[error("non-finite loss at perturbation {index}")]
    NonFiniteLoss { index: usize },

    #[error("non-finite gradient at step {step}")]
    NonFiniteGradient { step: u64 },

    #[error("invalid compartment scheme: {0}")]
    Scheme(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("zero variance input to correlation")]
    ZeroVariance,

    #[error("{path}: bad IDX magic, expected {expected} found {found}")]
    IdxMagic {
        path: PathBuf,
        expected: u32,
        found: u32,
    },

    #[error("{path}: truncated IDX file (need {needed} bytes, have {available})")]
    IdxTruncated {
        path: PathBuf,
        needed: usize,
        available: usize,
    },

    #[error("image count {images} does not match label count {labels}")]
    IdxCountMismatch { images: usize, labels: usize },

    #[error("malformed dataset: {0}")]
    Data(String),

    #[error("message truncated: {0}")]
    MessageTruncated(String),

    #[error("message checksum mismatch (computed {computed:#010x}, stored {stored:#010x})")]
    MessageChecksum { computed: u32, stored: u32 },

    #[error("malformed message: {0}")]
    MessageFormat(String),

    #[error("step {step}: missing message from worker {worker}")]
    MissingMessage { step: u64, worker: usize },

    #[error("step {step}: replica divergence, worker {worker} disagrees with worker 0")]
    ReplicaDivergence { step: u64, worker: usize },

    #[error("all learning-rate candidates diverged: {0:?}")]
    SweepDiverged(Vec<(i32, f64)>),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("step {step}: {source}")]
    AtStep {
        step: u64,
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

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Numeric failures during training, as opposed to configuration or data problems.
    pub fn is_numeric(&self) -> bool {
        if let Error::AtStep { source, .. } = self {
            return source.is_numeric();
        }
        matches!(
            self,
            Error::NonFinite { .. }
                | Error::NonFiniteLoss { .. }
                | Error::NonFiniteGradient { .. }
                | Error::SweepDiverged(_)
                | Error::ZeroVariance
                | Error::ReplicaDivergence { .. }
        )
    }

    pub fn is_data(&self) -> bool {
        if let Error::AtStep { source, .. } = self {
            return source.is_data();
        }
        matches!(
            self,
            Error::EmptyDataset
                | Error::IdxMagic { .. }
                | Error::IdxTruncated { .. }
                | Error::IdxCountMismatch { .. }
                | Error::Data(_)
        )
    }
}
