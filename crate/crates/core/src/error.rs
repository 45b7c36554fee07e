use thiserror::Error;

/// Errors produced by the covertime library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("graph is disconnected")]
    Disconnected,

    #[error("asymmetric adjacency between {0} and {1}")]
    Asymmetric(usize, usize),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("vertex {vertex} out of range for graph with {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },

    #[error("random regular generator exhausted {attempts} attempts")]
    RejectionBudgetExhausted { attempts: usize },

    #[error("annulus of radius {radius} around {center} is empty")]
    EmptyAnnulus { center: usize, radius: usize },

    #[error("ball of radius {radius} around {center} covers the whole graph")]
    BallCoversGraph { center: usize, radius: usize },

    #[error("ball has {size} vertices, above the mask cap of {cap}")]
    MaskCapExceeded { size: usize, cap: usize },

    #[error("no small-radius witness found (solver bug): {0}")]
    NoWitness(String),

    #[error("value iteration hit the cap of {cap} sweeps with residual {residual:e}")]
    IterationCap { cap: usize, residual: f64 },

    #[error("state (position {position}, mask {mask:#b}) is not in the solved state space")]
    UnknownState { position: usize, mask: u64 },

    #[error("walk exceeded the safety cap of {cap} steps")]
    SafetyCap { cap: u64 },

    #[error("policy has no action at position {position}")]
    PolicyGap { position: usize },

    #[error("trajectory ended before the stop index was resolved")]
    TrajectoryTooShort,

    #[error("corpus is empty after filtering")]
    EmptyCorpus,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
