use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown topology `{name}` (supported: mobilenet_v1, mobilenet_v2, resnet50, toy(N) with 1 <= N <= 16)")]
    UnknownTopology { name: String },

    #[error("layer {index}: {reason}")]
    InvalidLayer { index: usize, reason: String },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("degenerate distribution")]
    DegenerateDistribution,

    #[error("invalid quantization parameters: {0}")]
    InvalidQuant(String),

    #[error("tensor format: {0}")]
    TensorFormat(String),

    #[error("invalid hardware spec: {0}")]
    InvalidHardware(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("action {0} outside [0, 1]")]
    ActionOutOfRange(f64),

    #[error("budget infeasible: best achievable {kind} is {best}, limit is {limit}")]
    Infeasible { kind: &'static str, best: f64, limit: f64 },

    #[error("agent: {0}")]
    Agent(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for errors caused by bad user input (files, flags, configs)
    /// rather than by a failure inside the toolkit.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Agent(_) | Error::Infeasible { .. })
    }
}
