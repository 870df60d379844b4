use thiserror::Error;

/// Errors raised while building or running a stream graph.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum StreamError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("user function failed in `{operator}` at interval {interval}: {message}")]
    UserFunction {
        operator: &'static str,
        interval: u64,
        message: String,
    },
    #[error("source failed at interval {interval}: {message}")]
    Source { interval: u64, message: String },
    #[error("batch of node {node} for interval {interval} is not available")]
    Unavailable { node: usize, interval: u64 },
    #[error("sink failed at interval {interval}: {message}")]
    Sink { interval: u64, message: String },
}
