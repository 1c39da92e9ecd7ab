use thiserror::Error;

use gshot::config::ConfigError;
use gshot::graph::GraphError;
use gshot::metrics::MetricError;
use gshot::nn::ModelError;

/// A failed command, classified by exit status.
#[derive(Debug, Error)]
pub enum Failure {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<GraphError> for Failure {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::InvalidConfig(_) | GraphError::InvalidSplit(_) => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::NonFinite(_) => Failure::Numerical(e.to_string()),
            ModelError::Config(_) => Failure::Usage(e.to_string()),
            ModelError::Graph(g) => g.into(),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<MetricError> for Failure {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::Config(_) => Failure::Usage(e.to_string()),
            MetricError::Graph(g) => g.into(),
            _ => Failure::Data(e.to_string()),
        }
    }
}
