//! Autoregressive sequence model over DFS codes.
//!
//! Each step reads the one-hot encoding of the previous tuple (all zeros at
//! the start), updates a stacked LSTM, and predicts the five tuple
//! components with five independent two-layer heads. The loss is the binary
//! cross-entropy of every softmax head against the one-hot target, summed
//! over components and steps; the final target is EOS in every component.

mod checkpoint;
mod model;
mod optim;
mod params;
mod train;
mod vocab;

use thiserror::Error;

use crate::canon::Violation;
use crate::graph::GraphError;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use model::{
    forward_sequence, forward_step, head_bce, sequence_grad, sequence_loss, softmax, teacher_forcing, DropoutMode,
    HiddenState, Tape,
};
pub use optim::{adam_step, AdamState, TrainConfig};
pub use params::{ModelDims, ModelParams, TensorInfo};
pub use train::{
    adam_batch_step, batch_gradient, batch_tapes, mean_loss, mean_tuple_loss, sequence_losses, tapes_gradient,
    train_epochs, train_with, Batch, EarlyStopping, EpochRecord, Reduction, TrainOutcome,
};
pub use vocab::{build_vocabulary, decode_tuple, encode_tuple, Component, Token, TokenVector, Vocabulary};


#[derive(Debug, Error)]
pub enum ModelError {
    #[error("vocabulary: {0}")]
    Vocabulary(String),
    #[error("{component} value {value} is outside the vocabulary (limit {limit})")]
    OutOfVocabulary { component: &'static str, value: usize, limit: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid DFS code at tuple {position}: {violation}")]
    InvalidCode { position: usize, violation: Violation },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
