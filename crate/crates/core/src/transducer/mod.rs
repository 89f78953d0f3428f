//! Encoder-decoder Transformer with its own reverse-mode differentiation.

mod adam;
mod attention;
mod checkpoint;
mod graph;
mod model;
mod tensor;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adam::{Adam, AdamConfig};
pub use attention::scaled_dot_attention;
pub use checkpoint::CHECKPOINT_FORMAT;
pub use graph::{AttnSpec, Grads, Graph, Var};
pub use model::{log_softmax, positional_table, Example, ModelConfig, Params, TransducerModel};
pub use tensor::{gemm, Layout, Scalar};
pub use train::{examples_from_pairs, fit, train, Control, EpochStats, TrainConfig, Trained};

#[derive(Debug, Error)]
pub enum TransducerError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("sequence of length {len} exceeds max_len {max}")]
    SequenceTooLong { len: usize, max: usize },
    #[error("empty id sequence")]
    EmptySequence,
    #[error("token id {0} is outside the vocabulary")]
    UnknownToken(u32),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("query row {0} has no attendable key")]
    AllMaskedRow(usize),
    #[error("no training examples")]
    EmptyTrainingSet,
    #[error("non-finite loss or parameters in epoch {epoch}")]
    NonFinite { epoch: usize },
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

impl FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "f32" => Ok(Precision::F32),
            "f64" => Ok(Precision::F64),
            _ => Err(format!("unknown precision {s:?} (expected f32 or f64)")),
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        })
    }
}

/// A trained model in either precision.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyModel {
    F32(TransducerModel<f32>),
    F64(TransducerModel<f64>),
}

impl AnyModel {
    pub fn config(&self) -> &ModelConfig {
        match self {
            AnyModel::F32(m) => &m.config,
            AnyModel::F64(m) => &m.config,
        }
    }

    pub fn precision(&self) -> Precision {
        match self {
            AnyModel::F32(_) => Precision::F32,
            AnyModel::F64(_) => Precision::F64,
        }
    }

    pub fn next_log_probs(&self, src: &[u32], prefixes: &[Vec<u32>]) -> Result<Vec<Vec<f64>>, TransducerError> {
        match self {
            AnyModel::F32(m) => m.next_log_probs(src, prefixes),
            AnyModel::F64(m) => m.next_log_probs(src, prefixes),
        }
    }
}
