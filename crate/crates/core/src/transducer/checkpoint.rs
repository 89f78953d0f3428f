//! JSON checkpoint container: config plus named row-major parameter blocks.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::model::{param_layout, ModelConfig, TransducerModel};
use super::tensor::Scalar;
use super::{AnyModel, Precision, TransducerError};

pub const CHECKPOINT_FORMAT: &str = "sequer-ckpt-v1";

#[derive(Serialize, Deserialize)]
struct Block<F> {
    name: String,
    shape: [usize; 2],
    data: Vec<F>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    precision: Precision,
    config: ModelConfig,
}

#[derive(Serialize, Deserialize)]
struct File<F> {
    format: String,
    precision: Precision,
    config: ModelConfig,
    params: Vec<Block<F>>,
}

fn to_file<F: Scalar>(m: &TransducerModel<F>, precision: Precision) -> File<F> {
    let p = &m.params;
    File {
        format: CHECKPOINT_FORMAT.to_string(),
        precision,
        config: m.config.clone(),
        params: (0..p.len()).map(|i| Block { name: p.names[i].clone(), shape: [p.shapes[i].0, p.shapes[i].1], data: p.data[i].clone() }).collect(),
    }
}

fn from_file<F: Scalar>(f: File<F>) -> Result<TransducerModel<F>, TransducerError> {
    f.config.validate()?;
    let layout = param_layout(&f.config);
    if layout.len() != f.params.len() {
        return Err(TransducerError::Checkpoint(format!("expected {} parameter blocks, found {}", layout.len(), f.params.len())));
    }
    let mut params = TransducerModel::<F>::empty_params();
    for ((name, r, c), b) in layout.into_iter().zip(f.params) {
        if b.name != name || b.shape != [r, c] || b.data.len() != r * c {
            return Err(TransducerError::Checkpoint(format!("block {:?} {:?} does not match expected {name:?} [{r}, {c}]", b.name, b.shape)));
        }
        params.push(name, r, c, b.data);
    }
    if !params.all_finite() {
        return Err(TransducerError::Checkpoint("non-finite parameter".into()));
    }
    Ok(TransducerModel::from_params(f.config, params))
}

impl AnyModel {
    pub fn write_checkpoint<W: Write>(&self, out: W) -> Result<(), TransducerError> {
        let r = match self {
            AnyModel::F32(m) => serde_json::to_writer(out, &to_file(m, Precision::F32)),
            AnyModel::F64(m) => serde_json::to_writer(out, &to_file(m, Precision::F64)),
        };
        r.map_err(|e| TransducerError::Checkpoint(e.to_string()))
    }

    pub fn read_checkpoint<R: Read>(mut input: R) -> Result<AnyModel, TransducerError> {
        let mut text = String::new();
        input.read_to_string(&mut text)?;
        let bad = |e: serde_json::Error| TransducerError::Checkpoint(e.to_string());
        let header: Header = serde_json::from_str(&text).map_err(bad)?;
        if header.format != CHECKPOINT_FORMAT {
            return Err(TransducerError::Checkpoint(format!("unsupported format {:?}", header.format)));
        }
        Ok(match header.precision {
            Precision::F32 => AnyModel::F32(from_file(serde_json::from_str(&text).map_err(bad)?)?),
            Precision::F64 => AnyModel::F64(from_file(serde_json::from_str(&text).map_err(bad)?)?),
        })
    }
}
