//! Teacher-forced minibatch training.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::model::{Example, ModelConfig, TransducerModel};
use super::tensor::Scalar;
use super::{AnyModel, Precision, TransducerError};
use crate::bpe::BpeModel;
use crate::miner::{QueryPair, SplitDataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub precision: Precision,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { batch_size: 32, learning_rate: 1e-4, epochs: 10, seed: 0, precision: Precision::F32 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TransducerError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TransducerError::Config(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(TransducerError::Config("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone)]
pub struct Trained<F> {
    /// Best-validation parameters, or the last epoch's without validation data.
    pub model: TransducerModel<F>,
    pub curve: Vec<EpochStats>,
    pub best_epoch: usize,
}

pub fn examples_from_pairs(pairs: &[QueryPair], bpe: &BpeModel, max_len: usize) -> Vec<Example> {
    pairs.iter().map(|p| Example::new(&bpe.encode(&p.original), &bpe.encode(&p.reformulated), max_len)).collect()
}

fn mean_loss<F: Scalar>(model: &TransducerModel<F>, data: &[Example], batch: usize) -> Result<f64, TransducerError> {
    let mut total = 0.0;
    for chunk in data.chunks(batch) {
        total += model.loss(chunk)? * chunk.len() as f64;
    }
    Ok(total / data.len() as f64)
}

/// Trains `model` in place on `train`, calling `on_epoch` after every epoch.
pub fn fit<F: Scalar>(
    mut model: TransducerModel<F>,
    train: &[Example],
    val: &[Example],
    tcfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats, &TransducerModel<F>) -> Control,
) -> Result<Trained<F>, TransducerError> {
    tcfg.validate()?;
    if train.is_empty() {
        return Err(TransducerError::EmptyTrainingSet);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(tcfg.seed);
    let mut opt = Adam::new(AdamConfig::new(tcfg.learning_rate), model.params.data.iter().map(Vec::len));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut curve = Vec::new();
    let mut best: Option<(f64, usize, TransducerModel<F>)> = None;
    let use_dropout = model.config.dropout > 0.0;

    for epoch in 1..=tcfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(tcfg.batch_size) {
            let batch: Vec<Example> = chunk.iter().map(|&i| train[i].clone()).collect();
            let (loss, grads) = model.loss_and_grads(&batch, use_dropout.then_some(&mut rng))?;
            if !loss.is_finite() {
                return Err(TransducerError::NonFinite { epoch });
            }
            opt.update(&mut model.params.data, &grads);
            loss_sum += loss * batch.len() as f64;
        }
        if !model.params.all_finite() {
            return Err(TransducerError::NonFinite { epoch });
        }
        let val_loss = if val.is_empty() { None } else { Some(mean_loss(&model, val, tcfg.batch_size)?) };
        let stats = EpochStats { epoch, train_loss: loss_sum / train.len() as f64, val_loss };
        if let Some(v) = val_loss {
            if best.as_ref().is_none_or(|(b, _, _)| v < *b) {
                best = Some((v, epoch, model.clone()));
            }
        }
        let control = on_epoch(&stats, &model);
        curve.push(stats);
        if control == Control::Stop {
            break;
        }
    }
    let last = curve.last().map_or(0, |s| s.epoch);
    Ok(match best {
        Some((_, best_epoch, m)) => Trained { model: m, curve, best_epoch },
        None => Trained { model, curve, best_epoch: last },
    })
}

/// Builds a model sized to `bpe` and trains it on the split's train part,
/// validating on its validation part.
pub fn train(
    split: &SplitDataset,
    mut mcfg: ModelConfig,
    tcfg: &TrainConfig,
    bpe: &BpeModel,
    mut on_epoch: impl FnMut(&EpochStats) -> Control,
) -> Result<(AnyModel, Vec<EpochStats>), TransducerError> {
    mcfg.vocab_size = bpe.vocab_size();
    let train = examples_from_pairs(&split.train, bpe, mcfg.max_len);
    let val = examples_from_pairs(&split.validation, bpe, mcfg.max_len);
    Ok(match tcfg.precision {
        Precision::F32 => {
            let t = fit(TransducerModel::<f32>::new(mcfg, tcfg.seed)?, &train, &val, tcfg, |s, _| on_epoch(s))?;
            (AnyModel::F32(t.model), t.curve)
        }
        Precision::F64 => {
            let t = fit(TransducerModel::<f64>::new(mcfg, tcfg.seed)?, &train, &val, tcfg, |s, _| on_epoch(s))?;
            (AnyModel::F64(t.model), t.curve)
        }
    })
}
