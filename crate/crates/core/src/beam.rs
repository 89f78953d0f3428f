//! Length-normalized beam search and query suggestion.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bpe::{BpeError, BpeModel, BOS, EOS};
use crate::transducer::{AnyModel, Scalar, TransducerError, TransducerModel};

pub const DEFAULT_BEAM: usize = 10;
pub const DEFAULT_ALPHA: f64 = 0.6;

#[derive(Debug, Error)]
pub enum BeamError {
    #[error("beam size must be at least 1")]
    InvalidBeamSize,
    #[error("maximum output length must be at least 1")]
    InvalidMaxLen,
    #[error("query has no tokens")]
    EmptyQuery,
    #[error(transparent)]
    Model(#[from] TransducerError),
    #[error(transparent)]
    Decode(#[from] BpeError),
}

/// Anything that yields next-token log-probabilities for a batch of
/// BOS-prefixed target prefixes.
pub trait StepModel {
    fn vocab_size(&self) -> usize;
    fn max_len(&self) -> usize;
    fn next_log_probs(&self, src: &[u32], prefixes: &[Vec<u32>]) -> Result<Vec<Vec<f64>>, TransducerError>;
}

impl<F: Scalar> StepModel for TransducerModel<F> {
    fn vocab_size(&self) -> usize {
        self.config.vocab_size
    }

    fn max_len(&self) -> usize {
        self.config.max_len
    }

    fn next_log_probs(&self, src: &[u32], prefixes: &[Vec<u32>]) -> Result<Vec<Vec<f64>>, TransducerError> {
        TransducerModel::next_log_probs(self, src, prefixes)
    }
}

impl StepModel for AnyModel {
    fn vocab_size(&self) -> usize {
        self.config().vocab_size
    }

    fn max_len(&self) -> usize {
        self.config().max_len
    }

    fn next_log_probs(&self, src: &[u32], prefixes: &[Vec<u32>]) -> Result<Vec<Vec<f64>>, TransducerError> {
        AnyModel::next_log_probs(self, src, prefixes)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamHypothesis {
    /// Output tokens without BOS and without the closing EOS.
    pub ids: Vec<u32>,
    /// Includes the EOS log-probability for finished hypotheses.
    pub log_prob_sum: f64,
    pub finished: bool,
    pub score: f64,
}

/// log_prob_sum / L^α with L = max(1, |ids|).
pub fn length_normalized(log_prob_sum: f64, len: usize, alpha: f64) -> f64 {
    log_prob_sum / (len.max(1) as f64).powf(alpha)
}

impl BeamHypothesis {
    fn new(ids: Vec<u32>, log_prob_sum: f64, finished: bool, alpha: f64) -> Self {
        let score = length_normalized(log_prob_sum, ids.len(), alpha);
        BeamHypothesis { ids, log_prob_sum, finished, score }
    }
}

fn with_bos(ids: &[u32]) -> Vec<u32> {
    std::iter::once(BOS).chain(ids.iter().copied()).collect()
}

/// Final ranking: score descending, then token ids, then finished first.
pub fn rank(pool: &mut [BeamHypothesis]) {
    pool.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.ids.cmp(&b.ids)).then_with(|| b.finished.cmp(&a.finished)));
}

/// Keeps the `k` best continuations by cumulative log-probability per step;
/// EOS continuations leave the beam for the finished pool.
pub fn beam_search<M: StepModel + ?Sized>(model: &M, src: &[u32], k: usize, alpha: f64, max_steps: usize) -> Result<Vec<BeamHypothesis>, BeamError> {
    if k == 0 {
        return Err(BeamError::InvalidBeamSize);
    }
    if max_steps == 0 {
        return Err(BeamError::InvalidMaxLen);
    }
    let vocab = model.vocab_size();
    let mut live: Vec<(Vec<u32>, f64)> = vec![(Vec::new(), 0.0)];
    let mut pool: Vec<BeamHypothesis> = Vec::new();
    for _ in 0..max_steps {
        if live.is_empty() {
            break;
        }
        let prefixes: Vec<Vec<u32>> = live.iter().map(|(ids, _)| with_bos(ids)).collect();
        let dists = model.next_log_probs(src, &prefixes)?;
        let mut cands: Vec<(f64, usize, u32)> = Vec::with_capacity(live.len() * vocab);
        for (h, dist) in dists.iter().enumerate() {
            for (w, &lp) in dist.iter().enumerate().take(vocab) {
                cands.push((live[h].1 + lp, h, w as u32));
            }
        }
        let key = |c: &(f64, usize, u32)| -> Vec<u32> {
            let mut ids = live[c.1].0.clone();
            ids.push(c.2);
            ids
        };
        cands.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| key(a).cmp(&key(b))));
        cands.truncate(k);
        let mut next = Vec::with_capacity(k);
        for c in cands {
            if c.2 == EOS {
                pool.push(BeamHypothesis::new(live[c.1].0.clone(), c.0, true, alpha));
            } else {
                next.push((key(&c), c.0));
            }
        }
        live = next;
    }
    pool.extend(live.into_iter().map(|(ids, lps)| BeamHypothesis::new(ids, lps, false, alpha)));
    rank(&mut pool);
    pool.truncate(k);
    Ok(pool)
}

/// Argmax decoding; ties go to the lowest token id.
pub fn greedy<M: StepModel + ?Sized>(model: &M, src: &[u32], alpha: f64, max_steps: usize) -> Result<BeamHypothesis, BeamError> {
    let mut ids = Vec::new();
    let mut lps = 0.0;
    for _ in 0..max_steps {
        let dist = model.next_log_probs(src, &[with_bos(&ids)])?.remove(0);
        let (w, lp) = dist.iter().enumerate().fold((0usize, f64::NEG_INFINITY), |best, (w, &lp)| if lp > best.1 { (w, lp) } else { best });
        lps += lp;
        if w as u32 == EOS {
            return Ok(BeamHypothesis::new(ids, lps, true, alpha));
        }
        ids.push(w as u32);
    }
    Ok(BeamHypothesis::new(ids, lps, false, alpha))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub text: String,
    pub score: f64,
}

/// Source ids for a query: BOS, tokens truncated to fit `max_len`, EOS.
pub fn source_ids(bpe: &BpeModel, query: &str, max_len: usize) -> Result<Vec<u32>, BeamError> {
    let tokens = bpe.encode(query);
    if tokens.is_empty() {
        return Err(BeamError::EmptyQuery);
    }
    let keep = tokens.len().min(max_len.saturating_sub(2));
    Ok(std::iter::once(BOS).chain(tokens[..keep].iter().copied()).chain(std::iter::once(EOS)).collect())
}

/// Up to `k` distinct non-empty rewrites of `query`, best first.
pub fn suggest<M: StepModel + ?Sized>(model: &M, bpe: &BpeModel, query: &str, k: usize, alpha: f64) -> Result<Vec<Suggestion>, BeamError> {
    let src = source_ids(bpe, query, model.max_len())?;
    let hyps = beam_search(model, &src, k, alpha, model.max_len().saturating_sub(1).max(1))?;
    let mut out: Vec<Suggestion> = Vec::with_capacity(hyps.len());
    for h in hyps {
        let text = bpe.decode(&h.ids)?;
        if text.is_empty() || out.iter().any(|s| s.text == text) {
            continue;
        }
        out.push(Suggestion { text, score: h.score });
    }
    Ok(out)
}
