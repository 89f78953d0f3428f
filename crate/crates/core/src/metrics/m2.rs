//! MaxMatch-style precision/recall/F1 over phrase edits, one alignment per sentence.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::edits::extract_edits_str;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("corpus lengths differ: {sources} sources, {hypotheses} hypotheses, {references} references")]
pub struct LengthMismatch {
    pub sources: usize,
    pub hypotheses: usize,
    pub references: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct M2Counts {
    pub matched: usize,
    pub system: usize,
    pub gold: usize,
}

impl M2Counts {
    pub fn of(source: &str, hypothesis: &str, reference: &str) -> Self {
        let gold = extract_edits_str(source, reference);
        let sys = extract_edits_str(source, hypothesis);
        let matched = sys.edits.iter().filter(|e| gold.contains(e)).count();
        M2Counts { matched, system: sys.len(), gold: gold.len() }
    }

    pub fn add(&mut self, o: &M2Counts) {
        self.matched += o.matched;
        self.system += o.system;
        self.gold += o.gold;
    }

    pub fn scores(&self) -> M2Score {
        let p = if self.system == 0 { 1.0 } else { self.matched as f64 / self.system as f64 };
        let r = if self.gold == 0 { 1.0 } else { self.matched as f64 / self.gold as f64 };
        let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        M2Score { precision: p, recall: r, f1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct M2Score {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn m2_score<S: AsRef<str>>(sources: &[S], hypotheses: &[S], references: &[S]) -> Result<M2Score, LengthMismatch> {
    if sources.len() != hypotheses.len() || sources.len() != references.len() {
        return Err(LengthMismatch { sources: sources.len(), hypotheses: hypotheses.len(), references: references.len() });
    }
    let mut total = M2Counts::default();
    for ((s, h), r) in sources.iter().zip(hypotheses).zip(references) {
        total.add(&M2Counts::of(s.as_ref(), h.as_ref(), r.as_ref()));
    }
    Ok(total.scores())
}
