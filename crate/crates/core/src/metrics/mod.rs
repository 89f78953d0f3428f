//! Suggestion-quality metrics and the retrieval harness.

mod edits;
mod exact;
mod gleu;
mod m2;
mod retrieval;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use edits::{extract_edits, extract_edits_str, levenshtein, Edit, EditSet};
pub use exact::{em_at_k, normalize_ws, EM_KS};
pub use gleu::{corpus_gleu, gleu, gleu_checked, EmptyHypothesis, GleuStats};
pub use m2::{m2_score, LengthMismatch, M2Counts, M2Score};
pub use retrieval::{mrr, read_posts, tokenize, write_posts, Bm25Index, PostDoc, RetrievalError, DEFAULT_CUTOFF};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub gleu: f64,
    pub m2_p: f64,
    pub m2_r: f64,
    pub m2_f1: f64,
    pub em_at: BTreeMap<usize, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mrr: Option<f64>,
    pub n: usize,
}

/// GLEU and M² use each item's top candidate (empty when there is none).
pub fn evaluate<S: AsRef<str>>(sources: &[S], candidates: &[Vec<String>], references: &[S], mrr: Option<f64>) -> Result<MetricReport, LengthMismatch> {
    if sources.len() != candidates.len() || sources.len() != references.len() {
        return Err(LengthMismatch { sources: sources.len(), hypotheses: candidates.len(), references: references.len() });
    }
    let src: Vec<&str> = sources.iter().map(AsRef::as_ref).collect();
    let refs: Vec<&str> = references.iter().map(AsRef::as_ref).collect();
    let top: Vec<&str> = candidates.iter().map(|c| c.first().map(String::as_str).unwrap_or("")).collect();
    let m2 = m2_score(&src, &top, &refs)?;
    Ok(MetricReport {
        gleu: corpus_gleu(&src, &top, &refs),
        m2_p: m2.precision,
        m2_r: m2.recall,
        m2_f1: m2.f1,
        em_at: em_at_k(candidates, &refs, &EM_KS),
        mrr,
        n: sources.len(),
    })
}
