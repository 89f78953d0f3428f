//! Descriptive statistics over queries and reformulation pairs.

mod advanced;
mod length;
mod ngrams;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use advanced::{advanced_usage, detect_advanced, AdvancedSearchKind, AdvancedUsage};
pub use length::{length_stats, nearest_rank, word_count, EmptyInput, LengthQuartiles, LengthStats};
pub use ngrams::{normalize_tokens, query_ngrams, stopwords, top_ngrams};

use crate::miner::QueryPair;

/// Counts over `buckets` equal-width bins of [0, 1]; the last bin is closed.
pub fn similarity_histogram(pairs: &[QueryPair], buckets: usize) -> Vec<usize> {
    let sims: Vec<f64> = pairs.iter().map(|p| p.similarity).collect();
    histogram(&sims, buckets)
}

pub fn histogram(values: &[f64], buckets: usize) -> Vec<usize> {
    assert!(buckets >= 1, "need at least one bucket");
    let mut counts = vec![0usize; buckets];
    for &v in values {
        let idx = ((v.clamp(0.0, 1.0) * buckets as f64).floor() as usize).min(buckets - 1);
        counts[idx] += 1;
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub query_count: usize,
    /// n -> ranked (gram, count)
    pub ngram_tables: BTreeMap<usize, Vec<(String, usize)>>,
    pub length_quartiles: Option<LengthQuartiles>,
    pub length_histogram: BTreeMap<usize, usize>,
    pub advanced_usage: AdvancedUsage,
    pub similarity_histogram: Vec<usize>,
}

pub fn build_report<S: AsRef<str>>(queries: &[S], pairs: &[QueryPair], top_k: usize, buckets: usize) -> StatsReport {
    let lengths = length_stats(queries).ok();
    StatsReport {
        query_count: queries.len(),
        ngram_tables: (1..=4).map(|n| (n, top_ngrams(queries, n, top_k))).collect(),
        length_quartiles: lengths.as_ref().map(|l| l.quartiles),
        length_histogram: lengths.map(|l| l.histogram).unwrap_or_default(),
        advanced_usage: advanced_usage(queries),
        similarity_histogram: similarity_histogram(pairs, buckets),
    }
}
