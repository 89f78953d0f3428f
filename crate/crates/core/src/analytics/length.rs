use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("length statistics need at least one query")]
pub struct EmptyInput;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthQuartiles {
    pub p25: usize,
    pub median: usize,
    pub mean: f64,
    pub p75: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    pub quartiles: LengthQuartiles,
    /// word count -> number of queries
    pub histogram: BTreeMap<usize, usize>,
}

/// Whitespace-separated word count; identifiers in CamelCase or
/// snake_case count as one word.
pub fn word_count(query: &str) -> usize {
    query.split_whitespace().count()
}

/// Nearest-rank percentile of an ascending slice, `p` in (0, 100].
pub fn nearest_rank(sorted: &[usize], p: f64) -> usize {
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub fn length_stats<S: AsRef<str>>(queries: &[S]) -> Result<LengthStats, EmptyInput> {
    if queries.is_empty() {
        return Err(EmptyInput);
    }
    let mut lengths: Vec<usize> = queries.iter().map(|q| word_count(q.as_ref())).collect();
    lengths.sort_unstable();
    let mut histogram = BTreeMap::new();
    for &l in &lengths {
        *histogram.entry(l).or_default() += 1;
    }
    let mean = lengths.iter().sum::<usize>() as f64 / lengths.len() as f64;
    Ok(LengthStats {
        quartiles: LengthQuartiles {
            p25: nearest_rank(&lengths, 25.0),
            median: nearest_rank(&lengths, 50.0),
            mean,
            p75: nearest_rank(&lengths, 75.0),
        },
        histogram,
    })
}
