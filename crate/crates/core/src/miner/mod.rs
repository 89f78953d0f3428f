//! Reformulation-thread mining, training-pair emission and dataset splitting.

mod io;
mod pairs;
mod similarity;
mod split;
mod threads;

pub use io::{read_pairs_jsonl, read_pairs_tsv, write_pairs_jsonl, write_pairs_tsv};
pub use pairs::{emit_pairs, emit_pairs_with, is_english, QueryPair, ThreadRef};
pub use similarity::{lcs_len, lcs_similarity};
pub use split::{split, split_sizes, SplitDataset, TooFewPairs};
pub use threads::{extract_threads, InterleavedPost, MinerConfig, ReformulationThread};

/// Threads from every session, in session order.
pub fn mine_threads(sessions: &[crate::session::Session], cfg: &MinerConfig) -> Vec<ReformulationThread> {
    sessions.iter().flat_map(|s| extract_threads(s, cfg)).collect()
}
