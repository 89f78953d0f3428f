use serde::{Deserialize, Serialize};

use super::similarity::lcs_similarity;
use super::threads::ReformulationThread;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThreadRef {
    pub session_id: String,
    /// Position of the original query inside its thread.
    pub query_index: usize,
    /// Post the user finally settled on.
    pub terminal_post: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryPair {
    pub original: String,
    pub reformulated: String,
    pub similarity: f64,
    pub thread_ref: ThreadRef,
}

/// Printable ASCII only (0x20..=0x7E).
pub fn is_english(query: &str) -> bool {
    query.bytes().all(|b| (0x20..=0x7e).contains(&b))
}

/// Pairs every earlier query of a thread with its last one, dropping threads
/// with non-English queries and pairs below `min_sim` (if given).
pub fn emit_pairs_with(threads: &[ReformulationThread], min_sim: Option<f64>) -> Vec<QueryPair> {
    let mut out = Vec::new();
    for thread in threads {
        if thread.queries.len() < 2 || !thread.queries.iter().all(|q| is_english(q)) {
            continue;
        }
        let target = thread.queries.last().expect("non-empty thread");
        for (i, original) in thread.queries[..thread.queries.len() - 1].iter().enumerate() {
            let similarity = lcs_similarity(original, target);
            if min_sim.is_some_and(|m| similarity < m) {
                continue;
            }
            out.push(QueryPair {
                original: original.clone(),
                reformulated: target.clone(),
                similarity,
                thread_ref: ThreadRef {
                    session_id: thread.session_id.clone(),
                    query_index: i,
                    terminal_post: thread.terminal_post.clone(),
                },
            });
        }
    }
    out
}

pub fn emit_pairs(threads: &[ReformulationThread], min_sim: f64) -> Vec<QueryPair> {
    emit_pairs_with(threads, Some(min_sim))
}
