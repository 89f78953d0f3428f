use serde::{Deserialize, Serialize};

use super::similarity::lcs_similarity;
use crate::event_log::EventType;
use crate::session::Session;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinerConfig {
    /// Consecutive queries of a thread must be strictly more similar than this.
    pub adjacent_min_sim: f64,
    /// Emitted pairs must be at least this similar.
    pub pair_min_sim: f64,
    /// Longest post visit (inclusive) that still counts as unsatisfactory.
    pub dwell_limit_ms: i64,
}

impl Default for MinerConfig {
    fn default() -> Self {
        MinerConfig { adjacent_min_sim: 0.7, pair_min_sim: 0.7, dwell_limit_ms: 30_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterleavedPost {
    pub post_id: String,
    pub dwell_ms: i64,
}

impl InterleavedPost {
    pub fn dwell_secs(&self) -> f64 {
        self.dwell_ms as f64 / 1000.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReformulationThread {
    pub queries: Vec<String>,
    pub interleaved_posts: Vec<InterleavedPost>,
    pub terminal_post: String,
    pub session_id: String,
}

enum Item {
    Query(String),
    ShortPost(InterleavedPost),
}

/// Greedy left-to-right thread extraction over one session.
///
/// Searches accumulate into a run; short post visits are absorbed; a long
/// (or session-final) post visit closes the run. Any other event type
/// abandons the run. A closed run is deduplicated, cut wherever adjacent
/// similarity fails, and its last segment becomes a thread when it still
/// holds two or more queries.
pub fn extract_threads(session: &Session, cfg: &MinerConfig) -> Vec<ReformulationThread> {
    let events = &session.events;
    let ends_in_post = events.last().is_some_and(|e| e.event_type == EventType::Post);
    let has_search = events.iter().any(|e| e.event_type == EventType::Search);
    if !ends_in_post || !has_search {
        return Vec::new();
    }

    let mut threads = Vec::new();
    let mut run: Vec<Item> = Vec::new();
    for (i, e) in events.iter().enumerate() {
        match e.event_type {
            EventType::Search => {
                if let Some(q) = e.query() {
                    run.push(Item::Query(q));
                }
            }
            EventType::Post => {
                let Some(post_id) = e.post_id() else {
                    run.clear();
                    continue;
                };
                let dwell = events.get(i + 1).map(|next| next.event_time.millis_since(e.event_time));
                match dwell {
                    Some(d) if d <= cfg.dwell_limit_ms => {
                        if run.iter().any(|it| matches!(it, Item::Query(_))) {
                            run.push(Item::ShortPost(InterleavedPost { post_id, dwell_ms: d }));
                        }
                    }
                    _ => {
                        if let Some(t) = close_run(std::mem::take(&mut run), post_id, &session.session_id, cfg) {
                            threads.push(t);
                        }
                    }
                }
            }
            _ => run.clear(),
        }
    }
    threads
}

fn close_run(run: Vec<Item>, terminal_post: String, session_id: &str, cfg: &MinerConfig) -> Option<ReformulationThread> {
    // Drop repeats of the previous query (posts in between do not separate them).
    let mut items: Vec<Item> = Vec::with_capacity(run.len());
    let mut last_query: Option<String> = None;
    for item in run {
        match item {
            Item::Query(q) => {
                if last_query.as_deref() == Some(q.as_str()) {
                    continue;
                }
                last_query = Some(q.clone());
                items.push(Item::Query(q));
            }
            post => items.push(post),
        }
    }

    // Start of the final segment: just after the last adjacency failure.
    let mut seg_start = None;
    let mut prev_q: Option<&str> = None;
    for (idx, item) in items.iter().enumerate() {
        if let Item::Query(q) = item {
            match prev_q {
                Some(p) if lcs_similarity(p, q) > cfg.adjacent_min_sim => {}
                _ => seg_start = Some(idx),
            }
            prev_q = Some(q);
        }
    }

    let mut queries = Vec::new();
    let mut interleaved_posts = Vec::new();
    for item in items.into_iter().skip(seg_start?) {
        match item {
            Item::Query(q) => queries.push(q),
            Item::ShortPost(p) => interleaved_posts.push(p),
        }
    }
    (queries.len() >= 2).then(|| ReformulationThread {
        queries,
        interleaved_posts,
        terminal_post,
        session_id: session_id.to_string(),
    })
}
