//! BM25 post index and mean reciprocal rank.

use std::collections::{BTreeSet, HashMap};
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const K1: f64 = 1.2;
pub const B: f64 = 0.75;
pub const DEFAULT_CUTOFF: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostDoc {
    pub post_id: String,
    pub title: String,
    pub body: String,
}

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("duplicate post id {0:?}")]
    DuplicatePostId(String),
    #[error("target post {0:?} is not in the index")]
    UnknownTargetPost(String),
    #[error("cutoff must be at least 1")]
    ZeroCutoff,
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase).collect()
}

#[derive(Debug, Clone)]
pub struct Bm25Index {
    ids: Vec<String>,
    doc_len: Vec<f64>,
    avg_len: f64,
    /// term -> (doc, term frequency), docs ascending
    postings: HashMap<String, Vec<(usize, u32)>>,
}

impl Bm25Index {
    pub fn build(posts: &[PostDoc]) -> Result<Self, RetrievalError> {
        let mut sorted: Vec<&PostDoc> = posts.iter().collect();
        sorted.sort_by(|a, b| a.post_id.cmp(&b.post_id));
        if let Some(w) = sorted.windows(2).find(|w| w[0].post_id == w[1].post_id) {
            return Err(RetrievalError::DuplicatePostId(w[0].post_id.clone()));
        }
        let mut postings: HashMap<String, Vec<(usize, u32)>> = HashMap::new();
        let mut doc_len = Vec::with_capacity(sorted.len());
        for (d, p) in sorted.iter().enumerate() {
            let mut tf: HashMap<String, u32> = HashMap::new();
            for t in tokenize(&p.title) {
                *tf.entry(t).or_default() += 2;
            }
            for t in tokenize(&p.body) {
                *tf.entry(t).or_default() += 1;
            }
            doc_len.push(tf.values().map(|&c| c as f64).sum());
            for (t, c) in tf {
                postings.entry(t).or_default().push((d, c));
            }
        }
        let avg_len = if doc_len.is_empty() { 0.0 } else { doc_len.iter().sum::<f64>() / doc_len.len() as f64 };
        Ok(Bm25Index { ids: sorted.iter().map(|p| p.post_id.clone()).collect(), doc_len, avg_len, postings })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, post_id: &str) -> bool {
        self.position(post_id).is_some()
    }

    fn position(&self, post_id: &str) -> Option<usize> {
        self.ids.binary_search_by(|p| p.as_str().cmp(post_id)).ok()
    }

    pub fn idf(&self, df: usize) -> f64 {
        let n = self.ids.len() as f64;
        (1.0 + (n - df as f64 + 0.5) / (df as f64 + 0.5)).ln()
    }

    /// Documents with positive score, best first; ties by post id.
    pub fn search(&self, query: &str, cutoff: usize) -> Vec<(String, f64)> {
        let terms: BTreeSet<String> = tokenize(query).into_iter().collect();
        let mut scores: HashMap<usize, f64> = HashMap::new();
        for t in &terms {
            let Some(list) = self.postings.get(t) else { continue };
            let idf = self.idf(list.len());
            for &(d, tf) in list {
                let tf = tf as f64;
                let norm = K1 * (1.0 - B + B * self.doc_len[d] / self.avg_len);
                *scores.entry(d).or_default() += idf * tf * (K1 + 1.0) / (tf + norm);
            }
        }
        let mut ranked: Vec<(usize, f64)> = scores.into_iter().filter(|&(_, s)| s > 0.0).collect();
        // Doc indices follow post-id order, so the index is the tie-break.
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(cutoff);
        ranked.into_iter().map(|(d, s)| (self.ids[d].clone(), s)).collect()
    }

    /// 1-based rank of `target` within the first `cutoff` results.
    pub fn rank_of(&self, query: &str, target: &str, cutoff: usize) -> Result<Option<usize>, RetrievalError> {
        if cutoff == 0 {
            return Err(RetrievalError::ZeroCutoff);
        }
        if !self.contains(target) {
            return Err(RetrievalError::UnknownTargetPost(target.to_string()));
        }
        Ok(self.search(query, cutoff).iter().position(|(id, _)| id == target).map(|p| p + 1))
    }
}

/// Mean reciprocal rank over (query, target post id) pairs; 0 for no queries.
pub fn mrr<Q: AsRef<str>, T: AsRef<str>>(index: &Bm25Index, queries: &[(Q, T)], cutoff: usize) -> Result<f64, RetrievalError> {
    if queries.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (q, t) in queries {
        if let Some(rank) = index.rank_of(q.as_ref(), t.as_ref(), cutoff)? {
            total += 1.0 / rank as f64;
        }
    }
    Ok(total / queries.len() as f64)
}

pub fn read_posts<R: BufRead>(input: R) -> Result<Vec<PostDoc>, RetrievalError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| RetrievalError::Parse { line: i + 1, reason: e.to_string() })?);
    }
    Ok(out)
}

pub fn write_posts<W: Write>(posts: &[PostDoc], mut out: W) -> io::Result<()> {
    for p in posts {
        serde_json::to_writer(&mut out, p)?;
        writeln!(out)?;
    }
    Ok(())
}
