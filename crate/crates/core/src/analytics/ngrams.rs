use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

const STOPWORDS_V1: &str = include_str!("../../data/stopwords-v1.txt");

/// Shipped English stop-word list.
pub fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| {
        STOPWORDS_V1
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect()
    })
}

fn keep_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '#' | '+' | '_' | '.' | '"')
}

/// Lowercased whitespace tokens with punctuation removed, except for the
/// characters that carry meaning in programming terms (`c#`, `c++`,
/// `file.txt`, `snake_case`, quoted phrases). Tokens left without any
/// alphanumeric character are dropped.
pub fn normalize_tokens(query: &str) -> Vec<String> {
    query
        .split_whitespace()
        .map(|tok| tok.to_lowercase().chars().filter(|&c| keep_char(c)).collect::<String>())
        .map(|tok| tok.trim_end_matches('.').to_string())
        .filter(|tok| tok.chars().any(char::is_alphanumeric))
        .collect()
}

/// Contiguous n-grams of one query. Stop words are removed for unigrams only;
/// longer grams keep them so phrases like "how to" survive.
pub fn query_ngrams(query: &str, n: usize) -> Vec<String> {
    let mut toks = normalize_tokens(query);
    if n == 1 {
        let stop = stopwords();
        toks.retain(|t| !stop.contains(t.as_str()));
    }
    if n == 0 || toks.len() < n {
        return Vec::new();
    }
    toks.windows(n).map(|w| w.join(" ")).collect()
}

/// Top `k` n-grams by count, ties broken lexicographically.
pub fn top_ngrams<S: AsRef<str>>(queries: &[S], n: usize, k: usize) -> Vec<(String, usize)> {
    assert!((1..=4).contains(&n), "n-gram order must be in 1..=4");
    let mut counts: HashMap<String, usize> = HashMap::new();
    for q in queries {
        for g in query_ngrams(q.as_ref(), n) {
            *counts.entry(g).or_default() += 1;
        }
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(k);
    ranked
}
