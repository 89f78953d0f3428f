use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AdvancedSearchKind {
    Tag,
    User,
    Phrase,
    ExcludePhrase,
    Wildcard,
    QuestionOnly,
    AnswerCount,
    MultipleTags,
    Score,
    CreationDate,
}

impl AdvancedSearchKind {
    pub const ALL: [AdvancedSearchKind; 10] = [
        AdvancedSearchKind::Tag,
        AdvancedSearchKind::User,
        AdvancedSearchKind::Phrase,
        AdvancedSearchKind::ExcludePhrase,
        AdvancedSearchKind::Wildcard,
        AdvancedSearchKind::QuestionOnly,
        AdvancedSearchKind::AnswerCount,
        AdvancedSearchKind::MultipleTags,
        AdvancedSearchKind::Score,
        AdvancedSearchKind::CreationDate,
    ];
}

struct Patterns {
    bracket: Regex,
    or_join: Regex,
    operators: [(Regex, AdvancedSearchKind); 6],
}

fn patterns() -> &'static Patterns {
    static P: OnceLock<Patterns> = OnceLock::new();
    P.get_or_init(|| {
        let re = |s: &str| Regex::new(s).expect("static regex");
        Patterns {
            bracket: re(r"\[[^\]]*\]"),
            or_join: re(r"^\s+or\s+$"),
            operators: [
                (re(r"^user:\d+$"), AdvancedSearchKind::User),
                (re(r"^is:question$"), AdvancedSearchKind::QuestionOnly),
                (re(r"^answers:\d+$"), AdvancedSearchKind::AnswerCount),
                (re(r"^score:\d+$"), AdvancedSearchKind::Score),
                (re(r"^created:\d{2}-\d{2}-\d{4}(\.\.)?$"), AdvancedSearchKind::CreationDate),
                (re(r"^-\w+$"), AdvancedSearchKind::ExcludePhrase),
            ],
        }
    })
}

fn at_token_start(s: &str, pos: usize) -> bool {
    s[..pos].chars().next_back().is_none_or(char::is_whitespace)
}

fn at_token_end(s: &str, pos: usize) -> bool {
    s[pos..].chars().next().is_none_or(char::is_whitespace)
}

#[derive(Debug)]
struct Bracket {
    start: usize,
    end: usize,
    wildcard: bool,
    tag: bool,
}

/// Every advanced-search operator used by `query`.
///
/// Tags and wildcards are bracket groups standing alone as tokens. Two tags
/// joined by `or` count as one MultipleTags use and not as plain tags.
pub fn detect_advanced(query: &str) -> BTreeSet<AdvancedSearchKind> {
    let p = patterns();
    let mut kinds = BTreeSet::new();

    let groups: Vec<Bracket> = p
        .bracket
        .find_iter(query)
        .filter(|m| at_token_start(query, m.start()) && at_token_end(query, m.end()))
        .map(|m| {
            let inner = &query[m.start() + 1..m.end() - 1];
            Bracket {
                start: m.start(),
                end: m.end(),
                wildcard: inner.ends_with('*'),
                tag: !inner.is_empty() && !inner.contains('*') && !inner.chars().any(char::is_whitespace),
            }
        })
        .collect();

    let mut joined = vec![false; groups.len()];
    for i in 1..groups.len() {
        let (a, b) = (&groups[i - 1], &groups[i]);
        if a.tag && b.tag && p.or_join.is_match(&query[a.end..b.start]) {
            joined[i - 1] = true;
            joined[i] = true;
            kinds.insert(AdvancedSearchKind::MultipleTags);
        }
    }
    for (g, j) in groups.iter().zip(&joined) {
        if g.wildcard {
            kinds.insert(AdvancedSearchKind::Wildcard);
        } else if g.tag && !j {
            kinds.insert(AdvancedSearchKind::Tag);
        }
    }

    // Quoted phrases: `"..."` or `-"..."`, each a standalone token.
    let bytes = query.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let negated = bytes[i] == b'-' && bytes.get(i + 1) == Some(&b'"');
        let open = if negated { i + 1 } else { i };
        if bytes[open] == b'"' && at_token_start(query, i) {
            if let Some(len) = query[open + 1..].find('"') {
                let close = open + 1 + len;
                if len > 0 && at_token_end(query, close + 1) {
                    kinds.insert(if negated { AdvancedSearchKind::ExcludePhrase } else { AdvancedSearchKind::Phrase });
                    i = close + 1;
                    continue;
                }
            }
        }
        i += 1;
    }

    for tok in query.split_whitespace() {
        for (re, kind) in &p.operators {
            if re.is_match(tok) {
                kinds.insert(*kind);
            }
        }
    }
    kinds
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvancedUsage {
    /// Fraction of queries using at least one operator.
    pub ratio: f64,
    /// Share of each kind among all detected kind occurrences.
    pub per_kind: BTreeMap<AdvancedSearchKind, f64>,
}

pub fn advanced_usage<S: AsRef<str>>(queries: &[S]) -> AdvancedUsage {
    let mut using = 0usize;
    let mut counts: BTreeMap<AdvancedSearchKind, usize> = BTreeMap::new();
    for q in queries {
        let kinds = detect_advanced(q.as_ref());
        if !kinds.is_empty() {
            using += 1;
        }
        for k in kinds {
            *counts.entry(k).or_default() += 1;
        }
    }
    let total: usize = counts.values().sum();
    AdvancedUsage {
        ratio: if queries.is_empty() { 0.0 } else { using as f64 / queries.len() as f64 },
        per_kind: counts.into_iter().map(|(k, c)| (k, c as f64 / total as f64)).collect(),
    }
}
