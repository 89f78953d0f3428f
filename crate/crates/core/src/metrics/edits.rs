//! Phrase-level edits between a source and a target token sequence.

use serde::{Deserialize, Serialize};

/// Replace `source[start..end]` with `replacement`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edit {
    pub start: usize,
    pub end: usize,
    pub replacement: Vec<String>,
}

/// Edits ordered by span start; spans never overlap.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditSet {
    pub edits: Vec<Edit>,
}

impl EditSet {
    pub fn len(&self) -> usize {
        self.edits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edits.is_empty()
    }

    pub fn contains(&self, edit: &Edit) -> bool {
        self.edits.binary_search(edit).is_ok()
    }

    pub fn apply<S: AsRef<str>>(&self, source: &[S]) -> Vec<String> {
        let mut out = Vec::new();
        let mut pos = 0;
        for e in &self.edits {
            out.extend(source[pos..e.start].iter().map(|s| s.as_ref().to_string()));
            out.extend(e.replacement.iter().cloned());
            pos = e.end;
        }
        out.extend(source[pos..].iter().map(|s| s.as_ref().to_string()));
        out
    }

    /// Sum over edits of max(span length, replacement length).
    pub fn cost(&self) -> usize {
        self.edits.iter().map(|e| (e.end - e.start).max(e.replacement.len())).sum()
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Op {
    Match,
    Sub,
    Del,
    Ins,
}

pub fn levenshtein<S: AsRef<str>, T: AsRef<str>>(a: &[S], b: &[T]) -> usize {
    table(a, b)[a.len()][b.len()]
}

fn table<S: AsRef<str>, T: AsRef<str>>(a: &[S], b: &[T]) -> Vec<Vec<usize>> {
    let (n, m) = (a.len(), b.len());
    let mut d = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=m {
        d[0][j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1].as_ref() != b[j - 1].as_ref());
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d
}

/// Word-level Levenshtein alignment (backtrace prefers match, then
/// substitution, deletion, insertion), with adjacent non-match operations
/// merged into one edit.
pub fn extract_edits<S: AsRef<str>, T: AsRef<str>>(source: &[S], target: &[T]) -> EditSet {
    let d = table(source, target);
    let (mut i, mut j) = (source.len(), target.len());
    let mut ops = Vec::new();
    while i > 0 || j > 0 {
        let op = if i > 0 && j > 0 && source[i - 1].as_ref() == target[j - 1].as_ref() && d[i][j] == d[i - 1][j - 1] {
            Op::Match
        } else if i > 0 && j > 0 && d[i][j] == d[i - 1][j - 1] + 1 {
            Op::Sub
        } else if i > 0 && d[i][j] == d[i - 1][j] + 1 {
            Op::Del
        } else {
            Op::Ins
        };
        ops.push(op);
        match op {
            Op::Match | Op::Sub => {
                i -= 1;
                j -= 1;
            }
            Op::Del => i -= 1,
            Op::Ins => j -= 1,
        }
    }
    ops.reverse();

    let mut edits = Vec::new();
    let (mut i, mut j) = (0, 0);
    let mut open: Option<Edit> = None;
    for op in ops {
        if op == Op::Match {
            edits.extend(open.take());
        } else {
            let e = open.get_or_insert_with(|| Edit { start: i, end: i, replacement: Vec::new() });
            if matches!(op, Op::Sub | Op::Del) {
                e.end += 1;
            }
            if matches!(op, Op::Sub | Op::Ins) {
                e.replacement.push(target[j].as_ref().to_string());
            }
        }
        match op {
            Op::Match | Op::Sub => {
                i += 1;
                j += 1;
            }
            Op::Del => i += 1,
            Op::Ins => j += 1,
        }
    }
    edits.extend(open);
    EditSet { edits }
}

/// Whitespace-tokenizing convenience wrapper.
pub fn extract_edits_str(source: &str, target: &str) -> EditSet {
    let s: Vec<&str> = source.split_whitespace().collect();
    let t: Vec<&str> = target.split_whitespace().collect();
    extract_edits(&s, &t)
}
