use std::collections::BTreeMap;

pub const EM_KS: [usize; 3] = [1, 5, 10];

/// Trim and collapse internal whitespace runs; case is kept.
pub fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Fraction of items whose first `k` candidates contain the reference. An
/// empty corpus scores 0 for every k.
pub fn em_at_k<S: AsRef<str>, R: AsRef<str>>(candidates: &[Vec<S>], references: &[R], ks: &[usize]) -> BTreeMap<usize, f64> {
    assert_eq!(candidates.len(), references.len());
    let first_hit: Vec<Option<usize>> = candidates
        .iter()
        .zip(references)
        .map(|(cands, r)| {
            let r = normalize_ws(r.as_ref());
            cands.iter().position(|c| normalize_ws(c.as_ref()) == r)
        })
        .collect();
    ks.iter()
        .map(|&k| {
            let hits = first_hit.iter().filter(|h| matches!(h, Some(p) if *p < k)).count();
            let frac = if first_hit.is_empty() { 0.0 } else { hits as f64 / first_hit.len() as f64 };
            (k, frac)
        })
        .collect()
}
