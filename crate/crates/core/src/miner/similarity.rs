/// Length of the longest common subsequence of two character slices.
/// Two-row DP, O(|a|·|b|) time and O(min) space.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let mut prev = vec![0usize; short.len() + 1];
    let mut cur = vec![0usize; short.len() + 1];
    for x in long {
        for (j, y) in short.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[short.len()]
}

/// Character-level similarity `2·|LCS(a, b)| / (|a| + |b|)`, over Unicode
/// scalar values. Two empty strings are identical (1.0).
pub fn lcs_similarity(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let total = a.len() + b.len();
    if total == 0 {
        return 1.0;
    }
    2.0 * lcs_len(&a, &b) as f64 / total as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Full-table textbook recurrence, kept separate from the rolling version.
    fn lcs_table(a: &[char], b: &[char]) -> usize {
        let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                t[i][j] = if a[i - 1] == b[j - 1] { t[i - 1][j - 1] + 1 } else { t[i - 1][j].max(t[i][j - 1]) };
            }
        }
        t[a.len()][b.len()]
    }

    #[test]
    fn fixed_cases() {
        assert_eq!(lcs_similarity("abc", "abc"), 1.0);
        assert_eq!(lcs_similarity("abc", ""), 0.0);
        assert_eq!(lcs_similarity("", ""), 1.0);
        let s = lcs_similarity("do and while in java", "do and while loop in java");
        assert!((s - 40.0 / 45.0).abs() < 1e-12);
        assert_eq!(lcs_similarity("你好，世界", "再见世界"), 4.0 / 9.0);
    }

    proptest! {
        #[test]
        fn matches_table_oracle(a in "[abc ]{0,40}", b in "[abc ]{0,40}") {
            let (ca, cb): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
            prop_assert_eq!(lcs_len(&ca, &cb), lcs_table(&ca, &cb));
        }

        #[test]
        fn bounded_and_symmetric(a in "\\PC{0,20}", b in "\\PC{0,20}") {
            let s = lcs_similarity(&a, &b);
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert_eq!(s, lcs_similarity(&b, &a));
            prop_assert_eq!(lcs_similarity(&a, &a), 1.0);
        }
    }
}
