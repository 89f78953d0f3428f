//! Single-reference GLEU.

use std::collections::HashMap;

use thiserror::Error;

pub const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("hypothesis is empty")]
pub struct EmptyHypothesis;

fn counts<'a>(tokens: &'a [&'a str], n: usize) -> HashMap<&'a [&'a str], usize> {
    let mut out = HashMap::new();
    if tokens.len() >= n {
        for g in tokens.windows(n) {
            *out.entry(g).or_insert(0) += 1;
        }
    }
    out
}

/// Per-order raw statistics for one sentence.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GleuStats {
    /// Unclipped numerator: matches with the reference minus source copies the
    /// reference does not have. May be negative.
    pub numerator: [i64; MAX_ORDER],
    /// Number of hypothesis n-grams.
    pub denominator: [u64; MAX_ORDER],
    pub hyp_len: u64,
    pub ref_len: u64,
}

impl GleuStats {
    pub fn of(source: &[&str], hypothesis: &[&str], reference: &[&str]) -> Self {
        let mut st = GleuStats { hyp_len: hypothesis.len() as u64, ref_len: reference.len() as u64, ..Default::default() };
        for n in 1..=MAX_ORDER {
            let h = counts(hypothesis, n);
            let s = counts(source, n);
            let r = counts(reference, n);
            let mut matched = 0i64;
            let mut penalty = 0i64;
            for (g, &hc) in &h {
                let hr = hc.min(r.get(g).copied().unwrap_or(0)) as i64;
                let hs = hc.min(s.get(g).copied().unwrap_or(0)) as i64;
                matched += hr;
                penalty += (hs - hr).max(0);
            }
            st.numerator[n - 1] = matched - penalty;
            st.denominator[n - 1] = h.values().sum::<usize>() as u64;
        }
        st
    }

    pub fn add(&mut self, other: &GleuStats) {
        for i in 0..MAX_ORDER {
            self.numerator[i] += other.numerator[i];
            self.denominator[i] += other.denominator[i];
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
    }

    /// Orders without any hypothesis n-gram are left out of the geometric mean.
    pub fn score(&self) -> Result<f64, EmptyHypothesis> {
        if self.hyp_len == 0 {
            return Err(EmptyHypothesis);
        }
        let mut log_sum = 0.0;
        let mut orders = 0;
        for i in 0..MAX_ORDER {
            let den = self.denominator[i];
            if den == 0 {
                continue;
            }
            let num = self.numerator[i].max(0) as f64;
            let p = if num == 0.0 { 1.0 / (2.0 * den as f64) } else { num / den as f64 };
            log_sum += p.ln();
            orders += 1;
        }
        let bp = (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp().min(1.0);
        Ok((bp * (log_sum / orders as f64).exp()).clamp(0.0, 1.0))
    }
}

fn words(s: &str) -> Vec<&str> {
    s.split_whitespace().collect()
}

/// Sentence GLEU; an empty hypothesis scores 0.
pub fn gleu(source: &str, hypothesis: &str, reference: &str) -> f64 {
    gleu_checked(source, hypothesis, reference).unwrap_or(0.0)
}

pub fn gleu_checked(source: &str, hypothesis: &str, reference: &str) -> Result<f64, EmptyHypothesis> {
    GleuStats::of(&words(source), &words(hypothesis), &words(reference)).score()
}

/// Corpus GLEU from summed statistics. Empty corpus or all-empty hypotheses score 0.
pub fn corpus_gleu<S: AsRef<str>>(sources: &[S], hypotheses: &[S], references: &[S]) -> f64 {
    assert_eq!(sources.len(), hypotheses.len());
    assert_eq!(sources.len(), references.len());
    let mut total = GleuStats::default();
    for ((s, h), r) in sources.iter().zip(hypotheses).zip(references) {
        total.add(&GleuStats::of(&words(s.as_ref()), &words(h.as_ref()), &words(r.as_ref())));
    }
    total.score().unwrap_or(0.0)
}
