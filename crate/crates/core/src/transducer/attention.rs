//! Single-head scaled dot-product attention on plain matrices.

use super::TransducerError;

/// softmax(QKᵀ/√d_k)V. `mask[i][j]` true means query i may attend to key j.
pub fn scaled_dot_attention(q: &[Vec<f64>], k: &[Vec<f64>], v: &[Vec<f64>], mask: Option<&[Vec<bool>]>) -> Result<Vec<Vec<f64>>, TransducerError> {
    let shape = |what: &str| TransducerError::ShapeMismatch(what.to_string());
    let dk = q.first().map_or(0, Vec::len);
    if q.iter().any(|r| r.len() != dk) || k.iter().any(|r| r.len() != dk) {
        return Err(shape("Q and K rows must share d_k"));
    }
    if k.len() != v.len() {
        return Err(shape("K and V must have the same number of rows"));
    }
    let dv = v.first().map_or(0, Vec::len);
    if v.iter().any(|r| r.len() != dv) {
        return Err(shape("ragged V"));
    }
    if let Some(m) = mask {
        if m.len() != q.len() || m.iter().any(|r| r.len() != k.len()) {
            return Err(shape("mask must be n × m"));
        }
    }
    let scale = 1.0 / (dk as f64).sqrt();
    let mut out = Vec::with_capacity(q.len());
    for (i, qi) in q.iter().enumerate() {
        let allowed = |j: usize| mask.is_none_or(|m| m[i][j]);
        let scores: Vec<f64> = k
            .iter()
            .enumerate()
            .map(|(j, kj)| if allowed(j) { qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() * scale } else { f64::NEG_INFINITY })
            .collect();
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(TransducerError::AllMaskedRow(i));
        }
        let w: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let z: f64 = w.iter().sum();
        let mut row = vec![0.0; dv];
        for (wj, vj) in w.iter().zip(v) {
            for (o, x) in row.iter_mut().zip(vj) {
                *o += wj / z * x;
            }
        }
        out.push(row);
    }
    Ok(out)
}
