//! Reverse-mode differentiation over a flat tape of matrix operations.

use rand::Rng;

use super::tensor::{gemm, Layout, Scalar};

pub const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Geometry of a fused multi-head attention call. Query rows are laid out as
/// `b * tq + t`, key/value rows as `b * tk + t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttnSpec {
    pub batch: usize,
    pub tq: usize,
    pub tk: usize,
    pub heads: usize,
    /// Number of valid keys per batch item; later keys are padding.
    pub key_lens: Vec<usize>,
    pub causal: bool,
}

impl AttnSpec {
    /// Keys visible to query `i` of batch item `b`.
    pub fn visible(&self, b: usize, i: usize) -> usize {
        let n = self.key_lens[b];
        if self.causal {
            n.min(i + 1)
        } else {
            n
        }
    }
}

enum Val<'a, F> {
    Owned(Vec<F>),
    Borrowed(&'a [F]),
}

enum Op<F> {
    Leaf,
    Embed { table: usize, ids: Vec<u32>, scale: F },
    MatMul { a: usize, b: usize },
    AddRow { a: usize, bias: usize },
    Add { a: usize, b: usize },
    Relu { a: usize },
    LayerNorm { a: usize, gain: usize, bias: usize, xhat: Vec<F>, inv_std: Vec<F> },
    Attention { q: usize, k: usize, v: usize, spec: AttnSpec, probs: Vec<F> },
    CrossEntropy { logits: usize, targets: Vec<Option<u32>>, probs: Vec<F>, count: usize },
    Dropout { a: usize, mask: Vec<F> },
}

struct Node<'a, F> {
    val: Val<'a, F>,
    rows: usize,
    cols: usize,
    op: Op<F>,
    grad: bool,
}

pub struct Graph<'a, F: Scalar> {
    nodes: Vec<Node<'a, F>>,
    track: bool,
}

pub struct Grads<F> {
    grads: Vec<Option<Vec<F>>>,
}

impl<F> Grads<F> {
    pub fn get(&self, v: Var) -> Option<&[F]> {
        self.grads[v.0].as_deref()
    }

    pub fn take(&mut self, v: Var) -> Option<Vec<F>> {
        self.grads[v.0].take()
    }
}

fn softmax_prefix<F: Scalar>(row: &mut [F], n: usize) {
    let max = row[..n].iter().copied().fold(F::neg_infinity(), F::max);
    let mut sum = F::zero();
    for x in &mut row[..n] {
        *x = (*x - max).exp();
        sum = sum + *x;
    }
    for x in &mut row[..n] {
        *x = *x / sum;
    }
    for x in &mut row[n..] {
        *x = F::zero();
    }
}

fn accumulate<F: Scalar>(grads: &mut [Option<Vec<F>>], idx: usize, contrib: Vec<F>) {
    match &mut grads[idx] {
        Some(g) => g.iter_mut().zip(contrib).for_each(|(a, b)| *a = *a + b),
        slot => *slot = Some(contrib),
    }
}

impl<'a, F: Scalar> Graph<'a, F> {
    /// With `track` false no gradients are kept, which is what inference wants.
    pub fn new(track: bool) -> Self {
        Graph { nodes: Vec::new(), track }
    }

    pub fn value(&self, v: Var) -> &[F] {
        match &self.nodes[v.0].val {
            Val::Owned(x) => x,
            Val::Borrowed(x) => x,
        }
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        (self.nodes[v.0].rows, self.nodes[v.0].cols)
    }

    fn push(&mut self, val: Vec<F>, rows: usize, cols: usize, op: Op<F>, inputs: &[usize]) -> Var {
        debug_assert_eq!(val.len(), rows * cols);
        let grad = self.track && inputs.iter().any(|&i| self.nodes[i].grad);
        self.nodes.push(Node { val: Val::Owned(val), rows, cols, op, grad });
        Var(self.nodes.len() - 1)
    }

    /// Trainable leaf borrowing its values.
    pub fn param(&mut self, data: &'a [F], rows: usize, cols: usize) -> Var {
        assert_eq!(data.len(), rows * cols);
        self.nodes.push(Node { val: Val::Borrowed(data), rows, cols, op: Op::Leaf, grad: self.track });
        Var(self.nodes.len() - 1)
    }

    /// Constant leaf.
    pub fn input(&mut self, data: Vec<F>, rows: usize, cols: usize) -> Var {
        assert_eq!(data.len(), rows * cols);
        self.nodes.push(Node { val: Val::Owned(data), rows, cols, op: Op::Leaf, grad: false });
        Var(self.nodes.len() - 1)
    }

    /// Rows of `table` selected by `ids`, times `scale`.
    pub fn embed(&mut self, table: Var, ids: &[u32], scale: F) -> Var {
        let (v, d) = self.shape(table);
        let t = self.value(table);
        let mut out = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            let id = id as usize;
            assert!(id < v, "token id {id} outside embedding table of {v} rows");
            out.extend(t[id * d..(id + 1) * d].iter().map(|&x| x * scale));
        }
        self.push(out, ids.len(), d, Op::Embed { table: table.0, ids: ids.to_vec(), scale }, &[table.0])
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let ((m, k), (k2, n)) = (self.shape(a), self.shape(b));
        assert_eq!(k, k2, "matmul inner dimensions");
        let mut out = vec![F::zero(); m * n];
        gemm(F::one(), self.value(a), Layout::row_major(m, k), self.value(b), Layout::row_major(k, n), F::zero(), &mut out, Layout::row_major(m, n));
        self.push(out, m, n, Op::MatMul { a: a.0, b: b.0 }, &[a.0, b.0])
    }

    /// Adds a 1×n row to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Var {
        let (m, n) = self.shape(a);
        assert_eq!(self.shape(bias), (1, n));
        let bv = self.value(bias);
        let out: Vec<F> = self.value(a).chunks(n).flat_map(|r| r.iter().zip(bv).map(|(&x, &b)| x + b)).collect();
        self.push(out, m, n, Op::AddRow { a: a.0, bias: bias.0 }, &[a.0, bias.0])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let shape = self.shape(a);
        assert_eq!(shape, self.shape(b));
        let out: Vec<F> = self.value(a).iter().zip(self.value(b)).map(|(&x, &y)| x + y).collect();
        self.push(out, shape.0, shape.1, Op::Add { a: a.0, b: b.0 }, &[a.0, b.0])
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let (m, n) = self.shape(a);
        let out = self.value(a).iter().map(|&x| x.max(F::zero())).collect();
        self.push(out, m, n, Op::Relu { a: a.0 }, &[a.0])
    }

    /// Row-wise layer normalization with 1×n gain and bias.
    pub fn layer_norm(&mut self, a: Var, gain: Var, bias: Var) -> Var {
        let (m, n) = self.shape(a);
        assert_eq!(self.shape(gain), (1, n));
        assert_eq!(self.shape(bias), (1, n));
        let (x, g, b) = (self.value(a), self.value(gain), self.value(bias));
        let nf = F::of(n as f64);
        let mut xhat = Vec::with_capacity(m * n);
        let mut inv_std = Vec::with_capacity(m);
        let mut out = Vec::with_capacity(m * n);
        for row in x.chunks(n) {
            let mean = row.iter().fold(F::zero(), |s, &v| s + v) / nf;
            let var = row.iter().fold(F::zero(), |s, &v| s + (v - mean) * (v - mean)) / nf;
            let is = F::one() / (var + F::of(LN_EPS)).sqrt();
            inv_std.push(is);
            for (j, &v) in row.iter().enumerate() {
                let h = (v - mean) * is;
                xhat.push(h);
                out.push(h * g[j] + b[j]);
            }
        }
        self.push(out, m, n, Op::LayerNorm { a: a.0, gain: gain.0, bias: bias.0, xhat, inv_std }, &[a.0, gain.0, bias.0])
    }

    /// softmax(QKᵀ/√d_k)V per head, with key padding and optional causal masks.
    pub fn attention(&mut self, q: Var, k: Var, v: Var, spec: AttnSpec) -> Var {
        let (qr, d) = self.shape(q);
        assert_eq!(qr, spec.batch * spec.tq, "query rows");
        assert_eq!(self.shape(k), (spec.batch * spec.tk, d), "key shape");
        assert_eq!(self.shape(v), (spec.batch * spec.tk, d), "value shape");
        assert_eq!(spec.key_lens.len(), spec.batch);
        assert!(d % spec.heads == 0, "d_model not divisible by heads");
        let dk = d / spec.heads;
        let scale = F::one() / F::of(dk as f64).sqrt();
        let (tq, tk) = (spec.tq, spec.tk);
        let (qv, kv, vv) = (self.value(q), self.value(k), self.value(v));
        let mut probs = vec![F::zero(); spec.batch * spec.heads * tq * tk];
        let mut out = vec![F::zero(); qr * d];
        for b in 0..spec.batch {
            assert!(spec.key_lens[b] >= 1 && spec.key_lens[b] <= tk, "every query needs a visible key");
            for h in 0..spec.heads {
                let p = &mut probs[(b * spec.heads + h) * tq * tk..][..tq * tk];
                let qo = b * tq * d + h * dk;
                let ko = b * tk * d + h * dk;
                gemm(scale, &qv[qo..], Layout::block(tq, dk, d), &kv[ko..], Layout::block(tk, dk, d).t(), F::zero(), p, Layout::row_major(tq, tk));
                for i in 0..tq {
                    softmax_prefix(&mut p[i * tk..(i + 1) * tk], spec.visible(b, i));
                }
                gemm(F::one(), p, Layout::row_major(tq, tk), &vv[ko..], Layout::block(tk, dk, d), F::zero(), &mut out[qo..], Layout::block(tq, dk, d));
            }
        }
        self.push(out, qr, d, Op::Attention { q: q.0, k: k.0, v: v.0, spec, probs }, &[q.0, k.0, v.0])
    }

    /// Attention weights of a previous [`attention`](Self::attention) node,
    /// indexed `[(b * heads + h) * tq * tk + i * tk + j]`.
    pub fn attention_probs(&self, v: Var) -> Option<&[F]> {
        match &self.nodes[v.0].op {
            Op::Attention { probs, .. } => Some(probs),
            _ => None,
        }
    }

    /// Mean negative log-likelihood over rows whose target is `Some`; a 1×1 node.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[Option<u32>]) -> Var {
        let (m, n) = self.shape(logits);
        assert_eq!(targets.len(), m);
        let x = self.value(logits);
        let mut probs = vec![F::zero(); m * n];
        let mut total = F::zero();
        let mut count = 0;
        for (r, t) in targets.iter().enumerate() {
            let Some(t) = *t else { continue };
            let row = &x[r * n..(r + 1) * n];
            let p = &mut probs[r * n..(r + 1) * n];
            p.copy_from_slice(row);
            let max = row.iter().copied().fold(F::neg_infinity(), F::max);
            let lse = row.iter().fold(F::zero(), |s, &v| s + (v - max).exp()).ln() + max;
            total = total + (lse - row[t as usize]);
            softmax_prefix(p, n);
            count += 1;
        }
        let loss = if count == 0 { F::zero() } else { total / F::of(count as f64) };
        self.push(vec![loss], 1, 1, Op::CrossEntropy { logits: logits.0, targets: targets.to_vec(), probs, count }, &[logits.0])
    }

    /// Inverted dropout: survivors are scaled by 1/(1-p).
    pub fn dropout<R: Rng>(&mut self, a: Var, p: f64, rng: &mut R) -> Var {
        if p <= 0.0 {
            return a;
        }
        let (m, n) = self.shape(a);
        let keep = F::of(1.0 / (1.0 - p));
        let mask: Vec<F> = (0..m * n).map(|_| if rng.random::<f64>() < p { F::zero() } else { keep }).collect();
        let out = self.value(a).iter().zip(&mask).map(|(&x, &k)| x * k).collect();
        self.push(out, m, n, Op::Dropout { a: a.0, mask }, &[a.0])
    }

    /// Gradients of the scalar `loss` with respect to every tracked leaf.
    pub fn backward(&self, loss: Var) -> Grads<F> {
        assert_eq!(self.shape(loss), (1, 1), "loss must be a scalar");
        let mut grads: Vec<Option<Vec<F>>> = (0..self.nodes.len()).map(|_| None).collect();
        if !self.nodes[loss.0].grad {
            return Grads { grads };
        }
        grads[loss.0] = Some(vec![F::one()]);
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
        }
        Grads { grads }
    }

    fn wants(&self, i: usize) -> bool {
        self.nodes[i].grad
    }

    fn propagate(&self, i: usize, g: &[F], grads: &mut [Option<Vec<F>>]) {
        let node = &self.nodes[i];
        let (m, n) = (node.rows, node.cols);
        match &node.op {
            Op::Leaf => {}
            Op::Embed { table, ids, scale } => {
                if self.wants(*table) {
                    let (v, d) = (self.nodes[*table].rows, self.nodes[*table].cols);
                    let mut dt = vec![F::zero(); v * d];
                    for (r, &id) in ids.iter().enumerate() {
                        let row = &mut dt[id as usize * d..(id as usize + 1) * d];
                        for (x, &y) in row.iter_mut().zip(&g[r * d..(r + 1) * d]) {
                            *x = *x + y * *scale;
                        }
                    }
                    accumulate(grads, *table, dt);
                }
            }
            Op::MatMul { a, b } => {
                let k = self.nodes[*a].cols;
                if self.wants(*a) {
                    let mut da = vec![F::zero(); m * k];
                    gemm(F::one(), g, Layout::row_major(m, n), self.value(Var(*b)), Layout::row_major(k, n).t(), F::zero(), &mut da, Layout::row_major(m, k));
                    accumulate(grads, *a, da);
                }
                if self.wants(*b) {
                    let mut db = vec![F::zero(); k * n];
                    gemm(F::one(), self.value(Var(*a)), Layout::row_major(m, k).t(), g, Layout::row_major(m, n), F::zero(), &mut db, Layout::row_major(k, n));
                    accumulate(grads, *b, db);
                }
            }
            Op::AddRow { a, bias } => {
                if self.wants(*a) {
                    accumulate(grads, *a, g.to_vec());
                }
                if self.wants(*bias) {
                    let mut db = vec![F::zero(); n];
                    for row in g.chunks(n) {
                        db.iter_mut().zip(row).for_each(|(x, &y)| *x = *x + y);
                    }
                    accumulate(grads, *bias, db);
                }
            }
            Op::Add { a, b } => {
                for &x in [a, b] {
                    if self.wants(x) {
                        accumulate(grads, x, g.to_vec());
                    }
                }
            }
            Op::Relu { a } => {
                if self.wants(*a) {
                    let x = self.value(Var(*a));
                    accumulate(grads, *a, g.iter().zip(x).map(|(&d, &v)| if v > F::zero() { d } else { F::zero() }).collect());
                }
            }
            Op::Dropout { a, mask } => {
                if self.wants(*a) {
                    accumulate(grads, *a, g.iter().zip(mask).map(|(&d, &k)| d * k).collect());
                }
            }
            Op::LayerNorm { a, gain, bias, xhat, inv_std } => {
                let gv = self.value(Var(*gain));
                if self.wants(*gain) {
                    let mut dg = vec![F::zero(); n];
                    for (grow, hrow) in g.chunks(n).zip(xhat.chunks(n)) {
                        for j in 0..n {
                            dg[j] = dg[j] + grow[j] * hrow[j];
                        }
                    }
                    accumulate(grads, *gain, dg);
                }
                if self.wants(*bias) {
                    let mut db = vec![F::zero(); n];
                    for row in g.chunks(n) {
                        db.iter_mut().zip(row).for_each(|(x, &y)| *x = *x + y);
                    }
                    accumulate(grads, *bias, db);
                }
                if self.wants(*a) {
                    let nf = F::of(n as f64);
                    let mut dx = Vec::with_capacity(m * n);
                    for r in 0..m {
                        let (grow, hrow) = (&g[r * n..(r + 1) * n], &xhat[r * n..(r + 1) * n]);
                        let dh: Vec<F> = grow.iter().zip(gv).map(|(&d, &w)| d * w).collect();
                        let sum_dh = dh.iter().fold(F::zero(), |s, &v| s + v);
                        let sum_dh_h = dh.iter().zip(hrow).fold(F::zero(), |s, (&a, &b)| s + a * b);
                        for j in 0..n {
                            dx.push(inv_std[r] / nf * (nf * dh[j] - sum_dh - hrow[j] * sum_dh_h));
                        }
                    }
                    accumulate(grads, *a, dx);
                }
            }
            Op::Attention { q, k, v, spec, probs } => self.attention_backward(*q, *k, *v, spec, probs, g, grads),
            Op::CrossEntropy { logits, targets, probs, count } => {
                if self.wants(*logits) && *count > 0 {
                    let (lm, ln) = (self.nodes[*logits].rows, self.nodes[*logits].cols);
                    let s = g[0] / F::of(*count as f64);
                    let mut dl = vec![F::zero(); lm * ln];
                    for (r, t) in targets.iter().enumerate() {
                        let Some(t) = *t else { continue };
                        for j in 0..ln {
                            dl[r * ln + j] = probs[r * ln + j] * s;
                        }
                        dl[r * ln + t as usize] = dl[r * ln + t as usize] - s;
                    }
                    accumulate(grads, *logits, dl);
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn attention_backward(&self, q: usize, k: usize, v: usize, spec: &AttnSpec, probs: &[F], g: &[F], grads: &mut [Option<Vec<F>>]) {
        let d = self.nodes[q].cols;
        let dk = d / spec.heads;
        let scale = F::one() / F::of(dk as f64).sqrt();
        let (tq, tk) = (spec.tq, spec.tk);
        let (qv, kv, vv) = (self.value(Var(q)), self.value(Var(k)), self.value(Var(v)));
        let mut dq = vec![F::zero(); qv.len()];
        let mut dkm = vec![F::zero(); kv.len()];
        let mut dv = vec![F::zero(); vv.len()];
        let mut dp = vec![F::zero(); tq * tk];
        for b in 0..spec.batch {
            for h in 0..spec.heads {
                let p = &probs[(b * spec.heads + h) * tq * tk..][..tq * tk];
                let qo = b * tq * d + h * dk;
                let ko = b * tk * d + h * dk;
                let (lq, lk) = (Layout::block(tq, dk, d), Layout::block(tk, dk, d));
                gemm(F::one(), &g[qo..], lq, &vv[ko..], lk.t(), F::zero(), &mut dp, Layout::row_major(tq, tk));
                gemm(F::one(), p, Layout::row_major(tq, tk).t(), &g[qo..], lq, F::one(), &mut dv[ko..], lk);
                for i in 0..tq {
                    let (pr, dr) = (&p[i * tk..(i + 1) * tk], &mut dp[i * tk..(i + 1) * tk]);
                    let dot = pr.iter().zip(dr.iter()).fold(F::zero(), |s, (&a, &b)| s + a * b);
                    for (x, &pp) in dr.iter_mut().zip(pr) {
                        *x = pp * (*x - dot);
                    }
                }
                gemm(scale, &dp, Layout::row_major(tq, tk), &kv[ko..], lk, F::one(), &mut dq[qo..], lq);
                gemm(scale, &dp, Layout::row_major(tq, tk).t(), &qv[qo..], lq, F::one(), &mut dkm[ko..], lk);
            }
        }
        for (idx, contrib) in [(q, dq), (k, dkm), (v, dv)] {
            if self.wants(idx) {
                accumulate(grads, idx, contrib);
            }
        }
    }
}
