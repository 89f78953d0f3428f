use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::{AttnSpec, Grads, Graph, Var};
use super::tensor::Scalar;
use super::TransducerError;
use crate::bpe::{BOS, EOS, PAD};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub num_layers: usize,
    pub num_heads: usize,
    pub d_model: usize,
    pub ffn_size: usize,
    pub vocab_size: usize,
    pub max_len: usize,
    pub dropout: f64,
}

impl ModelConfig {
    /// Desk-scale default: 2 layers, 2 heads, d_model 64.
    pub fn small(vocab_size: usize) -> Self {
        Self::new(2, 2, 64, vocab_size)
    }

    /// The full-size layout: 4 layers, 4 heads, d_model 512.
    pub fn full(vocab_size: usize) -> Self {
        Self::new(4, 4, 512, vocab_size)
    }

    pub fn new(num_layers: usize, num_heads: usize, d_model: usize, vocab_size: usize) -> Self {
        ModelConfig { num_layers, num_heads, d_model, ffn_size: 4 * d_model, vocab_size, max_len: 64, dropout: 0.1 }
    }

    pub fn validate(&self) -> Result<(), TransducerError> {
        let bad = |m: String| Err(TransducerError::Config(m));
        if self.num_layers == 0 || self.num_heads == 0 || self.d_model == 0 || self.ffn_size == 0 {
            return bad("layers, heads, d_model and ffn_size must be positive".into());
        }
        if !self.d_model.is_multiple_of(self.num_heads) {
            return bad(format!("d_model {} is not divisible by {} heads", self.d_model, self.num_heads));
        }
        if self.vocab_size <= EOS as usize {
            return bad(format!("vocab_size {} leaves no room for special tokens", self.vocab_size));
        }
        if self.max_len < 2 {
            return bad("max_len must be at least 2".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        Ok(())
    }
}

/// Named parameter blocks, each a row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<F> {
    pub names: Vec<String>,
    pub shapes: Vec<(usize, usize)>,
    pub data: Vec<Vec<F>>,
    index: HashMap<String, usize>,
}

impl<F: Scalar> Params<F> {
    fn new() -> Self {
        Params { names: Vec::new(), shapes: Vec::new(), data: Vec::new(), index: HashMap::new() }
    }

    pub(crate) fn push(&mut self, name: String, rows: usize, cols: usize, data: Vec<F>) {
        assert_eq!(data.len(), rows * cols);
        self.index.insert(name.clone(), self.names.len());
        self.names.push(name);
        self.shapes.push((rows, cols));
        self.data.push(data);
    }

    pub fn get(&self, name: &str) -> Option<&[F]> {
        self.index.get(name).map(|&i| self.data[i].as_slice())
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Vec<F>> {
        self.index.get(name).map(|&i| &mut self.data[i])
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn count(&self) -> usize {
        self.data.iter().map(Vec::len).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().flatten().all(|x| x.is_finite())
    }
}

/// Layout of every parameter block for `cfg`, in a fixed order.
pub(crate) fn param_layout(cfg: &ModelConfig) -> Vec<(String, usize, usize)> {
    let (d, f, v) = (cfg.d_model, cfg.ffn_size, cfg.vocab_size);
    let mut out = vec![("embed".to_string(), v, d)];
    let attn = |out: &mut Vec<(String, usize, usize)>, p: &str| {
        for m in ["q", "k", "v", "o"] {
            out.push((format!("{p}.w{m}"), d, d));
            out.push((format!("{p}.b{m}"), 1, d));
        }
    };
    let ln = |out: &mut Vec<(String, usize, usize)>, p: &str| {
        out.push((format!("{p}.g"), 1, d));
        out.push((format!("{p}.b"), 1, d));
    };
    let ffn = |out: &mut Vec<(String, usize, usize)>, p: &str| {
        out.push((format!("{p}.w1"), d, f));
        out.push((format!("{p}.b1"), 1, f));
        out.push((format!("{p}.w2"), f, d));
        out.push((format!("{p}.b2"), 1, d));
    };
    for l in 0..cfg.num_layers {
        attn(&mut out, &format!("enc.{l}.self"));
        ln(&mut out, &format!("enc.{l}.ln1"));
        ffn(&mut out, &format!("enc.{l}.ffn"));
        ln(&mut out, &format!("enc.{l}.ln2"));
    }
    for l in 0..cfg.num_layers {
        attn(&mut out, &format!("dec.{l}.self"));
        ln(&mut out, &format!("dec.{l}.ln1"));
        attn(&mut out, &format!("dec.{l}.cross"));
        ln(&mut out, &format!("dec.{l}.ln2"));
        ffn(&mut out, &format!("dec.{l}.ffn"));
        ln(&mut out, &format!("dec.{l}.ln3"));
    }
    out.push(("out.w".to_string(), d, v));
    out.push(("out.b".to_string(), 1, v));
    out
}

/// Sinusoidal position table, `max_len × d` row-major.
pub fn positional_table(max_len: usize, d: usize) -> Vec<f64> {
    let mut pe = vec![0.0; max_len * d];
    for pos in 0..max_len {
        for i in (0..d).step_by(2) {
            let angle = pos as f64 / 10000f64.powf(i as f64 / d as f64);
            pe[pos * d + i] = angle.sin();
            if i + 1 < d {
                pe[pos * d + i + 1] = angle.cos();
            }
        }
    }
    pe
}

/// One training example: `src` = BOS x EOS, decoder input BOS y, target y EOS.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub src: Vec<u32>,
    pub tgt_in: Vec<u32>,
    pub tgt_out: Vec<u32>,
}

impl Example {
    /// Truncates `source` and `target` tokens so every sequence fits `max_len`.
    pub fn new(source: &[u32], target: &[u32], max_len: usize) -> Self {
        let s = &source[..source.len().min(max_len.saturating_sub(2))];
        let t = &target[..target.len().min(max_len.saturating_sub(1))];
        Example {
            src: std::iter::once(BOS).chain(s.iter().copied()).chain(std::iter::once(EOS)).collect(),
            tgt_in: std::iter::once(BOS).chain(t.iter().copied()).collect(),
            tgt_out: t.iter().copied().chain(std::iter::once(EOS)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransducerModel<F> {
    pub config: ModelConfig,
    pub params: Params<F>,
    pe: Vec<F>,
}

struct Bound<'p> {
    vars: Vec<Var>,
    names: &'p HashMap<String, usize>,
}

impl Bound<'_> {
    fn p(&self, name: &str) -> Var {
        self.vars[*self.names.get(name).unwrap_or_else(|| panic!("no parameter {name}"))]
    }
}

/// How the batched forward pass is run.
pub(crate) struct Mode<'r> {
    pub dropout: Option<&'r mut ChaCha8Rng>,
    pub positions: bool,
}

impl<F: Scalar> TransducerModel<F> {
    /// Xavier-uniform weights, zero biases, unit layer-norm gains.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, TransducerError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Params::new();
        for (name, r, c) in param_layout(&config) {
            let last = name.rsplit('.').next().unwrap_or("");
            let data = if name.contains(".ln") && last == "g" {
                vec![F::one(); r * c]
            } else if r == 1 {
                vec![F::zero(); r * c]
            } else {
                let bound = (6.0 / (r + c) as f64).sqrt();
                (0..r * c).map(|_| F::of(rng.random_range(-bound..bound))).collect()
            };
            params.push(name, r, c, data);
        }
        Ok(Self::from_params(config, params))
    }

    pub(crate) fn from_params(config: ModelConfig, params: Params<F>) -> Self {
        let pe = positional_table(config.max_len, config.d_model).into_iter().map(F::of).collect();
        TransducerModel { config, params, pe }
    }

    pub(crate) fn empty_params() -> Params<F> {
        Params::new()
    }

    fn bind<'a>(&'a self, g: &mut Graph<'a, F>) -> Bound<'a> {
        let vars = self.params.data.iter().zip(&self.params.shapes).map(|(d, &(r, c))| g.param(d, r, c)).collect();
        Bound { vars, names: &self.params.index }
    }

    fn check_len(&self, len: usize) -> Result<(), TransducerError> {
        if len > self.config.max_len {
            return Err(TransducerError::SequenceTooLong { len, max: self.config.max_len });
        }
        Ok(())
    }

    fn embed_batch<'a>(&self, g: &mut Graph<'a, F>, bp: &Bound, seqs: &[Vec<u32>], t: usize, mode: &mut Mode) -> Var {
        let d = self.config.d_model;
        let mut ids = Vec::with_capacity(seqs.len() * t);
        let mut pos = Vec::with_capacity(seqs.len() * t * d);
        for s in seqs {
            ids.extend(s.iter().copied().chain(std::iter::repeat(PAD)).take(t));
            for p in 0..t {
                if mode.positions {
                    pos.extend_from_slice(&self.pe[p * d..(p + 1) * d]);
                } else {
                    pos.extend(std::iter::repeat_n(F::zero(), d));
                }
            }
        }
        let x = g.embed(bp.p("embed"), &ids, F::of(d as f64).sqrt());
        let pe = g.input(pos, seqs.len() * t, d);
        let x = g.add(x, pe);
        self.drop(g, x, mode)
    }

    fn drop<'a>(&self, g: &mut Graph<'a, F>, x: Var, mode: &mut Mode) -> Var {
        match mode.dropout.as_deref_mut() {
            Some(rng) => g.dropout(x, self.config.dropout, rng),
            None => x,
        }
    }

    fn linear<'a>(g: &mut Graph<'a, F>, bp: &Bound, x: Var, w: &str, b: &str) -> Var {
        let y = g.matmul(x, bp.p(w));
        g.add_row(y, bp.p(b))
    }

    fn mha<'a>(&self, g: &mut Graph<'a, F>, bp: &Bound, p: &str, xq: Var, xkv: Var, spec: AttnSpec) -> Var {
        let q = Self::linear(g, bp, xq, &format!("{p}.wq"), &format!("{p}.bq"));
        let k = Self::linear(g, bp, xkv, &format!("{p}.wk"), &format!("{p}.bk"));
        let v = Self::linear(g, bp, xkv, &format!("{p}.wv"), &format!("{p}.bv"));
        let a = g.attention(q, k, v, spec);
        Self::linear(g, bp, a, &format!("{p}.wo"), &format!("{p}.bo"))
    }

    fn sublayer<'a>(&self, g: &mut Graph<'a, F>, bp: &Bound, x: Var, y: Var, ln: &str, mode: &mut Mode) -> Var {
        let y = self.drop(g, y, mode);
        let s = g.add(x, y);
        g.layer_norm(s, bp.p(&format!("{ln}.g")), bp.p(&format!("{ln}.b")))
    }

    fn ffn<'a>(g: &mut Graph<'a, F>, bp: &Bound, p: &str, x: Var) -> Var {
        let h = Self::linear(g, bp, x, &format!("{p}.w1"), &format!("{p}.b1"));
        let h = g.relu(h);
        Self::linear(g, bp, h, &format!("{p}.w2"), &format!("{p}.b2"))
    }

    fn encoder<'a>(&self, g: &mut Graph<'a, F>, bp: &Bound, src: &[Vec<u32>], mode: &mut Mode) -> (Var, usize) {
        let ts = src.iter().map(Vec::len).max().unwrap_or(0);
        let lens: Vec<usize> = src.iter().map(Vec::len).collect();
        let mut x = self.embed_batch(g, bp, src, ts, mode);
        for l in 0..self.config.num_layers {
            let spec = AttnSpec { batch: src.len(), tq: ts, tk: ts, heads: self.config.num_heads, key_lens: lens.clone(), causal: false };
            let a = self.mha(g, bp, &format!("enc.{l}.self"), x, x, spec);
            x = self.sublayer(g, bp, x, a, &format!("enc.{l}.ln1"), mode);
            let f = Self::ffn(g, bp, &format!("enc.{l}.ffn"), x);
            x = self.sublayer(g, bp, x, f, &format!("enc.{l}.ln2"), mode);
        }
        (x, ts)
    }

    #[allow(clippy::too_many_arguments)]
    fn decoder<'a>(&self, g: &mut Graph<'a, F>, bp: &Bound, mem: Var, src_lens: &[usize], ts: usize, tgt: &[Vec<u32>], mode: &mut Mode) -> (Var, usize) {
        let tt = tgt.iter().map(Vec::len).max().unwrap_or(0);
        let tlens: Vec<usize> = tgt.iter().map(Vec::len).collect();
        let heads = self.config.num_heads;
        let mut y = self.embed_batch(g, bp, tgt, tt, mode);
        for l in 0..self.config.num_layers {
            let spec = AttnSpec { batch: tgt.len(), tq: tt, tk: tt, heads, key_lens: tlens.clone(), causal: true };
            let a = self.mha(g, bp, &format!("dec.{l}.self"), y, y, spec);
            y = self.sublayer(g, bp, y, a, &format!("dec.{l}.ln1"), mode);
            let spec = AttnSpec { batch: tgt.len(), tq: tt, tk: ts, heads, key_lens: src_lens.to_vec(), causal: false };
            let c = self.mha(g, bp, &format!("dec.{l}.cross"), y, mem, spec);
            y = self.sublayer(g, bp, y, c, &format!("dec.{l}.ln2"), mode);
            let f = Self::ffn(g, bp, &format!("dec.{l}.ffn"), y);
            y = self.sublayer(g, bp, y, f, &format!("dec.{l}.ln3"), mode);
        }
        let logits = Self::linear(g, bp, y, "out.w", "out.b");
        (logits, tt)
    }

    fn check_batch(&self, src: &[Vec<u32>], tgt: &[Vec<u32>]) -> Result<(), TransducerError> {
        assert_eq!(src.len(), tgt.len(), "batch sizes");
        for s in src.iter().chain(tgt) {
            self.check_len(s.len())?;
            if s.is_empty() {
                return Err(TransducerError::EmptySequence);
            }
            if let Some(&bad) = s.iter().find(|&&t| t as usize >= self.config.vocab_size) {
                return Err(TransducerError::UnknownToken(bad));
            }
        }
        Ok(())
    }

    /// Builds the batched graph and returns (logits var, target length).
    pub(crate) fn build<'a>(&'a self, g: &mut Graph<'a, F>, src: &[Vec<u32>], tgt: &[Vec<u32>], mode: &mut Mode) -> Result<(Var, usize, Vec<Var>), TransducerError> {
        self.check_batch(src, tgt)?;
        let bp = self.bind(g);
        let (mem, ts) = self.encoder(g, &bp, src, mode);
        let lens: Vec<usize> = src.iter().map(Vec::len).collect();
        let (logits, tt) = self.decoder(g, &bp, mem, &lens, ts, tgt, mode);
        Ok((logits, tt, bp.vars))
    }

    /// Logits for each prefix position: row t scores the token after `tgt_prefix[..=t]`.
    pub fn forward(&self, src: &[u32], tgt_prefix: &[u32]) -> Result<Vec<Vec<F>>, TransducerError> {
        let mut g = Graph::new(false);
        let (logits, tt, _) = self.build(&mut g, &[src.to_vec()], &[tgt_prefix.to_vec()], &mut Mode { dropout: None, positions: true })?;
        let v = self.config.vocab_size;
        Ok(g.value(logits).chunks(v).take(tt).map(<[F]>::to_vec).collect())
    }

    /// Encoder output rows for a single source sequence.
    pub fn encode(&self, src: &[u32], positions: bool) -> Result<Vec<Vec<F>>, TransducerError> {
        self.check_batch(&[src.to_vec()], &[vec![BOS]])?;
        let mut g = Graph::new(false);
        let bp = self.bind(&mut g);
        let (mem, _) = self.encoder(&mut g, &bp, &[src.to_vec()], &mut Mode { dropout: None, positions });
        Ok(g.value(mem).chunks(self.config.d_model).map(<[F]>::to_vec).collect())
    }

    fn targets(batch: &[Example], tt: usize) -> Vec<Option<u32>> {
        batch.iter().flat_map(|e| (0..tt).map(move |t| e.tgt_out.get(t).copied())).collect()
    }

    /// Mean token cross-entropy of a batch, without dropout.
    pub fn loss(&self, batch: &[Example]) -> Result<f64, TransducerError> {
        let src: Vec<Vec<u32>> = batch.iter().map(|e| e.src.clone()).collect();
        let tgt: Vec<Vec<u32>> = batch.iter().map(|e| e.tgt_in.clone()).collect();
        let mut g = Graph::new(false);
        let (logits, tt, _) = self.build(&mut g, &src, &tgt, &mut Mode { dropout: None, positions: true })?;
        let loss = g.cross_entropy(logits, &Self::targets(batch, tt));
        Ok(g.value(loss)[0].f64())
    }

    /// Loss and per-block gradients, aligned with `self.params`.
    pub fn loss_and_grads(&self, batch: &[Example], dropout: Option<&mut ChaCha8Rng>) -> Result<(f64, Vec<Vec<F>>), TransducerError> {
        let src: Vec<Vec<u32>> = batch.iter().map(|e| e.src.clone()).collect();
        let tgt: Vec<Vec<u32>> = batch.iter().map(|e| e.tgt_in.clone()).collect();
        let mut g = Graph::new(true);
        let (logits, tt, vars) = self.build(&mut g, &src, &tgt, &mut Mode { dropout, positions: true })?;
        let loss = g.cross_entropy(logits, &Self::targets(batch, tt));
        let value = g.value(loss)[0].f64();
        let mut grads: Grads<F> = g.backward(loss);
        let out = vars
            .iter()
            .zip(&self.params.data)
            .map(|(&v, d)| grads.take(v).unwrap_or_else(|| vec![F::zero(); d.len()]))
            .collect();
        Ok((value, out))
    }

    /// Log-softmax (in f64) of the next-token distribution after each prefix.
    pub fn next_log_probs(&self, src: &[u32], prefixes: &[Vec<u32>]) -> Result<Vec<Vec<f64>>, TransducerError> {
        if prefixes.is_empty() {
            return Ok(Vec::new());
        }
        let srcs = vec![src.to_vec(); prefixes.len()];
        let mut g = Graph::new(false);
        let (logits, tt, _) = self.build(&mut g, &srcs, prefixes, &mut Mode { dropout: None, positions: true })?;
        let v = self.config.vocab_size;
        let x = g.value(logits);
        Ok(prefixes
            .iter()
            .enumerate()
            .map(|(b, p)| {
                let row = &x[(b * tt + p.len() - 1) * v..][..v];
                log_softmax(row)
            })
            .collect())
    }
}

pub fn log_softmax<F: Scalar>(row: &[F]) -> Vec<f64> {
    let max = row.iter().map(|x| x.f64()).fold(f64::NEG_INFINITY, f64::max);
    let lse = row.iter().map(|x| (x.f64() - max).exp()).sum::<f64>().ln() + max;
    row.iter().map(|x| x.f64() - lse).collect()
}
