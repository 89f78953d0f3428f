//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sequer_client::{Client, ClientError};
use sequer_core::beam::{beam_search, greedy, suggest, StepModel, DEFAULT_ALPHA, DEFAULT_BEAM};
use sequer_core::bpe::{train_bpe, BpeModel, BOS, DEFAULT_MAX_VOCAB, EOS};
use sequer_core::event_log::{generate_synthetic, synthetic_posts, CategoryMix, Event, EventType, SyntheticSpec, Timestamp};
use sequer_core::metrics::{em_at_k, extract_edits, gleu, m2_score, mrr, normalize_ws, Bm25Index, PostDoc};
use sequer_core::miner::{emit_pairs, lcs_similarity, mine_threads, split, MinerConfig, QueryPair, ThreadRef};
use sequer_core::session::{filter_noise, group_and_sort, run_pipeline, sessionize, PipelineConfig};
use sequer_core::transducer::{examples_from_pairs, fit, AnyModel, Control, Example, ModelConfig, TrainConfig, TransducerError, TransducerModel};
use sequer_service::{serve_on, AppState, LoadedModel, ServiceConfig};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_text(rng: &mut ChaCha8Rng, alphabet: &[char], max_len: usize) -> String {
    let n = rng.random_range(0..=max_len);
    (0..n).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect()
}

fn lcs_oracle(a: &[char], b: &[char]) -> usize {
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            t[i][j] = if a[i - 1] == b[j - 1] { t[i - 1][j - 1] + 1 } else { t[i - 1][j].max(t[i][j - 1]) };
        }
    }
    t[a.len()][b.len()]
}

fn lcs_similarity_criterion() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let alphabet: Vec<char> = "abcd ejé#".chars().collect();
    for i in 0..1000 {
        let (a, b) = (random_text(&mut rng, &alphabet, 40), random_text(&mut rng, &alphabet, 40));
        let (ca, cb): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
        let total = ca.len() + cb.len();
        let want = if total == 0 { 1.0 } else { 2.0 * lcs_oracle(&ca, &cb) as f64 / total as f64 };
        check(lcs_similarity(&a, &b) == want, || format!("pair {i}: {a:?} / {b:?}"))?;
    }
    let s = lcs_similarity("do and while in java", "do and while loop in java");
    check((s - 40.0 / 45.0).abs() < 1e-12, || format!("worked example gave {s}"))?;
    let secs = started.elapsed().as_secs_f64();
    check(secs < 5.0, || format!("took {secs:.2}s"))?;
    Ok(format!("1000 random pairs exact, worked example {s:.12}, {secs:.2}s"))
}

fn event(id: &str, t_ms: i64) -> Event {
    Event {
        root_event_id: "root".into(),
        event_id: id.into(),
        user_id: "u".into(),
        event_time: Timestamp(t_ms),
        event_type: EventType::Home,
        url: format!("/{id}"),
        referrer: None,
    }
}

fn sessionization_criterion() -> Outcome {
    let keep = sessionize(vec![event("a", 0), event("b", 360_000)], 360_000);
    check(keep.len() == 1, || format!("360 s gap gave {} sessions", keep.len()))?;
    let cut = sessionize(vec![event("a", 0), event("b", 361_000)], 360_000);
    check(cut.len() == 2, || format!("361 s gap gave {} sessions", cut.len()))?;

    let (events, truth) = generate_synthetic(&SyntheticSpec::new(500, 21)).map_err(|e| e.to_string())?;
    let cfg = PipelineConfig::default();
    let mut got = BTreeSet::new();
    for (_, stream) in group_and_sort(events) {
        for s in sessionize(filter_noise(stream, &cfg), cfg.max_gap_ms) {
            got.insert(s.events.iter().map(|e| e.event_id.clone()).collect::<Vec<_>>());
        }
    }
    let want: BTreeSet<Vec<String>> = truth.sessions().map(|s| s.event_ids.clone()).collect();
    let hit = got.intersection(&want).count() as f64;
    let (p, r) = (hit / got.len() as f64, hit / want.len() as f64);
    check(p == 1.0 && r == 1.0, || format!("precision {p}, recall {r}"))?;
    Ok(format!("360 s keeps, 361 s splits; {} sessions recovered with P = R = 1", want.len()))
}

fn mining_criterion() -> Outcome {
    let mut spec = SyntheticSpec::new(600, 8);
    spec.reformulation_category_mix = CategoryMix::related_only();
    let (events, truth) = generate_synthetic(&spec).map_err(|e| e.to_string())?;
    let (sessions, _) = run_pipeline(events, &PipelineConfig::default());
    let cfg = MinerConfig::default();
    let threads = mine_threads(&sessions, &cfg);

    type Key = (String, Vec<String>, Vec<(String, i64)>, String);
    let got: Vec<Key> = threads
        .iter()
        .map(|t| (t.session_id.clone(), t.queries.clone(), t.interleaved_posts.iter().map(|p| (p.post_id.clone(), p.dwell_ms)).collect(), t.terminal_post.clone()))
        .collect();
    let want: Vec<Key> = truth
        .users
        .iter()
        .filter(|u| !u.is_bot)
        .flat_map(|u| &u.sessions)
        .filter(|s| s.linear)
        .flat_map(|s| s.threads.iter().map(move |t| (s.session_id.clone(), t.queries.clone(), t.interleaved_posts.iter().map(|p| (p.post_id.clone(), p.dwell_ms)).collect(), t.terminal_post.clone())))
        .collect();
    let (mut g, mut w) = (got.clone(), want.clone());
    g.sort();
    w.sort();
    check(g == w, || format!("{} mined threads vs {} in ground truth", got.len(), want.len()))?;

    let mut violations = 0;
    for t in &threads {
        violations += t.queries.windows(2).filter(|q| lcs_similarity(&q[0], &q[1]) <= 0.7).count();
        violations += t.interleaved_posts.iter().filter(|p| p.dwell_ms > 30_000).count();
    }
    let pairs = emit_pairs(&threads, cfg.pair_min_sim);
    violations += pairs.iter().filter(|p| p.similarity < 0.7 || lcs_similarity(&p.original, &p.reformulated) < 0.7).count();
    check(violations == 0, || format!("{violations} constraint violations"))?;
    check(!pairs.is_empty(), || "no pairs emitted".into())?;
    Ok(format!("{} threads equal ground truth, {} pairs, 0 violations", threads.len(), pairs.len()))
}

fn split_criterion() -> Outcome {
    let pairs: Vec<QueryPair> = (0..651_036)
        .map(|i| QueryPair {
            original: format!("q{i}"),
            reformulated: format!("r{i}"),
            similarity: 1.0,
            thread_ref: ThreadRef { session_id: String::new(), query_index: i, terminal_post: String::new() },
        })
        .collect();
    let a = split(pairs.clone(), 5).map_err(|e| e.to_string())?;
    let sizes = (a.train.len(), a.validation.len(), a.test.len());
    check(sizes == (520_830, 65_103, 65_103), || format!("sizes {sizes:?}"))?;
    let b = split(pairs.clone(), 5).map_err(|e| e.to_string())?;
    check(a == b, || "same seed gave different splits".into())?;
    let c = split(pairs, 6).map_err(|e| e.to_string())?;
    check(a.train != c.train, || "different seeds gave identical splits".into())?;
    Ok(format!("{} / {} / {}, deterministic per seed", sizes.0, sizes.1, sizes.2))
}

fn bpe_criterion() -> Outcome {
    let toy = train_bpe(&["ab ab ac"], 100).map_err(|e| e.to_string())?;
    let first = toy.merges().first().cloned();
    check(first == Some(("a".into(), "b</w>".into())), || format!("first merge {first:?}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let alphabet: Vec<char> = "abcdefghij#+.".chars().collect();
    let corpus: Vec<String> = (0..300).map(|_| random_words(&mut rng, &alphabet)).collect();
    let model = train_bpe(&corpus, 400).map_err(|e| e.to_string())?;
    for i in 0..1000 {
        let s = random_words(&mut rng, &alphabet);
        let back = model.decode(&model.encode(&s)).map_err(|e| e.to_string())?;
        check(back == s, || format!("string {i}: {s:?} came back as {back:?}"))?;
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    model.write(&mut x).map_err(|e| e.to_string())?;
    train_bpe(&corpus, 400).map_err(|e| e.to_string())?.write(&mut y).map_err(|e| e.to_string())?;
    check(x == y, || "two runs wrote different model files".into())?;
    Ok(format!("first merge (a, b), 1000 round trips, {} merges reproducible", model.merge_count()))
}

fn random_words(rng: &mut ChaCha8Rng, alphabet: &[char]) -> String {
    let n = rng.random_range(1..6);
    (0..n)
        .map(|_| {
            let len = rng.random_range(1..8);
            (0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect::<String>()
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn numerics_criterion() -> Outcome {
    let started = Instant::now();
    let vocab = 11;
    let mut cfg = ModelConfig::new(2, 2, 16, vocab);
    cfg.dropout = 0.0;
    cfg.max_len = 16;
    let data = vec![Example::new(&[4, 5, 6, 7], &[5, 8, 9], 16), Example::new(&[9, 4], &[10, 4, 6, 5, 7], 16)];
    let model = TransducerModel::<f64>::new(cfg.clone(), 17).map_err(|e| e.to_string())?;
    let (_, grads) = model.loss_and_grads(&data, None).map_err(|e| e.to_string())?;
    let h = 1e-5;
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut probe = model.clone();
    let mut worst = (0.0f64, String::new());
    for (i, name) in model.params.names.iter().enumerate() {
        let mut num = vec![0.0; model.params.data[i].len()];
        for (j, n) in num.iter_mut().enumerate() {
            let orig = probe.params.data[i][j];
            probe.params.data[i][j] = orig + h;
            let up = probe.loss(&data).map_err(|e| e.to_string())?;
            probe.params.data[i][j] = orig - h;
            let down = probe.loss(&data).map_err(|e| e.to_string())?;
            probe.params.data[i][j] = orig;
            *n = (up - down) / (2.0 * h);
        }
        let diff: Vec<f64> = grads[i].iter().zip(&num).map(|(a, b)| a - b).collect();
        let scale = norm(&grads[i]).max(norm(&num));
        // Key biases cancel inside every softmax row: both gradients are zero.
        let err = if name.ends_with(".bk") { norm(&diff).max(scale) } else { norm(&diff) / scale };
        if err > worst.0 || err.is_nan() {
            worst = (err, name.clone());
        }
    }
    check(worst.0 < 1e-4, || format!("block {} has relative error {:e}", worst.1, worst.0))?;

    let src = [BOS, 4, 5, 6, EOS];
    let base = [BOS, 7, 8, 9, 10, 4];
    let logits = model.forward(&src, &base).map_err(|e| e.to_string())?;
    for t in 0..base.len() - 1 {
        let mut changed = base;
        changed[t + 1] = if base[t + 1] == 5 { 6 } else { 5 };
        let other = model.forward(&src, &changed).map_err(|e| e.to_string())?;
        check((0..=t).all(|r| logits[r] == other[r]), || format!("position {} leaks backwards", t + 1))?;
    }

    let mut flat = model.clone();
    flat.params.get_mut("out.w").unwrap().iter_mut().for_each(|x| *x = 0.0);
    flat.params.get_mut("out.b").unwrap().iter_mut().for_each(|x| *x = 0.0);
    let loss = flat.loss(&data).map_err(|e| e.to_string())?;
    check((loss - (vocab as f64).ln()).abs() < 1e-9, || format!("uniform loss {loss}"))?;

    let secs = started.elapsed().as_secs_f64();
    check(secs < 60.0, || format!("took {secs:.1}s"))?;
    Ok(format!("worst gradient block {} at {:.2e}, causal, uniform loss = ln {vocab}, {secs:.1}s", worst.1, worst.0))
}

struct Overfit {
    model: TransducerModel<f32>,
    bpe: BpeModel,
    pairs: Vec<QueryPair>,
}

fn training_pairs() -> Result<Vec<QueryPair>, String> {
    let (events, _) = generate_synthetic(&SyntheticSpec::new(400, 42)).map_err(|e| e.to_string())?;
    let (sessions, _) = run_pipeline(events, &PipelineConfig::default());
    let threads = mine_threads(&sessions, &MinerConfig::default());
    let pairs: Vec<QueryPair> = emit_pairs(&threads, 0.7).into_iter().take(200).collect();
    check(pairs.len() == 200, || format!("only {} pairs mined", pairs.len()))?;
    Ok(pairs)
}

fn em1<M: StepModel>(model: &M, bpe: &BpeModel, pairs: &[QueryPair]) -> Result<f64, String> {
    let mut cands = Vec::with_capacity(pairs.len());
    for p in pairs {
        let top = suggest(model, bpe, &p.original, DEFAULT_BEAM, DEFAULT_ALPHA).map_err(|e| e.to_string())?;
        cands.push(top.into_iter().map(|s| s.text).collect::<Vec<_>>());
    }
    let refs: Vec<&str> = pairs.iter().map(|p| p.reformulated.as_str()).collect();
    Ok(em_at_k(&cands, &refs, &[1])[&1])
}

fn overfit_criterion(slot: &mut Option<Overfit>) -> Outcome {
    let started = Instant::now();
    let pairs = training_pairs()?;
    let corpus: Vec<&str> = pairs.iter().flat_map(|p| [p.original.as_str(), p.reformulated.as_str()]).collect();
    let bpe = train_bpe(&corpus, DEFAULT_MAX_VOCAB).map_err(|e| e.to_string())?;
    let mut mcfg = ModelConfig::small(bpe.vocab_size());
    mcfg.dropout = 0.0;
    let tcfg = TrainConfig { epochs: 300, ..TrainConfig::default() };
    let examples = examples_from_pairs(&pairs, &bpe, mcfg.max_len);
    let model = TransducerModel::<f32>::new(mcfg, 0).map_err(|e| e.to_string())?;

    // Greedy decoding capped at the longest target is a cheap gate; the
    // criterion itself is beam top-1 as served.
    let cap = examples.iter().map(|e| e.tgt_out.len()).max().unwrap_or(1) + 1;
    let greedy_em = |m: &TransducerModel<f32>| -> f64 {
        let hits = pairs
            .iter()
            .zip(&examples)
            .filter(|(p, e)| greedy(m, &e.src, DEFAULT_ALPHA, cap).ok().and_then(|h| bpe.decode(&h.ids).ok()).is_some_and(|t| normalize_ws(&t) == normalize_ws(&p.reformulated)))
            .count();
        hits as f64 / pairs.len() as f64
    };
    let mut reached: Option<(usize, f64)> = None;
    let mut last = (0.0, 0.0);
    let mut eval_err = None;
    let trained = fit(model, &examples, &[], &tcfg, |s, m| {
        if s.epoch % 10 != 0 {
            return Control::Continue;
        }
        last.0 = greedy_em(m);
        if last.0 < 0.95 {
            return Control::Continue;
        }
        match em1(m, &bpe, &pairs) {
            Ok(em) => {
                last.1 = em;
                if em >= 0.95 {
                    reached = Some((s.epoch, em));
                    return Control::Stop;
                }
                Control::Continue
            }
            Err(e) => {
                eval_err = Some(e);
                Control::Stop
            }
        }
    })
    .map_err(|e| e.to_string())?;
    if let Some(e) = eval_err {
        return Err(e);
    }
    let secs = started.elapsed().as_secs_f64();
    *slot = Some(Overfit { model: trained.model, bpe, pairs });
    let (epoch, em) = reached.ok_or_else(|| format!("after 300 epochs: greedy {:.1}%, beam EM@1 {:.1}%", 100.0 * last.0, 100.0 * last.1))?;
    check(secs < 900.0, || format!("took {secs:.0}s"))?;
    Ok(format!("training EM@1 {:.1}% at epoch {epoch}, {secs:.0}s", 100.0 * em))
}

/// Next-token distributions drawn from a hash of (seed, source, prefix).
struct Toy {
    seed: u64,
    vocab: usize,
}

impl Toy {
    fn dist(&self, src: &[u32], prefix: &[u32]) -> Vec<f64> {
        let key = src.iter().chain(prefix).fold(self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15), |h, &x| h.rotate_left(9) ^ (x as u64 + 3).wrapping_mul(0xC2B2_AE3D_27D4_EB4F));
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        let w: Vec<f64> = (0..self.vocab).map(|_| rng.random_range(0.01..1.0f64).powi(3)).collect();
        let z: f64 = w.iter().sum();
        w.iter().map(|x| (x / z).ln()).collect()
    }
}

impl StepModel for Toy {
    fn vocab_size(&self) -> usize {
        self.vocab
    }

    fn max_len(&self) -> usize {
        16
    }

    fn next_log_probs(&self, src: &[u32], prefixes: &[Vec<u32>]) -> Result<Vec<Vec<f64>>, TransducerError> {
        Ok(prefixes.iter().map(|p| self.dist(src, p)).collect())
    }
}

/// All outputs of up to `t` tokens, ranked: score desc, then ids.
fn exhaustive(m: &Toy, src: &[u32], t: usize, alpha: f64) -> Vec<(Vec<u32>, bool, f64)> {
    let mut out = Vec::new();
    let mut frontier: Vec<(Vec<u32>, f64)> = vec![(vec![], 0.0)];
    for step in 0..t {
        let mut next = Vec::new();
        for (ids, lp) in &frontier {
            let prefix: Vec<u32> = std::iter::once(BOS).chain(ids.iter().copied()).collect();
            let d = m.dist(src, &prefix);
            for w in 0..m.vocab as u32 {
                let total = lp + d[w as usize];
                if w == EOS {
                    out.push((ids.clone(), true, total / (ids.len().max(1) as f64).powf(alpha)));
                    continue;
                }
                let mut longer = ids.clone();
                longer.push(w);
                if step + 1 == t {
                    out.push((longer.clone(), false, total / (t as f64).powf(alpha)));
                }
                next.push((longer, total));
            }
        }
        frontier = next;
    }
    out.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(b.1.cmp(&a.1)));
    out
}

fn beam_criterion() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..10 {
        let m = Toy { seed, vocab: 5 };
        let src = [BOS, 4, EOS];
        for alpha in [0.0, DEFAULT_ALPHA, 1.0] {
            let want = exhaustive(&m, &src, 3, alpha);
            let got = beam_search(&m, &src, 125, alpha, 3).map_err(|e| e.to_string())?;
            check(got.len() == want.len(), || format!("seed {seed}: {} hypotheses vs {}", got.len(), want.len()))?;
            for (g, w) in got.iter().zip(&want) {
                check(g.ids == w.0 && g.finished == w.1, || format!("seed {seed} alpha {alpha}: order differs at {:?}", w.0))?;
                worst = worst.max((g.score - w.2).abs());
            }
        }
    }
    check(worst < 1e-9, || format!("score error {worst:e}"))?;
    for seed in 0..100 {
        let m = Toy { seed: 500 + seed, vocab: 5 };
        let src = [BOS, (seed % 4) as u32 + 4, EOS];
        let g = greedy(&m, &src, DEFAULT_ALPHA, 8).map_err(|e| e.to_string())?;
        let b = beam_search(&m, &src, 1, DEFAULT_ALPHA, 8).map_err(|e| e.to_string())?;
        check(b == vec![g], || format!("toy model {seed}: k = 1 differs from greedy"))?;
    }
    Ok(format!("k = 125 matches enumeration of 85 outputs (max score error {worst:.1e}); k = 1 is greedy on 100 models"))
}

fn all_sequences(max_len: usize) -> Vec<Vec<&'static str>> {
    let mut out = vec![vec![]];
    let mut frontier: Vec<Vec<&str>> = vec![vec![]];
    for _ in 0..max_len {
        frontier = frontier.iter().flat_map(|s| ["a", "b", "c"].map(|x| [s.as_slice(), &[x]].concat())).collect();
        out.extend(frontier.iter().cloned());
    }
    out
}

fn edit_distances(seqs: &[Vec<&'static str>], max_len: usize) -> Vec<Vec<usize>> {
    let index: HashMap<&[&str], usize> = seqs.iter().enumerate().map(|(i, s)| (s.as_slice(), i)).collect();
    let adj: Vec<Vec<usize>> = seqs
        .iter()
        .map(|s| {
            let mut n = Vec::new();
            for i in 0..s.len() {
                let mut d = s.clone();
                d.remove(i);
                n.push(index[d.as_slice()]);
                for x in ["a", "b", "c"].into_iter().filter(|x| *x != s[i]) {
                    let mut t = s.clone();
                    t[i] = x;
                    n.push(index[t.as_slice()]);
                }
            }
            if s.len() < max_len {
                for i in 0..=s.len() {
                    for x in ["a", "b", "c"] {
                        let mut t = s.clone();
                        t.insert(i, x);
                        n.push(index[t.as_slice()]);
                    }
                }
            }
            n
        })
        .collect();
    (0..seqs.len())
        .map(|s| {
            let mut dist = vec![usize::MAX; seqs.len()];
            dist[s] = 0;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &v in &adj[u] {
                    if dist[v] == usize::MAX {
                        dist[v] = dist[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
            dist
        })
        .collect()
}

fn metrics_criterion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let words: Vec<char> = "abcdefg".chars().collect();
    for _ in 0..200 {
        let (x, r) = (random_words(&mut rng, &words), random_words(&mut rng, &words));
        let g = gleu(&x, &r, &r);
        check(g == 1.0, || format!("GLEU({x:?}, {r:?}, {r:?}) = {g}"))?;
    }

    let src = ["read file", "sort list", "loop java"];
    let refs = ["java read file", "python sort list", "do while loop java"];
    let same = m2_score(&src, &src, &refs).map_err(|e| e.to_string())?;
    check((same.precision, same.recall, same.f1) == (1.0, 0.0, 0.0), || format!("hyp = src gave {same:?}"))?;
    let perfect = m2_score(&src, &refs, &refs).map_err(|e| e.to_string())?;
    check((perfect.precision, perfect.recall, perfect.f1) == (1.0, 1.0, 1.0), || format!("hyp = ref gave {perfect:?}"))?;

    for _ in 0..200 {
        let n = rng.random_range(1..8);
        let cands: Vec<Vec<String>> = (0..n).map(|_| (0..rng.random_range(0..12)).map(|_| random_words(&mut rng, &words[..2])).collect()).collect();
        let refs: Vec<String> = (0..n).map(|_| random_words(&mut rng, &words[..2])).collect();
        let em = em_at_k(&cands, &refs, &[1, 2, 3, 5, 10]);
        let vals: Vec<f64> = em.values().copied().collect();
        check(vals.windows(2).all(|w| w[0] <= w[1]), || format!("EM@k not monotone: {em:?}"))?;
    }

    let seqs = all_sequences(6);
    let dist = edit_distances(&seqs, 6);
    for (i, s) in seqs.iter().enumerate() {
        for (j, t) in seqs.iter().enumerate() {
            let e = extract_edits(s, t);
            let separated = e.edits.windows(2).all(|w| w[0].end < w[1].start);
            check(e.cost() == dist[i][j] && e.apply(s) == *t && separated, || format!("{s:?} -> {t:?}: {e:?}"))?;
        }
    }

    let posts: Vec<PostDoc> = ["a", "b", "c", "d", "e", "f"].iter().map(|id| PostDoc { post_id: id.to_string(), title: "same title".into(), body: String::new() }).collect();
    let index = Bm25Index::build(&posts).map_err(|e| e.to_string())?;
    let rr = mrr(&index, &[("same", "e")], 100).map_err(|e| e.to_string())?;
    check(rr == 0.2, || format!("rank-5 reciprocal rank {rr}"))?;
    Ok(format!("GLEU(x, r, r) = 1, M² conventions, EM@k monotone, {} sequence pairs minimal, rank 5 gives 0.2", seqs.len() * seqs.len()))
}

fn retrieval_criterion() -> Outcome {
    let (_, truth) = generate_synthetic(&SyntheticSpec::new(400, 42)).map_err(|e| e.to_string())?;
    let posts = synthetic_posts(&truth, 40, 10, 7);
    check(posts.len() == 50, || format!("{} posts", posts.len()))?;
    let index = Bm25Index::build(&posts).map_err(|e| e.to_string())?;
    let mut originals = Vec::new();
    let mut reformulated = Vec::new();
    for (_, t) in truth.threads().filter(|(_, t)| index.contains(&t.terminal_post)) {
        originals.push((t.queries[0].clone(), t.terminal_post.clone()));
        reformulated.push((t.queries.last().unwrap().clone(), t.terminal_post.clone()));
    }
    let before = mrr(&index, &originals, 100).map_err(|e| e.to_string())?;
    let after = mrr(&index, &reformulated, 100).map_err(|e| e.to_string())?;
    check(after > before, || format!("reformulated MRR {after:.4} <= original {before:.4}"))?;
    Ok(format!("{} queries over 50 posts: original MRR {before:.4} < reformulated {after:.4}", originals.len()))
}

fn service_criterion(trained: Option<&Overfit>) -> Outcome {
    let Some(Overfit { model, bpe, pairs }) = trained else {
        return Err("no trained model from the overfit run".into());
    };
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    let any = AnyModel::F32(model.clone());
    let memorized: Vec<&QueryPair> = pairs[..40]
        .iter()
        .filter(|p| suggest(model, bpe, &p.original, DEFAULT_BEAM, DEFAULT_ALPHA).ok().and_then(|c| c.into_iter().next()).is_some_and(|c| c.text == p.reformulated))
        .take(20)
        .collect();
    let loaded = LoadedModel::new(any, bpe.clone(), "acceptance".into()).map_err(|e| e.to_string())?;
    let cfg = ServiceConfig::default();
    let state = AppState::new(Some(loaded), &cfg);

    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.map_err(|e| e.to_string())?;
        let base = format!("http://{}", listener.local_addr().map_err(|e| e.to_string())?);
        let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
        let server = tokio::spawn(async move {
            serve_on(listener, state, &cfg, async {
                let _ = stopped.await;
            })
            .await
        });
        let client = Client::new(&base);

        let health = client.health().await.map_err(|e| e.to_string())?;
        check(health.status == "ok", || format!("health {health:?}"))?;

        let query = pairs[0].original.clone();
        let tasks: Vec<_> = (0..16)
            .map(|_| {
                let (c, q) = (client.clone(), query.clone());
                tokio::spawn(async move { c.suggest(&q, Some(10), None).await })
            })
            .collect();
        let mut bodies = BTreeSet::new();
        for t in tasks {
            let r = t.await.map_err(|e| e.to_string())?.map_err(|e| e.to_string())?;
            check(r.candidates.len() <= 10 && r.candidates.windows(2).all(|w| w[0].score >= w[1].score), || "bad candidate list".into())?;
            bodies.insert(serde_json::to_string(&r.candidates).map_err(|e| e.to_string())?);
        }
        check(bodies.len() == 1, || format!("{} distinct answers to 16 identical requests", bodies.len()))?;

        match client.suggest("", None, None).await {
            Err(ClientError::Api { status, code }) if status.as_u16() == 400 && code == "empty_query" => {}
            other => return Err(format!("empty query gave {other:?}")),
        }

        let mut served_ok = 0;
        for p in &memorized {
            let r = client.suggest(&p.original, Some(3), None).await.map_err(|e| e.to_string())?;
            check(r.candidates.len() <= 3, || "k = 3 returned more than 3".into())?;
            served_ok += usize::from(r.candidates.first().is_some_and(|c| c.text == p.reformulated));
        }
        check(!memorized.is_empty() && served_ok == memorized.len(), || format!("{served_ok}/{} memorized reformulations served", memorized.len()))?;

        let _ = stop.send(());
        server.await.map_err(|e| e.to_string())?.map_err(|e| e.to_string())?;
        Ok(format!("/health 200, 16 concurrent identical answers, empty query 400, {served_ok} memorized reformulations served top-1"))
    })
}

fn main() {
    let mut trained = None;
    let mut results: BTreeMap<usize, (&str, Outcome)> = BTreeMap::new();
    let mut run = |i: usize, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let outcome = f();
        match &outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => println!("FAIL  {name}: {why}"),
        }
        results.insert(i, (name, outcome));
    };
    run(1, "LCS similarity", &mut lcs_similarity_criterion);
    run(2, "sessionization boundaries", &mut sessionization_criterion);
    run(3, "mining fidelity", &mut mining_criterion);
    run(4, "split sizes", &mut split_criterion);
    run(5, "BPE", &mut bpe_criterion);
    run(6, "transformer numerics", &mut numerics_criterion);
    run(7, "overfit", &mut || overfit_criterion(&mut trained));
    run(8, "beam search oracle", &mut beam_criterion);
    run(9, "metrics", &mut metrics_criterion);
    run(10, "retrieval sanity", &mut retrieval_criterion);
    run(11, "service", &mut || service_criterion(trained.as_ref()));

    let failed: Vec<&str> = results.values().filter(|(_, o)| o.is_err()).map(|(n, _)| *n).collect();
    println!("{} of {} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
