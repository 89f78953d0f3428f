use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sequer_core::bpe::{BOS, EOS};
use sequer_core::transducer::*;

fn tiny_config(vocab: usize) -> ModelConfig {
    let mut c = ModelConfig::new(2, 2, 16, vocab);
    c.dropout = 0.0;
    c.max_len = 16;
    c
}

fn batch() -> Vec<Example> {
    vec![Example::new(&[4, 5, 6, 7], &[5, 8, 9], 16), Example::new(&[9, 4], &[10, 4, 6, 5, 7], 16)]
}

fn approx(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn attention_reference_cases() {
    let v = vec![vec![3.0, -1.0]];
    let out = scaled_dot_attention(&[vec![0.3, 9.0]], &[vec![-2.0, 5.0]], &v, None).unwrap();
    assert_eq!(out, v);

    let k = vec![vec![1.0, 2.0]; 3];
    let vals = vec![vec![1.0, 0.0], vec![2.0, 4.0], vec![6.0, 2.0]];
    let out = scaled_dot_attention(&[vec![0.7, -0.2]], &k, &vals, None).unwrap();
    assert!(approx(out[0][0], 3.0, 1e-12) && approx(out[0][1], 2.0, 1e-12));

    let out = scaled_dot_attention(&[vec![1.0, 0.0]], &[vec![1.0, 0.0], vec![0.0, 1.0]], &[vec![1.0, 0.0], vec![0.0, 1.0]], None).unwrap();
    let e = (1.0f64 / 2f64.sqrt()).exp();
    assert!(approx(out[0][0], e / (e + 1.0), 1e-12));
    assert!(approx(out[0][1], 1.0 / (e + 1.0), 1e-12));
    assert!(approx(out[0][0], 0.6698, 1e-4) && approx(out[0][1], 0.3302, 1e-4));
}

#[test]
fn attention_errors() {
    let q = [vec![1.0, 0.0]];
    let k = [vec![1.0, 0.0], vec![0.0, 1.0]];
    let mask = [vec![false, false]];
    assert!(matches!(scaled_dot_attention(&q, &k, &k, Some(&mask)), Err(TransducerError::AllMaskedRow(0))));
    assert!(matches!(scaled_dot_attention(&q, &[vec![1.0]], &[vec![1.0]], None), Err(TransducerError::ShapeMismatch(_))));
    assert!(matches!(scaled_dot_attention(&q, &k, &k[..1], None), Err(TransducerError::ShapeMismatch(_))));
}

#[test]
fn fused_attention_matches_reference_per_head() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (batch, tq, tk, heads, d) = (2, 4, 5, 2, 6);
    let mut gen = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-1.0..1.0)).collect() };
    let (q, k, v) = (gen(batch * tq * d), gen(batch * tk * d), gen(batch * tk * d));
    for causal in [false, true] {
        let spec = AttnSpec { batch, tq, tk, heads, key_lens: vec![5, 3], causal };
        let mut g = Graph::<f64>::new(false);
        let (qv, kv, vv) = (g.input(q.clone(), batch * tq, d), g.input(k.clone(), batch * tk, d), g.input(v.clone(), batch * tk, d));
        let out = g.attention(qv, kv, vv, spec.clone());
        let got = g.value(out).to_vec();
        let probs = g.attention_probs(out).unwrap().to_vec();
        let dk = d / heads;
        for b in 0..batch {
            for h in 0..heads {
                let rows = |m: &[f64], t: usize, n: usize| -> Vec<Vec<f64>> { (0..n).map(|i| m[(b * t + i) * d + h * dk..][..dk].to_vec()).collect() };
                let mask: Vec<Vec<bool>> = (0..tq).map(|i| (0..tk).map(|j| j < spec.visible(b, i)).collect()).collect();
                let want = scaled_dot_attention(&rows(&q, tq, tq), &rows(&k, tk, tk), &rows(&v, tk, tk), Some(&mask)).unwrap();
                for i in 0..tq {
                    for c in 0..dk {
                        assert!(approx(got[(b * tq + i) * d + h * dk + c], want[i][c], 1e-12));
                    }
                    let p = &probs[((b * heads + h) * tq + i) * tk..][..tk];
                    assert!(approx(p.iter().sum::<f64>(), 1.0, 1e-6));
                    for j in 0..tk {
                        if !mask[i][j] {
                            assert!(p[j] < 1e-12);
                        }
                    }
                }
            }
        }
    }
}

fn naive_ce(logits: &[Vec<f64>], gold: &[u32], keep: &[bool]) -> f64 {
    let mut total = 0.0;
    let mut n = 0.0;
    for ((row, &g), &k) in logits.iter().zip(gold).zip(keep) {
        if !k {
            continue;
        }
        let z: f64 = row.iter().map(|x| x.exp()).sum();
        total -= (row[g as usize].exp() / z).ln();
        n += 1.0;
    }
    total / n
}

#[test]
fn cross_entropy_matches_scalar_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (rows, vocab) = (6, 7);
    let logits: Vec<Vec<f64>> = (0..rows).map(|_| (0..vocab).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
    let gold: Vec<u32> = (0..rows).map(|_| rng.random_range(0..vocab as u32)).collect();
    let keep = [true, true, false, true, false, true];
    let mut g = Graph::<f64>::new(false);
    let x = g.input(logits.concat(), rows, vocab);
    let targets: Vec<Option<u32>> = gold.iter().zip(keep).map(|(&t, k)| k.then_some(t)).collect();
    let loss = g.cross_entropy(x, &targets);
    assert!(approx(g.value(loss)[0], naive_ce(&logits, &gold, &keep), 1e-12));

    let mut g = Graph::<f64>::new(false);
    let x = g.input(vec![0.25; 10], 1, 10);
    let loss = g.cross_entropy(x, &[Some(3)]);
    assert!(approx(g.value(loss)[0], 10f64.ln(), 1e-12));

    let mut g = Graph::<f64>::new(false);
    let x = g.input(vec![0.0, 800.0, 0.0], 1, 3);
    let loss = g.cross_entropy(x, &[Some(1)]);
    assert!(g.value(loss)[0] < 1e-300);
}

#[test]
fn zeroed_output_layer_gives_uniform_loss() {
    let vocab = 13;
    let mut m = TransducerModel::<f64>::new(tiny_config(vocab), 5).unwrap();
    m.params.get_mut("out.w").unwrap().iter_mut().for_each(|x| *x = 0.0);
    m.params.get_mut("out.b").unwrap().iter_mut().for_each(|x| *x = 0.0);
    let loss = m.loss(&batch()).unwrap();
    assert!(approx(loss, (vocab as f64).ln(), 1e-9), "{loss}");
    for row in m.next_log_probs(&[BOS, 4, EOS], &[vec![BOS], vec![BOS, 5]]).unwrap() {
        assert!(row.iter().all(|&lp| approx(lp, -(vocab as f64).ln(), 1e-12)));
    }
}

/// Per-block ‖analytic − numeric‖₂ / max(‖analytic‖₂, ‖numeric‖₂) with central differences.
/// Key biases shift every score of a softmax row equally, so their true
/// gradient is zero; those blocks are checked in absolute terms instead.
#[test]
fn gradients_match_central_differences() {
    let vocab = 11;
    let model = TransducerModel::<f64>::new(tiny_config(vocab), 17).unwrap();
    let data = batch();
    let (_, grads) = model.loss_and_grads(&data, None).unwrap();
    let h = 1e-5;
    let mut probe = model.clone();
    let mut worst: (f64, String) = (0.0, String::new());
    for (i, name) in model.params.names.iter().enumerate() {
        let mut num = vec![0.0; model.params.data[i].len()];
        for j in 0..num.len() {
            let orig = probe.params.data[i][j];
            probe.params.data[i][j] = orig + h;
            let up = probe.loss(&data).unwrap();
            probe.params.data[i][j] = orig - h;
            let down = probe.loss(&data).unwrap();
            probe.params.data[i][j] = orig;
            num[j] = (up - down) / (2.0 * h);
        }
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: Vec<f64> = grads[i].iter().zip(&num).map(|(a, b)| a - b).collect();
        let scale = norm(&grads[i]).max(norm(&num));
        if name.ends_with(".bk") {
            assert!(scale < 1e-9 && norm(&diff) < 1e-9, "{name}: {scale}");
            continue;
        }
        assert!(scale > 1e-6, "{name} has no gradient signal");
        let rel = norm(&diff) / scale;
        if rel > worst.0 {
            worst = (rel, name.clone());
        }
    }
    assert!(worst.0 < 1e-4, "worst block {} with relative error {}", worst.1, worst.0);
}

#[test]
fn output_bias_gradient_is_mean_softmax_minus_onehot() {
    let vocab = 11;
    let model = TransducerModel::<f64>::new(tiny_config(vocab), 23).unwrap();
    let ex = &batch()[..1];
    let (_, grads) = model.loss_and_grads(ex, None).unwrap();
    let logits = model.forward(&ex[0].src, &ex[0].tgt_in).unwrap();
    let mut want = vec![0.0; vocab];
    for (row, &t) in logits.iter().zip(&ex[0].tgt_out) {
        for (w, lp) in want.iter_mut().zip(log_softmax(row)) {
            *w += lp.exp();
        }
        want[t as usize] -= 1.0;
    }
    let got = &grads[model.params.position("out.b").unwrap()];
    for (g, w) in got.iter().zip(&want) {
        assert!(approx(*g, w / logits.len() as f64, 1e-12));
    }
}

#[test]
fn unused_embedding_rows_get_zero_gradient() {
    let model = TransducerModel::<f64>::new(tiny_config(20), 2).unwrap();
    let (_, grads) = model.loss_and_grads(&batch(), None).unwrap();
    let emb = &grads[model.params.position("embed").unwrap()];
    let d = model.config.d_model;
    for id in 11..20 {
        assert!(emb[id * d..(id + 1) * d].iter().all(|&x| x == 0.0), "row {id}");
    }
    // PAD only appears as padding, which is masked everywhere.
    assert!(emb[..d].iter().all(|&x| x == 0.0));
}

#[test]
fn decoder_is_causal() {
    let model = TransducerModel::<f64>::new(tiny_config(11), 9).unwrap();
    let src = [BOS, 4, 5, 6, EOS];
    let base = [BOS, 7, 8, 9, 10, 4];
    let logits = model.forward(&src, &base).unwrap();
    for t in 0..base.len() - 1 {
        let mut changed = base;
        changed[t + 1] = if base[t + 1] == 5 { 6 } else { 5 };
        let other = model.forward(&src, &changed).unwrap();
        for r in 0..=t {
            assert!(logits[r] == other[r], "row {r} changed after editing position {}", t + 1);
        }
        assert!(logits[t + 1] != other[t + 1]);
    }
}

#[test]
fn encoder_permutes_with_inputs_without_positions() {
    let model = TransducerModel::<f64>::new(tiny_config(11), 4).unwrap();
    let src = [BOS, 4, 5, 6, 7, EOS];
    let perm = [3, 0, 5, 1, 4, 2];
    let permuted: Vec<u32> = perm.iter().map(|&i| src[i]).collect();
    let a = model.encode(&src, false).unwrap();
    let b = model.encode(&permuted, false).unwrap();
    for (row, &i) in b.iter().zip(&perm) {
        for (x, y) in row.iter().zip(&a[i]) {
            assert!(approx(*x, *y, 1e-12));
        }
    }
    let with_pos = model.encode(&permuted, true).unwrap();
    assert!(with_pos[0] != a[perm[0]]);
}

#[test]
fn forward_is_deterministic_and_checks_lengths() {
    let a = TransducerModel::<f32>::new(tiny_config(11), 1).unwrap();
    let b = TransducerModel::<f32>::new(tiny_config(11), 1).unwrap();
    assert_eq!(a, b);
    let src = [BOS, 4, 5, EOS];
    assert_eq!(a.forward(&src, &[BOS, 6]).unwrap(), b.forward(&src, &[BOS, 6]).unwrap());
    let long = vec![4u32; 17];
    assert!(matches!(a.forward(&long, &[BOS]), Err(TransducerError::SequenceTooLong { len: 17, max: 16 })));
    assert!(matches!(a.forward(&src, &[BOS, 11]), Err(TransducerError::UnknownToken(11))));
}

#[test]
fn config_validation() {
    assert!(ModelConfig::new(2, 3, 16, 10).validate().is_err());
    assert!(ModelConfig::new(0, 2, 16, 10).validate().is_err());
    assert!(ModelConfig::new(2, 2, 16, 2).validate().is_err());
    assert!(ModelConfig::small(100).validate().is_ok());
    assert!(ModelConfig::full(10_000).validate().is_ok());
    let bad = TrainConfig { learning_rate: 0.0, ..TrainConfig::default() };
    let m = TransducerModel::<f32>::new(tiny_config(11), 0).unwrap();
    assert!(fit(m.clone(), &batch(), &[], &bad, |_, _| Control::Continue).is_err());
    assert!(matches!(fit(m, &[], &[], &TrainConfig::default(), |_, _| Control::Continue), Err(TransducerError::EmptyTrainingSet)));
}

fn toy_data(n: usize, seed: u64) -> Vec<Example> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let src: Vec<u32> = (0..rng.random_range(1..6)).map(|_| rng.random_range(4..11)).collect();
            let mut tgt = src.clone();
            tgt.push(rng.random_range(4..11));
            Example::new(&src, &tgt, 16)
        })
        .collect()
}

#[test]
fn training_is_finite_reproducible_and_keeps_best_validation() {
    let mut cfg = tiny_config(11);
    cfg.dropout = 0.1;
    let tcfg = TrainConfig { batch_size: 8, learning_rate: 3e-3, epochs: 50, seed: 7, precision: Precision::F32 };
    let (train, val) = (toy_data(24, 1), toy_data(8, 2));
    let run = || fit(TransducerModel::<f32>::new(cfg.clone(), 7).unwrap(), &train, &val, &tcfg, |_, _| Control::Continue).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a.curve.len(), 50);
    assert!(a.curve.iter().all(|s| s.train_loss.is_finite() && s.val_loss.unwrap().is_finite()));
    assert_eq!(a.model, b.model);
    assert_eq!(a.curve, b.curve);
    let best = a.curve.iter().min_by(|x, y| x.val_loss.unwrap().total_cmp(&y.val_loss.unwrap())).unwrap();
    assert_eq!(a.best_epoch, best.epoch);
    assert!(a.curve.last().unwrap().train_loss < a.curve[0].train_loss);

    let mut seen = 0;
    let stopped = fit(TransducerModel::<f32>::new(cfg.clone(), 7).unwrap(), &train, &[], &tcfg, |s, _| {
        seen = s.epoch;
        if s.epoch == 3 { Control::Stop } else { Control::Continue }
    })
    .unwrap();
    assert_eq!((seen, stopped.curve.len(), stopped.best_epoch), (3, 3, 3));
}

#[test]
fn checkpoint_round_trip_is_exact() {
    for model in [
        AnyModel::F32(TransducerModel::new(tiny_config(11), 3).unwrap()),
        AnyModel::F64(TransducerModel::new(tiny_config(11), 3).unwrap()),
    ] {
        let mut buf = Vec::new();
        model.write_checkpoint(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("{\"format\":\"sequer-ckpt-v1\""));
        let back = AnyModel::read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back, model);
    }
    assert!(AnyModel::read_checkpoint(&b"{\"format\":\"other\"}"[..]).is_err());
}
