use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use sequer_client::Client;
use sequer_core::analytics::build_report;
use sequer_core::beam::suggest;
use sequer_core::bpe::{train_bpe, BpeModel};
use sequer_core::event_log::{generate_synthetic, parse_log, synthetic_posts, write_log, CategoryMix, EventType, LogFormat, SyntheticSpec};
use sequer_core::metrics::{evaluate, mrr, read_posts, Bm25Index, DEFAULT_CUTOFF};
use sequer_core::miner::{emit_pairs, mine_threads, read_pairs_jsonl, read_pairs_tsv, split, write_pairs_jsonl, write_pairs_tsv, MinerConfig, QueryPair, SplitDataset};
use sequer_core::session::{run_pipeline, PipelineConfig, Session};
use sequer_core::transducer::{train, AnyModel, Control, ModelConfig, TrainConfig};
use sequer_service::{serve, ServiceConfig};
use tracing::{info, warn};

use crate::{BpeTrainArgs, Command, EvalArgs, GenerateArgs, MineArgs, ServeArgs, SessionsArgs, SplitArgs, StatsArgs, SuggestArgs, TrainArgs};

pub fn run(cmd: Command, seed: u64) -> Result<()> {
    match cmd {
        Command::Generate(a) => generate(a, seed),
        Command::Sessions(a) => sessions(a),
        Command::Mine(a) => mine(a),
        Command::Split(a) => split_cmd(a, seed),
        Command::Stats(a) => stats(a),
        Command::BpeTrain(a) => bpe_train(a),
        Command::Train(a) => train_cmd(a, seed),
        Command::Suggest(a) => suggest_cmd(a),
        Command::Eval(a) => eval(a),
        Command::Serve(a) => serve_cmd(a),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn is_tsv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "tsv")
}

/// JSONL for `*.jsonl`, tab-separated pairs otherwise.
fn read_pairs(path: &Path) -> Result<Vec<QueryPair>> {
    let input = open(path)?;
    let pairs = if path.extension().is_some_and(|e| e == "jsonl") { read_pairs_jsonl(input) } else { read_pairs_tsv(input) };
    pairs.with_context(|| format!("reading pairs from {}", path.display()))
}

fn read_sessions(path: &Path) -> Result<Vec<Session>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).with_context(|| format!("{}: line {}", path.display(), i + 1))?);
    }
    Ok(out)
}

fn load_model(ckpt: &Path, bpe: &Path) -> Result<(AnyModel, BpeModel)> {
    let model = AnyModel::read_checkpoint(open(ckpt)?).with_context(|| format!("loading checkpoint {}", ckpt.display()))?;
    let tok = BpeModel::read(open(bpe)?).with_context(|| format!("loading tokenizer {}", bpe.display()))?;
    if tok.vocab_size() != model.config().vocab_size {
        bail!("tokenizer has {} entries but the checkpoint expects {}", tok.vocab_size(), model.config().vocab_size);
    }
    Ok((model, tok))
}

fn generate(a: GenerateArgs, seed: u64) -> Result<()> {
    let mut spec = SyntheticSpec::new(a.users, seed);
    spec.bot_fraction = a.bot_fraction;
    if let Some(w) = a.unrelated_weight {
        if !(0.0..=1.0).contains(&w) {
            bail!("--unrelated-weight must lie in [0, 1]");
        }
        let r = CategoryMix::related_only();
        spec.reformulation_category_mix =
            CategoryMix { add: r.add * (1.0 - w), modify: r.modify * (1.0 - w), delete: 1.0 - w - (r.add + r.modify) * (1.0 - w), unrelated: w };
    }
    let (events, truth) = generate_synthetic(&spec)?;
    let mut out = create(&a.out)?;
    write_log(&events, a.format, &mut out)?;
    out.flush()?;
    info!(events = events.len(), users = a.users, "wrote {}", a.out.display());
    if let Some(p) = &a.truth_out {
        write_json(p, &truth)?;
    }
    if let Some(p) = &a.posts_out {
        let posts = synthetic_posts(&truth, usize::MAX, a.distractor_posts, seed);
        let mut out = create(p)?;
        sequer_core::metrics::write_posts(&posts, &mut out)?;
        out.flush()?;
        info!(posts = posts.len(), "wrote {}", p.display());
    }
    Ok(())
}

fn sessions(a: SessionsArgs) -> Result<()> {
    let format = a.format.unwrap_or(if is_tsv(&a.input) { LogFormat::Tsv } else { LogFormat::Jsonl });
    let parsed = parse_log(open(&a.input)?, format, a.strict)?;
    for m in parsed.malformed.iter().take(10) {
        warn!("skipped {m}");
    }
    if parsed.malformed.len() > 10 {
        warn!("skipped {} malformed lines in total", parsed.malformed.len());
    }
    let cfg = PipelineConfig {
        max_gap_ms: a.max_gap_secs * 1000,
        bot_window_ms: a.bot_window_secs * 1000,
        bot_window_events: a.bot_window_events,
    };
    let (sessions, stats) = run_pipeline(parsed.events, &cfg);
    let mut out = create(&a.out)?;
    for s in &sessions {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    info!(?stats, "wrote {}", a.out.display());
    Ok(())
}

fn mine(a: MineArgs) -> Result<()> {
    let sessions = read_sessions(&a.sessions)?;
    let cfg = MinerConfig { adjacent_min_sim: a.adj_sim, pair_min_sim: a.pair_sim, dwell_limit_ms: a.dwell_secs * 1000 };
    let threads = mine_threads(&sessions, &cfg);
    let pairs = emit_pairs(&threads, cfg.pair_min_sim);
    let mut out = create(&a.pairs_out)?;
    if is_tsv(&a.pairs_out) {
        write_pairs_tsv(&pairs, &mut out)?;
    } else {
        write_pairs_jsonl(&pairs, &mut out)?;
    }
    out.flush()?;
    info!(sessions = sessions.len(), threads = threads.len(), pairs = pairs.len(), "wrote {}", a.pairs_out.display());
    if let Some(p) = &a.qrels_out {
        let mut out = create(p)?;
        for pair in &pairs {
            writeln!(out, "{}\t{}", pair.original.replace('\t', " "), pair.thread_ref.terminal_post)?;
        }
        out.flush()?;
    }
    Ok(())
}

fn split_cmd(a: SplitArgs, seed: u64) -> Result<()> {
    let pairs = read_pairs(&a.pairs)?;
    let SplitDataset { train, validation, test, .. } = split(pairs, seed)?;
    for (name, part) in [("train.tsv", &train), ("valid.tsv", &validation), ("test.tsv", &test)] {
        let mut out = create(&a.out_dir.join(name))?;
        write_pairs_tsv(part, &mut out)?;
        out.flush()?;
    }
    info!(train = train.len(), valid = validation.len(), test = test.len(), "wrote {}", a.out_dir.display());
    Ok(())
}

fn stats(a: StatsArgs) -> Result<()> {
    let (queries, pairs): (Vec<String>, _) = match (&a.pairs, &a.sessions) {
        (Some(p), _) => {
            let pairs = read_pairs(p)?;
            let queries = pairs.iter().flat_map(|p| [p.original.clone(), p.reformulated.clone()]).collect();
            (queries, pairs)
        }
        (None, Some(s)) => {
            let queries = read_sessions(s)?
                .iter()
                .flat_map(|s| s.events.iter().filter(|e| e.event_type == EventType::Search).filter_map(|e| e.query()).collect::<Vec<_>>())
                .collect();
            (queries, Vec::new())
        }
        (None, None) => unreachable!("clap requires one source"),
    };
    let report = build_report(&queries, &pairs, a.top_k, a.buckets);
    write_json(&a.report_out, &report)?;
    info!(queries = report.query_count, "wrote {}", a.report_out.display());
    Ok(())
}

fn bpe_train(a: BpeTrainArgs) -> Result<()> {
    let mut corpus = Vec::new();
    for line in open(&a.corpus)?.lines() {
        corpus.extend(line?.split('\t').filter(|s| !s.trim().is_empty()).map(str::to_string));
    }
    let model = train_bpe(&corpus, a.vocab)?;
    let mut out = create(&a.out)?;
    model.write(&mut out)?;
    out.flush()?;
    info!(vocab = model.vocab_size(), merges = model.merge_count(), "wrote {}", a.out.display());
    Ok(())
}

fn train_cmd(a: TrainArgs, seed: u64) -> Result<()> {
    let bpe = BpeModel::read(open(&a.bpe)?).with_context(|| format!("loading tokenizer {}", a.bpe.display()))?;
    let train_pairs = read_pairs(&a.pairs_dir.join("train.tsv"))?;
    let valid_path = a.pairs_dir.join("valid.tsv");
    let validation = if valid_path.exists() { read_pairs(&valid_path)? } else { Vec::new() };
    let data = SplitDataset { train: train_pairs, validation, test: Vec::new(), seed };

    let mut mcfg = ModelConfig::new(a.layers, a.heads, a.dmodel, bpe.vocab_size());
    mcfg.ffn_size = a.ffn.unwrap_or(4 * a.dmodel);
    mcfg.max_len = a.max_len;
    mcfg.dropout = a.dropout;
    let tcfg = TrainConfig { batch_size: a.batch_size, learning_rate: a.lr, epochs: a.epochs, seed, precision: a.precision };
    info!(train = data.train.len(), valid = data.validation.len(), ?mcfg, "training");

    let mut best = f64::INFINITY;
    let mut since_best = 0;
    let (model, curve) = train(&data, mcfg, &tcfg, &bpe, |s| {
        info!(epoch = s.epoch, train_loss = s.train_loss, val_loss = ?s.val_loss);
        match (s.val_loss, a.patience) {
            (Some(v), Some(p)) => {
                if v < best {
                    best = v;
                    since_best = 0;
                } else {
                    since_best += 1;
                }
                if since_best >= p {
                    info!("no validation improvement for {p} epochs; stopping");
                    return Control::Stop;
                }
                Control::Continue
            }
            _ => Control::Continue,
        }
    })?;
    let mut out = create(&a.out)?;
    model.write_checkpoint(&mut out)?;
    out.flush()?;
    if let Some(p) = &a.curve_out {
        write_json(p, &curve)?;
    }
    info!("wrote {}", a.out.display());
    Ok(())
}

fn suggest_cmd(a: SuggestArgs) -> Result<()> {
    let candidates = match &a.server {
        Some(url) => {
            let rt = tokio::runtime::Builder::new_current_thread().enable_all().build()?;
            let k = i64::try_from(a.k).unwrap_or(i64::MAX);
            rt.block_on(Client::new(url).suggest(&a.query, Some(k), Some(a.alpha)))?.candidates
        }
        None => {
            let (model, bpe) = load_model(a.ckpt.as_deref().expect("clap"), a.bpe.as_deref().expect("clap"))?;
            suggest(&model, &bpe, &a.query, a.k, a.alpha)?
        }
    };
    let mut out = std::io::stdout().lock();
    for c in candidates {
        writeln!(out, "{:.6}\t{}", c.score, c.text)?;
    }
    Ok(())
}

fn read_qrels(path: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let (q, id) = line.split_once('\t').with_context(|| format!("{}: line {}: expected query<TAB>post_id", path.display(), i + 1))?;
        out.push((q.to_string(), id.to_string()));
    }
    Ok(out)
}

fn eval(a: EvalArgs) -> Result<()> {
    let (model, bpe) = load_model(&a.ckpt, &a.bpe)?;
    let pairs = read_pairs(&a.pairs)?;
    let top = |q: &str| -> Result<Vec<String>> { Ok(suggest(&model, &bpe, q, a.k, a.alpha)?.into_iter().map(|s| s.text).collect()) };

    let mut candidates = Vec::with_capacity(pairs.len());
    for (i, p) in pairs.iter().enumerate() {
        candidates.push(top(&p.original)?);
        if (i + 1) % 500 == 0 {
            info!("decoded {}/{}", i + 1, pairs.len());
        }
    }

    let mrr_value = match (&a.posts, &a.qrels) {
        (Some(posts), Some(qrels)) => {
            let index = Bm25Index::build(&read_posts(open(posts)?)?)?;
            let qrels = read_qrels(qrels)?;
            let baseline = mrr(&index, &qrels, DEFAULT_CUTOFF)?;
            let mut reformulated = Vec::with_capacity(qrels.len());
            for (q, target) in &qrels {
                let best = top(q)?.into_iter().next().unwrap_or_else(|| q.clone());
                reformulated.push((best, target.clone()));
            }
            let value = mrr(&index, &reformulated, DEFAULT_CUTOFF)?;
            info!(original_mrr = baseline, reformulated_mrr = value, "retrieval");
            Some(value)
        }
        _ => None,
    };

    let sources: Vec<&str> = pairs.iter().map(|p| p.original.as_str()).collect();
    let references: Vec<&str> = pairs.iter().map(|p| p.reformulated.as_str()).collect();
    let report = evaluate(&sources, &candidates, &references, mrr_value)?;
    write_json(&a.report, &report)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn serve_cmd(a: ServeArgs) -> Result<()> {
    let mut cfg = ServiceConfig::from_env()?;
    if let Some(b) = a.bind {
        cfg.bind = b;
    }
    if let Some(p) = a.ckpt {
        cfg.checkpoint = p;
    }
    if let Some(p) = a.bpe {
        cfg.bpe = p;
    }
    if let Some(k) = a.k {
        cfg.default_k = k;
    }
    if let Some(alpha) = a.alpha {
        cfg.default_alpha = alpha;
    }
    if !a.allow_origin.is_empty() {
        cfg.allowed_origins = a.allow_origin;
    }
    cfg.allow_any_origin |= a.allow_any_origin;
    if let Some(t) = a.timeout_ms {
        cfg.request_timeout_ms = t;
    }
    if a.workers.is_some() {
        cfg.workers = a.workers;
    }
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(serve(cfg))?;
    Ok(())
}
