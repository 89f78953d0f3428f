//! `sequer`: mine reformulation pairs from event logs, train a suggester,
//! evaluate it, and serve or query it over HTTP.

mod commands;

use std::net::SocketAddr;
use std::io::IsTerminal;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sequer_core::event_log::LogFormat;
use sequer_core::transducer::Precision;

#[derive(Parser)]
#[command(name = "sequer", version, about = "Query reformulation mining, training and suggestion")]
struct Cli {
    /// error, warn, info, debug or trace
    #[arg(long, global = true, default_value = "info")]
    log_level: tracing::Level,
    /// Seed for generation, splitting and training.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic event log with known sessions and reformulations.
    Generate(GenerateArgs),
    /// Sessionize an event log into linear sessions (JSONL).
    Sessions(SessionsArgs),
    /// Extract reformulation threads and emit training pairs.
    Mine(MineArgs),
    /// Shuffle pairs into train.tsv / valid.tsv / test.tsv.
    Split(SplitArgs),
    /// Descriptive statistics over pairs or sessions.
    Stats(StatsArgs),
    /// Learn a subword vocabulary.
    BpeTrain(BpeTrainArgs),
    /// Train the transducer on a split directory.
    Train(TrainArgs),
    /// Print reformulation candidates for one query.
    Suggest(SuggestArgs),
    /// Score a checkpoint on held-out pairs.
    Eval(EvalArgs),
    /// Run the HTTP suggestion service.
    Serve(ServeArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    users: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "jsonl")]
    format: LogFormat,
    #[arg(long, default_value_t = 0.05)]
    bot_fraction: f64,
    /// Weight of unrelated reformulations; the other categories keep their proportions.
    #[arg(long)]
    unrelated_weight: Option<f64>,
    /// Ground truth (sessions, threads, categories) as JSON.
    #[arg(long)]
    truth_out: Option<PathBuf>,
    /// Post documents for the threads' terminal posts plus distractors (JSONL).
    #[arg(long)]
    posts_out: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    distractor_posts: usize,
}

#[derive(Args)]
struct SessionsArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Defaults to tsv for *.tsv files and jsonl otherwise.
    #[arg(long)]
    format: Option<LogFormat>,
    /// Abort on the first malformed line instead of skipping it.
    #[arg(long)]
    strict: bool,
    #[arg(long, default_value_t = 360)]
    max_gap_secs: i64,
    #[arg(long, default_value_t = 60)]
    bot_window_secs: i64,
    #[arg(long, default_value_t = 120)]
    bot_window_events: usize,
}

#[derive(Args)]
struct MineArgs {
    #[arg(long)]
    sessions: PathBuf,
    /// JSONL pairs with their thread reference; `.tsv` writes bare pairs.
    #[arg(long)]
    pairs_out: PathBuf,
    /// `original \t terminal_post` lines for retrieval evaluation.
    #[arg(long)]
    qrels_out: Option<PathBuf>,
    #[arg(long, default_value_t = 0.7)]
    pair_sim: f64,
    #[arg(long, default_value_t = 0.7)]
    adj_sim: f64,
    #[arg(long, default_value_t = 30)]
    dwell_secs: i64,
}

#[derive(Args)]
struct SplitArgs {
    /// JSONL or TSV pairs.
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["pairs", "sessions"]))]
struct StatsArgs {
    #[arg(long)]
    pairs: Option<PathBuf>,
    #[arg(long)]
    sessions: Option<PathBuf>,
    #[arg(long)]
    report_out: PathBuf,
    #[arg(long, default_value_t = 20)]
    top_k: usize,
    #[arg(long, default_value_t = 10)]
    buckets: usize,
}

#[derive(Args)]
struct BpeTrainArgs {
    /// One sentence per line; tab-separated columns count as separate sentences.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    vocab: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Directory holding train.tsv and (optionally) valid.tsv.
    #[arg(long)]
    pairs_dir: PathBuf,
    #[arg(long)]
    bpe: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[arg(long, default_value_t = 2)]
    heads: usize,
    #[arg(long, default_value_t = 64)]
    dmodel: usize,
    /// Defaults to four times d_model.
    #[arg(long)]
    ffn: Option<usize>,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-4)]
    lr: f64,
    #[arg(long, default_value_t = 0.1)]
    dropout: f64,
    #[arg(long, default_value_t = 64)]
    max_len: usize,
    #[arg(long, default_value = "f32")]
    precision: Precision,
    /// Stop after this many epochs without validation improvement.
    #[arg(long)]
    patience: Option<usize>,
    /// Per-epoch losses as JSON.
    #[arg(long)]
    curve_out: Option<PathBuf>,
}

#[derive(Args)]
struct SuggestArgs {
    #[arg(long)]
    query: String,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 0.6)]
    alpha: f64,
    #[arg(long, required_unless_present = "server")]
    ckpt: Option<PathBuf>,
    #[arg(long, required_unless_present = "server")]
    bpe: Option<PathBuf>,
    /// Ask a running service instead of loading the model.
    #[arg(long, conflicts_with_all = ["ckpt", "bpe"])]
    server: Option<String>,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("retrieval").multiple(true).requires_all(["posts", "qrels"]).args(["posts", "qrels"]))]
struct EvalArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    bpe: PathBuf,
    /// Held-out `original \t reformulated` pairs.
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    posts: Option<PathBuf>,
    /// `query \t post_id` lines.
    #[arg(long)]
    qrels: Option<PathBuf>,
    #[arg(long)]
    report: PathBuf,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 0.6)]
    alpha: f64,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    bind: Option<SocketAddr>,
    #[arg(long)]
    ckpt: Option<PathBuf>,
    #[arg(long)]
    bpe: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Repeatable; replaces the configured list.
    #[arg(long = "allow-origin")]
    allow_origin: Vec<String>,
    #[arg(long)]
    allow_any_origin: bool,
    #[arg(long)]
    timeout_ms: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_max_level(cli.log_level)
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .with_target(false)
        .init();
    match commands::run(cli.command, cli.seed) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
