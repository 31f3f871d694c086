//! `hbrb`: train, convert and exercise hierarchical binary vocabularies.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 I/O, parse or data error,
//! 3 internal invariant violation.

use std::collections::HashSet;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use hbrb_core::evaluation::{self, CompareConfig};
use hbrb_core::io::{read_descriptors, read_vocab, write_atomic, write_descriptors, write_vocab};
use hbrb_core::{
    quantization_report, synth_sequence, train, transform, Error, Match, RetrievalDatabase,
    Strategy, SynthConfig, TrainConfig,
};
use serde::Serialize;

const THREADS_ENV: &str = "HBRB_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "hbrb",
    version,
    about = "Hierarchical binary visual vocabularies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a vocabulary from a descriptor file.
    Train(TrainArgs),
    /// Convert each descriptor group into a BoW vector (JSON).
    Transform(TransformArgs),
    /// Build an inverted index from one descriptor file and query it with another.
    Query(QueryArgs),
    /// Emit a synthetic place-revisit sequence with ground truth.
    Synth(SynthArgs),
    /// Compare training strategies on synthetic sequences.
    Eval(EvalArgs),
    /// Convert a vocabulary between the text and JSON formats.
    Convert(ConvertArgs),
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Descriptor file (HBDC).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = Strategy::GlobalHbrb)]
    strategy: Strategy,
    /// Branching factor.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(2..))]
    k: u32,
    /// Tree depth.
    #[arg(long = "L", value_name = "L", default_value_t = 6, value_parser = clap::value_parser!(u32).range(1..))]
    depth: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
    max_iters: u32,
    /// Output vocabulary; `.json` selects the native format, anything else the text format.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TransformArgs {
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct QueryArgs {
    #[arg(long)]
    vocab: PathBuf,
    /// Descriptor file whose groups become database entries 0, 1, ...
    #[arg(long)]
    db: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long, default_value_t = 5)]
    top: usize,
    /// Skip entries whose id is within this distance of the query index.
    #[arg(long, default_value_t = 0)]
    exclude_window: usize,
}

#[derive(Args, Debug, Clone)]
struct SynthParams {
    #[arg(long, default_value_t = 50)]
    places: usize,
    #[arg(long, default_value_t = 200)]
    per_place: usize,
    /// Fraction of frames that revisit an earlier place.
    #[arg(long, default_value_t = 0.3)]
    revisit: f64,
    /// Per-bit flip probability on revisits.
    #[arg(long, default_value_t = 0.05)]
    flip: f64,
    #[arg(long, default_value_t = 256)]
    bits: usize,
}

impl SynthParams {
    fn config(&self, seed: u64) -> SynthConfig {
        SynthConfig {
            num_places: self.places,
            descriptors_per_place: self.per_place,
            revisit_fraction: self.revisit,
            bit_flip_prob: self.flip,
            descriptor_bits: self.bits,
            seed,
        }
    }
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[command(flatten)]
    params: SynthParams,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Query frames (HBDC, one group per frame).
    #[arg(long)]
    out: PathBuf,
    /// Ground truth JSON.
    #[arg(long)]
    gt: PathBuf,
    /// Independent training traversal (HBDC).
    #[arg(long)]
    train_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "kmajority,local-brb,hbrb"
    )]
    strategies: Vec<Strategy>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(2..))]
    k: u32,
    #[arg(long = "L", value_name = "L", default_value_t = 6, value_parser = clap::value_parser!(u32).range(1..))]
    depth: u32,
    #[command(flatten)]
    params: SynthParams,
    /// Most recent frames excluded from each query.
    #[arg(long, default_value_t = 1)]
    exclude_window: usize,
    /// CSV output; written to stdout when neither --csv nor --json is given.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ConvertArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct GroundTruth<'a> {
    frame_places: &'a [usize],
    /// `(query frame, earlier frame of the same place)` pairs.
    pairs: &'a [(usize, usize)],
}

#[derive(Serialize)]
struct QueryAnswer {
    query: usize,
    matches: Vec<Match>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(1);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 1,
        Error::Internal(_) => 3,
        _ => 2,
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| format!("{THREADS_ENV}={raw:?} is not a thread count"))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn run(command: Command) -> hbrb_core::Result<()> {
    match command {
        Command::Train(a) => cmd_train(a),
        Command::Transform(a) => cmd_transform(a),
        Command::Query(a) => cmd_query(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Convert(a) => cmd_convert(a),
    }
}

fn cmd_train(a: TrainArgs) -> hbrb_core::Result<()> {
    let corpus = read_descriptors(&a.input)?;
    let mut cfg = TrainConfig {
        k: a.k as usize,
        depth: a.depth as usize,
        strategy: a.strategy,
        seed: a.seed,
        ..TrainConfig::default()
    };
    cfg.cluster.max_iters = a.max_iters as usize;
    let start = Instant::now();
    let vocab = train(&corpus, &cfg)?;
    let seconds = start.elapsed().as_secs_f64();
    let q = quantization_report(&vocab, &corpus)?;
    write_vocab(&a.out, &vocab)?;
    let mut out = io::stdout().lock();
    writeln!(out, "word_count {}", vocab.word_count())?;
    writeln!(out, "train_seconds {seconds:.3}")?;
    writeln!(out, "mean_qe {:.4}", q.mean_qe)?;
    Ok(())
}

fn cmd_transform(a: TransformArgs) -> hbrb_core::Result<()> {
    let vocab = read_vocab(&a.vocab)?;
    let set = read_descriptors(&a.input)?;
    let bows = set
        .groups()
        .map(|g| transform(&vocab, g))
        .collect::<hbrb_core::Result<Vec<_>>>()?;
    write_json_file(&a.out, &bows)
}

fn cmd_query(a: QueryArgs) -> hbrb_core::Result<()> {
    let vocab = read_vocab(&a.vocab)?;
    let db_set = read_descriptors(&a.db)?;
    let query_set = read_descriptors(&a.queries)?;
    let mut db = RetrievalDatabase::new(&vocab);
    for g in db_set.groups() {
        db.add_descriptors(g)?;
    }
    let mut answers = Vec::with_capacity(query_set.group_count());
    for (q, g) in query_set.groups().enumerate() {
        let v = transform(&vocab, g)?;
        let exclude: HashSet<usize> = if a.exclude_window == 0 {
            HashSet::new()
        } else {
            let lo = q.saturating_sub(a.exclude_window - 1);
            (lo..q.saturating_add(a.exclude_window)).collect()
        };
        answers.push(QueryAnswer {
            query: q,
            matches: db.query(&v, a.top, Some(&exclude)),
        });
    }
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, &answers)?;
    writeln!(out)?;
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> hbrb_core::Result<()> {
    let seq = synth_sequence(&a.params.config(a.seed))?;
    write_descriptors(&a.out, &seq.frames)?;
    if let Some(path) = &a.train_out {
        write_descriptors(path, &seq.training)?;
    }
    write_json_file(
        &a.gt,
        &GroundTruth {
            frame_places: &seq.frame_places,
            pairs: &seq.ground_truth,
        },
    )
}

fn cmd_eval(a: EvalArgs) -> hbrb_core::Result<()> {
    let cfg = CompareConfig {
        strategies: a.strategies,
        seeds: a.seeds,
        synth: a.params.config(0),
        train: TrainConfig {
            k: a.k as usize,
            depth: a.depth as usize,
            ..TrainConfig::default()
        },
        temporal_exclusion: a.exclude_window,
    };
    let rows = evaluation::compare_strategies(&cfg)?;
    if let Some(path) = &a.csv {
        let mut buf = Vec::new();
        evaluation::write_csv(&rows, &mut buf)?;
        write_atomic(path, &buf)?;
    }
    if let Some(path) = &a.json {
        let mut buf = Vec::new();
        evaluation::write_json(&rows, &mut buf)?;
        write_atomic(path, &buf)?;
    }
    if a.csv.is_none() && a.json.is_none() {
        let mut out = BufWriter::new(io::stdout().lock());
        evaluation::write_csv(&rows, &mut out)?;
        out.flush()?;
    }
    Ok(())
}

fn cmd_convert(a: ConvertArgs) -> hbrb_core::Result<()> {
    let vocab = read_vocab(&a.input)?;
    write_vocab(&a.out, &vocab)
}

fn write_json_file<T: Serialize>(path: &Path, value: &T) -> hbrb_core::Result<()> {
    let mut buf = serde_json::to_vec_pretty(value)?;
    buf.push(b'\n');
    write_atomic(path, &buf)
}
