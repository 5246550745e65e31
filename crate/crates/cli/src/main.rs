//! `crossval` command-line tool.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
//! failure.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use crossval::pipeline::{
    bench_csv, cmd_bench, cmd_corrupt, cmd_ingest_check, cmd_train, cmd_validate, linear_fit, write_file, RunConfig,
};
use crossval::{Error, ErrorClass};

#[derive(Parser)]
#[command(
    name = "crossval",
    version,
    about = "Validate a noisy knowledge graph against a trusted one"
)]
struct Cli {
    /// Config file (TOML or key = value lines); flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// More logging (repeat for debug output).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(flatten)]
    opts: Options,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load and align the graphs and print their sizes.
    IngestCheck,
    /// Train embeddings; writes checkpoint.json, train_log.jsonl and report.json into --out.
    Train,
    /// Rank triplets with a trained checkpoint and print the report.
    Validate,
    /// Inject errors into the target graph and write labeled sets into --out.
    Corrupt,
    /// Time validation at several sizes; prints CSV.
    Bench,
}

/// Every flag is a string handed to `RunConfig::set`, so files and flags
/// share one parser.
#[derive(Args, Default)]
struct Options {
    #[arg(long, global = true, allow_negative_numbers = true)]
    target: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    external: Option<String>,
    /// Two-column alias file.
    #[arg(long, global = true, allow_negative_numbers = true)]
    aliases: Option<String>,
    /// Labeled `s r o label` file.
    #[arg(long, global = true, allow_negative_numbers = true)]
    eval: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    checkpoint: Option<String>,
    /// distmult, complex, simple or transe.
    #[arg(long, global = true, allow_negative_numbers = true)]
    model: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    dim: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    lr: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    batch: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    epochs: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    lambda: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    theta: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    l2: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    neg_conventional: Option<String>,
    /// on or off.
    #[arg(long, global = true, allow_negative_numbers = true)]
    neg_cross: Option<String>,
    /// on or off.
    #[arg(long, global = true, allow_negative_numbers = true)]
    confidence: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    confidence_warmup: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    overlap_fraction: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    external_triplets: Option<String>,
    /// Errors injected by `corrupt`.
    #[arg(long, global = true, allow_negative_numbers = true)]
    errors: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    tune_fraction: Option<String>,
    /// Comma-separated triplet counts for `bench`.
    #[arg(long, global = true, allow_negative_numbers = true)]
    sizes: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    seed: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    threads: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    out: Option<String>,
}

impl Options {
    fn pairs(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("target", &self.target),
            ("external", &self.external),
            ("aliases", &self.aliases),
            ("eval", &self.eval),
            ("checkpoint", &self.checkpoint),
            ("model", &self.model),
            ("dim", &self.dim),
            ("lr", &self.lr),
            ("batch", &self.batch),
            ("epochs", &self.epochs),
            ("lambda", &self.lambda),
            ("theta", &self.theta),
            ("l2", &self.l2),
            ("neg_conventional", &self.neg_conventional),
            ("neg_cross", &self.neg_cross),
            ("confidence", &self.confidence),
            ("confidence_warmup", &self.confidence_warmup),
            ("overlap_fraction", &self.overlap_fraction),
            ("external_triplets", &self.external_triplets),
            ("errors", &self.errors),
            ("tune_fraction", &self.tune_fraction),
            ("sizes", &self.sizes),
            ("seed", &self.seed),
            ("threads", &self.threads),
            ("out", &self.out),
        ]
    }
}

fn emit(cfg: &RunConfig, text: &str) -> Result<(), Error> {
    match &cfg.out {
        Some(path) => write_file(path, text),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| Error::Io {
            context: "writing to stdout".into(),
            source: e,
        }),
    }
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf, Error> {
    cfg.out
        .clone()
        .ok_or_else(|| Error::Config("--out <dir> is required".into()))
}

fn run(cli: &Cli) -> Result<(), Error> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for (key, value) in cli.opts.pairs() {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    match cli.command {
        Command::IngestCheck => {
            let summary = cmd_ingest_check(&cfg)?;
            emit(&cfg, &(serde_json::to_string_pretty(&summary)? + "\n"))
        }
        Command::Train => {
            let dir = out_dir(&cfg)?;
            let artifacts = cmd_train(&cfg)?;
            artifacts.write_to(&dir)?;
            if let Some(m) = artifacts.report.as_ref().and_then(|r| r.metrics.as_ref()) {
                log::warn!("recall {:.4}, mean filtered rank {:.2}", m.recall, m.mean_rank_filter);
            }
            Ok(())
        }
        Command::Validate => {
            let report = cmd_validate(&cfg)?;
            emit(&cfg, &report.to_json()?)
        }
        Command::Corrupt => {
            let dir = out_dir(&cfg)?;
            cmd_corrupt(&cfg)?.write_to(&dir)
        }
        Command::Bench => {
            let rows = cmd_bench(&cfg)?;
            if rows.len() >= 2 {
                let xs: Vec<f64> = rows.iter().map(|r| r.triplets as f64).collect();
                let ys: Vec<f64> = rows.iter().map(|r| r.median_seconds).collect();
                let (slope, _, r2) = linear_fit(&xs, &ys);
                log::warn!("linear fit: {:.3} ns per triplet, R^2 = {r2:.4}", slope * 1e9);
            }
            emit(&cfg, &bench_csv(&rows))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Config => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numeric => 4,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
