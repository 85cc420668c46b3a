//! The `hcoal` command line: data generation, corruption, ranking,
//! selection, correction, evaluation, experiment grids and the review server.

pub mod server;

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use hcoal_core::experiment::{emit_report, ReportFormat};
use hcoal_core::ranking::{entity_rank_with, EntityCounting};
use hcoal_core::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exit status 1: bad arguments or configuration. Exit status 2: bad data.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<RankError> for CliError {
    fn from(e: RankError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ReviewError> for CliError {
    fn from(e: ReviewError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(_) => CliError::Config(e.to_string()),
            ExperimentError::Sim(SimError::Config(_)) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hcoal", version, about = "Rank, review and correct machine-generated sequence labels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic gold corpus.
    Gen(GenArgs),
    /// Overwrite the AI column of a gold corpus with simulated labels.
    Corrupt(CorruptArgs),
    /// Rank the examples of a labeled corpus for review.
    Rank(RankArgs),
    /// Take the budgeted prefix of a ranking.
    Select(SelectArgs),
    /// Apply oracle or journaled corrections to a selection.
    Correct(CorrectArgs),
    /// Score AI labels against gold labels.
    Eval(EvalArgs),
    /// Run a strategy x budget x seed grid and write reports.
    Experiment(ExperimentArgs),
    /// Serve the review queue over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// JSON synthetic corpus spec; may carry a `seed` field.
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CorruptArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// JSON noise config; defaults are used for missing fields.
    #[arg(long)]
    pub noise: Option<PathBuf>,
    /// Overrides the seed in the noise config.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StrategyArg {
    Random,
    Length,
    Entity,
    Confidence,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Random => Strategy::Random,
            StrategyArg::Length => Strategy::Length,
            StrategyArg::Entity => Strategy::Entity,
            StrategyArg::Confidence => Strategy::Confidence,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CountingArg {
    Spans,
    Tokens,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub strategy: StrategyArg,
    /// Seed for the random strategy.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// What the entity strategy counts.
    #[arg(long, value_enum, default_value = "spans")]
    pub entity_counting: CountingArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub rank: PathBuf,
    #[arg(long)]
    pub budget: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["oracle", "corrections"]))]
pub struct CorrectArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub select: PathBuf,
    /// Use the gold column as the reviewer.
    #[arg(long)]
    pub oracle: bool,
    /// Use corrections from a review journal.
    #[arg(long)]
    pub corrections: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Json,
    Csv,
    Md,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "json,csv,md")]
    pub format: Vec<FormatArg>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub rank: PathBuf,
    #[arg(long)]
    pub budget: f64,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Correction journal; defaults to `<in>.journal.jsonl`.
    #[arg(long)]
    pub journal: Option<PathBuf>,
    /// Export target; defaults to `<in>.mixed.conll`.
    #[arg(long)]
    pub export: Option<PathBuf>,
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::Data(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{} ({what}): {e}", path.display())))
}

fn read_json_data<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T, CliError> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{} ({what}): {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("values always serialize");
    text.push('\n');
    write_text(path, &text)
}

pub fn load_corpus(path: &Path) -> Result<Corpus, CliError> {
    Ok(parse_corpus_auto(&read_text(path)?)?)
}

#[derive(Debug, Deserialize)]
struct GenFile {
    #[serde(flatten)]
    spec: SyntheticSpec,
    seed: Option<u64>,
}

pub fn gen(args: &GenArgs) -> Result<(), CliError> {
    let file: GenFile = read_json(&args.spec, "synthetic spec")?;
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let gold = generate_gold(&file.spec, seed)?;
    write_text(&args.out, &write_corpus(&gold, LabelSource::MixedExport)?)
}

pub fn corrupt_cmd(args: &CorruptArgs) -> Result<(), CliError> {
    let mut noise: NoiseConfig = match &args.noise {
        Some(p) => read_json(p, "noise config")?,
        None => NoiseConfig::default(),
    };
    if let Some(seed) = args.seed {
        noise.seed = seed;
    }
    noise.validate()?;
    let gold = load_corpus(&args.input)?;
    let ai = corrupt(&gold, &noise)?;
    write_text(&args.out, &write_corpus(&ai, LabelSource::MixedExport)?)
}

pub fn rank_cmd(args: &RankArgs) -> Result<(), CliError> {
    let corpus = load_corpus(&args.input)?;
    let ranked = match (args.strategy, args.entity_counting) {
        (StrategyArg::Entity, CountingArg::Tokens) => entity_rank_with(&corpus, EntityCounting::Tokens),
        (s, _) => rank(&corpus, s.into(), args.seed),
    };
    write_json(&args.out, &ranked)
}

pub fn select_cmd(args: &SelectArgs) -> Result<(), CliError> {
    let ranked: RankedList = read_json_data(&args.rank, "ranking")?;
    let selection = select_budget(&ranked, args.budget)?;
    write_json(&args.out, &selection)
}

pub fn correct_cmd(args: &CorrectArgs) -> Result<(), CliError> {
    let corpus = load_corpus(&args.input)?;
    let selection: SelectionSet = read_json_data(&args.select, "selection")?;
    let mixed = match &args.corrections {
        Some(journal) => apply_corrections(&corpus, &read_journal(journal)?, &selection.ids)?,
        None => oracle_correct(&corpus, &selection)?,
    };
    write_text(&args.out, &write_corpus(&mixed, LabelSource::MixedExport)?)
}

pub fn eval_cmd(args: &EvalArgs) -> Result<EvalReport, CliError> {
    let corpus = load_corpus(&args.input)?;
    let report = evaluate_labels(&corpus)?;
    if let Some(path) = &args.report {
        write_json(path, &report)?;
    }
    Ok(report)
}

pub fn experiment_cmd(args: &ExperimentArgs) -> Result<Vec<PathBuf>, CliError> {
    let mut cfg: ExperimentConfig = read_json(&args.config, "experiment config")?;
    if let Some(out) = &args.out {
        cfg.output_dir = Some(out.clone());
    }
    let dir = cfg
        .output_dir
        .clone()
        .ok_or_else(|| CliError::Usage("no output directory: pass --out or set output_dir".into()))?;
    // relative input paths are resolved against the config file
    if let InputSource::Path(p) = &mut cfg.input {
        if p.is_relative() {
            if let Some(base) = args.config.parent() {
                *p = base.join(&*p);
            }
        }
    }
    let mut bundle = run_experiment(&cfg)?;
    bundle.meta.timestamp = Some(chrono::Utc::now());
    let formats: Vec<ReportFormat> = args
        .format
        .iter()
        .map(|f| match f {
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Md => ReportFormat::Markdown,
        })
        .collect();
    Ok(emit_report(&bundle, &formats, &dir)?)
}

fn sibling(input: &Path, suffix: &str) -> PathBuf {
    let mut name = input.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    input.with_file_name(name)
}

pub fn open_session(args: &ServeArgs) -> Result<(ReviewSession, PathBuf), CliError> {
    let corpus = load_corpus(&args.input)?;
    let ranked: RankedList = read_json_data(&args.rank, "ranking")?;
    let journal = args
        .journal
        .clone()
        .unwrap_or_else(|| sibling(&args.input, ".journal.jsonl"));
    let export = args
        .export
        .clone()
        .unwrap_or_else(|| sibling(&args.input, ".mixed.conll"));
    if !(0.0..=1.0).contains(&args.budget) {
        return Err(CliError::Usage(format!("budget {} is outside [0, 1]", args.budget)));
    }
    let session = ReviewSession::open(corpus, &ranked, args.budget, &journal)?;
    Ok((session, export))
}

pub async fn serve(args: &ServeArgs) -> Result<(), CliError> {
    let (session, export) = open_session(args)?;
    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .map_err(|e| CliError::Usage(format!("bad listen address: {e}")))?;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| CliError::Usage(format!("cannot bind {addr}: {e}")))?;
    let queue_len = session.queue().len();
    eprintln!(
        "serving {queue_len} queued examples on http://{} (journal {})",
        listener.local_addr().map(|a| a.to_string()).unwrap_or_default(),
        session.journal_path().map(|p| p.display().to_string()).unwrap_or_default()
    );
    let app = server::router(server::AppState::new(session, export));
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| CliError::Data(e.to_string()))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen(a) => gen(&a),
        Command::Corrupt(a) => corrupt_cmd(&a),
        Command::Rank(a) => rank_cmd(&a),
        Command::Select(a) => select_cmd(&a),
        Command::Correct(a) => correct_cmd(&a),
        Command::Eval(a) => {
            let r = eval_cmd(&a)?;
            println!(
                "micro F1 {:.4}  macro F1 {:.4}  weighted F1 {:.4}",
                r.micro_f1, r.macro_f1, r.weighted_f1
            );
            for t in &r.per_type {
                println!(
                    "  {:<16} P {:.4}  R {:.4}  F1 {:.4}  n {}",
                    t.entity_type, t.precision, t.recall, t.f1, t.support
                );
            }
            Ok(())
        }
        Command::Experiment(a) => {
            for p in experiment_cmd(&a)? {
                println!("{}", p.display());
            }
            Ok(())
        }
        Command::Serve(a) => {
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Data(e.to_string()))?;
            rt.block_on(serve(&a))
        }
    }
}
