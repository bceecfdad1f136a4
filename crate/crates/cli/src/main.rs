mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Find theme-labelled passages in trial transcripts and run blinded review
/// of model/annotator disagreements.
#[derive(Debug, Parser)]
#[command(name = "triage", version)]
pub struct Cli {
    /// TOML file with pipeline settings; unset keys keep their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Root for default input and output locations.
    #[arg(long, global = true, env = "TRIAGE_STATE_DIR", default_value = "triage-state")]
    pub state_dir: PathBuf,

    #[arg(short, long, global = true)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalize and segment a raw transcript into the corpus.
    Ingest(IngestArgs),
    /// Gold annotation files.
    #[command(subcommand)]
    Annotations(AnnotationsCommand),
    /// Score sliding windows and aggregate to sentence scores.
    Score(ScoreArgs),
    /// Check high-scoring sentences for a reference to the defendant.
    Gate(GateArgs),
    /// Group scored, gated sentences into predicted passages.
    Extract(ExtractArgs),
    /// Passage precision, top-k precision and sentence recall per transcript.
    Eval(EvalArgs),
    /// Labelled windows for model training plus leave-one-out folds.
    ExportTrain(ExportArgs),
    /// Build a disagreement review queue.
    Queue(QueueArgs),
    /// Model-lawyer agreement from review outcomes.
    Agreement(AgreementArgs),
    /// Review decision records.
    #[command(subcommand)]
    Decisions(DecisionsCommand),
    /// Run the review HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub id: String,
    /// Defendant name or alias; repeatable.
    #[arg(long = "alias")]
    pub aliases: Vec<String>,
    /// Corpus directory [default: <state>/corpus]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum AnnotationsCommand {
    /// Validate an annotation file against the corpus and store the valid rows.
    Import(ImportArgs),
}

#[derive(Debug, Args)]
pub struct ImportArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// [default: <state>/corpus]
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// [default: <state>/gold.jsonl]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub theme: String,
    /// `lexicon:<file>` or `http:<url>`
    #[arg(long)]
    pub scorer: String,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Scores directory [default: <state>/scores]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GateArgs {
    /// Theme to gate; every scored theme when omitted.
    #[arg(long)]
    pub theme: Option<String>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// `builtin` or `http:<url>`
    #[arg(long, default_value = "builtin")]
    pub resolver: String,
    /// Feminine name list for the builtin resolver, one name per line.
    #[arg(long)]
    pub names: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub theme: String,
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Passage file [default: <state>/passages/<THEME>.jsonl]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub theme: String,
    /// [default: <state>/gold.jsonl]
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// [default: <state>/metrics.jsonl]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub theme: String,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub gold: Option<PathBuf>,
    /// [default: <state>/export/<THEME>]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QueueArgs {
    #[arg(long)]
    pub theme: String,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// [default: <state>/queues/<THEME>-seed<SEED>.jsonl]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AgreementArgs {
    /// Review outcome records, as written by `decisions export`.
    #[arg(long)]
    pub records: PathBuf,
    /// Only this theme; every theme present when omitted.
    #[arg(long)]
    pub theme: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum DecisionsCommand {
    /// Write the effective decision per item, joined with its queue side.
    Export(DecisionsExportArgs),
}

#[derive(Debug, Args)]
pub struct DecisionsExportArgs {
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write every raw adjudication record, corrections included.
    #[arg(long)]
    pub all: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_max_level(if cli.verbose { tracing::Level::DEBUG } else { tracing::Level::INFO })
        .init();
    match commands::run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
