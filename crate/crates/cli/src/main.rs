//! `decoyforge`: build a decoy-augmented corpus from PDB files, pretrain the
//! graph encoder on it, fine-tune on affinity labels and evaluate.

mod commands;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};

/// Exit status for errors that are the caller's fault.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(name = "decoyforge", version, about)]
struct Cli {
    /// Seed for every random draw
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Print machine-readable JSON instead of text
    #[arg(long, global = true)]
    json: bool,

    /// Worker threads for curation and decoy generation (results do not
    /// depend on it)
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Curate a directory of PDB files into a dataset
    Build(BuildArgs),
    /// Generate or ingest decoy poses
    #[command(subcommand)]
    Decoys(DecoysCommand),
    /// Corpus histograms: atoms and decoys per complex, RMSD distribution
    Stats(StatsArgs),
    /// Contrastive pretraining with the score-matching regularizer
    Pretrain(PretrainArgs),
    /// Fine-tune on affinity labels
    Finetune(FinetuneArgs),
    /// Evaluate a checkpoint on labeled complexes
    Eval(EvalArgs),
    /// Run the finite-difference gradient suite
    Gradcheck(GradcheckArgs),
    /// Graph utilities
    #[command(subcommand)]
    Graph(GraphCommand),
}

#[derive(Args, Debug)]
pub struct BuildArgs {
    /// Directory of .pdb/.ent files
    #[arg(long)]
    pub input: PathBuf,
    /// Output dataset directory
    #[arg(long)]
    pub out: PathBuf,
    /// Curation filters (JSON)
    #[arg(long)]
    pub filters: Option<PathBuf>,
    /// entries.json with resolutions for files lacking REMARK 2
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum DecoysCommand {
    /// Generate perturbation decoys for every complex, replacing existing ones
    Generate(GenerateArgs),
    /// Append externally docked poses (`<complex_id>[.tag].pdb`)
    Ingest(IngestArgs),
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Decoy generator settings (JSON); overrides the flags
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Poses per complex
    #[arg(long)]
    pub poses: Option<usize>,
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Directory of pose files
    #[arg(long)]
    pub poses: PathBuf,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Write the histograms as CSV
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Bin widths (JSON)
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PretrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Checkpoint to write; losscurve.csv and run.json go beside it
    #[arg(long)]
    pub out: PathBuf,
    /// Training schedule (JSON); overrides the flags
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Objective settings (JSON)
    #[arg(long)]
    pub objective: Option<PathBuf>,
    /// Encoder architecture (JSON)
    #[arg(long)]
    pub encoder: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Hold out this fraction of complexes for a validation loss
    #[arg(long)]
    pub val_fraction: Option<f64>,
}

#[derive(Args, Debug)]
pub struct FinetuneArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// CSV with complex_id,affinity[,split]
    #[arg(long)]
    pub labels: PathBuf,
    /// Pretrained checkpoint, or `none` to start from scratch
    #[arg(long)]
    pub init: String,
    /// Checkpoint to write; metrics.json and run.json go beside it
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Encoder architecture when starting from scratch (JSON)
    #[arg(long)]
    pub encoder: Option<PathBuf>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Which labeled complexes to score
    #[arg(long, value_enum, default_value_t = SplitChoice::Test)]
    pub split: SplitChoice,
    /// Write metrics JSON here (run.json goes beside it)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitChoice {
    Train,
    Val,
    Test,
    All,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    /// Number of seeds, starting at --seed
    #[arg(long, default_value_t = 100)]
    pub seeds: u64,
}

#[derive(Subcommand, Debug)]
pub enum GraphCommand {
    /// Export one graph as JSON
    Export(ExportArgs),
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub id: String,
    /// Decoy index; the native pose when absent
    #[arg(long)]
    pub pose: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Global options shared by every command.
#[derive(Clone, Copy, Debug)]
pub struct Globals {
    pub seed: u64,
    pub json: bool,
    pub workers: usize,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return 1;
        }
        if let Some(decoyforge::trainer::TrainError::DivergedLoss { .. }) = cause.downcast_ref() {
            return 3;
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let g = Globals { seed: cli.seed, json: cli.json, workers: cli.workers.max(1) };
    let result = match cli.command {
        Command::Build(a) => commands::build(&a, g),
        Command::Decoys(DecoysCommand::Generate(a)) => commands::decoys_generate(&a, g),
        Command::Decoys(DecoysCommand::Ingest(a)) => commands::decoys_ingest(&a, g),
        Command::Stats(a) => commands::stats(&a, g),
        Command::Pretrain(a) => commands::pretrain(&a, g),
        Command::Finetune(a) => commands::finetune(&a, g),
        Command::Eval(a) => commands::eval(&a, g),
        Command::Gradcheck(a) => commands::gradcheck(&a, g),
        Command::Graph(GraphCommand::Export(a)) => commands::graph_export(&a, g),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = exit_code(&e);
            if code == 1 {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            ExitCode::from(code)
        }
    }
}
