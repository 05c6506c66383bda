//! `facekit`: facial-attribute experiment runner.
//!
//! Every pipeline stage is a subcommand; options resolve from command
//! line over config file (`--config`, flat `key = value` lines) over
//! built-in defaults, and each report echoes the fully resolved
//! configuration so runs are self-describing and reproducible.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Balance, ImgSize};

#[derive(Parser)]
#[command(name = "facekit", version, about = "Facial-attribute classifiers and dataset audits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the small CNN on raw pixels for one binary attribute.
    TrainCnn(TrainCnnArgs),
    /// Train a softmax linear probe on precomputed embedding vectors.
    TrainProbe(TrainProbeArgs),
    /// Dataset audits: co-occurrence, tree, confusion, noise, workload.
    #[command(subcommand)]
    Audit(AuditCommand),
    /// Print dataset statistics.
    Inspect(InspectArgs),
}

#[derive(Subcommand)]
enum AuditCommand {
    /// Pairwise attribute co-occurrence matrix and heatmap.
    Cooccur(AuditCooccurArgs),
    /// Decision tree predicting one attribute from its co-features.
    Tree(AuditTreeArgs),
    /// Confusion cells and ranked errors from a previous eval.csv.
    Confusion(AuditConfusionArgs),
    /// Label-noise candidates from a previous eval.csv.
    Noise(AuditNoiseArgs),
    /// Annotation-workload arithmetic.
    Workload(AuditWorkloadArgs),
}

#[derive(Args)]
struct CommonOpts {
    /// Flat key = value configuration file; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root RNG seed; all randomness derives from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for report files.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainCnnArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// Attribute list file (count line, names line, ±1 rows).
    #[arg(long)]
    attr_file: Option<PathBuf>,
    /// Directory holding the images named by the attribute file.
    #[arg(long)]
    image_root: Option<PathBuf>,
    /// Target attribute name.
    #[arg(long)]
    attr: Option<String>,
    #[arg(long)]
    train_n: Option<usize>,
    #[arg(long)]
    test_n: Option<usize>,
    /// Image size as N or HxW.
    #[arg(long)]
    img_size: Option<ImgSize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    eval_every: Option<usize>,
    /// Class balancing: none | train | both.
    #[arg(long)]
    balance: Option<Balance>,
    /// Validate inputs and exit without training.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args)]
struct TrainProbeArgs {
    #[command(flatten)]
    common: CommonOpts,
    #[arg(long)]
    attr_file: Option<PathBuf>,
    /// Embedding file: header `count dim`, rows `id v1 ... v_dim`.
    #[arg(long)]
    embeddings_file: Option<PathBuf>,
    #[arg(long)]
    attr: Option<String>,
    #[arg(long)]
    train_n: Option<usize>,
    #[arg(long)]
    test_n: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// L2 penalty on the probe weights.
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    balance: Option<Balance>,
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args)]
struct AuditCooccurArgs {
    #[command(flatten)]
    common: CommonOpts,
    #[arg(long)]
    attr_file: Option<PathBuf>,
    /// jaccard | conditional.
    #[arg(long)]
    metric: Option<String>,
}

#[derive(Args)]
struct AuditTreeArgs {
    #[command(flatten)]
    common: CommonOpts,
    #[arg(long)]
    attr_file: Option<PathBuf>,
    #[arg(long)]
    attr: Option<String>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    min_leaf: Option<usize>,
    /// Fit on a seeded random subsample of this many records.
    #[arg(long)]
    sample_n: Option<usize>,
}

#[derive(Args)]
struct AuditConfusionArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// eval.csv from a previous train run.
    #[arg(long)]
    eval_file: Option<PathBuf>,
    /// Attribute name to echo in the report.
    #[arg(long)]
    attr: Option<String>,
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Args)]
struct AuditNoiseArgs {
    #[command(flatten)]
    common: CommonOpts,
    #[arg(long)]
    eval_file: Option<PathBuf>,
    #[arg(long)]
    top_k: Option<usize>,
}

#[derive(Args)]
struct AuditWorkloadArgs {
    #[command(flatten)]
    common: CommonOpts,
    #[arg(long)]
    n_images: Option<u64>,
    #[arg(long)]
    n_features: Option<u64>,
    #[arg(long)]
    n_workers: Option<u64>,
    #[arg(long)]
    days: Option<u64>,
    #[arg(long)]
    hours_per_day: Option<f64>,
    #[arg(long)]
    redundancy: Option<u64>,
    /// Skip the schedule arithmetic and use this labelling speed directly.
    #[arg(long)]
    images_per_hour: Option<f64>,
}

#[derive(Args)]
struct InspectArgs {
    #[command(flatten)]
    common: CommonOpts,
    #[arg(long)]
    attr_file: Option<PathBuf>,
    #[arg(long)]
    embeddings_file: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::TrainCnn(args) => commands::train_cnn(args),
        Command::TrainProbe(args) => commands::train_probe_cmd(args),
        Command::Audit(AuditCommand::Cooccur(args)) => commands::audit_cooccur(args),
        Command::Audit(AuditCommand::Tree(args)) => commands::audit_tree(args),
        Command::Audit(AuditCommand::Confusion(args)) => commands::audit_confusion(args),
        Command::Audit(AuditCommand::Noise(args)) => commands::audit_noise(args),
        Command::Audit(AuditCommand::Workload(args)) => commands::audit_workload(args),
        Command::Inspect(args) => commands::inspect(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
