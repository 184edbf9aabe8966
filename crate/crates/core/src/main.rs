use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use quanvnet::data::Split;
use quanvnet::pipeline::{
    cmd_eval, cmd_prepare, cmd_quanv, cmd_report, cmd_synth, cmd_train, EvalArgs, Global, ModelKind, PrepareArgs,
    QuanvArgs, ReportArgs, SynthArgs, TrainArgs,
};

/// Classical and quanvolutional traffic-sign classifiers.
#[derive(Parser, Debug)]
#[command(name = "quanvnet", version)]
struct Cli {
    /// Seed for sampling, splitting, random circuits and training.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// `key = value` file; explicit flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Scan an image tree, filter by size, subsample and split into a manifest.
    Prepare(PrepareCli),
    /// Quanvolve every image of a manifest into per-split feature caches.
    Quanv(QuanvCli),
    /// Train the classical model on a manifest or the quanv model on a cache.
    Train(TrainCli),
    /// Evaluate a model file on one split and write JSON and CSV reports.
    Eval(EvalCli),
    /// Merge evaluation reports into a batch-size table.
    Report(ReportCli),
    /// Generate a synthetic sign dataset with the same directory layout.
    Synth(SynthCli),
}

#[derive(Args, Debug)]
struct PrepareCli {
    #[arg(long)]
    root: Option<PathBuf>,
    #[arg(long)]
    out_manifest: Option<PathBuf>,
    /// Keep images whose sides are both strictly larger than this.
    #[arg(long)]
    min_size: Option<usize>,
    /// Stratified subsample size (0 keeps everything).
    #[arg(long)]
    max_samples: Option<usize>,
    /// Keep only the first N class directories (0 keeps all).
    #[arg(long)]
    n_classes: Option<usize>,
}

#[derive(Args, Debug)]
struct QuanvCli {
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Random layers per circuit.
    #[arg(long)]
    layers: Option<usize>,
    /// Independent random circuits (4 channels each).
    #[arg(long)]
    n_filters: Option<usize>,
}

#[derive(Args, Debug)]
struct TrainCli {
    /// Manifest file (classical) or cache directory (quanv).
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    model: Option<ModelKind>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Model file; history goes to `<out>.history.csv` unless given.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalCli {
    #[arg(long)]
    model_file: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    split: Option<Split>,
    /// JSON report; the summary CSV is written alongside with `.csv`.
    #[arg(long)]
    out_report: Option<PathBuf>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
}

#[derive(Args, Debug)]
struct ReportCli {
    /// JSON reports written by `eval`.
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    /// Table CSV (an aligned `.txt` copy is written next to it).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthCli {
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    n_classes: Option<usize>,
    #[arg(long)]
    per_class: Option<usize>,
    #[arg(long)]
    min_side: Option<usize>,
    #[arg(long)]
    max_side: Option<usize>,
}

fn run(cli: Cli) -> quanvnet::Result<()> {
    let global = Global { seed: cli.seed, config: cli.config };
    match cli.command {
        Command::Prepare(a) => {
            let args = PrepareArgs {
                root: a.root,
                out_manifest: a.out_manifest,
                min_size: a.min_size,
                max_samples: a.max_samples,
                n_classes: a.n_classes,
            };
            let out = cmd_prepare(&args, &global)?;
            eprintln!("wrote {} ({} records)", out.path.display(), out.manifest.records.len());
        }
        Command::Quanv(a) => {
            let args = QuanvArgs { manifest: a.manifest, cache_dir: a.cache_dir, layers: a.layers, n_filters: a.n_filters };
            cmd_quanv(&args, &global)?;
        }
        Command::Train(a) => {
            let args = TrainArgs {
                input: a.input,
                model: a.model,
                batch_size: a.batch_size,
                epochs: a.epochs,
                lr: a.lr,
                out: a.out,
                history: a.history,
            };
            let out = cmd_train(&args, &global)?;
            eprintln!("wrote {} and {}", out.model_path.display(), out.history_path.display());
        }
        Command::Eval(a) => {
            let args = EvalArgs {
                model_file: a.model_file,
                input: a.input,
                split: a.split,
                out_report: a.out_report,
                beta: a.beta,
                batch_size: a.batch_size,
            };
            let out = cmd_eval(&args, &global)?;
            eprintln!("wrote {} and {}", out.json_path.display(), out.csv_path.display());
        }
        Command::Report(a) => {
            let out = cmd_report(&ReportArgs { reports: a.reports, out: a.out }, &global)?;
            print!("{}", out.table.to_text());
        }
        Command::Synth(a) => {
            let args = SynthArgs {
                out: a.out,
                n_classes: a.n_classes,
                per_class: a.per_class,
                min_side: a.min_side,
                max_side: a.max_side,
            };
            cmd_synth(&args, &global)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
