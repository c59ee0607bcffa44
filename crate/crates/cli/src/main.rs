//! `mbi`: train, evaluate, compare, and gradient-check the bundled CNN
//! architectures on local benchmark dataset files.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mbinception::data::synth::{write_synthetic_cifar, write_synthetic_mnist};
use mbinception::data::{CifarVariant, SplitTag};
use mbinception::harness::{
    apply_overrides, cmd_compare, cmd_datasets_verify, cmd_eval, cmd_gradcheck, cmd_train,
    desk_compare_configs, parse_config_text, DatasetName, HarnessError, RunConfig,
    GRADCHECK_MODELS,
};

#[derive(Parser)]
#[command(
    name = "mbi",
    about = "Desk-scale CNN training and evaluation harness",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from a config file and write a reproducible run
    /// directory (manifest, checkpoints, metrics).
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset split; emits metric and
    /// probability-density CSVs.
    Eval(EvalArgs),
    /// Train and evaluate several configs and emit one comparison table.
    Compare(CompareArgs),
    /// Verify the backward pass of a toy model against central finite
    /// differences.
    Gradcheck(GradcheckArgs),
    /// Inspect or generate local dataset files.
    Datasets(DatasetsArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Key-value config file.
    #[arg(long)]
    config: PathBuf,
    /// Override a config key, e.g. --set train.epochs=5 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Dataset name: mnist, fashion-mnist, cifar10, cifar100.
    #[arg(long)]
    dataset: String,
    #[arg(long)]
    data_dir: PathBuf,
    #[arg(long, default_value = "eval")]
    out: PathBuf,
    /// Histogram bin count for the probability-density CSVs.
    #[arg(long, default_value_t = 10)]
    bins: usize,
    /// Evaluate only a seeded subset of this size (0 = whole split).
    #[arg(long, default_value_t = 0)]
    subset: usize,
    /// Split to score: test or train.
    #[arg(long, default_value = "test")]
    split: String,
}

#[derive(Args)]
struct CompareArgs {
    /// Config files to compare (repeatable).
    #[arg(long)]
    config: Vec<PathBuf>,
    /// Instead of explicit configs, run the default four-model desk-scale
    /// comparison on the named dataset.
    #[arg(long)]
    desk: bool,
    #[arg(long, default_value = "mnist")]
    dataset: String,
    #[arg(long, required_if_eq("desk", "true"))]
    data_dir: Option<PathBuf>,
    #[arg(long, default_value = "compare")]
    out: PathBuf,
    /// Training subset size for --desk runs (0 = full training set).
    #[arg(long, default_value_t = 10000)]
    subset: usize,
    #[arg(long, default_value_t = 3)]
    epochs: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Model to check: mbinception, vgg, resnet, mobilenet, dense, or all.
    #[arg(long, default_value = "all")]
    model: String,
    #[arg(long, default_value_t = 17)]
    seed: u64,
}

#[derive(Args)]
struct DatasetsArgs {
    #[command(subcommand)]
    action: DatasetsAction,
}

#[derive(Subcommand)]
enum DatasetsAction {
    /// Parse local files and print record and per-class counts.
    Verify {
        #[arg(long)]
        name: String,
        #[arg(long)]
        dir: PathBuf,
    },
    /// Write a deterministic synthetic corpus in the dataset's exact binary
    /// layout (rendered digit glyphs for the MNIST formats).
    Synth {
        #[arg(long)]
        name: String,
        #[arg(long)]
        dir: PathBuf,
        /// Training records (MNIST layouts only).
        #[arg(long, default_value_t = 60000)]
        train: usize,
        /// Test records (MNIST layouts only).
        #[arg(long, default_value_t = 10000)]
        test: usize,
        /// Records per class (CIFAR layouts only).
        #[arg(long, default_value_t = 6000)]
        per_class: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn parse_split(s: &str) -> Result<SplitTag, HarnessError> {
    match s {
        "test" => Ok(SplitTag::Test),
        "train" => Ok(SplitTag::Train),
        other => Err(HarnessError::Config(format!(
            "bad split '{other}' (test|train)"
        ))),
    }
}

fn load_config(path: &PathBuf, overrides: &[String]) -> Result<RunConfig, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.clone(),
        source,
    })?;
    let mut map = parse_config_text(&text)?;
    apply_overrides(&mut map, overrides)?;
    RunConfig::from_map(&map)
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Train(args) => {
            let cfg = load_config(&args.config, &args.overrides)?;
            let outcome = cmd_train(&cfg)?;
            println!("run directory: {}", outcome.run_dir.display());
            println!(
                "model {} on {} ({} parameters), {} epoch(s) in {:.1}s",
                outcome.manifest.model,
                outcome.manifest.dataset,
                outcome.manifest.parameter_count,
                outcome.manifest.epochs,
                outcome.wall_seconds
            );
            for (i, (loss, acc)) in outcome
                .manifest
                .train_loss
                .iter()
                .zip(&outcome.manifest.validation_accuracy)
                .enumerate()
            {
                println!("  epoch {:>2}: loss {loss:.6}  val accuracy {acc:.4}", i + 1);
            }
            println!(
                "final validation accuracy {:.4} (best epoch {})",
                outcome.manifest.final_metrics.accuracy, outcome.manifest.best_epoch
            );
            Ok(())
        }
        Command::Eval(args) => {
            let dataset = DatasetName::parse(&args.dataset)?;
            let split = parse_split(&args.split)?;
            let outcome = cmd_eval(
                &args.checkpoint,
                dataset,
                &args.data_dir,
                &args.out,
                args.bins,
                args.subset,
                split,
            )?;
            println!(
                "{} on {} [{}]: accuracy {:.4}, precision {:.4}, recall {:.4}, f1 {:.4} ({} samples)",
                outcome.model,
                outcome.dataset,
                args.split,
                outcome.report.accuracy,
                outcome.report.macro_precision,
                outcome.report.macro_recall,
                outcome.report.macro_f1,
                outcome.report.samples
            );
            println!("reports written to {}", args.out.display());
            Ok(())
        }
        Command::Compare(args) => {
            let configs = if args.desk {
                let data_dir = args.data_dir.as_ref().ok_or_else(|| {
                    HarnessError::Config("--desk requires --data-dir".into())
                })?;
                desk_compare_configs(
                    DatasetName::parse(&args.dataset)?,
                    data_dir,
                    &args.out,
                    args.subset,
                    args.epochs,
                    args.seed,
                )
            } else {
                let mut configs = Vec::new();
                for path in &args.config {
                    configs.push(load_config(path, &[])?);
                }
                configs
            };
            let rows = cmd_compare(&configs, &args.out)?;
            println!("{}", mbinception::metrics::MetricReport::CSV_HEADER);
            for row in &rows {
                println!(
                    "{}",
                    row.report.csv_row(
                        &row.model,
                        &row.dataset,
                        row.parameter_count,
                        row.epochs,
                        row.seed
                    )
                );
            }
            println!("table written to {}", args.out.join("comparison.csv").display());
            Ok(())
        }
        Command::Gradcheck(args) => {
            let models: Vec<&str> = if args.model == "all" {
                GRADCHECK_MODELS.to_vec()
            } else {
                vec![args.model.as_str()]
            };
            let mut failed: Option<mbinception::graph::gradcheck::GradCheckReport> = None;
            for model in models {
                let report = cmd_gradcheck(model, args.seed, None)?;
                print!("{}", report.render());
                if !report.pass && failed.as_ref().map(|f| report.worst > f.worst).unwrap_or(true) {
                    failed = Some(report);
                }
            }
            match failed {
                None => Ok(()),
                Some(report) => Err(HarnessError::GradCheckFailed {
                    model: report.model,
                    worst: report.worst,
                    param: report.worst_param,
                }),
            }
        }
        Command::Datasets(args) => match args.action {
            DatasetsAction::Verify { name, dir } => {
                let summary = cmd_datasets_verify(DatasetName::parse(&name)?, &dir)?;
                print!("{}", summary.render());
                Ok(())
            }
            DatasetsAction::Synth {
                name,
                dir,
                train,
                test,
                per_class,
                seed,
            } => {
                std::fs::create_dir_all(&dir).map_err(|source| HarnessError::Io {
                    path: dir.clone(),
                    source,
                })?;
                match DatasetName::parse(&name)? {
                    DatasetName::Mnist | DatasetName::FashionMnist => {
                        write_synthetic_mnist(&dir, train, test, seed)?;
                        println!(
                            "wrote synthetic digit corpus ({train} train / {test} test) to {}",
                            dir.display()
                        );
                    }
                    DatasetName::Cifar10 => {
                        write_synthetic_cifar(&dir, CifarVariant::Cifar10, per_class, seed)?;
                        println!(
                            "wrote synthetic cifar10 layout ({per_class} per class) to {}",
                            dir.display()
                        );
                    }
                    DatasetName::Cifar100 => {
                        write_synthetic_cifar(&dir, CifarVariant::Cifar100, per_class, seed)?;
                        println!(
                            "wrote synthetic cifar100 layout ({per_class} per class) to {}",
                            dir.display()
                        );
                    }
                }
                Ok(())
            }
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are successes; everything else is a
            // usage error (exit 1).
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
