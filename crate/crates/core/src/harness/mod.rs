//! The command layer behind the `mbi` CLI: train, evaluate, compare,
//! gradient-check, and dataset verification, with reproducible run
//! directories.
//!
//! Determinism contract: given the same config, seed, and data files, every
//! emitted manifest, checkpoint, and CSV is bit-identical across runs. All
//! RNG streams are derived from the run seed; wall-clock timing goes to a
//! separate `timing.txt` so it never contaminates the manifest.

pub mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{
    apply_overrides, parse_config_text, DatasetName, ModelName, RunConfig, DATASET_NAMES,
    MODEL_NAMES,
};

use crate::data::{
    load_cifar100_dir, load_cifar10_dir, load_mnist_dir, split_validation, BatchIterator,
    DataError, LabeledDataset, SplitTag,
};
use crate::graph::gradcheck::{gradcheck_model, GradCheckConfig, GradCheckReport};
use crate::graph::{
    build_dense_probe, build_mbinception, build_mobilenet_style, build_resnet_style,
    build_vgg_style, count_parameters, graph_backward, graph_forward, init_params,
    load_checkpoint, mbinception_toy, mobilenet_toy, resnet_toy, save_checkpoint, vgg_toy,
    Checkpoint, DenseProbeConfig, GraphError, MbInceptionConfig, MobileNetStyleConfig,
    ModelGraph, ParameterStore, ResNetStyleConfig, VggStyleConfig,
};
use crate::metrics::{
    probability_density_report, report, ConfusionMatrix, MetricReport, MetricsError,
};
use crate::ops::{Mode, OpsError};
use crate::optim::{apply_updates, OptimError, OptimizerState};
use crate::SeededRng;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("unknown {kind} '{name}' (registered: {known})")]
    UnknownName {
        kind: &'static str,
        name: String,
        known: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Ops(#[from] OpsError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("non-finite loss at epoch {epoch}, batch {batch}: training aborted")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("checkpoint expects {model_classes} classes, dataset has {dataset_classes}")]
    ClassCountMismatch {
        model_classes: usize,
        dataset_classes: usize,
    },
    #[error("resume checkpoint does not match the configured model graph")]
    ResumeMismatch,
    #[error("comparison run {index} ({model}) failed: {source}")]
    CompareFailed {
        index: usize,
        model: String,
        source: Box<HarnessError>,
    },
    #[error("gradient check failed for {model}: worst relative error {worst:.3e} at '{param}'")]
    GradCheckFailed {
        model: String,
        worst: f64,
        param: String,
    },
}

impl HarnessError {
    /// CLI exit code: 1 usage, 2 data, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::UnknownName { .. } => 1,
            HarnessError::Graph(GraphError::InvalidConfig(_)) => 1,
            HarnessError::Io { .. }
            | HarnessError::Data(_)
            | HarnessError::Graph(_)
            | HarnessError::ClassCountMismatch { .. }
            | HarnessError::ResumeMismatch => 2,
            HarnessError::Ops(_)
            | HarnessError::Optim(_)
            | HarnessError::Metrics(_)
            | HarnessError::NonFiniteLoss { .. }
            | HarnessError::GradCheckFailed { .. } => 3,
            HarnessError::CompareFailed { source, .. } => source.exit_code(),
        }
    }
}

// Purpose tags for deriving independent RNG streams from the run seed.
const SEED_INIT: u64 = 1;
const SEED_SUBSET: u64 = 2;
const SEED_SPLIT: u64 = 3;
const SEED_SHUFFLE: u64 = 4;
const SEED_DROPOUT: u64 = 5;
const SEED_TEST_SUBSET: u64 = 6;

/// SplitMix64 over the words; cheap, stable seed derivation.
pub fn derive_seed(base: u64, words: &[u64]) -> u64 {
    let mut z = base;
    for &w in words {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(w);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
    }
    z
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes a file through a temporary sibling plus rename, so readers never
/// observe a half-written artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))?;
    Ok(())
}

/// Loads the configured dataset pair (train, test) in canonical layout.
pub fn load_dataset(cfg: &RunConfig) -> Result<(LabeledDataset, LabeledDataset), HarnessError> {
    let classes = cfg.dataset.class_count();
    let ((train_images, train_labels), (test_images, test_labels)) = match cfg.dataset {
        DatasetName::Mnist | DatasetName::FashionMnist => load_mnist_dir(&cfg.data_dir)?,
        DatasetName::Cifar10 => load_cifar10_dir(&cfg.data_dir)?,
        DatasetName::Cifar100 => load_cifar100_dir(&cfg.data_dir)?,
    };
    let source = format!("{}:{}", cfg.dataset.as_str(), cfg.data_dir.display());
    let train = LabeledDataset::from_raw(
        train_images,
        train_labels,
        classes,
        SplitTag::Train,
        source.clone(),
        cfg.resize,
    )?;
    let test = LabeledDataset::from_raw(
        test_images,
        test_labels,
        classes,
        SplitTag::Test,
        source,
        cfg.resize,
    )?;
    Ok((train, test))
}

/// Builds the configured architecture for the dataset's class count.
pub fn build_model(cfg: &RunConfig, num_classes: usize) -> Result<ModelGraph, HarnessError> {
    let input = (32, 32, 3);
    let graph = match cfg.model {
        ModelName::MbInception => build_mbinception(&MbInceptionConfig {
            input,
            base_filters: cfg.base_filters,
            stage_multipliers: cfg.stage_multipliers.clone(),
            num_classes,
            dropout_block: cfg.dropout_block,
            dropout_head: cfg.dropout_head,
        })?,
        ModelName::Vgg => build_vgg_style(&VggStyleConfig {
            input,
            width: cfg.width,
            depth: cfg.depth,
            hidden: cfg.hidden,
            num_classes,
        })?,
        ModelName::ResNet => build_resnet_style(&ResNetStyleConfig {
            input,
            width: cfg.width,
            stages: cfg.depth,
            blocks_per_stage: cfg.blocks,
            num_classes,
        })?,
        ModelName::MobileNet => build_mobilenet_style(&MobileNetStyleConfig {
            input,
            width: cfg.width,
            pairs: cfg.depth,
            num_classes,
        })?,
    };
    Ok(graph)
}

/// Everything a finished run reports, minus wall-clock timing (kept out so
/// manifests stay bit-identical across repeats).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub model: String,
    pub dataset: String,
    pub seed: u64,
    pub epochs: usize,
    pub parameter_count: u64,
    pub config: BTreeMap<String, String>,
    pub train_loss: Vec<f64>,
    pub validation_accuracy: Vec<f64>,
    /// 1-based epoch with the best validation accuracy; 0 when untrained.
    pub best_epoch: usize,
    /// Metrics on the validation split at the end of training.
    pub final_metrics: MetricReport,
}

/// Paths and results of one training run.
#[derive(Debug)]
pub struct TrainOutcome {
    pub manifest: RunManifest,
    pub run_dir: PathBuf,
    pub final_checkpoint: PathBuf,
    pub best_checkpoint: PathBuf,
    pub wall_seconds: f64,
}

struct EvalOutput {
    report: MetricReport,
    max_probs: Vec<f64>,
    true_probs: Vec<f64>,
}

const EVAL_BATCH: usize = 128;

fn evaluate(
    graph: &ModelGraph,
    params: &mut ParameterStore,
    dataset: &LabeledDataset,
) -> Result<EvalOutput, HarnessError> {
    let mut cm = ConfusionMatrix::new(dataset.class_count);
    let mut max_probs = Vec::with_capacity(dataset.len());
    let mut true_probs = Vec::with_capacity(dataset.len());
    let mut rng = SeededRng::seed_from_u64(0); // unused in infer mode
    for (images, labels) in BatchIterator::sequential(dataset, EVAL_BATCH) {
        let fwd = graph_forward(graph, params, &images, Mode::Infer, &mut rng)?;
        let xent = crate::ops::softmax_cross_entropy(fwd.logits(), &labels)?;
        let k = dataset.class_count;
        let mut predicted = Vec::with_capacity(labels.len());
        for (row, &label) in xent.probs.data().chunks_exact(k).zip(&labels) {
            let mut best = 0usize;
            for (j, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = j;
                }
            }
            predicted.push(best);
            max_probs.push(row[best]);
            true_probs.push(row[label]);
        }
        cm.accumulate(&labels, &predicted)?;
    }
    Ok(EvalOutput {
        report: report(&cm)?,
        max_probs,
        true_probs,
    })
}

/// Trains per the config and writes the run directory: `manifest.json`,
/// `metrics.csv`, final and best-validation checkpoints, and `timing.txt`.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainOutcome, HarnessError> {
    let start = Instant::now();
    let (full_train, _test) = load_dataset(cfg)?;
    let classes = full_train.class_count;

    let train_pool = if cfg.subset > 0 {
        full_train.subset_seeded(cfg.subset, derive_seed(cfg.seed, &[SEED_SUBSET]))?
    } else {
        full_train
    };
    let (train, validation) = split_validation(
        &train_pool,
        cfg.validation_fraction,
        derive_seed(cfg.seed, &[SEED_SPLIT]),
    )?;

    let graph = build_model(cfg, classes)?;
    let mut params;
    let mut opt_state;
    let start_epoch;
    match &cfg.resume {
        None => {
            params = init_params(&graph, derive_seed(cfg.seed, &[SEED_INIT]));
            opt_state = OptimizerState::default();
            start_epoch = 0;
        }
        Some(path) => {
            let bytes = std::fs::read(path).map_err(io_err(path))?;
            let ckpt = load_checkpoint(&bytes)?;
            if ckpt.graph != graph {
                return Err(HarnessError::ResumeMismatch);
            }
            params = ckpt.params;
            opt_state = match ckpt.optimizer {
                Some((opt, state)) if opt == cfg.optimizer => state,
                Some(_) => return Err(HarnessError::ResumeMismatch),
                None => OptimizerState::default(),
            };
            start_epoch = ckpt.epochs_completed as usize;
        }
    }

    let mut train_loss = Vec::new();
    let mut validation_accuracy = Vec::new();
    let mut best: Option<(usize, f64, ParameterStore, OptimizerState)> = None;
    for epoch in start_epoch..cfg.epochs {
        let mut loss_sum = 0.0;
        let shuffle_seed = derive_seed(cfg.seed, &[SEED_SHUFFLE, epoch as u64]);
        for (batch_idx, (images, labels)) in
            BatchIterator::shuffled(&train, cfg.batch_size, shuffle_seed).enumerate()
        {
            let mut dropout_rng = SeededRng::seed_from_u64(derive_seed(
                cfg.seed,
                &[SEED_DROPOUT, epoch as u64, batch_idx as u64],
            ));
            let fwd = graph_forward(&graph, &mut params, &images, Mode::Train, &mut dropout_rng)
                .map_err(HarnessError::from)?;
            let bwd = graph_backward(&graph, &fwd, &labels)?;
            if !bwd.loss.is_finite() {
                return Err(HarnessError::NonFiniteLoss {
                    epoch: epoch + 1,
                    batch: batch_idx,
                });
            }
            loss_sum += bwd.loss * labels.len() as f64;
            apply_updates(&mut params, &bwd.grads, &cfg.optimizer, &mut opt_state)?;
        }
        train_loss.push(loss_sum / train.len() as f64);

        let val = evaluate(&graph, &mut params, &validation)?;
        validation_accuracy.push(val.report.accuracy);
        let is_better = best
            .as_ref()
            .map(|(_, acc, _, _)| val.report.accuracy > *acc)
            .unwrap_or(true);
        if is_better {
            best = Some((epoch + 1, val.report.accuracy, params.clone(), opt_state.clone()));
        }
    }

    let final_eval = evaluate(&graph, &mut params, &validation)?;
    let (best_epoch, best_params, best_state) = match best {
        Some((e, _, p, s)) => (e, p, s),
        None => (0, params.clone(), opt_state.clone()),
    };

    let manifest = RunManifest {
        format_version: 1,
        model: cfg.model.as_str().to_string(),
        dataset: cfg.dataset.as_str().to_string(),
        seed: cfg.seed,
        epochs: cfg.epochs,
        parameter_count: count_parameters(&graph),
        config: cfg.resolved(),
        train_loss,
        validation_accuracy,
        best_epoch,
        final_metrics: final_eval.report.clone(),
    };

    let run_dir = cfg.run_dir();
    std::fs::create_dir_all(&run_dir).map_err(io_err(&run_dir))?;

    let make_ckpt = |params: ParameterStore, state: OptimizerState, epochs: usize| Checkpoint {
        model_name: cfg.model.as_str().to_string(),
        seed: cfg.seed,
        epochs_completed: epochs as u32,
        graph: graph.clone(),
        params,
        optimizer: Some((cfg.optimizer.clone(), state)),
    };
    let final_checkpoint = run_dir.join("checkpoint_final.ckpt");
    write_atomic(
        &final_checkpoint,
        &save_checkpoint(&make_ckpt(params, opt_state, cfg.epochs)),
    )?;
    let best_checkpoint = run_dir.join("checkpoint_best.ckpt");
    write_atomic(
        &best_checkpoint,
        &save_checkpoint(&make_ckpt(best_params, best_state, best_epoch)),
    )?;

    let manifest_json =
        serde_json::to_string_pretty(&manifest).expect("manifest serialization cannot fail");
    write_atomic(&run_dir.join("manifest.json"), manifest_json.as_bytes())?;

    let mut csv = String::from(MetricReport::CSV_HEADER);
    csv.push('\n');
    csv.push_str(&manifest.final_metrics.csv_row(
        &manifest.model,
        &manifest.dataset,
        manifest.parameter_count,
        manifest.epochs as u64,
        manifest.seed,
    ));
    csv.push('\n');
    write_atomic(&run_dir.join("metrics.csv"), csv.as_bytes())?;

    let wall_seconds = start.elapsed().as_secs_f64();
    // Timing is real observed time; it lives outside the manifest so
    // repeated runs stay bit-identical.
    write_atomic(
        &run_dir.join("timing.txt"),
        format!("wall_seconds {wall_seconds:.3}\n").as_bytes(),
    )?;

    Ok(TrainOutcome {
        manifest,
        run_dir,
        final_checkpoint,
        best_checkpoint,
        wall_seconds,
    })
}

/// Result of evaluating a checkpoint on a dataset's test split.
#[derive(Debug)]
pub struct EvalOutcome {
    pub report: MetricReport,
    pub model: String,
    pub dataset: String,
    pub parameter_count: u64,
    pub epochs: u32,
    pub seed: u64,
}

/// Evaluates a checkpoint on one split of the named dataset and writes
/// `eval_metrics.csv`, `hist_max_prob.csv`, and `hist_true_prob.csv`.
///
/// `SplitTag::Test` (the default use) scores the held-out test files; with
/// `SplitTag::Train` and a subset size, the subset derivation matches the
/// one `cmd_train` used, so a memorization run can be re-scored on exactly
/// the samples it trained on.
pub fn cmd_eval(
    checkpoint_path: &Path,
    dataset: DatasetName,
    data_dir: &Path,
    out_dir: &Path,
    bins: usize,
    subset: usize,
    split: SplitTag,
) -> Result<EvalOutcome, HarnessError> {
    let bytes = std::fs::read(checkpoint_path).map_err(io_err(checkpoint_path))?;
    let ckpt = load_checkpoint(&bytes)?;
    let model_classes = ckpt.graph.num_classes();
    let dataset_classes = dataset.class_count();
    if model_classes != dataset_classes {
        return Err(HarnessError::ClassCountMismatch {
            model_classes,
            dataset_classes,
        });
    }
    let cfg_like = desk_config(
        ModelName::MbInception,
        dataset,
        data_dir,
        Path::new("."),
        0,
        0,
        0,
    );
    let (train, test) = load_dataset(&cfg_like)?;
    let (pool, subset_tag) = match split {
        SplitTag::Test => (test, SEED_TEST_SUBSET),
        _ => (train, SEED_SUBSET),
    };
    let target = if subset > 0 {
        pool.subset_seeded(subset, derive_seed(ckpt.seed, &[subset_tag]))?
    } else {
        pool
    };
    let mut params = ckpt.params;
    let eval = evaluate(&ckpt.graph, &mut params, &target)?;

    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let max_hist = probability_density_report(&eval.max_probs, bins)?;
    let true_hist = probability_density_report(&eval.true_probs, bins)?;
    write_atomic(&out_dir.join("hist_max_prob.csv"), max_hist.to_csv().as_bytes())?;
    write_atomic(&out_dir.join("hist_true_prob.csv"), true_hist.to_csv().as_bytes())?;

    let outcome = EvalOutcome {
        report: eval.report,
        model: ckpt.model_name,
        dataset: dataset.as_str().to_string(),
        parameter_count: count_parameters(&ckpt.graph),
        epochs: ckpt.epochs_completed,
        seed: ckpt.seed,
    };
    let mut csv = String::from(MetricReport::CSV_HEADER);
    csv.push('\n');
    csv.push_str(&outcome.report.csv_row(
        &outcome.model,
        &outcome.dataset,
        outcome.parameter_count,
        outcome.epochs as u64,
        outcome.seed,
    ));
    csv.push('\n');
    write_atomic(&out_dir.join("eval_metrics.csv"), csv.as_bytes())?;
    Ok(outcome)
}

/// One row of the comparison table.
#[derive(Debug)]
pub struct CompareRow {
    pub model: String,
    pub dataset: String,
    pub report: MetricReport,
    pub parameter_count: u64,
    pub epochs: u64,
    pub seed: u64,
}

/// Trains and evaluates every config, emitting `comparison.csv` under
/// `out_dir`. Any failing sub-run aborts the comparison, naming the config.
pub fn cmd_compare(configs: &[RunConfig], out_dir: &Path) -> Result<Vec<CompareRow>, HarnessError> {
    if configs.len() < 2 {
        return Err(HarnessError::Config(
            "compare needs at least 2 configs".into(),
        ));
    }
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut rows = Vec::new();
    for (index, cfg) in configs.iter().enumerate() {
        let run = || -> Result<CompareRow, HarnessError> {
            let outcome = cmd_train(cfg)?;
            let eval = cmd_eval(
                &outcome.final_checkpoint,
                cfg.dataset,
                &cfg.data_dir,
                &outcome.run_dir.join("eval"),
                10,
                cfg.test_subset,
                SplitTag::Test,
            )?;
            Ok(CompareRow {
                model: eval.model,
                dataset: eval.dataset,
                report: eval.report,
                parameter_count: eval.parameter_count,
                epochs: cfg.epochs as u64,
                seed: cfg.seed,
            })
        };
        match run() {
            Ok(row) => rows.push(row),
            Err(source) => {
                return Err(HarnessError::CompareFailed {
                    index,
                    model: cfg.model.as_str().to_string(),
                    source: Box::new(source),
                })
            }
        }
    }
    let mut csv = String::from(MetricReport::CSV_HEADER);
    csv.push('\n');
    for row in &rows {
        csv.push_str(&row.report.csv_row(
            &row.model,
            &row.dataset,
            row.parameter_count,
            row.epochs,
            row.seed,
        ));
        csv.push('\n');
    }
    write_atomic(&out_dir.join("comparison.csv"), csv.as_bytes())?;
    Ok(rows)
}

/// Builds a desk-scale config for one of the registered models.
pub fn desk_config(
    model: ModelName,
    dataset: DatasetName,
    data_dir: &Path,
    output_dir: &Path,
    subset: usize,
    epochs: usize,
    seed: u64,
) -> RunConfig {
    let mut map: BTreeMap<String, String> = BTreeMap::new();
    map.insert("model.name".into(), model.as_str().into());
    map.insert("dataset.name".into(), dataset.as_str().into());
    map.insert("dataset.dir".into(), data_dir.display().to_string());
    map.insert("dataset.subset".into(), subset.to_string());
    map.insert("train.epochs".into(), epochs.to_string());
    map.insert("train.seed".into(), seed.to_string());
    map.insert("output.dir".into(), output_dir.display().to_string());
    RunConfig::from_map(&map).expect("desk config keys are valid")
}

/// The default four-model desk-scale comparison.
pub fn desk_compare_configs(
    dataset: DatasetName,
    data_dir: &Path,
    output_dir: &Path,
    subset: usize,
    epochs: usize,
    seed: u64,
) -> Vec<RunConfig> {
    [
        ModelName::MbInception,
        ModelName::Vgg,
        ModelName::ResNet,
        ModelName::MobileNet,
    ]
    .into_iter()
    .map(|m| desk_config(m, dataset, data_dir, output_dir, subset, epochs, seed))
    .collect()
}

/// Model names accepted by [`cmd_gradcheck`].
pub const GRADCHECK_MODELS: [&str; 5] = ["mbinception", "vgg", "resnet", "mobilenet", "dense"];

/// Runs the whole-graph finite-difference suite on the named model's toy
/// config. The caller decides the exit status from `report.pass`.
pub fn cmd_gradcheck(
    model: &str,
    seed: u64,
    fault_node: Option<String>,
) -> Result<GradCheckReport, HarnessError> {
    let graph = match model {
        "mbinception" => build_mbinception(&mbinception_toy())?,
        "vgg" => build_vgg_style(&vgg_toy())?,
        "resnet" => build_resnet_style(&resnet_toy())?,
        "mobilenet" => build_mobilenet_style(&mobilenet_toy())?,
        "dense" => build_dense_probe(&DenseProbeConfig::default())?,
        other => {
            return Err(HarnessError::UnknownName {
                kind: "gradcheck model",
                name: other.to_string(),
                known: GRADCHECK_MODELS.join(", "),
            })
        }
    };
    let cfg = GradCheckConfig {
        seed,
        fault_node,
        ..GradCheckConfig::default()
    };
    Ok(gradcheck_model(model, &graph, &cfg)?)
}

/// Dataset inspection summary for the `datasets verify` command.
#[derive(Debug)]
pub struct DatasetSummary {
    pub name: String,
    pub class_count: usize,
    pub train_records: usize,
    pub test_records: usize,
    pub train_histogram: Vec<usize>,
    pub test_histogram: Vec<usize>,
}

impl DatasetSummary {
    pub fn render(&self) -> String {
        let fmt_hist = |h: &[usize]| {
            h.iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        format!(
            "dataset {}: {} classes\n  train: {} record(s), per-class [{}]\n  test:  {} record(s), per-class [{}]\n",
            self.name,
            self.class_count,
            self.train_records,
            fmt_hist(&self.train_histogram),
            self.test_records,
            fmt_hist(&self.test_histogram)
        )
    }
}

/// Verifies the on-disk files of a dataset directory and summarizes counts.
pub fn cmd_datasets_verify(
    dataset: DatasetName,
    data_dir: &Path,
) -> Result<DatasetSummary, HarnessError> {
    let cfg = desk_config(
        ModelName::MbInception,
        dataset,
        data_dir,
        Path::new("."),
        0,
        0,
        0,
    );
    let (train, test) = load_dataset(&cfg)?;
    Ok(DatasetSummary {
        name: dataset.as_str().to_string(),
        class_count: train.class_count,
        train_records: train.len(),
        test_records: test.len(),
        train_histogram: train.class_histogram(),
        test_histogram: test.class_histogram(),
    })
}
