//! End-to-end harness tests on a tiny synthetic corpus: reproducibility,
//! checkpoint round-trips, resume, and degenerate configs.

use std::collections::BTreeMap;
use std::path::Path;

use mbinception::data::synth::write_synthetic_mnist;
use mbinception::data::SplitTag;
use mbinception::graph::{load_checkpoint, save_checkpoint};
use mbinception::harness::{
    cmd_compare, cmd_datasets_verify, cmd_eval, cmd_train, desk_compare_configs, DatasetName,
    HarnessError, RunConfig,
};

struct Fixture {
    _tmp: tempfile::TempDir,
    data: std::path::PathBuf,
    out: std::path::PathBuf,
}

fn fixture() -> Fixture {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    std::fs::create_dir_all(&data).unwrap();
    write_synthetic_mnist(&data, 400, 80, 1234).unwrap();
    let out = tmp.path().join("runs");
    Fixture {
        data,
        out,
        _tmp: tmp,
    }
}

fn tiny_config(data: &Path, out: &Path, overrides: &[(&str, &str)]) -> RunConfig {
    let mut map: BTreeMap<String, String> = BTreeMap::new();
    map.insert("model.name".into(), "vgg".into());
    map.insert("model.width".into(), "2".into());
    map.insert("model.depth".into(), "1".into());
    map.insert("model.hidden".into(), "8".into());
    map.insert("dataset.name".into(), "mnist".into());
    map.insert("dataset.dir".into(), data.display().to_string());
    map.insert("dataset.subset".into(), "120".into());
    map.insert("train.batch_size".into(), "16".into());
    map.insert("train.epochs".into(), "2".into());
    map.insert("train.seed".into(), "5".into());
    map.insert("output.dir".into(), out.display().to_string());
    for (k, v) in overrides {
        map.insert((*k).into(), (*v).into());
    }
    RunConfig::from_map(&map).unwrap()
}

#[test]
fn identical_config_and_seed_give_bit_identical_artifacts() {
    let fx = fixture();
    let cfg_a = tiny_config(&fx.data, &fx.out.join("a"), &[]);
    let cfg_b = tiny_config(&fx.data, &fx.out.join("b"), &[]);
    let a = cmd_train(&cfg_a).unwrap();
    let b = cmd_train(&cfg_b).unwrap();

    // Across distinct output dirs the computation is identical; only the
    // echoed output.dir differs.
    assert_eq!(a.manifest.train_loss, b.manifest.train_loss);
    assert_eq!(a.manifest.validation_accuracy, b.manifest.validation_accuracy);
    assert_eq!(a.manifest.final_metrics, b.manifest.final_metrics);
    let read = |p: &Path| std::fs::read(p).unwrap();
    assert_eq!(read(&a.final_checkpoint), read(&b.final_checkpoint));
    assert_eq!(read(&a.best_checkpoint), read(&b.best_checkpoint));
    assert_eq!(
        read(&a.run_dir.join("metrics.csv")),
        read(&b.run_dir.join("metrics.csv"))
    );
    // Repeating the exact command reproduces every byte.
    let again = cmd_train(&cfg_a).unwrap();
    assert_eq!(a.manifest, again.manifest);
    assert_eq!(
        read(&a.run_dir.join("manifest.json")),
        read(&again.run_dir.join("manifest.json"))
    );
    assert_eq!(read(&a.final_checkpoint), read(&again.final_checkpoint));

    // Different seed changes the outcome.
    let cfg_c = tiny_config(&fx.data, &fx.out.join("c"), &[("train.seed", "6")]);
    let c = cmd_train(&cfg_c).unwrap();
    assert_ne!(a.manifest.train_loss, c.manifest.train_loss);
}

#[test]
fn evaluation_is_repeatable_and_matches_before_save() {
    let fx = fixture();
    let cfg = tiny_config(&fx.data, &fx.out, &[]);
    let outcome = cmd_train(&cfg).unwrap();

    let e1 = cmd_eval(
        &outcome.final_checkpoint,
        DatasetName::Mnist,
        &fx.data,
        &fx.out.join("eval1"),
        10,
        0,
        SplitTag::Test,
    )
    .unwrap();
    let e2 = cmd_eval(
        &outcome.final_checkpoint,
        DatasetName::Mnist,
        &fx.data,
        &fx.out.join("eval2"),
        10,
        0,
        SplitTag::Test,
    )
    .unwrap();
    assert_eq!(e1.report, e2.report);
    let read = |d: &str, f: &str| std::fs::read(fx.out.join(d).join(f)).unwrap();
    for f in ["eval_metrics.csv", "hist_max_prob.csv", "hist_true_prob.csv"] {
        assert_eq!(read("eval1", f), read("eval2", f), "{f} differs");
    }

    // Save -> load -> save is byte-stable.
    let bytes = std::fs::read(&outcome.final_checkpoint).unwrap();
    let ckpt = load_checkpoint(&bytes).unwrap();
    assert_eq!(save_checkpoint(&ckpt), bytes);
}

#[test]
fn resume_from_checkpoint_is_bit_identical_to_uninterrupted_training() {
    let fx = fixture();
    let whole = cmd_train(&tiny_config(&fx.data, &fx.out.join("whole"), &[])).unwrap();

    let part1 = cmd_train(&tiny_config(
        &fx.data,
        &fx.out.join("part"),
        &[("train.epochs", "1")],
    ))
    .unwrap();
    let resume_path = part1.final_checkpoint.display().to_string();
    let part2 = cmd_train(&tiny_config(
        &fx.data,
        &fx.out.join("part2"),
        &[("train.epochs", "2"), ("train.resume", &resume_path)],
    ))
    .unwrap();

    // Final parameters and optimizer state identical to the 2-epoch run.
    let whole_ckpt = load_checkpoint(&std::fs::read(&whole.final_checkpoint).unwrap()).unwrap();
    let resumed_ckpt = load_checkpoint(&std::fs::read(&part2.final_checkpoint).unwrap()).unwrap();
    assert_eq!(whole_ckpt.params, resumed_ckpt.params);
    assert_eq!(whole_ckpt.optimizer, resumed_ckpt.optimizer);
    assert_eq!(
        whole.manifest.train_loss[1..],
        part2.manifest.train_loss[..]
    );
}

#[test]
fn zero_epochs_yields_empty_traces_and_untrained_metrics() {
    let fx = fixture();
    let cfg = tiny_config(&fx.data, &fx.out, &[("train.epochs", "0")]);
    let outcome = cmd_train(&cfg).unwrap();
    assert!(outcome.manifest.train_loss.is_empty());
    assert!(outcome.manifest.validation_accuracy.is_empty());
    assert_eq!(outcome.manifest.best_epoch, 0);
    assert_eq!(outcome.manifest.epochs, 0);
    // An untrained 10-class model scores near chance.
    assert!(outcome.manifest.final_metrics.accuracy <= 0.5);
    assert!(outcome.final_checkpoint.exists());
}

#[test]
fn class_count_mismatch_is_a_structured_error() {
    let fx = fixture();
    let cfg = tiny_config(&fx.data, &fx.out, &[]);
    let outcome = cmd_train(&cfg).unwrap();
    // The synthetic corpus is MNIST-shaped (10 classes); cifar100 demands
    // 100 model outputs.
    let err = cmd_eval(
        &outcome.final_checkpoint,
        DatasetName::Cifar100,
        &fx.data,
        &fx.out.join("bad"),
        10,
        0,
        SplitTag::Test,
    )
    .unwrap_err();
    match err {
        HarnessError::ClassCountMismatch {
            model_classes: 10,
            dataset_classes: 100,
        } => {}
        other => panic!("unexpected error {other}"),
    }
    assert_eq!(err_code(&err), 2);
}

fn err_code(e: &HarnessError) -> i32 {
    e.exit_code()
}

#[test]
fn compare_rows_match_individual_runs() {
    let fx = fixture();
    let a = tiny_config(&fx.data, &fx.out.join("cmp"), &[]);
    let b = tiny_config(&fx.data, &fx.out.join("cmp"), &[("model.name", "mobilenet"), ("model.width", "4"), ("model.depth", "2")]);
    let rows = cmd_compare(&[a.clone(), b.clone()], &fx.out.join("cmp")).unwrap();
    assert_eq!(rows.len(), 2);

    // Rows equal independently invoked train + eval with the same seeds.
    let solo = cmd_train(&a).unwrap();
    let solo_eval = cmd_eval(
        &solo.final_checkpoint,
        a.dataset,
        &a.data_dir,
        &fx.out.join("solo_eval"),
        10,
        0,
        SplitTag::Test,
    )
    .unwrap();
    assert_eq!(rows[0].report, solo_eval.report);
    assert_eq!(rows[0].parameter_count, solo_eval.parameter_count);

    let csv = std::fs::read_to_string(fx.out.join("cmp").join("comparison.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.lines().nth(1).unwrap().starts_with("vgg,mnist,"));
    assert!(csv.lines().nth(2).unwrap().starts_with("mobilenet,mnist,"));
}

#[test]
fn comparing_a_config_with_itself_gives_identical_rows() {
    let fx = fixture();
    let a = tiny_config(&fx.data, &fx.out.join("same"), &[]);
    let rows = cmd_compare(&[a.clone(), a], &fx.out.join("same")).unwrap();
    assert_eq!(rows[0].report, rows[1].report);
    assert_eq!(rows[0].parameter_count, rows[1].parameter_count);
}

#[test]
fn desk_compare_runs_all_four_models() {
    let fx = fixture();
    let configs = desk_compare_configs(
        DatasetName::Mnist,
        &fx.data,
        &fx.out.join("desk"),
        80,
        0,
        3,
    );
    assert_eq!(configs.len(), 4);
    let rows = cmd_compare(&configs, &fx.out.join("desk")).unwrap();
    let names: Vec<&str> = rows.iter().map(|r| r.model.as_str()).collect();
    assert_eq!(names, ["mbinception", "vgg", "resnet", "mobilenet"]);
}

#[test]
fn datasets_verify_summarizes_counts() {
    let fx = fixture();
    let summary = cmd_datasets_verify(DatasetName::Mnist, &fx.data).unwrap();
    assert_eq!(summary.train_records, 400);
    assert_eq!(summary.test_records, 80);
    assert_eq!(summary.class_count, 10);
    assert_eq!(summary.train_histogram.iter().sum::<usize>(), 400);
    assert!(summary.render().contains("train: 400"));

    let missing = cmd_datasets_verify(DatasetName::Cifar10, &fx.data).unwrap_err();
    assert_eq!(missing.exit_code(), 2);
}

#[test]
fn non_finite_loss_aborts_with_position() {
    let fx = fixture();
    // A step size at the f64 limit overflows the weights immediately; the
    // next batch then sees infinite or NaN activations.
    let cfg = tiny_config(
        &fx.data,
        &fx.out.join("blowup"),
        &[
            ("optimizer.name", "sgd"),
            ("optimizer.lr", "1e308"),
            ("train.epochs", "3"),
        ],
    );
    match cmd_train(&cfg) {
        Err(HarnessError::NonFiniteLoss { epoch, .. }) => assert!(epoch >= 1),
        Err(HarnessError::Optim(_)) => {} // non-finite gradient caught first
        other => panic!("expected a numerical failure, got {other:?}"),
    }
}
