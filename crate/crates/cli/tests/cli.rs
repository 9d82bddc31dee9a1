use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_debris-ews");

const SMALL: &str = r#"
seed = 11

[synth]
stations = 6
weeks = 12

[model]
kind = "random_forest"
n_trees = 8
min_samples_leaf = 4

[grid]
folds = 3
n_trees = [4]
max_depth = [4, 0]
min_samples_leaf = [4]

[baselines]
hm_steps = 200
scale_step = 0.01

[bootstrap]
replicates = 50

[explain]
rows = 10
background_rows = 16
"#;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .arg("--out")
        .arg(dir)
        .env("DEBRIS_EWS_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn full_pipeline_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = write_config(dir, SMALL);
    let c = cfg.as_str();
    for cmd in [
        "synth",
        "segment",
        "ear",
        "build-dataset",
        "train",
        "eval",
        "sweep-baselines",
        "bootstrap-ci",
        "operating-points",
        "event-capture",
        "explain",
    ] {
        ok(dir, &[cmd, "--config", c]);
        assert!(dir.join(format!("{cmd}.config.toml")).is_file(), "{cmd}");
    }
    ok(dir, &["cv", "--config", c, "--hours", "6,12"]);
    for f in [
        "rainfall.csv",
        "events.csv",
        "thresholds.csv",
        "synth_stations.csv",
        "events_segmented.csv",
        "ear_traces.csv",
        "windows.csv",
        "features_train.csv",
        "features_test.csv",
        "dataset.json",
        "model.json",
        "cv_results.csv",
        "cv_best.json",
        "metrics.json",
        "roc_curve.csv",
        "pr_curve.csv",
        "scores.csv",
        "hm_sweep.csv",
        "etm_sweep.csv",
        "hm_pr_curve.csv",
        "etm_roc_curve.csv",
        "baselines.json",
        "bootstrap_ci.csv",
        "operating_points.csv",
        "event_capture.csv",
        "shap_values.csv",
        "importance.csv",
    ] {
        assert!(dir.join(f).is_file(), "missing {f}");
    }

    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("metrics.json")).unwrap()).unwrap();
    let auprc = metrics["auprc"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&auprc));

    let cv = std::fs::read_to_string(dir.join("cv_results.csv")).unwrap();
    assert_eq!(cv.lines().count(), 1 + 2 * 2);
    assert_eq!(cv.lines().filter(|l| l.ends_with(",true")).count(), 2);

    let capture = std::fs::read_to_string(dir.join("event_capture.csv")).unwrap();
    assert_eq!(capture.lines().count(), 102);

    // Resolved config parses back and records the seed.
    let resolved = std::fs::read_to_string(dir.join("train.config.toml")).unwrap();
    assert!(resolved.contains("seed = 11"));

    // A tagged logistic model goes through eval but not explain.
    ok(
        dir,
        &[
            "train", "--config", c, "--model", "lr", "--hours", "6", "--tag", "lr",
        ],
    );
    ok(dir, &["eval", "--config", c, "--tag", "lr"]);
    assert!(dir.join("metrics_lr.json").is_file());
    let out = run(dir, &["explain", "--config", c, "--tag", "lr"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn same_seed_gives_identical_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        let cfg = write_config(dir, SMALL);
        for cmd in ["synth", "train", "eval"] {
            ok(dir, &[cmd, "--config", &cfg]);
        }
    }
    for f in [
        "rainfall.csv",
        "events.csv",
        "model.json",
        "metrics.json",
        "scores.csv",
    ] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs between identical runs");
    }
}

#[test]
fn missing_seed_is_an_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), &["synth"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn config_errors_are_listed_together() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "seed = 1\ncolour = 3\n[split]\ntest_fraction = 1.5\n[synth]\nstations = 0\n",
    );
    let out = run(tmp.path(), &["synth", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    for key in ["colour", "split.test_fraction", "synth"] {
        assert!(err.contains(key), "{key} not reported in {err}");
    }
}

#[test]
fn missing_inputs_are_input_errors() {
    let tmp = tempfile::tempdir().unwrap();
    for cmd in ["segment", "build-dataset", "eval"] {
        let out = run(tmp.path(), &[cmd, "--seed", "1"]);
        assert_eq!(out.status.code(), Some(1), "{cmd}");
    }
}

#[test]
fn malformed_rainfall_is_an_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("rainfall.csv"), "station,time,mm\nA,x,1\n").unwrap();
    let out = run(tmp.path(), &["segment", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn corpus_without_flows_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "seed = 2\n[synth]\nstations = 1\nweeks = 2\ntheta = 100000.0\n",
    );
    let out = run(tmp.path(), &["synth", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no debris flows"));
}
