//! End-to-end checks of the command-line surface, driving the real binary.

use std::path::Path;
use std::process::{Command, Output};

fn recsample(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_recsample"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write_train_csv(path: &Path, interactions: usize) {
    let mut body = String::from("user,item,rating,timestamp\n");
    for i in 0..interactions {
        let user = i % 5;
        let item = (i * 7) % 53;
        body.push_str(&format!("u{user},i{item},{}.0,{}\n", 1 + i % 5, i));
    }
    std::fs::write(path, body).unwrap();
}

#[test]
fn sample_emits_exact_budget_csv_and_provenance() {
    let dir = tempfile::tempdir().unwrap();
    write_train_csv(&dir.path().join("train.csv"), 10);
    let out = recsample(
        &[
            "sample",
            "--input",
            "train.csv",
            "--strategy",
            "random-interaction",
            "--percent",
            "50",
            "--seed",
            "7",
            "--output",
            "out",
        ],
        dir.path(),
    );
    assert_ok(&out);
    let retained = std::fs::read_to_string(dir.path().join("out/retained.csv")).unwrap();
    assert_eq!(retained.lines().count(), 6, "header plus exactly five rows");
    let provenance: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("out/provenance.json")).unwrap())
            .unwrap();
    assert_eq!(provenance["command"], "sample");
    assert!(provenance["input_hashes"]["train.csv"].is_string());
}

#[test]
fn malformed_flags_fail_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    write_train_csv(&dir.path().join("train.csv"), 10);
    let out = recsample(
        &["sample", "--input", "train.csv", "--strategy", "nope", "--percent", "50", "--output", "out"],
        dir.path(),
    );
    assert!(!out.status.success());
    assert!(!dir.path().join("out").exists());

    let out = recsample(&["sample", "--bogus-flag"], dir.path());
    assert!(!out.status.success());
    assert_eq!(out.status.code(), Some(2), "usage errors use clap's exit code");
}

#[test]
fn ingest_round_trips_and_filters() {
    let dir = tempfile::tempdir().unwrap();
    write_train_csv(&dir.path().join("raw.csv"), 23);
    let out = recsample(
        &["ingest", "--input", "raw.csv", "--output", "data", "--min-interactions", "3"],
        dir.path(),
    );
    assert_ok(&out);
    for file in ["dataset.csv", "users.csv", "items.csv", "stats.json", "provenance.json"] {
        assert!(dir.path().join("data").join(file).exists(), "{file} missing");
    }
    let stats: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("data/stats.json")).unwrap())
            .unwrap();
    assert_eq!(stats["interactions"], 23);
}

#[test]
fn svp_emits_importance_table() {
    let dir = tempfile::tempdir().unwrap();
    write_train_csv(&dir.path().join("train.csv"), 40);
    let out = recsample(
        &[
            "svp",
            "--input",
            "train.csv",
            "--scenario",
            "implicit",
            "--proxy",
            "bias-only",
            "--granularity",
            "interaction",
            "--prop",
            "--epochs",
            "3",
            "--percent",
            "25",
            "--output",
            "svp-out",
        ],
        dir.path(),
    );
    assert_ok(&out);
    let importance = std::fs::read_to_string(dir.path().join("svp-out/importance.csv")).unwrap();
    assert!(importance.starts_with("interaction,user,item,importance,propensity"));
    assert_eq!(importance.lines().count(), 41);
    let retained = std::fs::read_to_string(dir.path().join("svp-out/retained.csv")).unwrap();
    assert_eq!(retained.lines().count(), 11, "header plus 25% of 40");
}

#[test]
fn train_then_evaluate_reports_metrics() {
    let dir = tempfile::tempdir().unwrap();
    write_train_csv(&dir.path().join("data.csv"), 60);
    let out = recsample(
        &[
            "train",
            "--input",
            "data.csv",
            "--scenario",
            "sequential",
            "--model",
            "mf",
            "--epochs",
            "3",
            "--output",
            "model.json",
        ],
        dir.path(),
    );
    assert_ok(&out);
    let out = recsample(
        &["evaluate", "--input", "data.csv", "--model", "model.json", "--output", "metrics.json"],
        dir.path(),
    );
    assert_ok(&out);
    let metrics: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("metrics.json")).unwrap()).unwrap();
    let names: Vec<&str> =
        metrics["metrics"].as_array().unwrap().iter().map(|m| m["metric"].as_str().unwrap()).collect();
    assert_eq!(names, vec!["AUC", "Recall@100", "nDCG@10"]);
}

#[test]
fn psi_with_p100_only_yields_psi_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"
root_seed = 5
percents = [100.0]
scenarios = ["implicit"]
strategies = ["random-interaction", "head-user"]

[[datasets]]
name = "synthetic-smoke"
[datasets.synthetic]
users = 40
items = 200
interactions = 400
latent_dim = 4
popularity_exponent = 1.0
user_activity_exponent = 0.5
noise = 0.4
seed = 2

[[algorithms]]
id = "poprec"
kind = "poprec"

[[algorithms]]
id = "bias-only"
kind = "bias-only"
latent_dims = [0]
epochs = 2

[[algorithms]]
id = "mf"
kind = "mf"
latent_dims = [4]
epochs = 2
"#;
    std::fs::write(dir.path().join("exp.toml"), config).unwrap();
    let out = recsample(
        &["psi", "--config", "exp.toml", "--output", "out", "--jobs", "2"],
        dir.path(),
    );
    assert_ok(&out);
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("out/report.json")).unwrap())
            .unwrap();
    for record in report["psi_average"].as_array().unwrap() {
        assert_eq!(record["psi"], 1.0, "{record}");
    }
    for file in ["tau_vs_percent.csv", "tau_per_metric.csv", "p_mle_grid.csv", "provenance.json"] {
        assert!(dir.path().join("out").join(file).exists(), "{file} missing");
    }
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("psi[random-interaction] = 1.0000"), "{stdout}");

    // report regeneration from the JSON alone
    let out = recsample(
        &["report", "--report", "out/report.json", "--output", "replot"],
        dir.path(),
    );
    assert_ok(&out);
    assert!(dir.path().join("replot/tau_vs_percent.csv").exists());
}

#[test]
fn synth_is_reproducible_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.csv", "b.csv"] {
        let out = recsample(
            &[
                "synth", "--users", "25", "--items", "60", "--interactions", "200", "--seed",
                "9", "--output", name,
            ],
            dir.path(),
        );
        assert_ok(&out);
    }
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
}
