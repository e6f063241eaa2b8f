//! CLI contract tests: exit codes, output formats, reproducibility.
//! Includes acceptance criterion 11 (byte-identical rerun of cmd_train).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn gridcast() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gridcast"))
}

fn small_config(dir: &Path) -> PathBuf {
    let path = dir.join("config.toml");
    fs::write(
        &path,
        r#"
seed = 3

[synth]
rows = 3
cols = 4
days = 6
hub_count = 2
lines = 2
categories = 4

[model]
gcn_features = [2]
gru_hidden = 6
window = 4

[model.embedding]
hour = 3
weather = 2
holiday = 1

[train]
epochs = 2
batch_size = 16
"#,
    )
    .unwrap();
    path
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn gridcast");
    assert!(
        out.status.success(),
        "command failed: {:?}\nstdout: {}\nstderr: {}",
        cmd,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn exit_code(cmd: &mut Command) -> (i32, String) {
    let out = cmd.output().expect("spawn gridcast");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stderr).to_string(),
    )
}

#[test]
fn criterion_11_train_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let scenario = dir.path().join("scn");
    run_ok(gridcast()
        .args(["synth", "--seed", "3", "--out"])
        .arg(&scenario)
        .arg("--config")
        .arg(&config));

    let run = |out: &Path| {
        run_ok(gridcast()
            .args(["train", "--seed", "9", "--scenario"])
            .arg(&scenario)
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(out));
    };
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    run(&out_a);
    run(&out_b);

    let epochs_a = fs::read(out_a.join("epochs.csv")).unwrap();
    let epochs_b = fs::read(out_b.join("epochs.csv")).unwrap();
    assert_eq!(epochs_a, epochs_b, "epoch CSVs differ between reruns");
    let ckpt_a = fs::read(out_a.join("model.ckpt")).unwrap();
    let ckpt_b = fs::read(out_b.join("model.ckpt")).unwrap();
    assert_eq!(ckpt_a, ckpt_b, "checkpoints differ between reruns");
    println!("acceptance criterion 11 (byte-identical train reruns): PASS");
}

#[test]
fn synth_same_seed_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        run_ok(gridcast()
            .args(["synth", "--seed", "42", "--out"])
            .arg(out)
            .arg("--config")
            .arg(&config));
    }
    for name in ["series.csv", "contexts.csv", "poi.csv", "transport.csv", "meta.toml"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name} differs"
        );
    }
    // manifest exists and names the outputs
    let manifest = fs::read_to_string(a.join("manifest.json")).unwrap();
    assert!(manifest.contains("series.csv"));
    assert!(manifest.contains("sha256"));
}

#[test]
fn synth_rejects_degenerate_grid_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "[synth]\nrows = 0\n").unwrap();
    let (code, stderr) = exit_code(gridcast()
        .args(["synth", "--seed", "1", "--out"])
        .arg(dir.path().join("x"))
        .arg("--config")
        .arg(&config));
    assert_eq!(code, 2, "stderr: {stderr}");
}

#[test]
fn train_missing_series_exits_2_naming_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let scenario = dir.path().join("scn");
    run_ok(gridcast()
        .args(["synth", "--seed", "5", "--out"])
        .arg(&scenario)
        .arg("--config")
        .arg(&config));
    fs::remove_file(scenario.join("series.csv")).unwrap();
    let (code, stderr) = exit_code(gridcast()
        .args(["train", "--scenario"])
        .arg(&scenario)
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("run")));
    assert_eq!(code, 2);
    assert!(stderr.contains("series.csv"), "stderr: {stderr}");
}

#[test]
fn train_divergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let config_text = fs::read_to_string(small_config(dir.path())).unwrap();
    let config = dir.path().join("diverge.toml");
    fs::write(&config, format!("{config_text}\n[train.adam]\nlr = 1e300\n")).unwrap();
    let scenario = dir.path().join("scn");
    run_ok(gridcast()
        .args(["synth", "--seed", "5", "--out"])
        .arg(&scenario)
        .arg("--config")
        .arg(&config));
    let (code, stderr) = exit_code(gridcast()
        .args(["train", "--scenario"])
        .arg(&scenario)
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("run")));
    assert_eq!(code, 3, "stderr: {stderr}");
    assert!(stderr.contains("diverged"), "stderr: {stderr}");
}

fn trained_fixture(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let config = small_config(dir);
    let scenario = dir.join("scn");
    run_ok(gridcast()
        .args(["synth", "--seed", "3", "--out"])
        .arg(&scenario)
        .arg("--config")
        .arg(&config));
    let run = dir.join("run");
    run_ok(gridcast()
        .args(["train", "--seed", "9", "--scenario"])
        .arg(&scenario)
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&run));
    (config, scenario, run.join("model.ckpt"))
}

#[test]
fn evaluate_writes_aggregate_plus_region_rows() {
    let dir = tempfile::tempdir().unwrap();
    let (_config, scenario, ckpt) = trained_fixture(dir.path());
    let out = dir.path().join("eval");
    run_ok(gridcast()
        .args(["evaluate", "--checkpoint"])
        .arg(&ckpt)
        .arg("--scenario")
        .arg(&scenario)
        .arg("--out")
        .arg(&out));
    let text = fs::read_to_string(out.join("metrics.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "scope,n,mae,rmse,wape");
    assert!(lines[1].starts_with("aggregate,,"));
    // 3x4 grid: exactly 12 region rows after the aggregate
    assert_eq!(lines.len(), 2 + 12);
    for line in &lines[2..] {
        assert!(line.starts_with("region,"));
    }

    // evaluating twice gives identical bytes (same code path, no rng)
    let out2 = dir.path().join("eval2");
    run_ok(gridcast()
        .args(["evaluate", "--checkpoint"])
        .arg(&ckpt)
        .arg("--scenario")
        .arg(&scenario)
        .arg("--out")
        .arg(&out2));
    assert_eq!(
        fs::read(out.join("metrics.csv")).unwrap(),
        fs::read(out2.join("metrics.csv")).unwrap()
    );
}

#[test]
fn evaluate_refuses_mismatched_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let (_config, _scenario, ckpt) = trained_fixture(dir.path());
    // different grid size
    let other_cfg = dir.path().join("other.toml");
    fs::write(&other_cfg, "[synth]\nrows = 2\ncols = 2\ndays = 6\n").unwrap();
    let other = dir.path().join("other");
    run_ok(gridcast()
        .args(["synth", "--seed", "4", "--out"])
        .arg(&other)
        .arg("--config")
        .arg(&other_cfg));
    let (code, stderr) = exit_code(gridcast()
        .args(["evaluate", "--checkpoint"])
        .arg(&ckpt)
        .arg("--scenario")
        .arg(&other)
        .arg("--out")
        .arg(dir.path().join("eval")));
    assert_eq!(code, 2);
    assert!(stderr.contains("regions"), "stderr: {stderr}");
}

#[test]
fn compare_rejects_unknown_variant_listing_names() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let scenario = dir.path().join("scn");
    run_ok(gridcast()
        .args(["synth", "--seed", "3", "--out"])
        .arg(&scenario)
        .arg("--config")
        .arg(&config));
    let (code, stderr) = exit_code(gridcast()
        .args(["compare", "--variants", "bogus", "--seeds", "1", "--scenario"])
        .arg(&scenario)
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("cmp")));
    assert_eq!(code, 2);
    assert!(stderr.contains("acmv") && stderr.contains("ha"), "stderr: {stderr}");
}

#[test]
fn compare_writes_run_and_aggregate_tables() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let scenario = dir.path().join("scn");
    run_ok(gridcast()
        .args(["synth", "--seed", "3", "--out"])
        .arg(&scenario)
        .arg("--config")
        .arg(&config));
    let out = dir.path().join("cmp");
    run_ok(gridcast()
        .args([
            "compare",
            "--variants",
            "ha,persistence",
            "--seeds",
            "1,2,3",
            "--jobs",
            "2",
        ])
        .arg("--scenario")
        .arg(&scenario)
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out));
    let runs = fs::read_to_string(out.join("runs.csv")).unwrap();
    // header + 2 variants x 3 seeds
    assert_eq!(runs.lines().count(), 1 + 6);
    let agg = fs::read_to_string(out.join("aggregate.csv")).unwrap();
    assert_eq!(agg.lines().count(), 1 + 2);
    // deterministic baselines: zero std
    for line in agg.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[3], "0");
    }
}

#[test]
fn export_attention_rows_sum_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let (_config, scenario, ckpt) = trained_fixture(dir.path());
    let out = dir.path().join("att");
    run_ok(gridcast()
        .args(["export-attention", "--checkpoint"])
        .arg(&ckpt)
        .arg("--scenario")
        .arg(&scenario)
        .arg("--out")
        .arg(&out));
    let text = fs::read_to_string(out.join("attention.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,n,w_dist,w_poi,w_transport");
    let mut rows = 0;
    for line in lines {
        let f: Vec<f64> = line
            .split(',')
            .skip(2)
            .map(|v| v.parse().unwrap())
            .collect();
        let sum: f64 = f.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9, "row sums to {sum}");
        assert!(f.iter().all(|&w| w >= 0.0));
        rows += 1;
    }
    // geojson features: one per row
    let gj: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("attention.geojson")).unwrap())
            .unwrap();
    assert_eq!(gj["features"].as_array().unwrap().len(), rows);

    // a single interval over a 12-region grid: exactly 12 rows
    let out_one = dir.path().join("att1");
    let t0 = text.lines().nth(1).unwrap().split(',').next().unwrap().to_string();
    run_ok(gridcast()
        .args(["export-attention", "--from", &t0, "--to", &t0, "--checkpoint"])
        .arg(&ckpt)
        .arg("--scenario")
        .arg(&scenario)
        .arg("--out")
        .arg(&out_one));
    let text_one = fs::read_to_string(out_one.join("attention.csv")).unwrap();
    assert_eq!(text_one.lines().count(), 1 + 12);
}

#[test]
fn export_attention_range_outside_test_split_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let (_config, scenario, ckpt) = trained_fixture(dir.path());
    let (code, stderr) = exit_code(gridcast()
        .args(["export-attention", "--from", "0", "--to", "1", "--checkpoint"])
        .arg(&ckpt)
        .arg("--scenario")
        .arg(&scenario)
        .arg("--out")
        .arg(dir.path().join("att")));
    assert_eq!(code, 2);
    assert!(stderr.contains("test-split"), "stderr: {stderr}");
}
