use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mmwave_sparse::feedback::SubspaceCodebook;
use mmwave_sparse::harness::named::named_configs;
use mmwave_sparse::harness::output::CSV_HEADER;

const TINY: &str = r#"
name = "tiny"
seed = 4
trials = 3
methods = ["optimal", "hybrid", "steering"]
streams = [1]
n_rf_tx = 2
n_rf_rx = 2

[tx]
kind = "ula"
n = 2

[rx]
kind = "ula"
n = 2

[sweep]
kind = "snr"
start_db = -10
stop_db = 0
step_db = 5
"#;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmwave-sparse"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn minimal_config_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    fs::write(&cfg, TINY).unwrap();
    let out = dir.path().join("out");
    let o = cli(&["run-config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("tiny.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    // three methods, one stream count, three SNR points
    assert_eq!(lines.count(), 9);
    assert!(out.join("tiny.manifest.json").exists());
}

#[test]
fn too_many_streams_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, TINY.replace("streams = [1]", "streams = [3]")).unwrap();
    let o = cli(&["run-config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("streams[0]"), "{err}");
}

#[test]
fn unknown_experiment_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["run", "fig9", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("fig9"));
}

#[test]
fn zero_threads_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["run", "fig2", "--threads", "0", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn named_run_matches_equivalent_config_and_manifest_replay() {
    let dir = tempfile::tempdir().unwrap();
    let named = dir.path().join("named");
    let o = cli(&["run", "fig2", "--trials", "2", "--seed", "7", "--out", s(&named)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let cfg = &named_configs("fig2", 7, Some(2)).unwrap()[0];
    let toml_path = dir.path().join("fig2.toml");
    fs::write(&toml_path, cfg.to_toml()).unwrap();
    let from_toml = dir.path().join("toml");
    let o = cli(&["run-config", s(&toml_path), "--out", s(&from_toml)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let replay = dir.path().join("replay");
    let manifest = named.join("fig2.manifest.json");
    let o = cli(&["run-config", s(&manifest), "--out", s(&replay)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let a = fs::read(named.join("fig2.csv")).unwrap();
    assert_eq!(a, fs::read(from_toml.join("fig2.csv")).unwrap());
    assert_eq!(a, fs::read(replay.join("fig2.csv")).unwrap());
}

#[test]
fn codebook_train_writes_loadable_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&[
        "codebook", "train", "--bits-per-angle", "2", "--bb-bits", "2", "--ns", "1", "--n-rf", "2",
        "--samples", "40", "--tx-side", "4", "--rx-side", "2", "--clusters", "2", "--rays", "3",
        "--out", s(dir.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("bb_codebook.json")).unwrap();
    let (cb, sector) = SubspaceCodebook::from_json(&text).unwrap();
    assert_eq!(cb.dim(), 2);
    assert_eq!(cb.ns(), 1);
    assert!(sector.is_some());
}

#[test]
fn beampattern_subcommand_writes_grids() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&[
        "beampattern", "--tx-side", "4", "--rx-side", "2", "--clusters", "2", "--rays", "2",
        "--n-rf", "2", "--step-deg", "10", "--out", s(dir.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for label in ["optimal", "hybrid", "steering"] {
        let text = fs::read_to_string(dir.path().join(format!("beampattern_{label}.csv"))).unwrap();
        assert_eq!(text.lines().count(), 1 + 19 * 19);
    }
    assert!(dir.path().join("beampattern.manifest.json").exists());
}
