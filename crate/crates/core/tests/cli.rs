use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use grosslab::cli::{EXIT_CONFIG, EXIT_OK};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs").join(name)
}

fn grosslab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_grosslab")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_echoes_config_and_dimension() {
    let out = grosslab(&["validate", "--config", path(&config("desk.cfg"))]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("sites_per_dim = 8"));
    assert!(text.contains("# sites = 8, fock = "));
}

#[test]
fn malformed_config_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "dimension = 1\ncolour = blue\n").unwrap();
    let out = grosslab(&["validate", "--config", path(&bad)]);
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key"));

    let out = grosslab(&["run", "--config", path(&bad), "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));
    let missing = grosslab(&["validate", "--config", path(&dir.path().join("nope.cfg"))]);
    assert_eq!(missing.status.code(), Some(EXIT_CONFIG));
}

#[test]
fn unknown_experiment_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = grosslab(&["run", "--config", path(&config("desk.cfg")), "--exp", "nonsense", "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));
}

#[test]
fn dry_run_reports_size_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = grosslab(&["run", "--config", path(&config("desk.cfg")), "--dry-run", "--out", path(&out_dir)]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("dimension = "));
    assert!(text.contains("experiments = form_bound,"));
    assert!(!out_dir.exists());
}

#[test]
fn run_writes_reports_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = grosslab(&[
        "run",
        "--config",
        path(&config("polaron2d.cfg")),
        "--exp",
        "regularity",
        "--s-list",
        "1.0,1.75",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("regularity: PASS"));
    for f in ["manifest.json", "regularity.json", "regularity.csv"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let csv = std::fs::read_to_string(dir.path().join("regularity.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("sweep_key,measured,bound,ratio,pass"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("regularity.json")).unwrap()).unwrap();
    assert_eq!(json["name"], "regularity");
    assert_eq!(json["config"]["options"]["s_list"], serde_json::json!([1.0, 1.75]));
}

#[test]
fn seed_override_changes_trials_only() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str, sub: &str| {
        let out_dir = dir.path().join(sub);
        let out = grosslab(&[
            "run",
            "--config",
            path(&config("coherent.cfg")),
            "--exp",
            "coherent_core",
            "--seed",
            seed,
            "--out",
            path(&out_dir),
        ]);
        assert_eq!(out.status.code(), Some(EXIT_OK));
        std::fs::read_to_string(out_dir.join("coherent_core.json")).unwrap()
    };
    let (a, b, c) = (run("5", "a"), run("5", "b"), run("6", "c"));
    assert_eq!(a, b);
    assert_ne!(a, c);
}
