//! Exercises the installed binary the way a user would: subcommands, flags,
//! exit codes, and the promise that identical invocations produce identical
//! bytes.

use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn pdao(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdao"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

const TINY_MASTER: &str = r#"
method = "master"

[model]
delta = -1.0
chi = 2.0
drive = 1.5

[evolution]
t_end = 0.5
sample_stride = 0.25
n_max = 16
"#;

#[test]
fn catalog_list_names_every_entry() {
    let dir = TempDir::new().unwrap();
    let out = pdao(&["catalog", "list"], dir.path());
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    for name in ["decay", "fig2", "fig3", "fig5"] {
        assert!(stdout.contains(name), "catalog list missing {name}");
    }
}

#[test]
fn missing_config_file_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let out = pdao(&["run", "no_such_file.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("error:"));
}

#[test]
fn unparsable_config_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "method = \"master\"\n[model\n").unwrap();
    let out = pdao(&["run", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_catalog_entry_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let out = pdao(&["catalog", "run", "fig9"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("fig9"));
}

#[test]
fn truncation_overflow_has_its_own_exit_code() {
    let dir = TempDir::new().unwrap();
    let config = r#"
method = "master"

[model]
delta = -2.0
chi = 5.0
drive = 10.0

[evolution]
t_end = 2.0
sample_stride = 0.5
n_max = 4
"#;
    std::fs::write(dir.path().join("overflow.toml"), config).unwrap();
    let out = pdao(&["run", "overflow.toml", "--out", "result"], dir.path());
    assert_eq!(out.status.code(), Some(4));
    // The manifest still lands, flagged as partial.
    let manifest = std::fs::read_to_string(dir.path().join("result/manifest.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    assert_eq!(json["partial"], true);
}

#[test]
fn run_produces_identical_bytes_on_rerun() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("tiny.toml"), TINY_MASTER).unwrap();

    let first = pdao(&["run", "tiny.toml", "--out", "a"], dir.path());
    assert_eq!(first.status.code(), Some(0), "{first:?}");
    let second = pdao(&["run", "tiny.toml", "--out", "b"], dir.path());
    assert_eq!(second.status.code(), Some(0));

    let a = std::fs::read(dir.path().join("a/timeseries.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/timeseries.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn override_flags_reach_the_manifest_and_columns() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("tiny.toml"), TINY_MASTER).unwrap();
    let out = pdao(
        &[
            "run",
            "tiny.toml",
            "--method",
            "qsd",
            "--trajectories",
            "5",
            "--seed",
            "9",
            "--out",
            "q",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{out:?}");

    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("q/manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["trajectories"], 5);
    assert_eq!(manifest["base_seed"], 9);
    assert_eq!(manifest["config"]["method"], "qsd");

    let header = std::fs::read_to_string(dir.path().join("q/timeseries.csv"))
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    assert!(header.ends_with("qsd_mean_n,qsd_stderr"));
}

#[test]
fn bad_method_flag_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("tiny.toml"), TINY_MASTER).unwrap();
    let out = pdao(&["run", "tiny.toml", "--method", "hybrid"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
