use std::path::PathBuf;

use pdao_cli::config::{parse_config, resolve, Method, Overrides};
use pdao_cli::CliError;

const MINIMAL: &str = r#"
method = "master"

[model]
delta = -2.0
chi = 5.0
drive = 10.0

[evolution]
t_end = 2.0
sample_stride = 0.5
"#;

fn config_error(result: Result<impl Sized, CliError>) -> String {
    match result {
        Err(CliError::Config(msg)) => msg,
        Err(other) => panic!("expected a config error, got {other}"),
        Ok(_) => panic!("expected a config error, got success"),
    }
}

#[test]
fn minimal_config_fills_defaults() {
    let raw = parse_config(MINIMAL).unwrap();
    let scenario = resolve(raw, &Overrides::default()).unwrap();
    assert_eq!(scenario.method, Method::Master);
    assert_eq!(scenario.basis.n_max(), 50);
    assert_eq!(scenario.basis.tail_tolerance(), 1e-6);
    assert_eq!(scenario.params.gamma, 1.0);
    assert_eq!(scenario.params.phi, 0.0);
    assert_eq!(scenario.params.nbath, 0.0);
    assert!(scenario.train.monochromatic);
    assert_eq!(scenario.evolution.sample_times, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
    assert_eq!(scenario.output_dir, PathBuf::from("out"));
    assert!(scenario.qsd.is_none());
    assert_eq!(scenario.observables.max_level, 5);
    assert!(scenario.observables.wigner_grid.is_none());
    assert!(scenario.observables.fidelity_levels.is_none());
}

#[test]
fn qsd_method_synthesizes_trajectory_defaults() {
    let raw = parse_config(&MINIMAL.replace("\"master\"", "\"qsd\"")).unwrap();
    let scenario = resolve(raw, &Overrides::default()).unwrap();
    let qsd = scenario.qsd.expect("qsd config synthesized");
    assert_eq!(qsd.n_trajectories, 500);
    assert_eq!(qsd.dt, 1e-3);
    assert_eq!(qsd.base_seed, 1);
}

#[test]
fn overrides_replace_method_seed_count_and_output() {
    let raw = parse_config(MINIMAL).unwrap();
    let overrides = Overrides {
        method: Some(Method::Both),
        seed: Some(42),
        trajectories: Some(17),
        out: Some(PathBuf::from("elsewhere")),
    };
    let scenario = resolve(raw, &overrides).unwrap();
    assert_eq!(scenario.method, Method::Both);
    let qsd = scenario.qsd.expect("both needs a qsd config");
    assert_eq!(qsd.base_seed, 42);
    assert_eq!(qsd.n_trajectories, 17);
    assert_eq!(scenario.output_dir, PathBuf::from("elsewhere"));
}

#[test]
fn landmark_times_resolve_against_the_pulse_train() {
    let text = r#"
method = "master"

[model]
delta = -2.0
chi = 5.0
drive = 10.0

[pulses]
width = 0.5
period = 4.0

[evolution]
t_end = 9.0
sample_stride = 0.05

[observables.wigner]
landmarks = [[2.0, -2.0], [2.0, -1.8], [2.0, -0.4], [2.0, 0.0], [2.0, 0.6]]
"#;
    let scenario = resolve(parse_config(text).unwrap(), &Overrides::default()).unwrap();
    let expected = [7.0, 7.1, 7.8, 8.0, 8.3];
    assert_eq!(scenario.observables.wigner_times.len(), expected.len());
    for (got, want) in scenario.observables.wigner_times.iter().zip(expected) {
        assert!((got - want).abs() < 1e-12, "expected {want}, got {got}");
    }
    // Snapshot times join the sample grid even when off the stride.
    for want in expected {
        assert!(scenario
            .evolution
            .sample_times
            .iter()
            .any(|t| (t - want).abs() < 1e-9));
    }
}

#[test]
fn landmarks_without_pulses_are_rejected() {
    let text = r#"
method = "master"

[model]
delta = -2.0
chi = 5.0
drive = 10.0

[evolution]
t_end = 9.0
sample_stride = 0.05

[observables.wigner]
landmarks = [[2.0, 0.0]]
"#;
    let msg = config_error(resolve(parse_config(text).unwrap(), &Overrides::default()));
    assert!(msg.contains("landmark"), "message was: {msg}");
}

#[test]
fn validation_collects_every_fault_at_once() {
    let text = r#"
method = "both"

[model]
delta = -2.0
chi = 5.0
drive = 10.0
gamma = -1.0

[evolution]
t_start = 1.0
t_end = 2.0
sample_stride = -0.5

[observables.fidelity]
levels = []
"#;
    let msg = config_error(resolve(parse_config(text).unwrap(), &Overrides::default()));
    assert!(msg.contains("gamma"), "missing gamma fault: {msg}");
    assert!(msg.contains("sample_stride"), "missing stride fault: {msg}");
    assert!(msg.contains("fidelity"), "missing fidelity fault: {msg}");
    assert!(msg.contains("t_start"), "missing trajectory start fault: {msg}");
}

#[test]
fn unknown_keys_are_rejected() {
    let text = format!("typo_key = 1\n{MINIMAL}");
    let err = parse_config(&text).unwrap_err();
    assert!(err.contains("typo_key"), "message was: {err}");
}

#[test]
fn snapshot_times_outside_the_run_are_rejected() {
    let text = r#"
method = "master"

[model]
delta = -2.0
chi = 5.0
drive = 10.0

[evolution]
t_end = 2.0
sample_stride = 0.5

[observables.wigner]
times = [3.5]
"#;
    let msg = config_error(resolve(parse_config(text).unwrap(), &Overrides::default()));
    assert!(msg.contains("3.5"), "message was: {msg}");
}

#[test]
fn polar_symmetry_grid_needs_even_angle_count() {
    let text = r#"
method = "master"

[model]
delta = -2.0
chi = 5.0
drive = 10.0

[evolution]
t_end = 2.0
sample_stride = 0.5

[observables.wigner]
grid = "polar"
times = [2.0]
n_theta = 15
"#;
    let msg = config_error(resolve(parse_config(text).unwrap(), &Overrides::default()));
    assert!(msg.contains("n_theta"), "message was: {msg}");
}

#[test]
fn explicit_sample_times_win_over_stride() {
    let text = r#"
method = "master"

[model]
delta = -2.0
chi = 5.0
drive = 10.0

[evolution]
t_end = 2.0
sample_stride = 0.5
sample_times = [0.0, 0.9, 2.0]
"#;
    let scenario = resolve(parse_config(text).unwrap(), &Overrides::default()).unwrap();
    assert_eq!(scenario.evolution.sample_times, vec![0.0, 0.9, 2.0]);
}
