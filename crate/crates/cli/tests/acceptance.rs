//! End-to-end acceptance suite. Each test exercises one externally checkable
//! property of the simulator, prints a single PASS/FAIL line with the
//! measured numbers, and asserts it.
//!
//! The heavyweight fixtures (a pulsed master run with snapshots, the
//! monochromatic steady state) are computed once and shared.

use std::sync::OnceLock;
use std::time::Instant;

use tempfile::TempDir;

use pdao_cli::catalog;
use pdao_cli::config::{parse_config, resolve, GridKind, Method, Overrides, ResolvedScenario};
use pdao_cli::run::{execute, Artifacts};
use pdao_core::fock::{dm_from_pure, DensityMatrix, FockBasis, PureState};
use pdao_core::master::steady_state;
use pdao_core::model::{
    semiclassical_steady_state, threshold_intensity, two_quanta_detuning, ModelParams,
};
use pdao_core::phase_space::{
    mean_excitation, negativity_volume, symmetry_defect, wigner, WignerGrid,
};

fn verdict(name: &str, passed: bool, detail: &str) {
    println!("{} {name}: {detail}", if passed { "PASS" } else { "FAIL" });
    assert!(passed, "{name}: {detail}");
}

fn sample_index(times: &[f64], t: f64) -> usize {
    times
        .iter()
        .position(|s| (s - t).abs() < 1e-9)
        .unwrap_or_else(|| panic!("no sample at t = {t}"))
}

struct Fixture {
    _dir: TempDir,
    scenario: ResolvedScenario,
    artifacts: Artifacts,
}

fn run_catalog(name: &str, overrides: Overrides) -> Fixture {
    let entry = catalog::find(name).expect("catalog entry");
    let mut raw = parse_config(entry.config_toml).expect("catalog entry parses");
    let dir = TempDir::new().expect("tempdir");
    raw.output_dir = Some(dir.path().to_path_buf());
    let scenario = resolve(raw, &overrides).expect("catalog entry resolves");
    let artifacts = execute(&scenario).expect("catalog entry runs");
    Fixture {
        _dir: dir,
        scenario,
        artifacts,
    }
}

fn run_toml(text: &str) -> Fixture {
    let mut raw = parse_config(text).expect("config parses");
    let dir = TempDir::new().expect("tempdir");
    raw.output_dir = Some(dir.path().to_path_buf());
    let scenario = resolve(raw, &Overrides::default()).expect("config resolves");
    let artifacts = execute(&scenario).expect("config runs");
    Fixture {
        _dir: dir,
        scenario,
        artifacts,
    }
}

/// Pulsed near-resonant scenario, master only, with the five phase-space
/// snapshots. Shared by the window, symmetry, and normalization tests.
fn pulsed_snapshots() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        run_catalog(
            "fig3",
            Overrides {
                method: Some(Method::Master),
                ..Overrides::default()
            },
        )
    })
}

/// Steady state of the monochromatic above-threshold scenario.
fn monochromatic_steady() -> &'static DensityMatrix {
    static STEADY: OnceLock<DensityMatrix> = OnceLock::new();
    STEADY.get_or_init(|| {
        let params = ModelParams {
            delta: -2.0,
            chi: 5.0,
            drive: 7.0,
            ..ModelParams::default()
        };
        let basis = FockBasis::new(30, 1e-6).unwrap();
        steady_state(&params, basis, 1e-7).expect("steady state converges")
    })
}

#[test]
fn undriven_decay_follows_the_exponential_law() {
    let started = Instant::now();
    let fixture = run_catalog(
        "decay",
        Overrides {
            method: Some(Method::Master),
            ..Overrides::default()
        },
    );
    let wall = started.elapsed().as_secs_f64();
    let master = fixture.artifacts.master.as_ref().unwrap();
    let mut worst = 0.0_f64;
    for t in [1.0, 2.0, 5.0] {
        let i = sample_index(&fixture.artifacts.times, t);
        let expected = (-t).exp();
        worst = worst.max((master.populations[i][1] - expected).abs() / expected);
    }
    verdict(
        "undriven decay follows exp(-gamma t)",
        worst <= 1e-6 && wall < 10.0,
        &format!("worst relative error {worst:.2e} (tol 1e-6), wall {wall:.2} s (limit 10 s)"),
    );
}

#[test]
fn thermal_bath_pins_the_steady_occupation() {
    let params = ModelParams {
        nbath: 0.5,
        ..ModelParams::default()
    };
    let basis = FockBasis::new(20, 1e-6).unwrap();
    let rho = steady_state(&params, basis, 1e-9).expect("thermal steady state");
    let n = mean_excitation(&rho);
    verdict(
        "thermal steady occupation equals the bath occupation",
        (n - 0.5).abs() <= 1e-4,
        &format!("steady <n> = {n:.6} (target 0.5 +- 1e-4)"),
    );
}

#[test]
fn two_quanta_detunings_take_the_ladder_values() {
    let near = ModelParams {
        delta: -2.0,
        chi: 5.0,
        ..ModelParams::default()
    };
    let resonant = ModelParams {
        delta: -10.0,
        chi: 5.0,
        ..ModelParams::default()
    };
    let d2 = two_quanta_detuning(0, &near);
    let d3 = two_quanta_detuning(1, &near);
    let d2_res = two_quanta_detuning(0, &resonant);
    verdict(
        "two-quanta detunings take the ladder values",
        d2 == 16.0 && d3 == 36.0 && d2_res == 0.0,
        &format!("delta_2 = {d2}, delta_3 = {d3} at detuning -2; delta_2 = {d2_res} at detuning -10"),
    );
}

#[test]
fn pulsed_drive_settles_into_a_periodic_cycle() {
    // Same pulsed scenario as the snapshot fixture, but integrated long
    // enough to compare whole cycles after the transient dies out.
    const LONG_PULSED: &str = r#"
method = "master"

[model]
delta = -2.0
chi = 5.0
drive = 10.0

[pulses]
width = 0.5
period = 4.0

[evolution]
t_end = 18.0
sample_stride = 0.05
n_max = 30
"#;
    let started = Instant::now();
    let fixture = run_toml(LONG_PULSED);
    let wall = started.elapsed().as_secs_f64();
    let times = &fixture.artifacts.times;
    let mean_n = &fixture.artifacts.master.as_ref().unwrap().mean_n;
    let period = fixture.scenario.train.period;

    let peak = mean_n.iter().cloned().fold(0.0_f64, f64::max);
    let mut worst = 0.0_f64;
    let mut compared = 0;
    for (i, t) in times.iter().enumerate() {
        if *t <= 10.0 || *t + period > times[times.len() - 1] + 1e-9 {
            continue;
        }
        let j = sample_index(times, t + period);
        worst = worst.max((mean_n[i] - mean_n[j]).abs());
        compared += 1;
    }
    verdict(
        "pulsed drive settles into a periodic cycle",
        compared > 0 && worst <= 1e-3 * peak && wall < 300.0,
        &format!(
            "max cycle-to-cycle <n> difference {worst:.2e} over {compared} samples \
             (tol {:.2e}), wall {wall:.0} s (limit 300 s)",
            1e-3 * peak
        ),
    );
}

#[test]
fn resonant_pulses_pump_the_two_quanta_level() {
    let fixture = run_catalog("fig5", Overrides::default());
    let times = &fixture.artifacts.times;
    let master = fixture.artifacts.master.as_ref().unwrap();
    let cycle_start = times[times.len() - 1] - fixture.scenario.train.period;
    let (mut best_p2, mut best_t) = (f64::MIN, 0.0);
    for (i, t) in times.iter().enumerate() {
        if *t >= cycle_start - 1e-9 && master.populations[i][2] > best_p2 {
            best_p2 = master.populations[i][2];
            best_t = *t;
        }
    }
    // The peak time inside the cycle is reported, not asserted.
    verdict(
        "resonant pulses pump the two-quanta level",
        (best_p2 - 0.6).abs() <= 0.1,
        &format!("max p2 over the last cycle = {best_p2:.4} at t = {best_t:.3} (target 0.6 +- 0.1)"),
    );
}

#[test]
fn pulse_cycle_opens_a_superposition_window() {
    let fixture = pulsed_snapshots();
    let master = fixture.artifacts.master.as_ref().unwrap();
    let fidelity = fixture.artifacts.fidelity.as_ref().unwrap();
    let mut found = false;
    let mut best = (0.0, 1.0, 0.0, 0.0);
    for w in &fixture.artifacts.wigner {
        let i = sample_index(&fixture.artifacts.times, w.time);
        let balance = (master.populations[i][0] - master.populations[i][2]).abs();
        let fid = fidelity[i];
        let min_w = w.field.min_value;
        if fid > best.2 {
            best = (w.time, balance, fid, min_w);
        }
        found |= balance < 0.1 && fid > 0.6 && min_w < -0.01;
    }
    verdict(
        "pulse cycle opens a balanced superposition window",
        found,
        &format!(
            "best snapshot t = {:.3}: |p0 - p2| = {:.3} (< 0.1), fidelity = {:.3} (> 0.6), \
             min W = {:.4} (< -0.01)",
            best.0, best.1, best.2, best.3
        ),
    );
}

#[test]
fn vacuum_evolved_snapshots_keep_two_fold_symmetry() {
    // The pulsed scenario again, but with the snapshots evaluated on the
    // polar grid whose angles map onto themselves under point reflection.
    let entry = catalog::find("fig3").unwrap();
    let mut raw = parse_config(entry.config_toml).unwrap();
    let dir = TempDir::new().unwrap();
    raw.output_dir = Some(dir.path().to_path_buf());
    raw.method = Method::Master;
    raw.observables.wigner.as_mut().unwrap().grid = GridKind::Polar;
    let scenario = resolve(raw, &Overrides::default()).unwrap();
    let artifacts = execute(&scenario).unwrap();

    let mut worst = 0.0_f64;
    let mut count = 0;
    for w in &artifacts.wigner {
        worst = worst.max(w.symmetry_defect.expect("defect computed"));
        count += 1;
    }
    // The monochromatic steady state evolves from the vacuum too.
    let steady = monochromatic_steady();
    let field = wigner(steady, &WignerGrid::default_polar()).unwrap();
    worst = worst.max(symmetry_defect(&field).unwrap());
    count += 1;

    verdict(
        "vacuum-evolved snapshots keep two-fold symmetry",
        count >= 6 && worst <= 1e-6,
        &format!("worst symmetry defect {worst:.2e} across {count} polar snapshots (tol 1e-6)"),
    );
}

#[test]
fn monochromatic_steady_state_shows_two_reflected_humps() {
    let steady = monochromatic_steady();
    let field = wigner(steady, &WignerGrid::default_cartesian()).unwrap();
    let (reflected, detail) = catalog::two_point_reflected_maxima(&field);
    let negativity = negativity_volume(&field);
    verdict(
        "monochromatic steady state shows two reflected positive humps",
        reflected && negativity < 1e-3,
        &format!("{detail}; negativity volume {negativity:.2e} (tol 1e-3)"),
    );
}

#[test]
fn trajectory_ensembles_match_the_master_equation() {
    // The trajectory step is pinned at 1e-3; the basis is sized so that step
    // passes the noise-stability gate, and the tail guard is loosened to the
    // level where single-trajectory excursions are tolerated (the resulting
    // truncation bias is far below the sampling error).
    const PULSED_CROSS_CHECK: &str = r#"
method = "both"

[model]
delta = -2.0
chi = 5.0
drive = 10.0
phi = 3.141592653589793

[pulses]
width = 0.5
period = 4.0

[evolution]
t_end = 9.0
sample_stride = 0.05
n_max = 20
tail_tolerance = 1e-4

[qsd]
trajectories = 500
dt = 1e-3
seed = 1
"#;
    let decay = run_catalog("decay", Overrides::default());
    let decay_report = decay.artifacts.compare.as_ref().unwrap();
    let pulsed = run_toml(PULSED_CROSS_CHECK);
    let pulsed_report = pulsed.artifacts.compare.as_ref().unwrap();
    verdict(
        "trajectory ensembles match the master equation",
        decay_report.passed && pulsed_report.passed,
        &format!(
            "within 3 standard errors at {:.1}% of samples (decay) and {:.1}% (pulsed), \
             threshold 95%",
            100.0 * decay_report.fraction_within,
            100.0 * pulsed_report.fraction_within
        ),
    );
}

#[test]
fn phase_space_reference_values_and_normalization() {
    let basis = FockBasis::new(30, 1e-6).unwrap();
    let grid = WignerGrid::default_cartesian();
    let two_over_pi = 2.0 / std::f64::consts::PI;

    let vacuum = wigner(&DensityMatrix::vacuum(basis), &grid).unwrap();
    let center = vacuum.values[[100, 100]];
    let vacuum_peak_ok = (center - two_over_pi).abs() <= 1e-10;

    let mut integrals = vec![vacuum.integral];
    let one = wigner(
        &dm_from_pure(&PureState::fock(basis, 1).unwrap()).unwrap(),
        &grid,
    )
    .unwrap();
    integrals.push(one.integral);
    let two = wigner(
        &dm_from_pure(&PureState::fock(basis, 2).unwrap()).unwrap(),
        &grid,
    )
    .unwrap();
    integrals.push(two.integral);
    for w in &pulsed_snapshots().artifacts.wigner {
        integrals.push(w.field.integral);
    }
    let worst_integral = integrals
        .iter()
        .map(|i| (i - 1.0).abs())
        .fold(0.0_f64, f64::max);

    // Two quanta: positive at the origin, negative ring around it.
    let two_center_ok = (two.values[[100, 100]] - two_over_pi).abs() <= 1e-10;
    let mut ring_min = f64::MAX;
    for i in 0..201 {
        for j in 0..201 {
            let x = -5.0 + j as f64 * 0.05;
            let y = -5.0 + i as f64 * 0.05;
            let r = (x * x + y * y).sqrt();
            if r > 0.2 && r < 1.2 {
                ring_min = ring_min.min(two.values[[i, j]]);
            }
        }
    }
    verdict(
        "phase-space reference values and normalization",
        vacuum_peak_ok && worst_integral <= 1e-3 && two_center_ok && ring_min < -0.1,
        &format!(
            "vacuum peak {center:.12} (target 2/pi +- 1e-10), worst |integral - 1| = \
             {worst_integral:.2e} over {} fields (tol 1e-3), two-quanta center \
             {:.12} with ring minimum {ring_min:.3}",
            integrals.len(),
            two.values[[100, 100]]
        ),
    );
}

#[test]
fn mean_field_fixed_points_satisfy_their_equations() {
    let omega = 1.0;
    let mut worst_residual = 0.0_f64;
    let mut consistent = true;
    for i in 0..100 {
        let delta = -10.0 + 10.0 * i as f64 / 99.0;
        let params = ModelParams {
            delta,
            chi: 5.0,
            ..ModelParams::default()
        };
        let i_th = threshold_intensity(&params, omega).unwrap();

        let below = semiclassical_steady_state(&params, omega, i_th * (1.0 - 1e-9)).unwrap();
        consistent &= !below.above_threshold;

        for factor in [1.0 + 1e-9, 1.5, 4.0] {
            let intensity = i_th * factor;
            let sol = semiclassical_steady_state(&params, omega, intensity).unwrap();
            consistent &= sol.above_threshold;
            let (Some(n), Some((p1, p2))) = (sol.photon_number, sol.phases) else {
                consistent = false;
                continue;
            };
            consistent &= n >= 0.0;
            let j = omega * omega * intensity / (params.gamma * params.gamma);
            for phase in [p1, p2] {
                let d = params.phi - 2.0 * phase;
                // Rationalized fixed-point system: the locked phase obeys
                // J sin^2 = 1 and the amplitude obeys (2 chi n - delta)^2 +
                // gamma^2 = J gamma^2.
                let r_phase = (j * d.sin() * d.sin() - 1.0).abs();
                let lhs = (2.0 * params.chi * n - params.delta).powi(2) + params.gamma.powi(2);
                let r_amp = (lhs - j * params.gamma.powi(2)).abs() / j.max(1.0);
                worst_residual = worst_residual.max(r_phase).max(r_amp);
            }
        }
    }
    verdict(
        "mean-field fixed points satisfy their equations",
        consistent && worst_residual < 1e-12,
        &format!(
            "worst residual {worst_residual:.2e} (tol 1e-12) over a 100-point detuning sweep; \
             threshold boundary consistent on both sides"
        ),
    );
}
