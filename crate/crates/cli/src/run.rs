//! Scenario execution and bit-stable data export.
//!
//! All numeric output uses 17 significant digits, which round-trips f64
//! exactly: rerunning the same config and seed reproduces every CSV byte for
//! byte. The manifest is the one file that may differ between reruns (it
//! records wall time).

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use pdao_core::fock::{dm_from_pure, tail_mass, DensityMatrix, PureState};
use pdao_core::master::{integrate_master, TAIL_BAND};
use pdao_core::phase_space::{
    fidelity_pure, mean_excitation, negativity_volume, populations, symmetry_defect, wigner,
    WignerField, WignerGrid,
};
use pdao_core::qsd::ensemble_average;

use crate::config::ResolvedScenario;
use crate::report::{compare_methods, MethodReport};
use crate::CliError;

pub struct MasterSeries {
    pub mean_n: Vec<f64>,
    pub populations: Vec<Vec<f64>>,
    pub trace_error: Vec<f64>,
    pub tail_mass: Vec<f64>,
    pub states: Vec<DensityMatrix>,
}

pub struct QsdSeries {
    pub mean_n: Vec<f64>,
    pub stderr: Vec<f64>,
    pub mean_density: Vec<DensityMatrix>,
}

pub struct WignerArtifact {
    pub time: f64,
    pub field: WignerField,
    pub symmetry_defect: Option<f64>,
    pub negativity_volume: Option<f64>,
    pub csv_file: String,
    pub json_file: String,
}

pub struct Artifacts {
    pub times: Vec<f64>,
    pub master: Option<MasterSeries>,
    pub qsd: Option<QsdSeries>,
    pub wigner: Vec<WignerArtifact>,
    pub fidelity: Option<Vec<f64>>,
    pub compare: Option<MethodReport>,
    pub outputs: Vec<String>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// 17 significant digits: exact round-trip for doubles.
fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// Runs the configured method(s) and writes every data product except the
/// manifest, which needs the check verdicts and is written by the caller.
pub fn execute(scenario: &ResolvedScenario) -> Result<Artifacts, CliError> {
    let started = Instant::now();
    std::fs::create_dir_all(&scenario.output_dir)?;
    let mut outputs: Vec<String> = Vec::new();

    let times = scenario.evolution.sample_times.clone();
    let max_level = scenario.observables.max_level;
    let band = TAIL_BAND.min(scenario.basis.n_max());

    let master = if scenario.method.wants_master() {
        let rho0 = dm_from_pure(&scenario.initial)?;
        let trajectory =
            integrate_master(&rho0, &scenario.evolution, &scenario.params, &scenario.train)?;
        let mean_n = trajectory.states.iter().map(mean_excitation).collect();
        let pops = trajectory
            .states
            .iter()
            .map(|s| {
                let p = populations(s);
                (0..=max_level).map(|n| p[n]).collect()
            })
            .collect();
        Some(MasterSeries {
            mean_n,
            populations: pops,
            trace_error: trajectory.diagnostics.iter().map(|d| d.trace_error).collect(),
            tail_mass: trajectory.diagnostics.iter().map(|d| d.tail_mass).collect(),
            states: trajectory.states,
        })
    } else {
        None
    };

    let qsd = if let Some(config) = &scenario.qsd {
        let ensemble =
            ensemble_average(&scenario.initial, config, &scenario.params, &scenario.train)?;
        Some(QsdSeries {
            mean_n: ensemble.mean_excitation,
            stderr: ensemble.stderr_excitation,
            mean_density: ensemble.mean_density,
        })
    } else {
        None
    };

    // Base columns come from the master run when present, otherwise from the
    // ensemble mean density.
    let base_states: &[DensityMatrix] = match (&master, &qsd) {
        (Some(m), _) => &m.states,
        (None, Some(q)) => &q.mean_density,
        (None, None) => unreachable!("config validation guarantees a method"),
    };

    let fidelity = match &scenario.observables.fidelity_levels {
        Some(levels) => {
            let target = PureState::level_superposition(scenario.basis, levels)?;
            let mut column = Vec::with_capacity(base_states.len());
            for state in base_states {
                column.push(fidelity_pure(state, &target)?);
            }
            Some(column)
        }
        None => None,
    };

    // timeseries.csv
    {
        let mut text = String::new();
        let mut header = String::from("time,mean_n");
        for n in 0..=max_level {
            let _ = write!(header, ",p{n}");
        }
        header.push_str(",trace_error,tail_mass");
        if qsd.is_some() {
            header.push_str(",qsd_mean_n,qsd_stderr");
        }
        text.push_str(&header);
        text.push('\n');

        for (i, t) in times.iter().enumerate() {
            let (mean_n, pops, trace_err, tail) = match &master {
                Some(m) => (
                    m.mean_n[i],
                    m.populations[i].clone(),
                    m.trace_error[i],
                    m.tail_mass[i],
                ),
                None => {
                    let rho = &base_states[i];
                    let p = populations(rho);
                    let tr = rho.trace();
                    (
                        mean_excitation(rho),
                        (0..=max_level).map(|n| p[n]).collect(),
                        ((tr.re - 1.0).powi(2) + tr.im.powi(2)).sqrt(),
                        tail_mass(rho, band),
                    )
                }
            };
            let mut row = format!("{},{}", fmt(*t), fmt(mean_n));
            for p in &pops {
                let _ = write!(row, ",{}", fmt(*p));
            }
            let _ = write!(row, ",{},{}", fmt(trace_err), fmt(tail));
            if let Some(q) = &qsd {
                let _ = write!(row, ",{},{}", fmt(q.mean_n[i]), fmt(q.stderr[i]));
            }
            text.push_str(&row);
            text.push('\n');
        }
        write_output(&scenario.output_dir, "timeseries.csv", &text, &mut outputs)?;
    }

    // fidelity.csv
    if let Some(column) = &fidelity {
        let mut text = String::from("time,fidelity\n");
        for (t, f) in times.iter().zip(column) {
            let _ = writeln!(text, "{},{}", fmt(*t), fmt(*f));
        }
        write_output(&scenario.output_dir, "fidelity.csv", &text, &mut outputs)?;
    }

    // Wigner snapshots, from master states when available.
    let mut wigner_artifacts = Vec::new();
    if let Some(grid) = &scenario.observables.wigner_grid {
        for (k, t) in scenario.observables.wigner_times.iter().enumerate() {
            let idx = times
                .iter()
                .position(|s| (s - t).abs() < 1e-9)
                .expect("snapshot times are merged into the sample grid");
            let field = wigner(&base_states[idx], grid)?;
            let defect = if scenario.observables.symmetry_defect {
                Some(symmetry_defect(&field)?)
            } else {
                None
            };
            let negativity = if scenario.observables.negativity {
                Some(negativity_volume(&field))
            } else {
                None
            };

            let csv_file = format!("wigner_{k:03}.csv");
            let json_file = format!("wigner_{k:03}.json");
            let mut text = String::new();
            for row in field.values.rows() {
                let mut line = String::new();
                for (j, v) in row.iter().enumerate() {
                    if j > 0 {
                        line.push(',');
                    }
                    line.push_str(&fmt(*v));
                }
                text.push_str(&line);
                text.push('\n');
            }
            write_output(&scenario.output_dir, &csv_file, &text, &mut outputs)?;

            let sidecar = match *grid {
                WignerGrid::Cartesian {
                    x_min,
                    x_max,
                    y_min,
                    y_max,
                    n_x,
                    n_y,
                } => json!({
                    "kind": "cartesian",
                    "time": t,
                    "x_min": x_min,
                    "x_max": x_max,
                    "y_min": y_min,
                    "y_max": y_max,
                    "n_x": n_x,
                    "n_y": n_y,
                    "min_value": field.min_value,
                    "integral": field.integral,
                    "symmetry_defect": defect,
                    "negativity_volume": negativity,
                }),
                WignerGrid::Polar { r_max, n_r, n_theta } => json!({
                    "kind": "polar",
                    "time": t,
                    "r_max": r_max,
                    "n_r": n_r,
                    "n_theta": n_theta,
                    "min_value": field.min_value,
                    "integral": field.integral,
                    "symmetry_defect": defect,
                    "negativity_volume": negativity,
                }),
            };
            write_output(
                &scenario.output_dir,
                &json_file,
                &format!("{}\n", serde_json::to_string_pretty(&sidecar).expect("json")),
                &mut outputs,
            )?;

            wigner_artifacts.push(WignerArtifact {
                time: *t,
                field,
                symmetry_defect: defect,
                negativity_volume: negativity,
                csv_file,
                json_file,
            });
        }
    }

    // Method cross-validation.
    let compare = match (&master, &qsd) {
        (Some(m), Some(q)) => {
            let report = compare_methods(&times, &m.mean_n, &q.mean_n, &q.stderr);
            let mut text = String::from("time,master_mean_n,qsd_mean_n,qsd_stderr,z\n");
            for c in &report.samples {
                let _ = writeln!(
                    text,
                    "{},{},{},{},{}",
                    fmt(c.time),
                    fmt(c.master_mean),
                    fmt(c.qsd_mean),
                    fmt(c.stderr),
                    fmt(c.z)
                );
            }
            write_output(&scenario.output_dir, "compare_methods.csv", &text, &mut outputs)?;
            Some(report)
        }
        _ => None,
    };

    Ok(Artifacts {
        times,
        master,
        qsd,
        wigner: wigner_artifacts,
        fidelity,
        compare,
        outputs,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}

fn write_output(
    dir: &Path,
    name: &str,
    text: &str,
    outputs: &mut Vec<String>,
) -> Result<(), CliError> {
    std::fs::write(dir.join(name), text)?;
    outputs.push(name.to_string());
    Ok(())
}

/// Writes the run manifest. Called on success (with artifacts and check
/// verdicts) and on failure (with the error and whatever files landed).
pub fn write_manifest(
    scenario: &ResolvedScenario,
    scenario_name: Option<&str>,
    artifacts: Option<&Artifacts>,
    checks: &[CheckResult],
    error: Option<&str>,
) -> Result<(), CliError> {
    let (outputs, wall) = match artifacts {
        Some(a) => (a.outputs.clone(), Some(a.wall_seconds)),
        None => {
            // A failed run may still have produced files; list what exists.
            let mut found = Vec::new();
            if let Ok(entries) = std::fs::read_dir(&scenario.output_dir) {
                for entry in entries.flatten() {
                    let name = entry.file_name().to_string_lossy().into_owned();
                    if name != "manifest.json" {
                        found.push(name);
                    }
                }
            }
            found.sort();
            (found, None)
        }
    };

    let manifest = json!({
        "tool": "pdao",
        "version": env!("CARGO_PKG_VERSION"),
        "scenario": scenario_name,
        "config": scenario.raw,
        "base_seed": scenario.qsd.as_ref().map(|q| q.base_seed),
        "trajectories": scenario.qsd.as_ref().map(|q| q.n_trajectories),
        "sample_count": scenario.evolution.sample_times.len(),
        "wigner_times": scenario.observables.wigner_times,
        "wall_time_seconds": wall,
        "outputs": outputs,
        "checks": checks,
        "partial": error.is_some(),
        "error": error,
    });
    std::fs::create_dir_all(&scenario.output_dir)?;
    std::fs::write(
        scenario.output_dir.join("manifest.json"),
        format!("{}\n", serde_json::to_string_pretty(&manifest).expect("json")),
    )?;
    Ok(())
}
