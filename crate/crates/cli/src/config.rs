//! Scenario configuration: TOML schema, defaults, validation, and resolution
//! into the core library's types.
//!
//! The file format is a small TOML tree. Times are in units of 1/gamma and
//! energies in units of gamma throughout. A minimal scenario looks like
//!
//! ```toml
//! method = "master"
//!
//! [model]
//! delta = -2.0
//! chi = 5.0
//! drive = 10.0
//!
//! [pulses]          # omit for a monochromatic drive
//! width = 0.5
//! period = 4.0
//!
//! [evolution]
//! t_end = 9.0
//! sample_stride = 0.05
//! ```
//!
//! Validation gathers every violated rule into one message instead of
//! stopping at the first, so a config can be repaired in a single pass.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use pdao_core::fock::{FockBasis, PureState};
use pdao_core::master::{EvolutionConfig, StepControl};
use pdao_core::model::{ModelParams, PulseCount, PulseTrain};
use pdao_core::phase_space::WignerGrid;
use pdao_core::qsd::QsdConfig;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Master,
    Qsd,
    Both,
}

impl Method {
    pub fn wants_master(self) -> bool {
        matches!(self, Method::Master | Method::Both)
    }

    pub fn wants_qsd(self) -> bool {
        matches!(self, Method::Qsd | Method::Both)
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Master => "master",
            Method::Qsd => "qsd",
            Method::Both => "both",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "master" => Ok(Method::Master),
            "qsd" => Ok(Method::Qsd),
            "both" => Ok(Method::Both),
            other => Err(format!(
                "unknown method '{other}' (expected master, qsd, or both)"
            )),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawScenario {
    pub method: Method,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub model: RawModel,
    #[serde(default)]
    pub pulses: Option<RawPulses>,
    pub evolution: RawEvolution,
    #[serde(default)]
    pub qsd: Option<RawQsd>,
    #[serde(default)]
    pub observables: RawObservables,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawModel {
    pub delta: f64,
    pub chi: f64,
    pub drive: f64,
    #[serde(default)]
    pub phi: f64,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default)]
    pub nbath: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPulses {
    pub width: f64,
    pub period: f64,
    #[serde(default)]
    pub t0: f64,
    /// Number of pulses; omit for an unbounded train.
    #[serde(default)]
    pub count: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawEvolution {
    #[serde(default)]
    pub t_start: f64,
    pub t_end: f64,
    /// Either a uniform stride or an explicit list of sample times.
    #[serde(default)]
    pub sample_stride: Option<f64>,
    #[serde(default)]
    pub sample_times: Option<Vec<f64>>,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default = "default_tail_tolerance")]
    pub tail_tolerance: f64,
    #[serde(default = "default_initial_dt")]
    pub initial_dt: f64,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_abs_tol")]
    pub abs_tol: f64,
    /// Start in |n> instead of the vacuum.
    #[serde(default)]
    pub initial_fock: Option<usize>,
    /// Start in an equal superposition of the listed levels.
    #[serde(default)]
    pub initial_levels: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawQsd {
    #[serde(default = "default_trajectories")]
    pub trajectories: usize,
    #[serde(default = "default_qsd_dt")]
    pub dt: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl Default for RawQsd {
    fn default() -> Self {
        Self {
            trajectories: default_trajectories(),
            dt: default_qsd_dt(),
            seed: default_seed(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawObservables {
    #[serde(default = "yes")]
    pub mean_n: bool,
    #[serde(default)]
    pub populations: Option<RawPopulations>,
    #[serde(default)]
    pub wigner: Option<RawWigner>,
    #[serde(default)]
    pub fidelity: Option<RawFidelity>,
    #[serde(default = "yes")]
    pub symmetry_defect: bool,
    #[serde(default = "yes")]
    pub negativity: bool,
}

impl Default for RawObservables {
    fn default() -> Self {
        Self {
            mean_n: true,
            populations: None,
            wigner: None,
            fidelity: None,
            symmetry_defect: true,
            negativity: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPopulations {
    #[serde(default = "default_max_level")]
    pub max_level: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    Cartesian,
    Polar,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawWigner {
    #[serde(default = "default_grid_kind")]
    pub grid: GridKind,
    /// Snapshot times given directly, in units of 1/gamma.
    #[serde(default)]
    pub times: Vec<f64>,
    /// Snapshot times as pulse landmarks [k, c], meaning k*period + c*width.
    #[serde(default)]
    pub landmarks: Vec<[f64; 2]>,
    /// Cartesian window is the symmetric square [-extent, extent]^2.
    #[serde(default = "default_extent")]
    pub extent: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_extent")]
    pub r_max: f64,
    #[serde(default = "default_n_r")]
    pub n_r: usize,
    #[serde(default = "default_n_theta")]
    pub n_theta: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawFidelity {
    /// Target is the equal superposition of these levels.
    pub levels: Vec<usize>,
}

fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_n_max() -> usize {
    50
}
fn default_tail_tolerance() -> f64 {
    1e-6
}
fn default_initial_dt() -> f64 {
    1e-3
}
fn default_rel_tol() -> f64 {
    1e-6
}
fn default_abs_tol() -> f64 {
    1e-9
}
fn default_trajectories() -> usize {
    500
}
fn default_qsd_dt() -> f64 {
    1e-3
}
fn default_seed() -> u64 {
    1
}
fn default_max_level() -> usize {
    5
}
fn default_grid_kind() -> GridKind {
    GridKind::Cartesian
}
fn default_extent() -> f64 {
    5.0
}
fn default_points() -> usize {
    201
}
fn default_n_r() -> usize {
    101
}
fn default_n_theta() -> usize {
    128
}

/// Command-line overrides applied on top of a parsed scenario.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub method: Option<Method>,
    pub seed: Option<u64>,
    pub trajectories: Option<usize>,
    pub out: Option<PathBuf>,
}

/// Everything `run_scenario` needs, in core types, fully validated.
#[derive(Debug, Clone)]
pub struct ResolvedScenario {
    pub method: Method,
    pub output_dir: PathBuf,
    pub params: ModelParams,
    pub train: PulseTrain,
    pub basis: FockBasis,
    pub initial: PureState,
    pub evolution: EvolutionConfig,
    pub qsd: Option<QsdConfig>,
    pub observables: ResolvedObservables,
    /// Input tree with defaults and overrides applied, for the manifest.
    pub raw: RawScenario,
}

#[derive(Debug, Clone)]
pub struct ResolvedObservables {
    pub max_level: usize,
    pub wigner_grid: Option<WignerGrid>,
    /// Sorted snapshot times, landmarks already resolved.
    pub wigner_times: Vec<f64>,
    pub fidelity_levels: Option<Vec<usize>>,
    pub symmetry_defect: bool,
    pub negativity: bool,
}

pub fn load_config(path: &Path) -> Result<RawScenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Config(format!("cannot read config {}: {e}", path.display()))
    })?;
    parse_config(&text).map_err(|e| {
        CliError::Config(format!("config {}: {e}", path.display()))
    })
}

pub fn parse_config(text: &str) -> Result<RawScenario, String> {
    toml::from_str(text).map_err(|e| e.to_string())
}

/// Applies overrides, checks every invariant, and converts to core types.
pub fn resolve(mut raw: RawScenario, overrides: &Overrides) -> Result<ResolvedScenario, CliError> {
    if let Some(m) = overrides.method {
        raw.method = m;
    }
    if raw.method.wants_qsd() && raw.qsd.is_none() {
        raw.qsd = Some(RawQsd::default());
    }
    if let Some(q) = raw.qsd.as_mut() {
        if let Some(seed) = overrides.seed {
            q.seed = seed;
        }
        if let Some(k) = overrides.trajectories {
            q.trajectories = k;
        }
    }
    if let Some(out) = &overrides.out {
        raw.output_dir = Some(out.clone());
    }

    let mut faults: Vec<String> = Vec::new();

    let params = ModelParams {
        delta: raw.model.delta,
        chi: raw.model.chi,
        drive: raw.model.drive,
        phi: raw.model.phi,
        gamma: raw.model.gamma,
        nbath: raw.model.nbath,
    };
    if let Err(e) = params.validate() {
        faults.push(e.to_string());
    }

    let train = match &raw.pulses {
        None => Ok(PulseTrain::monochromatic()),
        Some(p) => {
            let count = match p.count {
                None => PulseCount::Unbounded,
                Some(0) => {
                    faults.push("pulses.count must be at least 1 when given".into());
                    PulseCount::Unbounded
                }
                Some(k) => PulseCount::Finite(k),
            };
            PulseTrain::gaussian(p.t0, p.width, p.period, count)
        }
    };
    let train = match train {
        Ok(t) => t,
        Err(e) => {
            faults.push(e.to_string());
            PulseTrain::monochromatic()
        }
    };

    let ev = &raw.evolution;
    let basis = match FockBasis::new(ev.n_max.max(1), ev.tail_tolerance) {
        Ok(b) => b,
        Err(e) => {
            faults.push(e.to_string());
            FockBasis::new(1, 0.5).unwrap()
        }
    };
    if ev.n_max < 1 {
        faults.push("evolution.n_max must be at least 1".into());
    }

    let initial = match (&ev.initial_fock, &ev.initial_levels) {
        (Some(_), Some(_)) => {
            faults.push("evolution.initial_fock and initial_levels are mutually exclusive".into());
            PureState::vacuum(basis)
        }
        (Some(n), None) => match PureState::fock(basis, *n) {
            Ok(s) => s,
            Err(e) => {
                faults.push(format!("evolution.initial_fock: {e}"));
                PureState::vacuum(basis)
            }
        },
        (None, Some(levels)) => match PureState::level_superposition(basis, levels) {
            Ok(s) => s,
            Err(e) => {
                faults.push(format!("evolution.initial_levels: {e}"));
                PureState::vacuum(basis)
            }
        },
        (None, None) => PureState::vacuum(basis),
    };

    // Observables next, because the Wigner snapshot times join the sample
    // grid below.
    let obs = &raw.observables;
    let max_level = obs
        .populations
        .as_ref()
        .map(|p| p.max_level)
        .unwrap_or_else(default_max_level)
        .min(basis.n_max());

    let mut wigner_grid = None;
    let mut wigner_times: Vec<f64> = Vec::new();
    if let Some(w) = &obs.wigner {
        let grid = match w.grid {
            GridKind::Cartesian => WignerGrid::Cartesian {
                x_min: -w.extent,
                x_max: w.extent,
                y_min: -w.extent,
                y_max: w.extent,
                n_x: w.points,
                n_y: w.points,
            },
            GridKind::Polar => WignerGrid::Polar {
                r_max: w.r_max,
                n_r: w.n_r,
                n_theta: w.n_theta,
            },
        };
        if let Err(e) = grid.validate() {
            faults.push(format!("observables.wigner: {e}"));
        }
        if obs.symmetry_defect && w.grid == GridKind::Polar && w.n_theta % 2 != 0 {
            faults.push(
                "symmetry_defect needs an even observables.wigner.n_theta (reflection must map \
                 grid angles onto grid angles)"
                    .into(),
            );
        }
        wigner_grid = Some(grid);

        wigner_times.extend(&w.times);
        if !w.landmarks.is_empty() {
            match &raw.pulses {
                None => faults.push(
                    "observables.wigner.landmarks need a pulse train to refer to".into(),
                ),
                Some(p) => {
                    for [k, c] in &w.landmarks {
                        wigner_times.push(p.t0 + k * p.period + c * p.width);
                    }
                }
            }
        }
        wigner_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        wigner_times.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        if wigner_times.is_empty() {
            faults.push("observables.wigner lists no snapshot times".into());
        }
        for t in &wigner_times {
            if *t < ev.t_start - 1e-9 || *t > ev.t_end + 1e-9 {
                faults.push(format!(
                    "wigner snapshot time {t} outside [{}, {}]",
                    ev.t_start, ev.t_end
                ));
            }
        }
    }

    if let Some(f) = &obs.fidelity {
        if f.levels.is_empty() {
            faults.push("observables.fidelity.levels must not be empty".into());
        }
        for l in &f.levels {
            if *l > basis.n_max() {
                faults.push(format!(
                    "observables.fidelity level {l} exceeds n_max {}",
                    basis.n_max()
                ));
            }
        }
    }
    let fidelity_levels = obs.fidelity.as_ref().map(|f| f.levels.clone());
    let keep_symmetry = obs.symmetry_defect;
    let keep_negativity = obs.negativity;

    // Sample grid: explicit times win over a stride.
    let mut sample_times: Vec<f64> = match (&ev.sample_times, ev.sample_stride) {
        (Some(times), _) => times.clone(),
        (None, Some(stride)) if stride > 0.0 => {
            let mut v = Vec::new();
            let mut k = 0u64;
            loop {
                let t = ev.t_start + k as f64 * stride;
                if t > ev.t_end - 1e-12 * stride {
                    break;
                }
                v.push(t);
                k += 1;
            }
            v.push(ev.t_end);
            v
        }
        (None, Some(bad)) => {
            faults.push(format!("evolution.sample_stride must be > 0, got {bad}"));
            vec![ev.t_end]
        }
        (None, None) => {
            faults.push("evolution needs sample_stride or sample_times".into());
            vec![ev.t_end]
        }
    };
    sample_times.extend(&wigner_times);
    sample_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sample_times.dedup_by(|a, b| (*a - *b).abs() < 1e-9);

    let step_control = StepControl {
        initial_dt: ev.initial_dt,
        rel_tol: ev.rel_tol,
        abs_tol: ev.abs_tol,
    };
    let evolution = EvolutionConfig {
        t_start: ev.t_start,
        t_end: ev.t_end,
        sample_times: sample_times.clone(),
        step_control,
        basis,
    };
    if let Err(e) = evolution.validate() {
        faults.push(e.to_string());
    }

    let qsd = if raw.method.wants_qsd() {
        let q = raw.qsd.as_ref().expect("defaulted above");
        if ev.t_start != 0.0 {
            faults.push("stochastic trajectories start at t = 0; set evolution.t_start = 0".into());
        }
        let config = QsdConfig {
            n_trajectories: q.trajectories,
            dt: q.dt,
            base_seed: q.seed,
            sample_times,
            basis,
        };
        if let Err(e) = config.validate() {
            faults.push(format!("qsd: {e}"));
        }
        Some(config)
    } else {
        None
    };

    if !faults.is_empty() {
        return Err(CliError::Config(faults.join("; ")));
    }

    let output_dir = raw.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    Ok(ResolvedScenario {
        method: raw.method,
        output_dir,
        params,
        train,
        basis,
        initial,
        evolution,
        qsd,
        observables: ResolvedObservables {
            max_level,
            wigner_grid,
            wigner_times,
            fidelity_levels,
            symmetry_defect: keep_symmetry,
            negativity: keep_negativity,
        },
        raw,
    })
}
