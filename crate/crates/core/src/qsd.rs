//! Stochastic pure-state unraveling of the master equation.
//!
//! Each trajectory evolves a normalized state vector under the nonlinear
//! diffusion equation
//!
//!   d psi = [ -i H(t) - 1/2 sum_i ( L_i^dag L_i - 2 <L_i^dag> L_i
//!                                   + <L_i^dag><L_i> ) ] psi dt
//!         + sum_i ( L_i - <L_i> ) psi dxi_i
//!
//! with independent complex Wiener increments, M[dxi_i dxi_j*] = delta_ij dt.
//! Averaging |psi><psi| over trajectories reproduces the density matrix, which
//! is the cross-check the ensemble driver exists for.
//!
//! The noise enters in the Ito sense, so its coefficient is frozen at the
//! start of each step; the deterministic drift, whose Kerr part rotates the
//! top of the basis at chi*n_max^2, is advanced with RK4 instead of a bare
//! Euler update because Euler has no stability interval on the imaginary
//! axis at any affordable step. The state is renormalized after every step.
//! This keeps the usual strong order 1/2 / weak order 1 of Euler-Maruyama
//! while remaining stable at the step sizes the sampling grid wants.
//!
//! Determinism: trajectory k derives its own seed from `base_seed` and k, so
//! results are bit-identical across runs and independent of thread count.

use ndarray::Array1;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Result, SimError};
use crate::fock::{C64, DensityMatrix, FockBasis, PureState};
use crate::master::TAIL_BAND;
use crate::model::{envelope_peak, pulse_envelope, ModelParams, PulseTrain};

/// RK4 imaginary-axis stability margin, shared with the master integrator.
const STABILITY_MARGIN: f64 = 2.5;

/// Trajectories processed per parallel batch; accumulation happens in index
/// order afterwards so the ensemble mean does not depend on scheduling.
const BATCH: usize = 64;

#[derive(Clone, Debug)]
pub struct QsdConfig {
    pub n_trajectories: usize,
    /// Fixed time step. Must resolve the fastest retained coherence; the
    /// driver rejects steps outside the stability bound instead of silently
    /// producing noise-shaped garbage.
    pub dt: f64,
    pub base_seed: u64,
    /// Strictly increasing snapshot times, starting at or after zero.
    /// Integration runs from t = 0 to the last entry.
    pub sample_times: Vec<f64>,
    pub basis: FockBasis,
}

impl QsdConfig {
    pub fn validate(&self) -> Result<()> {
        let mut faults = Vec::new();
        if self.n_trajectories == 0 {
            faults.push("n_trajectories must be at least 1".to_string());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            faults.push(format!("dt must be positive and finite, got {}", self.dt));
        }
        if self.sample_times.is_empty() {
            faults.push("sample_times must not be empty".to_string());
        }
        if self.sample_times.first().is_some_and(|t| *t < 0.0) {
            faults.push("sample_times must start at or after t = 0".to_string());
        }
        for w in self.sample_times.windows(2) {
            if !(w[0] < w[1]) {
                faults.push(format!(
                    "sample_times must increase strictly ({} then {})",
                    w[0], w[1]
                ));
                break;
            }
        }
        if faults.is_empty() {
            Ok(())
        } else {
            Err(SimError::InvalidArgument(faults.join("; ")))
        }
    }
}

/// Ensemble averages at each sample time, plus the spread of the excitation
/// estimate so callers can judge how many trajectories they actually needed.
#[derive(Clone, Debug)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    /// Mean of |psi><psi| over trajectories.
    pub mean_density: Vec<DensityMatrix>,
    pub mean_excitation: Vec<f64>,
    /// Standard error of the mean excitation (sample std / sqrt(K));
    /// zero for a single trajectory.
    pub stderr_excitation: Vec<f64>,
}

/// SplitMix64 stream: well-spread 64-bit seeds from (base, index) without
/// any correlation between neighboring trajectories.
pub fn trajectory_seed(base_seed: u64, index: u64) -> u64 {
    let mut z = base_seed.wrapping_add((index.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Precomputed band coefficients for O(dim) applications of H and the
/// collapse operators to a state vector.
struct Stepper {
    dim: usize,
    /// delta*n + chi*n^2
    e: Vec<f64>,
    /// sqrt(n)
    sr: Vec<f64>,
    /// sqrt((n+1)(n+2))
    s2: Vec<f64>,
    /// e^{i phi} * drive
    up: C64,
    /// sqrt((N+1) gamma), amplitude of the decay channel
    c_down: f64,
    /// sqrt(N gamma), amplitude of the thermal channel (0 disables it)
    c_up: f64,
}

impl Stepper {
    fn new(params: &ModelParams, basis: FockBasis) -> Self {
        let dim = basis.dim();
        let e = (0..dim)
            .map(|n| {
                let nf = n as f64;
                params.delta * nf + params.chi * nf * nf
            })
            .collect();
        let sr: Vec<f64> = (0..=dim).map(|n| (n as f64).sqrt()).collect();
        let s2 = (0..dim)
            .map(|n| {
                if n + 2 < dim {
                    sr[n + 1] * sr[n + 2]
                } else {
                    0.0
                }
            })
            .collect();
        Self {
            dim,
            e,
            sr,
            s2,
            up: C64::from_polar(params.drive, params.phi),
            c_down: ((params.nbath + 1.0) * params.gamma).sqrt(),
            c_up: (params.nbath * params.gamma).sqrt(),
        }
    }

    fn thermal(&self) -> bool {
        self.c_up > 0.0
    }

    /// <L> for the decay channel, expectations in the (possibly
    /// unnormalized) state s; divide by norm2.
    fn mean_down(&self, s: &Array1<C64>, norm2: f64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for n in 0..self.dim - 1 {
            acc += s[n].conj() * (self.c_down * self.sr[n + 1]) * s[n + 1];
        }
        acc / norm2
    }

    fn mean_up(&self, s: &Array1<C64>, norm2: f64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for n in 1..self.dim {
            acc += s[n].conj() * (self.c_up * self.sr[n]) * s[n - 1];
        }
        acc / norm2
    }

    /// Deterministic drift D(s) at drive envelope `f`. Expectation values are
    /// taken in the normalized direction of s, which is what makes the
    /// unraveling nonlinear.
    fn drift_into(&self, s: &Array1<C64>, f: f64, out: &mut Array1<C64>) {
        let d = self.dim;
        let up = self.up * f;
        let upc = up.conj();
        let norm2: f64 = s.iter().map(|z| z.norm_sqr()).sum();
        let m_down = self.mean_down(s, norm2);
        let m_down_c = m_down.conj();
        let (m_up, m_up_c) = if self.thermal() {
            let m = self.mean_up(s, norm2);
            (m, m.conj())
        } else {
            (C64::new(0.0, 0.0), C64::new(0.0, 0.0))
        };
        let gd = self.c_down * self.c_down;
        let gu = self.c_up * self.c_up;
        let minus_i = C64::new(0.0, -1.0);

        for n in 0..d {
            // -i H s
            let mut h = C64::new(self.e[n], 0.0) * s[n];
            if n >= 2 {
                h += up * (self.s2[n - 2] * s[n - 2]);
            }
            if n + 2 < d {
                h += upc * (self.s2[n] * s[n + 2]);
            }
            let mut acc = minus_i * h;

            // Decay channel: -1/2 L^dag L s + <L^dag> L s - 1/2 |<L>|^2 s.
            acc -= (0.5 * gd * n as f64) * s[n];
            if n + 1 < d {
                acc += m_down_c * (self.c_down * self.sr[n + 1]) * s[n + 1];
            }
            acc -= (0.5 * m_down.norm_sqr()) * s[n];

            if self.thermal() {
                let aa_dag = if n + 1 < d { (n + 1) as f64 } else { 0.0 };
                acc -= (0.5 * gu * aa_dag) * s[n];
                if n >= 1 {
                    acc += m_up_c * (self.c_up * self.sr[n]) * s[n - 1];
                }
                acc -= (0.5 * m_up.norm_sqr()) * s[n];
            }

            out[n] = acc;
        }
    }

    /// Ito noise increment sum_i (L_i - <L_i>) psi dxi_i for a normalized
    /// state, with dxi already drawn.
    fn noise_into(&self, psi: &Array1<C64>, dxi_down: C64, dxi_up: C64, out: &mut Array1<C64>) {
        let d = self.dim;
        let m_down = self.mean_down(psi, 1.0);
        let m_up = if self.thermal() {
            self.mean_up(psi, 1.0)
        } else {
            C64::new(0.0, 0.0)
        };
        for n in 0..d {
            let down_jump = if n + 1 < d {
                (self.c_down * self.sr[n + 1]) * psi[n + 1]
            } else {
                C64::new(0.0, 0.0)
            };
            let mut acc = dxi_down * (down_jump - m_down * psi[n]);
            if self.thermal() {
                let up_jump = if n >= 1 {
                    (self.c_up * self.sr[n]) * psi[n - 1]
                } else {
                    C64::new(0.0, 0.0)
                };
                acc += dxi_up * (up_jump - m_up * psi[n]);
            }
            out[n] = acc;
        }
    }

    /// Bound on the fastest drift frequency, for the step-size gate.
    fn rate_bound(&self, peak_envelope: f64) -> f64 {
        let g = self.up.norm() * peak_envelope;
        let mut h_bound = 0.0f64;
        for n in 0..self.dim {
            let below = if n >= 2 { self.s2[n - 2] } else { 0.0 };
            h_bound = h_bound.max(self.e[n].abs() + g * (below + self.s2[n]));
        }
        let damp = 0.5
            * (self.c_down * self.c_down * (self.dim - 1) as f64
                + self.c_up * self.c_up * self.dim as f64);
        h_bound + damp
    }
}

fn normalize(psi: &mut Array1<C64>) -> f64 {
    let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        psi.mapv_inplace(|z| z / norm);
    }
    norm
}

fn validate_dt(config: &QsdConfig, stepper: &Stepper, train: &PulseTrain) -> Result<()> {
    let bound = stepper.rate_bound(envelope_peak(train)).max(1e-300);
    let dt_max = STABILITY_MARGIN / bound;
    if config.dt > dt_max {
        return Err(SimError::InvalidArgument(format!(
            "dt {:.3e} exceeds the stability bound {:.3e} for this basis and drive; \
             lower dt or shrink n_max",
            config.dt, dt_max
        )));
    }
    Ok(())
}

/// Evolves one trajectory and returns the normalized state at each sample
/// time (nearest step). Fully deterministic in (seed, config, params, train).
pub fn run_trajectory(
    psi0: &PureState,
    config: &QsdConfig,
    params: &ModelParams,
    train: &PulseTrain,
    seed: u64,
) -> Result<Vec<Array1<C64>>> {
    config.validate()?;
    params.validate()?;
    train.validate()?;
    if psi0.basis() != config.basis {
        return Err(SimError::InvalidArgument(
            "initial state basis differs from config basis".into(),
        ));
    }
    let stepper = Stepper::new(params, config.basis);
    validate_dt(config, &stepper, train)?;

    let dim = config.basis.dim();
    let band = TAIL_BAND.min(config.basis.n_max());
    let tail_tol = config.basis.tail_tolerance();
    let dt = config.dt;
    let noise_amp = (dt / 2.0).sqrt();

    // Snapshot at the step whose time is closest to each sample time.
    let target_steps: Vec<u64> = config
        .sample_times
        .iter()
        .map(|t| (t / dt).round() as u64)
        .collect();
    let total_steps = *target_steps.last().unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut psi = psi0.amplitudes.clone();
    let mut snapshots = Vec::with_capacity(target_steps.len());
    let mut next_target = 0usize;

    let mut k1: Array1<C64> = Array1::zeros(dim);
    let mut k2: Array1<C64> = Array1::zeros(dim);
    let mut k3: Array1<C64> = Array1::zeros(dim);
    let mut k4: Array1<C64> = Array1::zeros(dim);
    let mut stage: Array1<C64> = Array1::zeros(dim);
    let mut noise: Array1<C64> = Array1::zeros(dim);

    let record = |step: u64, psi: &Array1<C64>, snapshots: &mut Vec<Array1<C64>>| -> Result<()> {
        let tail: f64 = (dim - band..dim).map(|n| psi[n].norm_sqr()).sum();
        if tail > tail_tol {
            return Err(SimError::TruncationOverflow {
                t: step as f64 * dt,
                tail_mass: tail,
                tolerance: tail_tol,
            });
        }
        snapshots.push(psi.clone());
        Ok(())
    };

    while next_target < target_steps.len() && target_steps[next_target] == 0 {
        record(0, &psi, &mut snapshots)?;
        next_target += 1;
    }

    let draw = |rng: &mut ChaCha8Rng| -> C64 {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im) * noise_amp
    };

    for step in 0..total_steps {
        let t = step as f64 * dt;

        // Ito: freeze the noise coefficient at the step start.
        let dxi_down = draw(&mut rng);
        let dxi_up = if stepper.thermal() {
            draw(&mut rng)
        } else {
            C64::new(0.0, 0.0)
        };
        stepper.noise_into(&psi, dxi_down, dxi_up, &mut noise);

        stepper.drift_into(&psi, pulse_envelope(t, train), &mut k1);
        stage_from(&mut stage, &psi, &k1, 0.5 * dt);
        stepper.drift_into(&stage, pulse_envelope(t + 0.5 * dt, train), &mut k2);
        stage_from(&mut stage, &psi, &k2, 0.5 * dt);
        stepper.drift_into(&stage, pulse_envelope(t + 0.5 * dt, train), &mut k3);
        stage_from(&mut stage, &psi, &k3, dt);
        stepper.drift_into(&stage, pulse_envelope(t + dt, train), &mut k4);

        let w = dt / 6.0;
        for n in 0..dim {
            psi[n] += w * (k1[n] + 2.0 * k2[n] + 2.0 * k3[n] + k4[n]) + noise[n];
        }
        let norm = normalize(&mut psi);
        if !norm.is_finite() || norm == 0.0 {
            return Err(SimError::IntegrationFailure {
                last_good_t: t,
                reason: format!("state norm became {norm} during a stochastic step"),
            });
        }

        let done = step + 1;
        while next_target < target_steps.len() && target_steps[next_target] == done {
            record(done, &psi, &mut snapshots)?;
            next_target += 1;
        }
    }

    Ok(snapshots)
}

/// stage = base + scale * k
fn stage_from(stage: &mut Array1<C64>, base: &Array1<C64>, k: &Array1<C64>, scale: f64) {
    ndarray::Zip::from(stage)
        .and(base)
        .and(k)
        .for_each(|s, &b, &kk| *s = b + scale * kk);
}

/// Runs the full ensemble and averages. Trajectories are dispatched in
/// fixed batches and reduced in index order, so the result is identical for
/// any number of worker threads.
pub fn ensemble_average(
    psi0: &PureState,
    config: &QsdConfig,
    params: &ModelParams,
    train: &PulseTrain,
) -> Result<EnsembleResult> {
    config.validate()?;
    params.validate()?;
    train.validate()?;

    let dim = config.basis.dim();
    let n_samples = config.sample_times.len();
    let k_total = config.n_trajectories;

    let mut density_acc: Vec<ndarray::Array2<C64>> =
        (0..n_samples).map(|_| ndarray::Array2::zeros((dim, dim))).collect();
    let mut excitation_per_traj: Vec<Vec<f64>> = vec![Vec::with_capacity(k_total); n_samples];

    let mut start = 0usize;
    while start < k_total {
        let end = (start + BATCH).min(k_total);
        let batch: Vec<Result<Vec<Array1<C64>>>> = (start..end)
            .into_par_iter()
            .map(|k| {
                run_trajectory(
                    psi0,
                    config,
                    params,
                    train,
                    trajectory_seed(config.base_seed, k as u64),
                )
            })
            .collect();
        for snapshots in batch {
            let snapshots = snapshots?;
            for (s, psi) in snapshots.iter().enumerate() {
                let acc = &mut density_acc[s];
                for i in 0..dim {
                    let pi = psi[i];
                    for j in 0..dim {
                        acc[[i, j]] += pi * psi[j].conj();
                    }
                }
                excitation_per_traj[s]
                    .push(psi.iter().enumerate().map(|(n, z)| n as f64 * z.norm_sqr()).sum());
            }
        }
        start = end;
    }

    let kf = k_total as f64;
    let mut mean_density = Vec::with_capacity(n_samples);
    let mut mean_excitation = Vec::with_capacity(n_samples);
    let mut stderr_excitation = Vec::with_capacity(n_samples);
    for s in 0..n_samples {
        let m = density_acc[s].mapv(|z| z / kf);
        mean_density.push(DensityMatrix::from_matrix_unchecked(config.basis, m));
        let xs = &excitation_per_traj[s];
        let mean = xs.iter().sum::<f64>() / kf;
        let stderr = if k_total > 1 {
            let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (kf - 1.0);
            (var / kf).sqrt()
        } else {
            0.0
        };
        mean_excitation.push(mean);
        stderr_excitation.push(stderr);
    }

    Ok(EnsembleResult {
        times: config.sample_times.clone(),
        mean_density,
        mean_excitation,
        stderr_excitation,
    })
}
