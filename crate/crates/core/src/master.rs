//! Master-equation integrator.
//!
//! Evolves the density matrix under
//!
//!   d rho/dt = -i [H(t), rho]
//!            + sum_i ( L_i rho L_i^dag - 1/2 {L_i^dag L_i, rho} )
//!
//! with classic fixed-step RK4 on the full matrix ODE. The Kerr term puts
//! eigenfrequencies of order chi*n_max^2 on the diagonal, so the step is
//! clamped to the explicit stability bound of the most detuned coherence and
//! then refined by halving until the endpoint excitation stops moving at the
//! requested tolerance. The state is re-hermitized after every step; trace is
//! never renormalized, only policed, so a trace drift shows up as an error
//! instead of being papered over.

use ndarray::Array2;

use crate::error::{Result, SimError};
use crate::fock::{
    expectation, hermitian_eigenvalues, hermiticity_error, hermitize, number, tail_mass, trace_of,
    C64, DensityMatrix, FockBasis,
};
use crate::model::{
    envelope_peak, hamiltonian_at, lindblad_ops, pulse_envelope, ModelParams, PulseTrain,
};

/// Levels summed by the truncation guard.
pub const TAIL_BAND: usize = 5;

/// RK4 keeps |lambda| dt below this on the imaginary axis (true limit 2.83).
const STABILITY_MARGIN: f64 = 2.5;

const MAX_HALVINGS: u32 = 14;

/// Fixed-step controls. `initial_dt` is an upper bound on the step; the
/// integrator may clamp it for stability and halves it until the endpoint
/// excitation changes by less than `rel_tol` (plus `abs_tol` absolute floor).
#[derive(Clone, Copy, Debug)]
pub struct StepControl {
    pub initial_dt: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            initial_dt: 1e-3,
            rel_tol: 1e-6,
            abs_tol: 1e-9,
        }
    }
}

impl StepControl {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_dt > 0.0 && self.initial_dt.is_finite()) {
            return Err(SimError::InvalidArgument(format!(
                "initial_dt must be positive and finite, got {}",
                self.initial_dt
            )));
        }
        if !(self.rel_tol > 0.0) || !(self.abs_tol >= 0.0) {
            return Err(SimError::InvalidArgument(
                "rel_tol must be > 0 and abs_tol >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct EvolutionConfig {
    pub t_start: f64,
    pub t_end: f64,
    /// Strictly increasing snapshot times inside [t_start, t_end].
    pub sample_times: Vec<f64>,
    pub step_control: StepControl,
    pub basis: FockBasis,
}

impl EvolutionConfig {
    pub fn new(
        t_start: f64,
        t_end: f64,
        sample_times: Vec<f64>,
        step_control: StepControl,
        basis: FockBasis,
    ) -> Result<Self> {
        let config = Self {
            t_start,
            t_end,
            sample_times,
            step_control,
            basis,
        };
        config.validate()?;
        Ok(config)
    }

    /// Samples every `stride` from t_start, always including t_end.
    pub fn uniform(
        t_start: f64,
        t_end: f64,
        stride: f64,
        step_control: StepControl,
        basis: FockBasis,
    ) -> Result<Self> {
        if !(stride > 0.0) {
            return Err(SimError::InvalidArgument(format!(
                "sample stride must be > 0, got {stride}"
            )));
        }
        let mut sample_times = Vec::new();
        let mut k = 0u64;
        loop {
            let t = t_start + k as f64 * stride;
            if t > t_end - 1e-12 * stride {
                break;
            }
            sample_times.push(t);
            k += 1;
        }
        sample_times.push(t_end);
        Self::new(t_start, t_end, sample_times, step_control, basis)
    }

    pub fn validate(&self) -> Result<()> {
        let mut faults = Vec::new();
        if !(self.t_start < self.t_end) {
            faults.push(format!(
                "t_start {} must be below t_end {}",
                self.t_start, self.t_end
            ));
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
        if let (Some(first), Some(last)) = (self.sample_times.first(), self.sample_times.last()) {
            if *first < self.t_start - 1e-12 || *last > self.t_end + 1e-12 {
                faults.push("sample_times must lie within [t_start, t_end]".into());
            }
        }
        if let Err(e) = self.step_control.validate() {
            faults.push(e.to_string());
        }
        if faults.is_empty() {
            Ok(())
        } else {
            Err(SimError::InvalidArgument(faults.join("; ")))
        }
    }
}

/// Per-sample health numbers recorded alongside each snapshot.
#[derive(Clone, Copy, Debug)]
pub struct SampleDiagnostics {
    pub trace_error: f64,
    pub hermiticity_error: f64,
    pub min_eigenvalue: f64,
    pub tail_mass: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub diagnostics: Vec<SampleDiagnostics>,
}

/// Right-hand side of the master equation at time t, built from dense
/// operator products. This is the readable reference route; the integrator
/// runs an equivalent band-structured kernel (see [`Liouvillian`]) that the
/// tests pin against this one.
pub fn liouvillian_apply(
    rho: &DensityMatrix,
    t: f64,
    params: &ModelParams,
    train: &PulseTrain,
) -> Result<Array2<C64>> {
    params.validate()?;
    train.validate()?;
    let basis = rho.basis();
    let h = hamiltonian_at(t, params, train, basis);
    let minus_i = C64::new(0.0, -1.0);
    let mut out = (&h.matrix.dot(&rho.matrix) - &rho.matrix.dot(&h.matrix)).mapv(|z| z * minus_i);
    for l in lindblad_ops(params, basis) {
        let ldag = l.adjoint();
        let ldl = ldag.matrix.dot(&l.matrix);
        out += &l.matrix.dot(&rho.matrix).dot(&ldag.matrix);
        out -= &(&ldl.dot(&rho.matrix) + &rho.matrix.dot(&ldl)).mapv(|z| z * 0.5);
    }
    Ok(out)
}

/// Band-structured application of the same superoperator. The Hamiltonian
/// couples n to n +- 2 and the damping shifts both indices by one, so a full
/// right-hand side costs O(dim^2) instead of the O(dim^3) of dense products.
pub(crate) struct Liouvillian {
    dim: usize,
    /// delta*n + chi*n^2
    e: Vec<f64>,
    /// sqrt(n)
    sr: Vec<f64>,
    /// sqrt((n+1)(n+2)), the two-photon matrix element n <-> n+2
    s2: Vec<f64>,
    /// e^{i phi} * drive
    up: C64,
    /// (N+1) gamma
    gdown: f64,
    /// N gamma
    gup: f64,
    /// diag of a a^dag in the truncated basis: n+1, except 0 in the corner
    dup: Vec<f64>,
}

impl Liouvillian {
    pub fn new(params: &ModelParams, basis: FockBasis) -> Self {
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
        let dup = (0..dim)
            .map(|n| if n + 1 < dim { (n + 1) as f64 } else { 0.0 })
            .collect();
        Self {
            dim,
            e,
            sr,
            s2,
            up: C64::from_polar(params.drive, params.phi),
            gdown: (params.nbath + 1.0) * params.gamma,
            gup: params.nbath * params.gamma,
            dup,
        }
    }

    /// out = L[rho] with the drive envelope already evaluated to `f`.
    pub fn apply_into(&self, rho: &Array2<C64>, f: f64, out: &mut Array2<C64>) {
        let d = self.dim;
        let up = self.up * f;
        let upc = up.conj();
        let minus_i = C64::new(0.0, -1.0);
        let thermal = self.gup > 0.0;
        for n in 0..d {
            for m in 0..d {
                // -i [H, rho]: diagonal part rotates, drive part couples +-2.
                let mut acc = C64::new(self.e[n] - self.e[m], 0.0) * rho[[n, m]];
                if up != C64::new(0.0, 0.0) {
                    let mut drv = C64::new(0.0, 0.0);
                    if n >= 2 {
                        drv += up * (self.s2[n - 2] * rho[[n - 2, m]]);
                    }
                    if m + 2 < d {
                        drv -= up * (self.s2[m] * rho[[n, m + 2]]);
                    }
                    if n + 2 < d {
                        drv += upc * (self.s2[n] * rho[[n + 2, m]]);
                    }
                    if m >= 2 {
                        drv -= upc * (self.s2[m - 2] * rho[[n, m - 2]]);
                    }
                    acc += drv;
                }
                acc *= minus_i;

                // Decay channel sqrt((N+1) gamma) a.
                if n + 1 < d && m + 1 < d {
                    acc += (self.gdown * self.sr[n + 1] * self.sr[m + 1]) * rho[[n + 1, m + 1]];
                }
                acc -= (0.5 * self.gdown * (n + m) as f64) * rho[[n, m]];

                // Thermal channel sqrt(N gamma) a^dag.
                if thermal {
                    if n >= 1 && m >= 1 {
                        acc += (self.gup * self.sr[n] * self.sr[m]) * rho[[n - 1, m - 1]];
                    }
                    acc -= (0.5 * self.gup * (self.dup[n] + self.dup[m])) * rho[[n, m]];
                }

                out[[n, m]] = acc;
            }
        }
    }

    /// Gershgorin-style bound on the fastest coherence frequency, used to
    /// clamp the explicit step.
    pub fn rate_bound(&self, peak_envelope: f64) -> f64 {
        let g = self.up.norm() * peak_envelope;
        let mut h_bound = 0.0f64;
        for n in 0..self.dim {
            let below = if n >= 2 { self.s2[n - 2] } else { 0.0 };
            let mut r = self.e[n].abs() + g * (below + self.s2[n]);
            r += 0.5 * self.gdown * n as f64 + 0.5 * self.gup * self.dup[n];
            h_bound = h_bound.max(r);
        }
        2.0 * h_bound + self.gdown + self.gup
    }
}

enum RunOutcome {
    Done {
        trajectory: Trajectory,
        final_excitation: f64,
    },
    TailOverflow {
        t: f64,
        mass: f64,
    },
    Diverged {
        t: f64,
    },
}

/// Integrates rho0 over [t_start, t_end], returning snapshots at the
/// configured sample times.
pub fn integrate_master(
    rho0: &DensityMatrix,
    config: &EvolutionConfig,
    params: &ModelParams,
    train: &PulseTrain,
) -> Result<Trajectory> {
    config.validate()?;
    params.validate()?;
    train.validate()?;
    if rho0.basis() != config.basis {
        return Err(SimError::InvalidArgument(
            "initial state basis differs from config basis".into(),
        ));
    }

    let kernel = Liouvillian::new(params, config.basis);
    let dt_stable = STABILITY_MARGIN / kernel.rate_bound(envelope_peak(train)).max(1e-300);
    let dt0 = config.step_control.initial_dt.min(dt_stable);

    let mut dt = dt0;
    let mut previous: Option<RunOutcome> = None;
    for _ in 0..=MAX_HALVINGS {
        let outcome = run_fixed(rho0, config, train, &kernel, dt)?;

        let mut accept = false;
        if let (
            Some(RunOutcome::Done {
                final_excitation: coarse,
                ..
            }),
            RunOutcome::Done {
                final_excitation: fine,
                ..
            },
        ) = (&previous, &outcome)
        {
            let tol = config.step_control.rel_tol * fine.abs() + config.step_control.abs_tol;
            accept = (coarse - fine).abs() <= tol;
        }
        if accept {
            match outcome {
                RunOutcome::Done { trajectory, .. } => return Ok(trajectory),
                _ => unreachable!(),
            }
        }

        // The same overflow at two resolutions is a genuine truncation
        // problem, not an instability artifact.
        if matches!(
            (&previous, &outcome),
            (
                Some(RunOutcome::TailOverflow { .. }),
                RunOutcome::TailOverflow { .. }
            )
        ) {
            if let RunOutcome::TailOverflow { t, mass } = outcome {
                return Err(SimError::TruncationOverflow {
                    t,
                    tail_mass: mass,
                    tolerance: config.basis.tail_tolerance(),
                });
            }
        }

        previous = Some(outcome);
        dt *= 0.5;
    }

    match previous {
        Some(RunOutcome::Diverged { t }) => Err(SimError::IntegrationFailure {
            last_good_t: t,
            reason: format!("step-size underflow below {dt:.3e} without convergence"),
        }),
        Some(RunOutcome::TailOverflow { t, mass }) => Err(SimError::TruncationOverflow {
            t,
            tail_mass: mass,
            tolerance: config.basis.tail_tolerance(),
        }),
        _ => Err(SimError::IntegrationFailure {
            last_good_t: config.t_end,
            reason: format!(
                "endpoint excitation did not converge at rel_tol {} after {} halvings from dt {:.3e}",
                config.step_control.rel_tol, MAX_HALVINGS, dt0
            ),
        }),
    }
}

fn run_fixed(
    rho0: &DensityMatrix,
    config: &EvolutionConfig,
    train: &PulseTrain,
    kernel: &Liouvillian,
    dt: f64,
) -> Result<RunOutcome> {
    let dim = config.basis.dim();
    let band = TAIL_BAND.min(config.basis.n_max());
    let number_op = number(config.basis);

    let mut rho = rho0.matrix.clone();
    let mut k1 = Array2::zeros((dim, dim));
    let mut k2 = Array2::zeros((dim, dim));
    let mut k3 = Array2::zeros((dim, dim));
    let mut k4 = Array2::zeros((dim, dim));
    let mut stage: Array2<C64> = Array2::zeros((dim, dim));

    let mut times = Vec::with_capacity(config.sample_times.len());
    let mut states = Vec::with_capacity(config.sample_times.len());
    let mut diagnostics = Vec::with_capacity(config.sample_times.len());

    let mut t = config.t_start;
    let mut next_sample = 0usize;
    let mut last_good_t = t;
    let mut steps_since_check = 0u32;
    let time_eps = 1e-12 * (1.0 + config.t_end.abs());

    let record = |t: f64,
                  rho: &Array2<C64>,
                  times: &mut Vec<f64>,
                  states: &mut Vec<DensityMatrix>,
                  diagnostics: &mut Vec<SampleDiagnostics>|
     -> Option<RunOutcome> {
        let state = DensityMatrix::from_matrix_unchecked(config.basis, rho.clone());
        let diag = SampleDiagnostics {
            trace_error: (trace_of(rho) - C64::new(1.0, 0.0)).norm(),
            hermiticity_error: hermiticity_error(rho),
            min_eigenvalue: hermitian_eigenvalues(rho)
                .into_iter()
                .fold(f64::INFINITY, f64::min),
            tail_mass: tail_mass(&state, band),
        };
        // Trace is conserved analytically, so visible drift means the
        // resolution cannot be trusted; report it so the caller halves.
        if !diag.trace_error.is_finite() || diag.trace_error > 1e-8 {
            return Some(RunOutcome::Diverged { t });
        }
        if diag.tail_mass > config.basis.tail_tolerance() {
            return Some(RunOutcome::TailOverflow {
                t,
                mass: diag.tail_mass,
            });
        }
        times.push(t);
        states.push(state);
        diagnostics.push(diag);
        None
    };

    while next_sample < config.sample_times.len()
        && config.sample_times[next_sample] <= t + time_eps
    {
        if let Some(bad) = record(
            config.sample_times[next_sample],
            &rho,
            &mut times,
            &mut states,
            &mut diagnostics,
        ) {
            return Ok(bad);
        }
        next_sample += 1;
    }

    while t < config.t_end - time_eps {
        let target = if next_sample < config.sample_times.len() {
            config.sample_times[next_sample].min(config.t_end)
        } else {
            config.t_end
        };
        let h = dt.min(target - t);

        // RK4 stages; the envelope is the only explicit time dependence.
        kernel.apply_into(&rho, pulse_envelope(t, train), &mut k1);
        azpy(&mut stage, &rho, &k1, 0.5 * h);
        kernel.apply_into(&stage, pulse_envelope(t + 0.5 * h, train), &mut k2);
        azpy(&mut stage, &rho, &k2, 0.5 * h);
        kernel.apply_into(&stage, pulse_envelope(t + 0.5 * h, train), &mut k3);
        azpy(&mut stage, &rho, &k3, h);
        kernel.apply_into(&stage, pulse_envelope(t + h, train), &mut k4);

        let w = h / 6.0;
        ndarray::Zip::from(&mut rho)
            .and(&k1)
            .and(&k2)
            .and(&k3)
            .and(&k4)
            .for_each(|r, &a, &b, &c, &d| {
                *r += w * (a + 2.0 * b + 2.0 * c + d);
            });
        hermitize(&mut rho);

        t = if (target - t) - h <= time_eps {
            target
        } else {
            t + h
        };

        steps_since_check += 1;
        if steps_since_check >= 64 {
            steps_since_check = 0;
            let tr = trace_of(&rho);
            if !tr.is_finite() || (tr - C64::new(1.0, 0.0)).norm() > 1e-3 {
                return Ok(RunOutcome::Diverged { t: last_good_t });
            }
            last_good_t = t;
        }

        while next_sample < config.sample_times.len()
            && config.sample_times[next_sample] <= t + time_eps
        {
            if let Some(bad) = record(
                config.sample_times[next_sample],
                &rho,
                &mut times,
                &mut states,
                &mut diagnostics,
            ) {
                return Ok(bad);
            }
            next_sample += 1;
        }
    }

    let trace_err = (trace_of(&rho) - C64::new(1.0, 0.0)).norm();
    if !trace_err.is_finite() || trace_err > 1e-8 {
        return Ok(RunOutcome::Diverged { t: last_good_t });
    }

    let final_state = DensityMatrix::from_matrix_unchecked(config.basis, rho);
    let final_excitation = expectation(&number_op, &final_state)?.re;
    Ok(RunOutcome::Done {
        trajectory: Trajectory {
            times,
            states,
            diagnostics,
        },
        final_excitation,
    })
}

/// stage = base + scale * k
fn azpy(stage: &mut Array2<C64>, base: &Array2<C64>, k: &Array2<C64>, scale: f64) {
    ndarray::Zip::from(stage)
        .and(base)
        .and(k)
        .for_each(|s, &b, &kk| *s = b + scale * kk);
}

/// Integrates from vacuum under a monochromatic drive until the right-hand
/// side is stationary: max_ij |d rho_ij / dt| < tol.
pub fn steady_state(params: &ModelParams, basis: FockBasis, tol: f64) -> Result<DensityMatrix> {
    params.validate()?;
    if !(tol > 0.0) {
        return Err(SimError::InvalidArgument(format!(
            "stationarity tolerance must be > 0, got {tol}"
        )));
    }
    let kernel = Liouvillian::new(params, basis);
    let dt = (STABILITY_MARGIN / kernel.rate_bound(1.0).max(1e-300)).min(1e-3);
    let horizon = 600.0 / params.gamma;
    let chunk = 1.0 / params.gamma;

    let mut rho = DensityMatrix::vacuum(basis).matrix;
    let mut rhs: Array2<C64> = Array2::zeros(rho.raw_dim());
    let mut t = 0.0;
    let mut residual = f64::INFINITY;
    while t < horizon {
        let steps = (chunk / dt).ceil() as usize;
        let h = chunk / steps as f64;
        let mut k1 = Array2::zeros(rho.raw_dim());
        let mut k2 = Array2::zeros(rho.raw_dim());
        let mut k3 = Array2::zeros(rho.raw_dim());
        let mut k4 = Array2::zeros(rho.raw_dim());
        let mut stage = Array2::zeros(rho.raw_dim());
        for _ in 0..steps {
            kernel.apply_into(&rho, 1.0, &mut k1);
            azpy(&mut stage, &rho, &k1, 0.5 * h);
            kernel.apply_into(&stage, 1.0, &mut k2);
            azpy(&mut stage, &rho, &k2, 0.5 * h);
            kernel.apply_into(&stage, 1.0, &mut k3);
            azpy(&mut stage, &rho, &k3, h);
            kernel.apply_into(&stage, 1.0, &mut k4);
            let w = h / 6.0;
            ndarray::Zip::from(&mut rho)
                .and(&k1)
                .and(&k2)
                .and(&k3)
                .and(&k4)
                .for_each(|r, &a, &b, &c, &d| {
                    *r += w * (a + 2.0 * b + 2.0 * c + d);
                });
            hermitize(&mut rho);
        }
        t += chunk;
        let tr = trace_of(&rho);
        if !tr.is_finite() {
            return Err(SimError::IntegrationFailure {
                last_good_t: t - chunk,
                reason: "state diverged while relaxing toward the steady state".into(),
            });
        }
        kernel.apply_into(&rho, 1.0, &mut rhs);
        residual = rhs.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if residual < tol {
            let state = DensityMatrix::from_matrix_unchecked(basis, rho);
            let band = TAIL_BAND.min(basis.n_max());
            let mass = tail_mass(&state, band);
            if mass > basis.tail_tolerance() {
                return Err(SimError::TruncationOverflow {
                    t,
                    tail_mass: mass,
                    tolerance: basis.tail_tolerance(),
                });
            }
            return Ok(state);
        }
    }
    Err(SimError::NonStationary {
        horizon,
        residual,
        tol,
    })
}

/// Convenience: Tr(rho a^dag a).
pub fn mean_excitation_of(rho: &DensityMatrix) -> f64 {
    (0..rho.basis().dim())
        .map(|n| n as f64 * rho.matrix[[n, n]].re)
        .sum()
}
