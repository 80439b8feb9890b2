//! Physical model: a Kerr-anharmonic oscillator, parametrically driven by a
//! train of Gaussian two-photon pulses, damped by a thermal reservoir.
//!
//! In the frame rotating at half the drive frequency the Hamiltonian is
//!
//!   H(t)/hbar = delta a^dag a + chi (a^dag a)^2
//!             + drive f(t) (e^{i phi} a^dag^2 + e^{-i phi} a^2)
//!
//! with f(t) = sum_n exp(-(t - t0 - n tau)^2 / T^2) the pulse envelope
//! (f = 1 for a monochromatic drive). Damping enters through the standard
//! pair of Lindblad operators sqrt((N+1) gamma) a and sqrt(N gamma) a^dag.
//! All rates are quoted in units of the decay rate gamma.

use crate::error::{Result, SimError};
use crate::fock::{annihilation, creation, C64, FockBasis, Operator};

/// Rotating-frame model parameters.
///
/// `drive` is the product of the parametric coupling and the peak pump
/// amplitude (the quantity quoted as a single number alongside detuning and
/// anharmonicity), so the interaction term is drive * f(t) at peak f = 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    /// Detuning of the oscillator from half the drive frequency.
    pub delta: f64,
    /// Kerr anharmonicity (>= 0).
    pub chi: f64,
    /// Peak two-photon drive rate (>= 0).
    pub drive: f64,
    /// Pump phase.
    pub phi: f64,
    /// Energy decay rate (> 0); the natural time unit is 1/gamma.
    pub gamma: f64,
    /// Mean thermal occupation of the reservoir (>= 0).
    pub nbath: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            delta: 0.0,
            chi: 0.0,
            drive: 0.0,
            phi: 0.0,
            gamma: 1.0,
            nbath: 0.0,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let mut faults = Vec::new();
        for (name, v) in [
            ("delta", self.delta),
            ("chi", self.chi),
            ("drive", self.drive),
            ("phi", self.phi),
            ("gamma", self.gamma),
            ("nbath", self.nbath),
        ] {
            if !v.is_finite() {
                faults.push(format!("{name} must be finite, got {v}"));
            }
        }
        if self.chi < 0.0 {
            faults.push(format!("chi must be >= 0, got {}", self.chi));
        }
        if self.drive < 0.0 {
            faults.push(format!("drive must be >= 0, got {}", self.drive));
        }
        if !(self.gamma > 0.0) {
            faults.push(format!("gamma must be > 0, got {}", self.gamma));
        }
        if self.nbath < 0.0 {
            faults.push(format!("nbath must be >= 0, got {}", self.nbath));
        }
        if faults.is_empty() {
            Ok(())
        } else {
            Err(SimError::InvalidArgument(faults.join("; ")))
        }
    }
}

/// Number of pulses in a train.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PulseCount {
    Finite(u32),
    Unbounded,
}

/// Gaussian pulse train f(t) = sum_n exp(-(t - t0 - n*period)^2 / width^2),
/// or a monochromatic drive with f identically 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseTrain {
    /// Center of the first pulse.
    pub t0: f64,
    /// Gaussian width T.
    pub width: f64,
    /// Repetition period tau.
    pub period: f64,
    pub count: PulseCount,
    pub monochromatic: bool,
}

impl PulseTrain {
    pub fn gaussian(t0: f64, width: f64, period: f64, count: PulseCount) -> Result<Self> {
        let train = Self {
            t0,
            width,
            period,
            count,
            monochromatic: false,
        };
        train.validate()?;
        Ok(train)
    }

    pub fn monochromatic() -> Self {
        Self {
            t0: 0.0,
            width: 1.0,
            period: 1.0,
            count: PulseCount::Unbounded,
            monochromatic: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.monochromatic {
            return Ok(());
        }
        let mut faults = Vec::new();
        if !(self.t0 >= 0.0) {
            faults.push(format!("t0 must be >= 0, got {}", self.t0));
        }
        if !(self.width > 0.0) {
            faults.push(format!("width must be > 0, got {}", self.width));
        }
        if !(self.period > 0.0) {
            faults.push(format!("period must be > 0, got {}", self.period));
        }
        if let PulseCount::Finite(0) = self.count {
            faults.push("count must be >= 1".into());
        }
        if faults.is_empty() {
            Ok(())
        } else {
            Err(SimError::InvalidArgument(faults.join("; ")))
        }
    }
}

/// Drive envelope f(t).
///
/// The sum keeps only terms with |t - t0 - n*period| <= 8*width*max(1,
/// period/width); the first neglected term is below exp(-64) of the peak, far
/// under double-precision noise for any train worth simulating.
pub fn pulse_envelope(t: f64, train: &PulseTrain) -> f64 {
    if train.monochromatic {
        return 1.0;
    }
    let window = 8.0 * train.width * (train.period / train.width).max(1.0);
    let lo = ((t - train.t0 - window) / train.period).ceil().max(0.0) as i64;
    let hi_window = ((t - train.t0 + window) / train.period).floor();
    let hi = match train.count {
        PulseCount::Finite(c) => hi_window.min((c - 1) as f64),
        PulseCount::Unbounded => hi_window,
    };
    if hi < lo as f64 {
        return 0.0;
    }
    let mut f = 0.0;
    for n in lo..=(hi as i64) {
        let u = (t - train.t0 - n as f64 * train.period) / train.width;
        f += (-u * u).exp();
    }
    f
}

/// Upper estimate of max_t f(t), used for explicit-integrator step bounds.
pub fn envelope_peak(train: &PulseTrain) -> f64 {
    if train.monochromatic {
        return 1.0;
    }
    // Overlapping neighbors can push the peak above 1; sample one period.
    let mut peak = 0.0f64;
    let steps = 200;
    for i in 0..=steps {
        let t = train.t0 + train.period * i as f64 / steps as f64;
        peak = peak.max(pulse_envelope(t, train));
    }
    peak * 1.0001
}

/// H(t) as a dense operator; see the module header for the expression.
pub fn hamiltonian_at(
    t: f64,
    params: &ModelParams,
    train: &PulseTrain,
    basis: FockBasis,
) -> Operator {
    let mut h = Operator::zeros(basis);
    for n in 0..basis.dim() {
        let nf = n as f64;
        h.matrix[[n, n]] = C64::new(params.delta * nf + params.chi * nf * nf, 0.0);
    }
    let g = params.drive * pulse_envelope(t, train);
    if g != 0.0 {
        let up = C64::from_polar(g, params.phi);
        for n in 0..basis.dim().saturating_sub(2) {
            let amp = (((n + 1) * (n + 2)) as f64).sqrt();
            // <n+2| a^dag^2 |n> = sqrt((n+1)(n+2))
            h.matrix[[n + 2, n]] = up * amp;
            h.matrix[[n, n + 2]] = up.conj() * amp;
        }
    }
    h
}

/// Damping operators: sqrt((N+1) gamma) a, plus sqrt(N gamma) a^dag when the
/// reservoir is thermally occupied.
pub fn lindblad_ops(params: &ModelParams, basis: FockBasis) -> Vec<Operator> {
    let down = annihilation(basis).scaled(C64::new(
        ((params.nbath + 1.0) * params.gamma).sqrt(),
        0.0,
    ));
    let mut ops = vec![down];
    if params.nbath > 0.0 {
        ops.push(creation(basis).scaled(C64::new((params.nbath * params.gamma).sqrt(), 0.0)));
    }
    ops
}

/// Detuning of the two-photon transition n -> n+2 from the pump:
/// 2*delta + chi*(4n + 4). The anharmonicity staggers the ladder so at most
/// one pair of levels is near-resonant at a time.
pub fn two_quanta_detuning(n: usize, params: &ModelParams) -> f64 {
    2.0 * params.delta + params.chi * (4.0 * n as f64 + 4.0)
}

/// Classical pump-intensity threshold (gamma^2 + delta^2) / omega^2 above
/// which the mean-field oscillation amplitude becomes nonzero.
pub fn threshold_intensity(params: &ModelParams, omega: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(SimError::InvalidArgument(format!(
            "parametric coupling omega must be > 0, got {omega}"
        )));
    }
    Ok((params.gamma * params.gamma + params.delta * params.delta) / (omega * omega))
}

/// Mean-field steady state of the monochromatically pumped oscillator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SemiclassicalSolution {
    pub above_threshold: bool,
    /// Steady oscillation quanta n; None below threshold.
    pub photon_number: Option<f64>,
    /// The two locked phases, differing by exactly pi; None below threshold.
    pub phases: Option<(f64, f64)>,
}

/// Solves the mean-field fixed point for pump intensity I and coupling omega.
///
/// With J = omega^2 I / gamma^2 the nonzero-amplitude solution is
///   n = (gamma / 2 chi) (delta/gamma + sqrt(J - 1)),
///   sin(phi - 2 theta) = J^{-1/2}
/// for the locked phases theta and theta + pi. J <= 1 or negative n means
/// only the zero-amplitude state survives.
pub fn semiclassical_steady_state(
    params: &ModelParams,
    omega: f64,
    intensity: f64,
) -> Result<SemiclassicalSolution> {
    if !(params.chi > 0.0) {
        return Err(SimError::InvalidArgument(
            "semiclassical photon number requires chi > 0".into(),
        ));
    }
    if !(omega > 0.0) {
        return Err(SimError::InvalidArgument(format!(
            "parametric coupling omega must be > 0, got {omega}"
        )));
    }
    if !(intensity >= 0.0) {
        return Err(SimError::InvalidArgument(format!(
            "pump intensity must be >= 0, got {intensity}"
        )));
    }
    let j = omega * omega * intensity / (params.gamma * params.gamma);
    if j <= 1.0 {
        return Ok(SemiclassicalSolution {
            above_threshold: false,
            photon_number: None,
            phases: None,
        });
    }
    let n = params.gamma / (2.0 * params.chi) * (params.delta / params.gamma + (j - 1.0).sqrt());
    if n < 0.0 {
        return Ok(SemiclassicalSolution {
            above_threshold: false,
            photon_number: None,
            phases: None,
        });
    }
    let theta = 0.5 * (params.phi - (1.0 / j.sqrt()).asin());
    Ok(SemiclassicalSolution {
        above_threshold: true,
        photon_number: Some(n),
        phases: Some((theta, theta + std::f64::consts::PI)),
    })
}
