//! Phase-space observables: Fock populations, fidelity, and the Wigner
//! function with its symmetry and negativity measures.
//!
//! Convention: W integrates to 1 over the plane and the vacuum peaks at
//! 2/pi. The Fock-basis kernel for m >= n is
//!
//!   W_mn(r, theta) = (2/pi) (-1)^n sqrt(n!/m!) e^{i(m-n)theta}
//!                    (2r)^{m-n} e^{-2r^2} L_n^{(m-n)}(4 r^2)
//!
//! and W_nm is its conjugate, so a Hermitian density matrix always yields a
//! real field. The field evaluator exploits exactly that: it walks the
//! diagonals of rho, pairing each upper-triangle element with its mirror, and
//! never materializes an imaginary part. Factorial ratios are accumulated
//! multiplicatively together with the (2r)^k power, which keeps every
//! intermediate finite for the grid sizes in use even at n_max = 50.

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Result, SimError};
use crate::fock::{C64, DensityMatrix, PureState};

/// Evaluation grid over the phase-space plane alpha = x + i y = r e^{i theta}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WignerGrid {
    Cartesian {
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
        n_x: usize,
        n_y: usize,
    },
    /// Radii include 0 and r_max; angles are 2 pi j / n_theta, endpoint
    /// excluded (it duplicates j = 0).
    Polar { r_max: f64, n_r: usize, n_theta: usize },
}

impl WignerGrid {
    /// Square window that comfortably holds states up to a few photons.
    pub fn default_cartesian() -> Self {
        WignerGrid::Cartesian {
            x_min: -5.0,
            x_max: 5.0,
            y_min: -5.0,
            y_max: 5.0,
            n_x: 201,
            n_y: 201,
        }
    }

    /// Even angle count so that theta + pi lands back on the grid.
    pub fn default_polar() -> Self {
        WignerGrid::Polar {
            r_max: 5.0,
            n_r: 101,
            n_theta: 128,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            WignerGrid::Cartesian {
                x_min,
                x_max,
                y_min,
                y_max,
                n_x,
                n_y,
            } => {
                let mut faults = Vec::new();
                if !(x_min < x_max) || !(y_min < y_max) {
                    faults.push("grid extents must satisfy min < max".to_string());
                }
                if n_x < 2 || n_y < 2 {
                    faults.push("grid needs at least 2 points per axis".to_string());
                }
                if ![x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite()) {
                    faults.push("grid extents must be finite".to_string());
                }
                if faults.is_empty() {
                    Ok(())
                } else {
                    Err(SimError::InvalidArgument(faults.join("; ")))
                }
            }
            WignerGrid::Polar { r_max, n_r, n_theta } => {
                let mut faults = Vec::new();
                if !(r_max > 0.0 && r_max.is_finite()) {
                    faults.push(format!("r_max must be positive and finite, got {r_max}"));
                }
                if n_r < 2 || n_theta < 2 {
                    faults.push("grid needs at least 2 points per axis".to_string());
                }
                if faults.is_empty() {
                    Ok(())
                } else {
                    Err(SimError::InvalidArgument(faults.join("; ")))
                }
            }
        }
    }

    /// (rows, cols) of the value matrix: (n_y, n_x) or (n_r, n_theta).
    pub fn shape(&self) -> (usize, usize) {
        match *self {
            WignerGrid::Cartesian { n_x, n_y, .. } => (n_y, n_x),
            WignerGrid::Polar { n_r, n_theta, .. } => (n_r, n_theta),
        }
    }
}

#[derive(Clone, Debug)]
pub struct WignerField {
    pub grid: WignerGrid,
    /// Row-major samples; rows run over y (Cartesian) or r (polar).
    pub values: Array2<f64>,
    pub min_value: f64,
    /// Quadrature of the field over the plane; 1 for states the grid holds.
    pub integral: f64,
}

/// Diagonal of rho as a plain probability vector.
pub fn populations(rho: &DensityMatrix) -> Vec<f64> {
    (0..rho.basis().dim()).map(|n| rho.matrix[[n, n]].re).collect()
}

/// Tr(rho a^dag a).
pub fn mean_excitation(rho: &DensityMatrix) -> f64 {
    (0..rho.basis().dim())
        .map(|n| n as f64 * rho.matrix[[n, n]].re)
        .sum()
}

/// Overlap <psi| rho |psi> with a normalized pure state.
pub fn fidelity_pure(rho: &DensityMatrix, psi: &PureState) -> Result<f64> {
    if rho.basis() != psi.basis() {
        return Err(SimError::InvalidArgument(
            "state and density matrix live in different bases".into(),
        ));
    }
    let dim = rho.basis().dim();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..dim {
        let mut row = C64::new(0.0, 0.0);
        for j in 0..dim {
            row += rho.matrix[[i, j]] * psi.amplitudes[j];
        }
        acc += psi.amplitudes[i].conj() * row;
    }
    debug_assert!(acc.im.abs() <= 1e-10);
    Ok(acc.re)
}

/// Fock-basis Wigner coefficient W_mn at a single phase-space point.
pub fn wigner_fock_coeff(m: usize, n: usize, r: f64, theta: f64) -> Result<C64> {
    if !(r >= 0.0 && r.is_finite()) || !theta.is_finite() {
        return Err(SimError::InvalidArgument(format!(
            "phase-space point (r={r}, theta={theta}) out of range"
        )));
    }
    if m < n {
        return Ok(wigner_fock_coeff(n, m, r, theta)?.conj());
    }
    let k = m - n;
    let x = 4.0 * r * r;
    // sqrt(n!/m!) (2r)^k as a running product, then the Laguerre value.
    let mut q = 1.0;
    for j in n + 1..=m {
        q *= 2.0 * r / (j as f64).sqrt();
    }
    let lag = laguerre(n, k, x);
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let magnitude = (2.0 / std::f64::consts::PI) * sign * q * (-2.0 * r * r).exp() * lag;
    Ok(C64::from_polar(1.0, k as f64 * theta) * magnitude)
}

/// Generalized Laguerre L_n^{(k)}(x) by upward recurrence in the degree.
fn laguerre(n: usize, k: usize, x: f64) -> f64 {
    let kf = k as f64;
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut curr = 1.0 + kf - x;
    for j in 1..n {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + kf - x) * curr - (jf + kf) * prev) / (jf + 1.0);
        prev = curr;
        curr = next;
    }
    curr
}

/// W at a single polar point, summing over the stored diagonals of rho.
/// `diag_active[k]` marks k-diagonals with any nonzero element; parity-pure
/// states switch off every odd k exactly, halving the work.
fn wigner_point(rho: &Array2<C64>, diag_active: &[bool], r: f64, theta: f64) -> f64 {
    let dim = rho.nrows();
    let x = 4.0 * r * r;
    let two_r = 2.0 * r;

    // k = 0: the populations against plain Laguerre polynomials.
    let mut total = 0.0;
    {
        let mut prev = 1.0;
        let mut curr = 1.0 - x;
        total += rho[[0, 0]].re * prev;
        if dim > 1 {
            total -= rho[[1, 1]].re * curr;
        }
        // sign tracks (-1)^n; it enters the loop holding the n = 1 value.
        let mut sign = -1.0;
        for n in 2..dim {
            let jf = (n - 1) as f64;
            let next = ((2.0 * jf + 1.0 - x) * curr - jf * prev) / (jf + 1.0);
            prev = curr;
            curr = next;
            sign = -sign;
            total += sign * rho[[n, n]].re * curr;
        }
    }

    // k >= 1: each diagonal contributes 2 Re(e^{i k theta} s_k).
    let rot = C64::from_polar(1.0, theta);
    let mut phase = C64::new(1.0, 0.0);
    let mut q_head = 1.0; // (2r)^k / sqrt(k!)  ==  q_{0,k}
    for k in 1..dim {
        phase *= rot;
        q_head *= two_r / (k as f64).sqrt();
        if !diag_active[k] {
            continue;
        }
        let kf = k as f64;
        let mut s = C64::new(0.0, 0.0);
        let mut q = q_head;
        let mut prev = 1.0;
        let mut curr = 1.0 + kf - x;
        s += rho[[0, k]] * (q * prev);
        if dim - k > 1 {
            q *= (1.0f64 / (1.0 + kf)).sqrt();
            s += rho[[1, 1 + k]] * (-q * curr);
        }
        let mut sign = -1.0;
        for n in 2..dim - k {
            let nf = n as f64;
            let jf = nf - 1.0;
            let next = ((2.0 * jf + 1.0 + kf - x) * curr - (jf + kf) * prev) / (jf + 1.0);
            prev = curr;
            curr = next;
            q *= (nf / (nf + kf)).sqrt();
            sign = -sign;
            s += rho[[n, n + k]] * (sign * q * curr);
        }
        let term = phase * s;
        total += 2.0 * term.re;
    }

    (2.0 / std::f64::consts::PI) * (-2.0 * r * r).exp() * total
}

/// Samples the Wigner function of rho on the given grid.
pub fn wigner(rho: &DensityMatrix, grid: &WignerGrid) -> Result<WignerField> {
    grid.validate()?;
    let herm = rho.hermiticity_error();
    if herm > 1e-8 {
        return Err(SimError::InvalidArgument(format!(
            "density matrix is not Hermitian enough for a real Wigner field \
             (deviation {herm:.3e})"
        )));
    }
    let dim = rho.basis().dim();
    let diag_active: Vec<bool> = (0..dim)
        .map(|k| (0..dim - k).any(|n| rho.matrix[[n, n + k]] != C64::new(0.0, 0.0)))
        .collect();

    let (rows, cols) = grid.shape();
    let mut values = Array2::zeros((rows, cols));
    match *grid {
        WignerGrid::Cartesian {
            x_min,
            x_max,
            y_min,
            y_max,
            n_x,
            n_y,
        } => {
            let hx = (x_max - x_min) / (n_x - 1) as f64;
            let hy = (y_max - y_min) / (n_y - 1) as f64;
            values
                .rows_mut()
                .into_iter()
                .enumerate()
                .collect::<Vec<_>>()
                .into_par_iter()
                .for_each(|(i, mut row)| {
                    let y = y_min + i as f64 * hy;
                    for (j, slot) in row.iter_mut().enumerate() {
                        let x = x_min + j as f64 * hx;
                        let r = (x * x + y * y).sqrt();
                        let theta = y.atan2(x);
                        *slot = wigner_point(&rho.matrix, &diag_active, r, theta);
                    }
                });
        }
        WignerGrid::Polar { r_max, n_r, n_theta } => {
            let hr = r_max / (n_r - 1) as f64;
            let htheta = 2.0 * std::f64::consts::PI / n_theta as f64;
            values
                .rows_mut()
                .into_iter()
                .enumerate()
                .collect::<Vec<_>>()
                .into_par_iter()
                .for_each(|(i, mut row)| {
                    let r = i as f64 * hr;
                    for (j, slot) in row.iter_mut().enumerate() {
                        let theta = j as f64 * htheta;
                        *slot = wigner_point(&rho.matrix, &diag_active, r, theta);
                    }
                });
        }
    }

    let min_value = values.iter().copied().fold(f64::INFINITY, f64::min);
    let integral = quadrature(grid, &values, |w| w);
    Ok(WignerField {
        grid: *grid,
        values,
        min_value,
        integral,
    })
}

/// Trapezoid quadrature of f(W) over the plane; the polar angle direction is
/// periodic, so uniform weights are exact there.
fn quadrature(grid: &WignerGrid, values: &Array2<f64>, f: impl Fn(f64) -> f64) -> f64 {
    match *grid {
        WignerGrid::Cartesian {
            x_min,
            x_max,
            y_min,
            y_max,
            n_x,
            n_y,
        } => {
            let hx = (x_max - x_min) / (n_x - 1) as f64;
            let hy = (y_max - y_min) / (n_y - 1) as f64;
            let wx = |j: usize| if j == 0 || j == n_x - 1 { 0.5 } else { 1.0 };
            let wy = |i: usize| if i == 0 || i == n_y - 1 { 0.5 } else { 1.0 };
            let mut acc = 0.0;
            for i in 0..n_y {
                let mut row_acc = 0.0;
                for j in 0..n_x {
                    row_acc += wx(j) * f(values[[i, j]]);
                }
                acc += wy(i) * row_acc;
            }
            acc * hx * hy
        }
        WignerGrid::Polar { r_max, n_r, n_theta } => {
            let hr = r_max / (n_r - 1) as f64;
            let htheta = 2.0 * std::f64::consts::PI / n_theta as f64;
            let wr = |i: usize| if i == 0 || i == n_r - 1 { 0.5 } else { 1.0 };
            let mut acc = 0.0;
            for i in 0..n_r {
                let r = i as f64 * hr;
                let mut ring = 0.0;
                for j in 0..n_theta {
                    ring += f(values[[i, j]]);
                }
                acc += wr(i) * r * ring;
            }
            acc * hr * htheta
        }
    }
}

/// Largest violation of W(r, theta + pi) = W(r, theta) over the grid.
///
/// Needs a grid that maps onto itself under point reflection: polar with an
/// even angle count, or Cartesian with extents symmetric about the origin.
pub fn symmetry_defect(field: &WignerField) -> Result<f64> {
    match field.grid {
        WignerGrid::Polar { n_theta, .. } => {
            if n_theta % 2 != 0 {
                return Err(SimError::InvalidArgument(format!(
                    "theta + pi falls between grid points for odd n_theta = {n_theta}"
                )));
            }
            let half = n_theta / 2;
            let (n_r, _) = field.grid.shape();
            let mut worst = 0.0f64;
            for i in 0..n_r {
                for j in 0..n_theta {
                    let other = (j + half) % n_theta;
                    worst = worst.max((field.values[[i, j]] - field.values[[i, other]]).abs());
                }
            }
            Ok(worst)
        }
        WignerGrid::Cartesian {
            x_min,
            x_max,
            y_min,
            y_max,
            n_x,
            n_y,
        } => {
            if (x_min + x_max).abs() > 1e-12 || (y_min + y_max).abs() > 1e-12 {
                return Err(SimError::InvalidArgument(
                    "point reflection requires extents symmetric about the origin".into(),
                ));
            }
            let mut worst = 0.0f64;
            for i in 0..n_y {
                for j in 0..n_x {
                    let v = field.values[[i, j]];
                    let w = field.values[[n_y - 1 - i, n_x - 1 - j]];
                    worst = worst.max((v - w).abs());
                }
            }
            Ok(worst)
        }
    }
}

/// Integral of the negative part: quadrature of max(0, -W).
pub fn negativity_volume(field: &WignerField) -> f64 {
    quadrature(&field.grid, &field.values, |w| (-w).max(0.0))
}
