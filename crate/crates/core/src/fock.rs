//! Truncated Fock-space linear algebra.
//!
//! Everything downstream (integrators, trajectory ensembles, phase-space
//! reconstruction) works with dense complex matrices over the number basis
//! |0>, ..., |n_max>. Truncation is a physical approximation, so the basis
//! carries a `tail_tolerance` and the evolvers police the population of the
//! top few levels against it (see [`tail_mass`]).

use ndarray::{Array1, Array2};

use crate::error::{Result, SimError};

pub type C64 = num_complex::Complex64;

/// Truncated number basis |0>, ..., |n_max> (dimension n_max + 1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FockBasis {
    n_max: usize,
    tail_tolerance: f64,
}

impl FockBasis {
    pub fn new(n_max: usize, tail_tolerance: f64) -> Result<Self> {
        if n_max < 1 {
            return Err(SimError::InvalidArgument(
                "n_max must be at least 1".into(),
            ));
        }
        if !(tail_tolerance > 0.0 && tail_tolerance < 1.0) {
            return Err(SimError::InvalidArgument(format!(
                "tail_tolerance must lie in (0, 1), got {tail_tolerance}"
            )));
        }
        Ok(Self {
            n_max,
            tail_tolerance,
        })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        self.n_max + 1
    }

    pub fn tail_tolerance(&self) -> f64 {
        self.tail_tolerance
    }
}

/// `FockBasis::new` under its traditional name.
pub fn make_basis(n_max: usize, tail_tolerance: f64) -> Result<FockBasis> {
    FockBasis::new(n_max, tail_tolerance)
}

/// Dense operator on a truncated Fock basis.
#[derive(Clone, Debug)]
pub struct Operator {
    pub matrix: Array2<C64>,
    basis: FockBasis,
}

impl Operator {
    pub fn from_matrix(basis: FockBasis, matrix: Array2<C64>) -> Result<Self> {
        if matrix.nrows() != basis.dim() || matrix.ncols() != basis.dim() {
            return Err(SimError::InvalidArgument(format!(
                "matrix shape {:?} does not match basis dimension {}",
                matrix.dim(),
                basis.dim()
            )));
        }
        Ok(Self { matrix, basis })
    }

    pub fn zeros(basis: FockBasis) -> Self {
        Self {
            matrix: Array2::zeros((basis.dim(), basis.dim())),
            basis,
        }
    }

    pub fn identity(basis: FockBasis) -> Self {
        Self {
            matrix: Array2::eye(basis.dim()),
            basis,
        }
    }

    pub fn basis(&self) -> FockBasis {
        self.basis
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Operator {
        Operator {
            matrix: self.matrix.t().mapv(|z| z.conj()),
            basis: self.basis,
        }
    }

    pub fn matmul(&self, rhs: &Operator) -> Result<Operator> {
        check_same_basis(self.basis, rhs.basis)?;
        Ok(Operator {
            matrix: self.matrix.dot(&rhs.matrix),
            basis: self.basis,
        })
    }

    pub fn apply(&self, v: &Array1<C64>) -> Array1<C64> {
        self.matrix.dot(v)
    }

    pub fn scaled(&self, c: C64) -> Operator {
        Operator {
            matrix: self.matrix.mapv(|z| z * c),
            basis: self.basis,
        }
    }

    pub fn add(&self, rhs: &Operator) -> Result<Operator> {
        check_same_basis(self.basis, rhs.basis)?;
        Ok(Operator {
            matrix: &self.matrix + &rhs.matrix,
            basis: self.basis,
        })
    }

    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.matrix)
    }
}

fn check_same_basis(a: FockBasis, b: FockBasis) -> Result<()> {
    if a.n_max() != b.n_max() {
        return Err(SimError::InvalidArgument(format!(
            "basis mismatch: n_max {} vs {}",
            a.n_max(),
            b.n_max()
        )));
    }
    Ok(())
}

/// Lowering operator: <n-1|a|n> = sqrt(n).
pub fn annihilation(basis: FockBasis) -> Operator {
    let mut m = Array2::zeros((basis.dim(), basis.dim()));
    for n in 1..basis.dim() {
        m[[n - 1, n]] = C64::new((n as f64).sqrt(), 0.0);
    }
    Operator { matrix: m, basis }
}

/// Raising operator, the adjoint of [`annihilation`].
pub fn creation(basis: FockBasis) -> Operator {
    annihilation(basis).adjoint()
}

/// Number operator a^dag a (diagonal).
pub fn number(basis: FockBasis) -> Operator {
    let mut m = Array2::zeros((basis.dim(), basis.dim()));
    for n in 0..basis.dim() {
        m[[n, n]] = C64::new(n as f64, 0.0);
    }
    Operator { matrix: m, basis }
}

/// Normalized state vector over the truncated basis.
#[derive(Clone, Debug)]
pub struct PureState {
    pub amplitudes: Array1<C64>,
    basis: FockBasis,
}

impl PureState {
    /// Wraps amplitudes that are already normalized to within 1e-12.
    pub fn new(basis: FockBasis, amplitudes: Array1<C64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(SimError::InvalidArgument(format!(
                "amplitude length {} does not match basis dimension {}",
                amplitudes.len(),
                basis.dim()
            )));
        }
        let state = Self { amplitudes, basis };
        if (state.norm() - 1.0).abs() > 1e-12 {
            return Err(SimError::InvalidArgument(format!(
                "state norm {} deviates from 1 by more than 1e-12",
                state.norm()
            )));
        }
        Ok(state)
    }

    /// Normalizes arbitrary amplitudes; rejects the zero vector.
    pub fn normalized(basis: FockBasis, amplitudes: Array1<C64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(SimError::InvalidArgument(format!(
                "amplitude length {} does not match basis dimension {}",
                amplitudes.len(),
                basis.dim()
            )));
        }
        let norm = vector_norm(&amplitudes);
        if norm < 1e-300 {
            return Err(SimError::InvalidArgument(
                "cannot normalize the zero vector".into(),
            ));
        }
        let inv = C64::new(1.0 / norm, 0.0);
        Ok(Self {
            amplitudes: amplitudes.mapv(|z| z * inv),
            basis,
        })
    }

    pub fn vacuum(basis: FockBasis) -> Self {
        Self::fock(basis, 0).expect("level 0 always exists")
    }

    /// Number state |n>.
    pub fn fock(basis: FockBasis, n: usize) -> Result<Self> {
        if n > basis.n_max() {
            return Err(SimError::InvalidArgument(format!(
                "level {n} outside basis (n_max = {})",
                basis.n_max()
            )));
        }
        let mut amplitudes = Array1::zeros(basis.dim());
        amplitudes[n] = C64::new(1.0, 0.0);
        Ok(Self { amplitudes, basis })
    }

    /// Equal-weight, equal-phase superposition of the given levels.
    pub fn level_superposition(basis: FockBasis, levels: &[usize]) -> Result<Self> {
        if levels.is_empty() {
            return Err(SimError::InvalidArgument(
                "superposition needs at least one level".into(),
            ));
        }
        let mut amplitudes = Array1::zeros(basis.dim());
        let w = C64::new(1.0 / (levels.len() as f64).sqrt(), 0.0);
        for &n in levels {
            if n > basis.n_max() {
                return Err(SimError::InvalidArgument(format!(
                    "level {n} outside basis (n_max = {})",
                    basis.n_max()
                )));
            }
            if amplitudes[n] != C64::new(0.0, 0.0) {
                return Err(SimError::InvalidArgument(format!(
                    "level {n} listed twice in superposition"
                )));
            }
            amplitudes[n] = w;
        }
        Ok(Self { amplitudes, basis })
    }

    pub fn basis(&self) -> FockBasis {
        self.basis
    }

    pub fn norm(&self) -> f64 {
        vector_norm(&self.amplitudes)
    }
}

pub fn vector_norm(v: &Array1<C64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Density matrix over the truncated basis. Hermitian with unit trace.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    pub matrix: Array2<C64>,
    basis: FockBasis,
}

impl DensityMatrix {
    /// Validates hermiticity (<= 1e-10 elementwise) and trace (1 within 1e-8).
    pub fn from_matrix(basis: FockBasis, matrix: Array2<C64>) -> Result<Self> {
        if matrix.nrows() != basis.dim() || matrix.ncols() != basis.dim() {
            return Err(SimError::InvalidArgument(format!(
                "matrix shape {:?} does not match basis dimension {}",
                matrix.dim(),
                basis.dim()
            )));
        }
        let herm = hermiticity_error(&matrix);
        if herm > 1e-10 {
            return Err(SimError::InvalidArgument(format!(
                "hermiticity error {herm:.3e} exceeds 1e-10"
            )));
        }
        let tr = trace_of(&matrix);
        if (tr.re - 1.0).abs() > 1e-8 || tr.im.abs() > 1e-8 {
            return Err(SimError::InvalidArgument(format!(
                "trace {tr} deviates from 1 by more than 1e-8"
            )));
        }
        Ok(Self { matrix, basis })
    }

    /// Wraps a matrix the caller already guarantees to be a valid state
    /// (used by the integrators, which enforce the invariants themselves).
    pub(crate) fn from_matrix_unchecked(basis: FockBasis, matrix: Array2<C64>) -> Self {
        Self { matrix, basis }
    }

    pub fn vacuum(basis: FockBasis) -> Self {
        let mut matrix = Array2::zeros((basis.dim(), basis.dim()));
        matrix[[0, 0]] = C64::new(1.0, 0.0);
        Self { matrix, basis }
    }

    pub fn basis(&self) -> FockBasis {
        self.basis
    }

    pub fn trace(&self) -> C64 {
        trace_of(&self.matrix)
    }

    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.matrix)
    }

    /// rho <- (rho + rho^dag)/2, killing antihermitian roundoff.
    pub fn hermitize(&mut self) {
        hermitize(&mut self.matrix);
    }

    /// Population of level n.
    pub fn population(&self, n: usize) -> f64 {
        self.matrix[[n, n]].re
    }

    /// Smallest eigenvalue; a negativity diagnostic for near-positive states.
    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.matrix)
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Tr(rho * op).
pub fn expectation(op: &Operator, rho: &DensityMatrix) -> Result<C64> {
    check_same_basis(op.basis, rho.basis)?;
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..rho.basis.dim() {
        for j in 0..rho.basis.dim() {
            acc += rho.matrix[[i, j]] * op.matrix[[j, i]];
        }
    }
    Ok(acc)
}

/// Projector |psi><psi|. Rejects inputs whose norm strays from 1 by > 1e-8.
pub fn dm_from_pure(psi: &PureState) -> Result<DensityMatrix> {
    if (psi.norm() - 1.0).abs() > 1e-8 {
        return Err(SimError::InvalidArgument(format!(
            "state norm {} deviates from 1 by more than 1e-8",
            psi.norm()
        )));
    }
    let dim = psi.basis.dim();
    let mut matrix = Array2::zeros((dim, dim));
    for i in 0..dim {
        for j in 0..dim {
            matrix[[i, j]] = psi.amplitudes[i] * psi.amplitudes[j].conj();
        }
    }
    Ok(DensityMatrix {
        matrix,
        basis: psi.basis,
    })
}

/// Total population of the top `band` levels; the truncation guard compares
/// this against `basis.tail_tolerance`. Requires 1 <= band <= n_max.
pub fn tail_mass(rho: &DensityMatrix, band: usize) -> f64 {
    assert!(
        band >= 1 && band <= rho.basis.n_max(),
        "band {} outside [1, {}]",
        band,
        rho.basis.n_max()
    );
    let dim = rho.basis.dim();
    (dim - band..dim).map(|n| rho.matrix[[n, n]].re).sum()
}

pub fn trace_of(m: &Array2<C64>) -> C64 {
    m.diag().sum()
}

pub fn hermiticity_error(m: &Array2<C64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            let d = (m[[i, j]] - m[[j, i]].conj()).norm();
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

pub fn hermitize(m: &mut Array2<C64>) {
    let n = m.nrows();
    for i in 0..n {
        m[[i, i]] = C64::new(m[[i, i]].re, 0.0);
        for j in i + 1..n {
            let avg = 0.5 * (m[[i, j]] + m[[j, i]].conj());
            m[[i, j]] = avg;
            m[[j, i]] = avg.conj();
        }
    }
}

/// Eigenvalues of a Hermitian matrix by cyclic complex Jacobi rotations.
///
/// Dimensions here are tiny (<= a few hundred), so a dependency-free O(dim^3)
/// method is plenty. Returns eigenvalues in ascending order.
pub fn hermitian_eigenvalues(m: &Array2<C64>) -> Vec<f64> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "matrix must be square");
    let mut a = m.clone();
    hermitize(&mut a);

    let off = |a: &Array2<C64>| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                s += a[[i, j]].norm_sqr();
            }
        }
        s.sqrt()
    };
    let scale = a.iter().map(|z| z.norm()).fold(0.0f64, f64::max).max(1.0);

    for _sweep in 0..60 {
        if off(&a) <= 1e-14 * scale * n as f64 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[[p, q]];
                if apq.norm() <= 1e-300 {
                    continue;
                }
                // Phase factor making the pivot real, then a real Givens angle.
                let u = apq / apq.norm();
                let app = a[[p, p]].re;
                let aqq = a[[q, q]].re;
                let tau = (aqq - app) / (2.0 * apq.norm());
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let su = s * u;

                // A <- G^dag A G with G mixing columns (p, q):
                //   G[.,p] = c e_p - s u* e_q,  G[.,q] = s e_p + c u* e_q
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = akp * c - akq * su.conj();
                    a[[k, q]] = akp * s + akq * (c * u.conj());
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = apk * c - aqk * su;
                    a[[q, k]] = apk * s + aqk * (c * u);
                }
                let d = t * apq.norm();
                a[[p, p]] = C64::new(app - d, 0.0);
                a[[q, q]] = C64::new(aqq + d, 0.0);
                a[[p, q]] = C64::new(0.0, 0.0);
                a[[q, p]] = C64::new(0.0, 0.0);
            }
        }
    }

    let mut eig: Vec<f64> = (0..n).map(|i| a[[i, i]].re).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eig
}
