//! Dense complex linear algebra for one- and two-qubit states.
//!
//! Operators are plain [`CMatrix`] values (2x2 or 4x4). Composite operators use
//! the `system ⊗ auxiliary` ordering, so the system index is the major one.
//! States are wrapped in [`DensityMatrix`], which can only be built from a
//! matrix that passes the Hermiticity, unit-trace and positivity checks.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Largest Hilbert-space dimension handled anywhere in the crate.
pub const MAX_DIM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
}

pub fn pauli(which: Pauli) -> CMatrix {
    let i = C64::new(0.0, 1.0);
    match which {
        Pauli::X => CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        Pauli::Y => CMatrix::from_row_slice(2, 2, &[ZERO, -i, i, ZERO]),
        Pauli::Z => CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
    }
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 2 || dim == MAX_DIM {
        Ok(())
    } else {
        Err(Error::Dimension(dim))
    }
}

/// Tensor product `a ⊗ b` with `a`'s indices major.
pub fn kron(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let dim = a.nrows() * b.nrows();
    if dim > MAX_DIM || !a.is_square() || !b.is_square() {
        return Err(Error::Dimension(dim));
    }
    Ok(a.kronecker(b))
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Eigen-decomposition of a Hermitian operator with a canonical output:
/// eigenvalues ascending, and each eigenvector's largest-modulus component
/// real and positive (first such component on ties).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, in eigenvalue order.
    pub eigenvectors: CMatrix,
}

impl SpectralDecomposition {
    pub fn of(h: &CMatrix) -> Result<Self> {
        if !h.is_square() {
            return Err(Error::Dimension(h.nrows()));
        }
        let scale = max_abs(h).max(1.0);
        let deviation = hermitian_deviation(h);
        if deviation > 1e-12 * scale {
            return Err(Error::NotHermitian { deviation });
        }

        let eig = SymmetricEigen::new(hermitize(h));
        let n = h.nrows();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

        let mut eigenvectors = CMatrix::zeros(n, n);
        let mut eigenvalues = Vec::with_capacity(n);
        for (col, &src) in order.iter().enumerate() {
            eigenvalues.push(eig.eigenvalues[src]);
            let v = eig.eigenvectors.column(src);
            let largest = v.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
            let pivot = v
                .iter()
                .find(|z| z.norm() >= largest - 1e-12)
                .copied()
                .unwrap_or(ONE);
            let phase = pivot.conj() / pivot.norm();
            for row in 0..n {
                eigenvectors[(row, col)] = v[row] * phase;
            }
        }
        Ok(Self {
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Largest eigenvalue modulus, i.e. the operator norm.
    pub fn spectral_norm(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |m, e| m.max(e.abs()))
    }

    /// `V f(diag) V†`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (j, &e) in self.eigenvalues.iter().enumerate() {
            let w = f(e);
            scaled.column_mut(j).scale_mut(w);
        }
        &scaled * v.adjoint()
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.map(|e| e)
    }

    /// Projector `|k⟩⟨k|` onto the k-th eigenvector.
    pub fn projector(&self, k: usize) -> CMatrix {
        let col = self.eigenvectors.column(k);
        col * col.adjoint()
    }
}

/// Tolerances used when admitting a matrix as a physical state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateTolerance {
    pub hermitian: f64,
    pub trace: f64,
    pub psd: f64,
}

impl StateTolerance {
    /// Freshly constructed states (thermal states, partial traces, inputs).
    pub const STRICT: Self = Self {
        hermitian: 1e-12,
        trace: 1e-10,
        psd: 1e-10,
    };
    /// States produced by numerical integration.
    pub const EVOLVED: Self = Self {
        hermitian: 1e-10,
        trace: 1e-8,
        psd: 1e-8,
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        Self::with_tolerance(m, StateTolerance::STRICT)
    }

    /// Validates `m` against `tol`. The stored matrix is the Hermitian part
    /// of `m`; the trace is never rescaled.
    pub fn with_tolerance(m: CMatrix, tol: StateTolerance) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension(m.nrows()));
        }
        check_dim(m.nrows())?;
        let deviation = hermitian_deviation(&m);
        if deviation > tol.hermitian {
            return Err(Error::NotHermitian { deviation });
        }
        let m = hermitize(&m);
        let trace_dev = (m.trace() - ONE).norm();
        if trace_dev > tol.trace {
            return Err(Error::Trace {
                deviation: trace_dev,
            });
        }
        let min_eigenvalue = SymmetricEigen::new(m.clone())
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b));
        if min_eigenvalue < -tol.psd {
            return Err(Error::NotPositive { min_eigenvalue });
        }
        Ok(Self(m))
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Self::new(identity(dim).unscale(dim as f64))
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalized) vector.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let v = nalgebra::DVector::from_column_slice(psi);
        let norm = v.norm();
        if norm == 0.0 {
            return Err(Error::param("psi", "zero vector"));
        }
        let v = v.unscale(norm);
        Self::new(&v * v.adjoint())
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// Population of the k-th computational basis state.
    pub fn population(&self, k: usize) -> f64 {
        self.0[(k, k)].re
    }
}

/// Traces out the second (auxiliary) qubit of a `system ⊗ auxiliary` state.
pub fn partial_trace_aux(rho: &DensityMatrix) -> Result<DensityMatrix> {
    if rho.dim() != 4 {
        return Err(Error::DimensionMismatch {
            left: rho.dim(),
            right: 4,
        });
    }
    let m = rho.matrix();
    let reduced = CMatrix::from_fn(2, 2, |i, j| m[(2 * i, 2 * j)] + m[(2 * i + 1, 2 * j + 1)]);
    DensityMatrix::new(reduced)
}

/// Gibbs state `exp(-H/T) / Z` in natural units.
pub fn thermal_state(h: &CMatrix, temperature: f64) -> Result<DensityMatrix> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::param("temperature", format!("must be positive, got {temperature}")));
    }
    let spectrum = SpectralDecomposition::of(h)?;
    let ground = spectrum.eigenvalues[0];
    let z: f64 = spectrum
        .eigenvalues
        .iter()
        .map(|e| (-(e - ground) / temperature).exp())
        .sum();
    let rho = spectrum.map(|e| (-(e - ground) / temperature).exp() / z);
    DensityMatrix::new(hermitize(&rho))
}

/// `Re Tr(O ρ)`, failing when the imaginary part is not negligible.
pub fn expectation(op: &CMatrix, rho: &DensityMatrix) -> Result<f64> {
    if op.nrows() != rho.dim() || !op.is_square() {
        return Err(Error::DimensionMismatch {
            left: op.nrows(),
            right: rho.dim(),
        });
    }
    let m = rho.matrix();
    let mut value = ZERO;
    for i in 0..op.nrows() {
        for k in 0..op.ncols() {
            value += op[(i, k)] * m[(k, i)];
        }
    }
    if value.im.abs() > 1e-10 * max_abs(op).max(1.0) {
        return Err(Error::ComplexExpectation { imag: value.im });
    }
    Ok(value.re)
}

/// `½σ_z` on the system qubit (`½σ_z ⊗ I` for composite states).
pub fn spin_z_operator(dim: usize) -> Result<CMatrix> {
    system_operator(pauli(Pauli::Z).scale(0.5), dim)
}

pub fn spin_x_operator(dim: usize) -> Result<CMatrix> {
    system_operator(pauli(Pauli::X).scale(0.5), dim)
}

/// Lifts a single-qubit operator onto the system factor.
pub fn system_operator(op: CMatrix, dim: usize) -> Result<CMatrix> {
    match dim {
        2 => Ok(op),
        4 => kron(&op, &identity(2)),
        d => Err(Error::Dimension(d)),
    }
}

pub fn magnetization(rho: &DensityMatrix) -> Result<f64> {
    expectation(&spin_z_operator(rho.dim())?, rho)
}

pub fn transverse_magnetization(rho: &DensityMatrix) -> Result<f64> {
    if rho.dim() != 2 {
        return Err(Error::DimensionMismatch {
            left: rho.dim(),
            right: 2,
        });
    }
    expectation(&spin_x_operator(2)?, rho)
}

/// `½ ||a - b||_1`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    let diff = hermitize(&(a.matrix() - b.matrix()));
    SymmetricEigen::new(diff)
        .eigenvalues
        .iter()
        .map(|e| e.abs())
        .sum::<f64>()
        * 0.5
}
