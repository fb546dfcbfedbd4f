//! Dense complex Hermitian kernel: density-matrix validation, Hermitian
//! square roots, and the Uhlmann fidelity.
//!
//! Every spectral computation here goes through [`hermitian_eigen`], which
//! is specialised to Hermitian input (real eigenvalues, unitary
//! eigenvectors). Matrices are expected to be small (N of a few tens at
//! most), so everything is dense.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Dense N×N complex matrix. Houses states, Hamiltonians and channel
/// operators alike.
pub type ComplexMatrix = DMatrix<Complex64>;

/// Eigenvalues of magnitude below `-SQRT_CLAMP_TOL` make [`hermitian_sqrt`]
/// fail; anything in `[-SQRT_CLAMP_TOL, 0)` is clamped to zero.
pub const SQRT_CLAMP_TOL: f64 = 1e-10;

/// Default tolerance of [`project_to_density`].
pub const PROJECTION_TOL: f64 = 1e-8;

/// Relative Hermiticity tolerance used by the spectral routines.
const HERMITICITY_TOL: f64 = 1e-10;

/// Tolerances a [`DensityMatrix`] was validated against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainTolerances {
    pub hermiticity: f64,
    pub trace: f64,
    pub psd: f64,
}

impl DomainTolerances {
    pub const fn uniform(tol: f64) -> Self {
        DomainTolerances {
            hermiticity: tol,
            trace: tol,
            psd: tol,
        }
    }
}

impl Default for DomainTolerances {
    fn default() -> Self {
        DomainTolerances::uniform(1e-10)
    }
}

/// Hermitian, unit-trace, positive-semidefinite matrix of dimension ≥ 2.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
    tol: DomainTolerances,
}

impl DensityMatrix {
    /// Validates `matrix` against the default tolerances.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        Self::with_tolerances(matrix, DomainTolerances::default())
    }

    pub fn with_tolerances(matrix: ComplexMatrix, tol: DomainTolerances) -> Result<Self> {
        let n = check_square(&matrix)?;
        if n < 2 {
            return Err(Error::DimensionTooSmall(n));
        }
        if matrix
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::NonFinite);
        }
        let deviation = hermiticity_defect(&matrix);
        if deviation > tol.hermiticity {
            return Err(Error::NotHermitian {
                deviation,
                tol: tol.hermiticity,
            });
        }
        let trace = trace_re(&matrix);
        if (trace - 1.0).abs() > tol.trace {
            return Err(Error::BadTrace {
                trace,
                tol: tol.trace,
            });
        }
        let min_eigenvalue = hermitian_eigen(&matrix).min();
        if min_eigenvalue < -tol.psd {
            return Err(Error::NotPsd {
                min_eigenvalue,
                tol: tol.psd,
            });
        }
        Ok(DensityMatrix { matrix, tol })
    }

    /// Wraps a matrix that is a density matrix by construction (e.g. the
    /// normalized output of a completely positive map). Only the cheap
    /// structural checks run in debug builds.
    pub(crate) fn from_trusted(matrix: ComplexMatrix, tol: DomainTolerances) -> Self {
        debug_assert!(matrix.is_square() && matrix.nrows() >= 2);
        debug_assert!((trace_re(&matrix) - 1.0).abs() < 1e-6);
        DensityMatrix { matrix, tol }
    }

    /// diag(p₀, p₁, …); the entries must be a probability vector.
    pub fn from_diagonal(probs: &[f64]) -> Result<Self> {
        let n = probs.len();
        let m = ComplexMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(probs[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        Self::new(m)
    }

    /// |ψ⟩⟨ψ| for a (not necessarily normalized) nonzero vector ψ.
    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if norm2 <= 0.0 || !norm2.is_finite() {
            return Err(Error::Validation("pure state vector has zero norm".into()));
        }
        let n = psi.len();
        let m = ComplexMatrix::from_fn(n, n, |i, j| psi[i] * psi[j].conj() / norm2);
        Self::new(hermitian_part(&m))
    }

    /// Basis projector |k⟩⟨k|.
    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::Validation(format!(
                "basis index {k} out of range for dimension {dim}"
            )));
        }
        let mut probs = vec![0.0; dim];
        probs[k] = 1.0;
        Self::from_diagonal(&probs)
    }

    /// I/N.
    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        Self::from_diagonal(&vec![1.0 / dim as f64; dim])
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn tolerances(&self) -> DomainTolerances {
        self.tol
    }

    pub fn trace(&self) -> f64 {
        trace_re(&self.matrix)
    }

    /// tr(ρ²).
    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigen(&self.matrix).min()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigen(&self.matrix).values
    }

    /// Re tr(Aρ).
    pub fn expectation(&self, op: &ComplexMatrix) -> f64 {
        trace_product_re(op, &self.matrix)
    }
}

/// Ascending eigenvalues and the matching unitary eigenvector columns.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    /// V diag(f(λ)) V†.
    pub fn reconstruct(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &lambda) in self.values.iter().enumerate() {
            let s = f(lambda);
            for i in 0..n {
                scaled[(i, j)] *= s;
            }
        }
        hermitian_part(&(scaled * self.vectors.adjoint()))
    }
}

/// Eigendecomposition of the Hermitian part of `m`.
pub fn hermitian_eigen(m: &ComplexMatrix) -> HermitianEigen {
    let eig = hermitian_part(m).symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    HermitianEigen { values, vectors }
}

/// Eigenvalues smaller than this are indistinguishable from rounding noise
/// of a decomposition whose largest eigenvalue has magnitude `max_abs`.
fn noise_floor(n: usize, max_abs: f64) -> f64 {
    4.0 * n as f64 * f64::EPSILON * max_abs
}

/// Principal square root of a Hermitian positive-semidefinite matrix.
///
/// Eigenvalues in `[-clamp_tol, 0)` (and positive ones at rounding-noise
/// level) are set to zero before the square root is taken.
pub fn hermitian_sqrt(m: &ComplexMatrix, clamp_tol: f64) -> Result<ComplexMatrix> {
    let n = check_square(m)?;
    let scale = max_abs_entry(m).max(1.0);
    let deviation = hermiticity_defect(m);
    if deviation > HERMITICITY_TOL * scale {
        return Err(Error::NotHermitian {
            deviation,
            tol: HERMITICITY_TOL * scale,
        });
    }
    let eig = hermitian_eigen(m);
    if eig.min() < -clamp_tol {
        return Err(Error::NotPsd {
            min_eigenvalue: eig.min(),
            tol: clamp_tol,
        });
    }
    let floor = noise_floor(n, eig.max_abs());
    Ok(eig.reconstruct(|l| if l <= floor { 0.0 } else { l.sqrt() }))
}

/// Uhlmann fidelity F(ρ,σ) = [tr √(√ρ σ √ρ)]².
///
/// The squared form makes F coincide with tr(ρσ) whenever one of the two
/// states is pure.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::ShapeMismatch {
            expected: rho.dim(),
            found: sigma.dim(),
        });
    }
    let tol = SQRT_CLAMP_TOL
        .max(rho.tolerances().psd)
        .max(sigma.tolerances().psd);
    let sqrt_rho = hermitian_sqrt(rho.matrix(), tol)?;
    let inner = &sqrt_rho * sigma.matrix() * &sqrt_rho;
    let eig = hermitian_eigen(&inner);
    if eig.min() < -tol {
        return Err(Error::NotPsd {
            min_eigenvalue: eig.min(),
            tol,
        });
    }
    let floor = noise_floor(rho.dim(), eig.max_abs());
    let root_trace: f64 = eig
        .values
        .iter()
        .filter(|&&l| l > floor)
        .map(|l| l.sqrt())
        .sum();
    Ok(root_trace * root_trace)
}

/// Re tr(ρσ).
pub fn frobenius_inner(rho: &DensityMatrix, sigma: &DensityMatrix) -> f64 {
    trace_product_re(rho.matrix(), sigma.matrix())
}

/// Result of [`project_to_density`].
#[derive(Debug, Clone)]
pub struct Projection {
    pub state: DensityMatrix,
    /// Frobenius norm of the applied correction.
    pub correction: f64,
}

/// Repairs numerical drift: Hermitizes, clamps slightly negative
/// eigenvalues to zero and renormalizes the trace.
pub fn project_to_density(m: &ComplexMatrix, tol: f64) -> Result<Projection> {
    let n = check_square(m)?;
    if n < 2 {
        return Err(Error::DimensionTooSmall(n));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    let h = hermitian_part(m);
    let trace = trace_re(&h);
    if (trace - 1.0).abs() > tol {
        return Err(Error::TooFarFromDomain {
            reason: format!("trace {trace} differs from 1 by more than {tol:e}"),
        });
    }
    let eig = hermitian_eigen(&h);
    if eig.min() < -tol {
        return Err(Error::TooFarFromDomain {
            reason: format!("eigenvalue {:e} below -{tol:e}", eig.min()),
        });
    }
    let repaired = if eig.min() < 0.0 {
        eig.reconstruct(|l| l.max(0.0))
    } else {
        h
    };
    let t = trace_re(&repaired);
    let out = repaired.map(|z| z / t);
    let correction = (&out - m).norm();
    Ok(Projection {
        state: DensityMatrix::from_trusted(out, DomainTolerances::default()),
        correction,
    })
}

/// Random full-rank mixed state BB†/tr(BB†) with B a complex Ginibre matrix.
pub fn random_mixed<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DensityMatrix {
    let b = random_ginibre(rng, dim);
    let w = &b * b.adjoint();
    let t = trace_re(&w);
    DensityMatrix::from_trusted(
        hermitian_part(&w.map(|z| z / t)),
        DomainTolerances::default(),
    )
}

/// Haar-random pure state.
pub fn random_pure<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DensityMatrix {
    let psi: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    let m = ComplexMatrix::from_fn(dim, dim, |i, j| psi[i] * psi[j].conj() / norm2);
    DensityMatrix::from_trusted(hermitian_part(&m), DomainTolerances::default())
}

/// N×N matrix with i.i.d. standard complex normal entries.
pub fn random_ginibre<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// (M + M†)/2.
pub fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// max |m_ij − conj(m_ji)|.
pub fn hermiticity_defect(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn trace_re(m: &ComplexMatrix) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

/// Re tr(AB) without forming the product.
pub fn trace_product_re(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..n {
            acc += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    acc
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

pub(crate) fn check_square(m: &ComplexMatrix) -> Result<usize> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

fn max_abs_entry(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0_f64, |a, z| a.max(z.norm()))
}

/// Builds a matrix from the literal format: a list of rows, each entry a
/// `[re, im]` pair.
pub fn matrix_from_literal(rows: &[Vec<[f64; 2]>]) -> Result<ComplexMatrix> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::Validation("empty matrix literal".into()));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Validation(format!(
                "matrix literal row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
    }
    Ok(ComplexMatrix::from_fn(n, n, |i, j| {
        Complex64::new(rows[i][j][0], rows[i][j][1])
    }))
}

pub fn matrix_to_literal(m: &ComplexMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| [m[(i, j)].re, m[(i, j)].im])
                .collect()
        })
        .collect()
}
