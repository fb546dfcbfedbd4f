//! System description (Hamiltonian plus measured and unmeasured channels)
//! and the superoperators acting on density matrices. ħ = 1 throughout.

use num_complex::Complex64;

use crate::densitymat::{
    check_square, hermitian_eigen, hermitian_part, hermiticity_defect, identity, trace_re,
    ComplexMatrix, DensityMatrix,
};
use crate::error::{Error, Result};

/// Below this the jump normalizer tr{(L+α)ρ(L†+α)} is treated as zero.
pub const ZERO_JUMP_NORM: f64 = 1e-15;

const HAMILTONIAN_HERMITICITY_TOL: f64 = 1e-12;

/// Hamiltonian `H`, measured channels `L_μ` and unmeasured channels `L′_ν`.
///
/// Immutable after construction; the Kraus generator
/// `iH + ½ΣL_μ†L_μ + ½ΣL′_ν†L′_ν` is cached.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    hamiltonian: ComplexMatrix,
    measured: Vec<ComplexMatrix>,
    unmeasured: Vec<ComplexMatrix>,
    generator: ComplexMatrix,
}

impl SystemModel {
    pub fn new(
        hamiltonian: ComplexMatrix,
        measured: Vec<ComplexMatrix>,
        unmeasured: Vec<ComplexMatrix>,
    ) -> Result<Self> {
        let n = check_square(&hamiltonian)?;
        if n < 2 {
            return Err(Error::DimensionTooSmall(n));
        }
        let scale = hamiltonian.iter().fold(1.0_f64, |a, z| a.max(z.norm()));
        let deviation = hermiticity_defect(&hamiltonian);
        if deviation > HAMILTONIAN_HERMITICITY_TOL * scale {
            return Err(Error::NotHermitian {
                deviation,
                tol: HAMILTONIAN_HERMITICITY_TOL * scale,
            });
        }
        for l in measured.iter().chain(&unmeasured) {
            let found = check_square(l)?;
            if found != n {
                return Err(Error::ShapeMismatch { expected: n, found });
            }
        }
        let half = Complex64::new(0.5, 0.0);
        let mut generator = hamiltonian.map(|z| z * Complex64::i());
        for l in measured.iter().chain(&unmeasured) {
            generator += l.adjoint() * l * half;
        }
        Ok(SystemModel {
            hamiltonian,
            measured,
            unmeasured,
            generator,
        })
    }

    /// One measured channel, no unmeasured dissipation.
    pub fn single_channel(hamiltonian: ComplexMatrix, l: ComplexMatrix) -> Result<Self> {
        Self::new(hamiltonian, vec![l], Vec::new())
    }

    /// Two-level benchmark: H = σ_y, L = σ_z.
    pub fn paper_qubit() -> Self {
        Self::single_channel(pauli_y(), pauli_z()).expect("σ_y is Hermitian")
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.hamiltonian
    }

    pub fn measured_channels(&self) -> &[ComplexMatrix] {
        &self.measured
    }

    pub fn unmeasured_channels(&self) -> &[ComplexMatrix] {
        &self.unmeasured
    }

    /// `iH + ½ΣL_μ†L_μ + ½ΣL′_ν†L′_ν`, the deterministic part of dM_t per
    /// unit time.
    pub fn kraus_generator(&self) -> &ComplexMatrix {
        &self.generator
    }

    /// The single measured channel, for models where only one makes sense.
    pub fn sole_measured_channel(&self) -> Result<&ComplexMatrix> {
        match self.measured.as_slice() {
            [l] => Ok(l),
            other => Err(Error::ChannelCount {
                expected: 1,
                found: other.len(),
            }),
        }
    }

    /// Deterministic drift −i[H,ρ] + Σ𝓛_μ(ρ) + Σ𝓛′_ν(ρ) of the
    /// unconditioned master equation.
    pub fn drift(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let mut out = hamiltonian_drift(&self.hamiltonian, rho);
        for l in self.measured.iter().chain(&self.unmeasured) {
            out += lindblad_raw(l, rho);
        }
        out
    }

    /// Upper bound on ‖H‖₂ + ‖ΣL†L‖₂ + ‖ΣL′†L′‖₂, the scale of one unit
    /// of drift.
    pub fn drift_scale(&self) -> f64 {
        let n = self.dim();
        let mut meas = ComplexMatrix::zeros(n, n);
        for l in &self.measured {
            meas += l.adjoint() * l;
        }
        let mut unmeas = ComplexMatrix::zeros(n, n);
        for l in &self.unmeasured {
            unmeas += l.adjoint() * l;
        }
        spectral_norm(&self.hamiltonian) + spectral_norm(&meas) + spectral_norm(&unmeas)
    }
}

pub fn pauli_x() -> ComplexMatrix {
    let (o, z) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
    ComplexMatrix::from_row_slice(2, 2, &[z, o, o, z])
}

pub fn pauli_y() -> ComplexMatrix {
    let (i, z) = (Complex64::i(), Complex64::new(0.0, 0.0));
    ComplexMatrix::from_row_slice(2, 2, &[z, -i, i, z])
}

pub fn pauli_z() -> ComplexMatrix {
    let (o, z) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
    ComplexMatrix::from_row_slice(2, 2, &[o, z, z, -o])
}

/// Largest singular value.
pub fn spectral_norm(m: &ComplexMatrix) -> f64 {
    let eig = hermitian_eigen(&(m.adjoint() * m));
    eig.values.last().copied().unwrap_or(0.0).max(0.0).sqrt()
}

/// −i[H,ρ].
pub fn hamiltonian_drift(h: &ComplexMatrix, rho: &ComplexMatrix) -> ComplexMatrix {
    let comm = h * rho - rho * h;
    hermitian_part(&comm.map(|z| -Complex64::i() * z))
}

/// 𝓛(ρ) = −½{L†L, ρ} + LρL†.
pub fn lindblad(l: &ComplexMatrix, rho: &DensityMatrix) -> Result<ComplexMatrix> {
    check_shapes(l, rho.matrix())?;
    Ok(lindblad_raw(l, rho.matrix()))
}

/// Λ(ρ) = Lρ + ρL† − tr{(L+L†)ρ}ρ.
pub fn lambda_superop(l: &ComplexMatrix, rho: &DensityMatrix) -> Result<ComplexMatrix> {
    check_shapes(l, rho.matrix())?;
    Ok(lambda_raw(l, rho.matrix()))
}

/// Λ_α(ρ) = (L+α)ρ + ρ(L†+α) − tr{(L+L†+2α)ρ}ρ, i.e. Λ with L replaced
/// by the displaced operator L+α.
pub fn lambda_alpha(l: &ComplexMatrix, alpha: f64, rho: &DensityMatrix) -> Result<ComplexMatrix> {
    check_shapes(l, rho.matrix())?;
    Ok(lambda_raw(&displaced(l, alpha), rho.matrix()))
}

/// Υ_α(ρ) = (L+α)ρ(L†+α)/tr{(L+α)ρ(L†+α)} − ρ.
pub fn upsilon_alpha(l: &ComplexMatrix, alpha: f64, rho: &DensityMatrix) -> Result<ComplexMatrix> {
    check_shapes(l, rho.matrix())?;
    upsilon_raw(&displaced(l, alpha), rho.matrix())
}

/// L + α𝕀.
pub fn displaced(l: &ComplexMatrix, alpha: f64) -> ComplexMatrix {
    l + identity(l.nrows()) * Complex64::new(alpha, 0.0)
}

pub(crate) fn lindblad_raw(l: &ComplexMatrix, rho: &ComplexMatrix) -> ComplexMatrix {
    let ldl = l.adjoint() * l;
    let anti = &ldl * rho + rho * &ldl;
    let sandwich = l * rho * l.adjoint();
    hermitian_part(&(sandwich - anti * Complex64::new(0.5, 0.0)))
}

/// Kρ + ρK† − tr{(K+K†)ρ}ρ for an arbitrary operator K.
pub(crate) fn lambda_raw(k: &ComplexMatrix, rho: &ComplexMatrix) -> ComplexMatrix {
    let k_rho = k * rho;
    let shift = 2.0 * trace_re(&k_rho);
    let out = &k_rho + k_rho.adjoint() - rho * Complex64::new(shift, 0.0);
    hermitian_part(&out)
}

/// KρK†/tr{KρK†} − ρ.
pub(crate) fn upsilon_raw(k: &ComplexMatrix, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    let num = k * rho * k.adjoint();
    let norm = trace_re(&num);
    if norm <= ZERO_JUMP_NORM {
        return Err(Error::ZeroProbabilityJump { norm });
    }
    Ok(hermitian_part(&(num / Complex64::new(norm, 0.0) - rho)))
}

fn check_shapes(l: &ComplexMatrix, rho: &ComplexMatrix) -> Result<()> {
    let n = rho.nrows();
    let found = check_square(l)?;
    if found != n {
        return Err(Error::ShapeMismatch { expected: n, found });
    }
    Ok(())
}
