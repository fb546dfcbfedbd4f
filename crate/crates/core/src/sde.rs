//! Diffusive (Wiener-driven) evolution of the true state and its filter.
//!
//! Both states are advanced with the same measurement record `dy`, which is
//! generated from the true state. The default integrator is the normalized
//! Kraus map `ρ ↦ MρM† / tr(MρM†)` with `M = 𝕀 − dM_t`; it keeps states in
//! the density-matrix domain by construction. Euler–Maruyama is available as
//! a cross-check and needs periodic projection.

use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::densitymat::{
    fidelity, hermitian_part, identity, project_to_density, trace_re, ComplexMatrix, DensityMatrix,
    DomainTolerances, PROJECTION_TOL,
};
use crate::error::{Error, Result};
use crate::model::{lambda_raw, spectral_norm, SystemModel};

/// Smallest admissible Kraus normalizer tr{MρM† + Σ L′ρL′† dt}.
pub const MIN_NORMALIZER: f64 = 1e-15;

/// Width (in standard deviations of dW) of the measurement noise the a
/// priori step-size guard must tolerate.
const GUARD_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Kraus,
    EulerMaruyama,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub scheme: Scheme,
    /// Largest domain violation a projection may repair.
    pub domain_tol: f64,
    /// Steps between eigenvalue projections (Euler–Maruyama only).
    pub project_every: usize,
}

impl IntegratorConfig {
    pub fn kraus(dt: f64) -> Self {
        IntegratorConfig {
            dt,
            scheme: Scheme::Kraus,
            domain_tol: PROJECTION_TOL,
            project_every: 1,
        }
    }

    /// Euler–Maruyama with a projection tolerance sized to the O(dt)
    /// positivity defect the scheme leaves on near-pure states.
    pub fn euler_maruyama(dt: f64, model: &SystemModel) -> Self {
        IntegratorConfig {
            dt,
            scheme: Scheme::EulerMaruyama,
            domain_tol: em_domain_tol(dt, model),
            project_every: 1,
        }
    }

    /// Checks the step against the model. The Kraus operator
    /// `M = 𝕀 − K dt + Σ L_μ dy_μ` must stay invertible for every increment
    /// within a few standard deviations, otherwise the normalizer can
    /// collapse.
    pub fn validate(&self, model: &SystemModel) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Validation(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if self.project_every == 0 {
            return Err(Error::Validation("project_every must be at least 1".into()));
        }
        if !(self.domain_tol >= 0.0) {
            return Err(Error::Validation("domain_tol must be nonnegative".into()));
        }
        let margin = 1.0 - kraus_deviation_bound(self.dt, model);
        if margin <= 0.0 {
            return Err(Error::DegenerateNormalization {
                step: None,
                value: margin,
            });
        }
        Ok(())
    }
}

/// Upper bound on ‖M − 𝕀‖₂ over increments within `GUARD_SIGMAS` of their
/// mean.
pub fn kraus_deviation_bound(dt: f64, model: &SystemModel) -> f64 {
    let mut dev = dt * spectral_norm(model.kraus_generator());
    for l in model.measured_channels() {
        let drift = spectral_norm(&(l + l.adjoint())) * dt;
        dev += spectral_norm(l) * (drift + GUARD_SIGMAS * dt.sqrt());
    }
    dev
}

fn em_domain_tol(dt: f64, model: &SystemModel) -> f64 {
    let l_norm: f64 = model.measured_channels().iter().map(spectral_norm).sum();
    let scale = model.drift_scale();
    (25.0 * dt * l_norm * l_norm + 4.0 * dt * dt * scale * scale).max(PROJECTION_TOL)
}

/// Joint state (t, ρ_t, ρ̂_t) of the true system and its filter.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPair {
    pub t: f64,
    pub step: usize,
    pub rho: DensityMatrix,
    pub rho_hat: DensityMatrix,
}

impl TrajectoryPair {
    pub fn new(rho: DensityMatrix, rho_hat: DensityMatrix) -> Result<Self> {
        if rho.dim() != rho_hat.dim() {
            return Err(Error::ShapeMismatch {
                expected: rho.dim(),
                found: rho_hat.dim(),
            });
        }
        Ok(TrajectoryPair {
            t: 0.0,
            step: 0,
            rho,
            rho_hat,
        })
    }

    pub fn fidelity(&self) -> Result<f64> {
        fidelity(&self.rho, &self.rho_hat)
    }

    pub(crate) fn advance(&self, dt: f64, rho: DensityMatrix, rho_hat: DensityMatrix) -> Self {
        let step = self.step + 1;
        TrajectoryPair {
            t: step as f64 * dt,
            step,
            rho,
            rho_hat,
        }
    }
}

/// Observed increments dy^μ on a time grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeasurementRecord {
    pub times: Vec<f64>,
    /// `dy[μ][k]` is the increment of channel μ over `[times[k], times[k+1]]`.
    pub dy: Vec<Vec<f64>>,
}

impl MeasurementRecord {
    pub fn new(channels: usize, t0: f64) -> Self {
        MeasurementRecord {
            times: vec![t0],
            dy: vec![Vec::new(); channels],
        }
    }

    pub fn push(&mut self, t: f64, dy: &[f64]) -> Result<()> {
        if dy.len() != self.dy.len() {
            return Err(Error::ChannelCount {
                expected: self.dy.len(),
                found: dy.len(),
            });
        }
        if self.times.last().is_some_and(|&last| t <= last) {
            return Err(Error::Validation(format!(
                "record time {t} is not increasing"
            )));
        }
        self.times.push(t);
        for (chan, &v) in self.dy.iter_mut().zip(dy) {
            chan.push(v);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Deterministic per-trajectory stream: ChaCha8 keyed by the master seed,
/// with the trajectory index selecting the stream.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One Wiener increment dW ~ N(0, dt).
pub fn sample_wiener<R: Rng + ?Sized>(rng: &mut R, dt: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    z * dt.sqrt()
}

/// dy = tr{(L+L†)ρ} dt + dW.
pub fn measurement_increment(rho: &DensityMatrix, l: &ComplexMatrix, dw: f64, dt: f64) -> f64 {
    2.0 * rho.expectation(l) * dt + dw
}

/// Normalized Kraus update with the multi-channel operator
/// `M = 𝕀 − (iH + ½ΣL_μ†L_μ + ½ΣL′_ν†L′_ν)dt + Σ L_μ dy_μ` and the
/// unmeasured channels entering as `Σ L′_ν ρ L′_ν† dt`.
pub fn kraus_step(
    state: &DensityMatrix,
    dy: &[f64],
    dt: f64,
    model: &SystemModel,
) -> Result<DensityMatrix> {
    let measured = model.measured_channels();
    if dy.len() != measured.len() {
        return Err(Error::ChannelCount {
            expected: measured.len(),
            found: dy.len(),
        });
    }
    let n = model.dim();
    let mut m = identity(n) - model.kraus_generator() * Complex64::new(dt, 0.0);
    for (l, &d) in measured.iter().zip(dy) {
        m += l * Complex64::new(d, 0.0);
    }
    let rho = state.matrix();
    let mut num = &m * rho * m.adjoint();
    for l in model.unmeasured_channels() {
        num += l * rho * l.adjoint() * Complex64::new(dt, 0.0);
    }
    let norm = trace_re(&num);
    if !(norm > MIN_NORMALIZER) {
        return Err(Error::DegenerateNormalization {
            step: None,
            value: norm,
        });
    }
    let out = hermitian_part(&num.map(|z| z / norm));
    Ok(DensityMatrix::from_trusted(out, state.tolerances()))
}

/// Driving increments of an Euler–Maruyama step.
#[derive(Debug, Clone, Copy)]
pub enum Increment<'a> {
    /// Innovation dW^μ directly: the true-state equation.
    Wiener(&'a [f64]),
    /// Measured dy^μ; the innovation dy^μ − tr{(L_μ+L_μ†)ρ̂}dt is formed
    /// from the state being advanced: the filter equation.
    Record(&'a [f64]),
}

/// ρ + [−i[H,ρ] + Σ𝓛(ρ)]dt + Σ Λ_μ(ρ)·(innovation)_μ. Not guaranteed to
/// be a density matrix.
pub fn em_step(
    state: &DensityMatrix,
    increment: Increment<'_>,
    dt: f64,
    model: &SystemModel,
) -> Result<ComplexMatrix> {
    let measured = model.measured_channels();
    let incs = match increment {
        Increment::Wiener(v) | Increment::Record(v) => v,
    };
    if incs.len() != measured.len() {
        return Err(Error::ChannelCount {
            expected: measured.len(),
            found: incs.len(),
        });
    }
    if model.dim() != state.dim() {
        return Err(Error::ShapeMismatch {
            expected: model.dim(),
            found: state.dim(),
        });
    }
    let rho = state.matrix();
    let mut out = rho + model.drift(rho) * Complex64::new(dt, 0.0);
    for (l, &inc) in measured.iter().zip(incs) {
        let innovation = match increment {
            Increment::Wiener(_) => inc,
            Increment::Record(_) => inc - 2.0 * state.expectation(l) * dt,
        };
        out += lambda_raw(l, rho) * Complex64::new(innovation, 0.0);
    }
    Ok(out)
}

/// Output of [`coupled_step`].
#[derive(Debug, Clone)]
pub struct CoupledStep {
    pub pair: TrajectoryPair,
    pub dw: Vec<f64>,
    /// The shared record consumed by both states.
    pub dy: Vec<f64>,
}

/// Advances (ρ, ρ̂) by one step. The record dy is generated from the true
/// state and fed unchanged to the filter.
pub fn coupled_step<R: Rng + ?Sized>(
    pair: &TrajectoryPair,
    rng: &mut R,
    cfg: &IntegratorConfig,
    model: &SystemModel,
) -> Result<CoupledStep> {
    let dt = cfg.dt;
    let measured = model.measured_channels();
    let dw: Vec<f64> = measured.iter().map(|_| sample_wiener(rng, dt)).collect();
    let dy: Vec<f64> = measured
        .iter()
        .zip(&dw)
        .map(|(l, &w)| measurement_increment(&pair.rho, l, w, dt))
        .collect();
    let tag = |e: Error| match e {
        Error::DegenerateNormalization { step: None, value } => Error::DegenerateNormalization {
            step: Some(pair.step),
            value,
        },
        other => other,
    };
    let (rho, rho_hat) = match cfg.scheme {
        Scheme::Kraus => (
            kraus_step(&pair.rho, &dy, dt, model).map_err(tag)?,
            kraus_step(&pair.rho_hat, &dy, dt, model).map_err(tag)?,
        ),
        Scheme::EulerMaruyama => {
            let project = (pair.step + 1).is_multiple_of(cfg.project_every);
            let raw = em_step(&pair.rho, Increment::Wiener(&dw), dt, model)?;
            let raw_hat = em_step(&pair.rho_hat, Increment::Record(&dy), dt, model)?;
            (
                repair(&raw, cfg.domain_tol, project)?,
                repair(&raw_hat, cfg.domain_tol, project)?,
            )
        }
    };
    Ok(CoupledStep {
        pair: pair.advance(dt, rho, rho_hat),
        dw,
        dy,
    })
}

/// Full projection, or the cheap Hermitize-and-renormalize repair between
/// projections.
fn repair(m: &ComplexMatrix, tol: f64, project: bool) -> Result<DensityMatrix> {
    if project {
        return Ok(project_to_density(m, tol)?.state);
    }
    let h = hermitian_part(m);
    let t = trace_re(&h);
    if !((t - 1.0).abs() <= tol) {
        return Err(Error::TooFarFromDomain {
            reason: format!("trace {t} differs from 1 by more than {tol:e}"),
        });
    }
    Ok(DensityMatrix::from_trusted(
        h.map(|z| z / t),
        DomainTolerances::uniform(tol),
    ))
}

/// One line of a trajectory dump.
#[derive(Debug, Clone, PartialEq)]
pub struct DumpRow {
    pub t: f64,
    pub fidelity: f64,
    pub tr_rho: f64,
    pub lambda_min_rho: f64,
    pub purity_rho: f64,
    pub purity_rhohat: f64,
    /// Record increments of the step that ended at `t` (empty at t = 0).
    pub record: Vec<f64>,
}

impl DumpRow {
    pub fn from_pair(pair: &TrajectoryPair, record: Vec<f64>) -> Result<Self> {
        Ok(DumpRow {
            t: pair.t,
            fidelity: pair.fidelity()?,
            tr_rho: pair.rho.trace(),
            lambda_min_rho: pair.rho.min_eigenvalue(),
            purity_rho: pair.rho.purity(),
            purity_rhohat: pair.rho_hat.purity(),
            record,
        })
    }
}

/// Writes dump rows as CSV. `record_names` labels the record columns
/// (`dy_0`, `dy_1`, … for diffusive runs).
pub fn write_dump_csv<W: Write>(
    mut out: W,
    record_names: &[String],
    rows: &[DumpRow],
) -> Result<()> {
    write!(
        out,
        "t,fidelity,tr_rho,lambda_min_rho,purity_rho,purity_rhohat"
    )?;
    for name in record_names {
        write!(out, ",{name}")?;
    }
    writeln!(out)?;
    for row in rows {
        write!(
            out,
            "{},{},{},{},{},{}",
            row.t, row.fidelity, row.tr_rho, row.lambda_min_rho, row.purity_rho, row.purity_rhohat
        )?;
        for k in 0..record_names.len() {
            match row.record.get(k) {
                Some(v) => write!(out, ",{v}")?,
                None => write!(out, ",")?,
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densitymat::{random_mixed, random_pure};
    use crate::model::pauli_z;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn rho_paper() -> DensityMatrix {
        DensityMatrix::new(ComplexMatrix::from_row_slice(
            2,
            2,
            &[c(0.5), c(0.25), c(0.25), c(0.5)],
        ))
        .unwrap()
    }

    fn zero_model() -> SystemModel {
        SystemModel::single_channel(ComplexMatrix::zeros(2, 2), ComplexMatrix::zeros(2, 2)).unwrap()
    }

    #[test]
    fn wiener_moments_and_determinism() {
        for dt in [1.0, 1e-4] {
            let mut rng = trajectory_rng(42, 0);
            let n = 1_000_000;
            let samples: Vec<f64> = (0..n).map(|_| sample_wiener(&mut rng, dt)).collect();
            let mean = samples.iter().sum::<f64>() / n as f64;
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!(mean.abs() < 4e-3 * dt.sqrt(), "mean {mean}");
            assert!((var / dt - 1.0).abs() < 0.01, "var {var}");
        }
        let a: Vec<f64> = {
            let mut r = trajectory_rng(7, 3);
            (0..10).map(|_| sample_wiener(&mut r, 0.1)).collect()
        };
        let b: Vec<f64> = {
            let mut r = trajectory_rng(7, 3);
            (0..10).map(|_| sample_wiener(&mut r, 0.1)).collect()
        };
        assert_eq!(a, b);
        let mut other = trajectory_rng(7, 4);
        assert_ne!(a[0], sample_wiener(&mut other, 0.1));
    }

    #[test]
    fn measurement_increment_examples() {
        let half = DensityMatrix::maximally_mixed(2).unwrap();
        assert_eq!(measurement_increment(&half, &pauli_z(), 0.0, 0.01), 0.0);
        let up = DensityMatrix::basis(2, 0).unwrap();
        assert!((measurement_increment(&up, &pauli_z(), 0.0, 0.01) - 0.02).abs() < 1e-17);
        let mut rng = trajectory_rng(1, 1);
        for _ in 0..100 {
            let rho = random_mixed(&mut rng, 2);
            let dw = sample_wiener(&mut rng, 1e-3);
            let dy = measurement_increment(&rho, &pauli_z(), dw, 1e-3);
            let expected = rho.expectation(&(pauli_z() * c(2.0))) * 1e-3;
            assert!((dy - dw - expected).abs() < 1e-16);
        }
    }

    #[test]
    fn kraus_step_trivial_model_is_identity() {
        let mut rng = trajectory_rng(2, 0);
        let rho = random_mixed(&mut rng, 2);
        let out = kraus_step(&rho, &[0.37], 1e-3, &zero_model()).unwrap();
        assert!((out.matrix() - rho.matrix()).norm() < 1e-15);
    }

    #[test]
    fn kraus_step_preserves_purity() {
        let model = SystemModel::paper_qubit();
        let mut rng = trajectory_rng(3, 0);
        let mut rho = random_pure(&mut rng, 2);
        for _ in 0..1000 {
            let dy = measurement_increment(&rho, &pauli_z(), sample_wiener(&mut rng, 1e-3), 1e-3);
            rho = kraus_step(&rho, &[dy], 1e-3, &model).unwrap();
        }
        let eig = rho.eigenvalues();
        assert!(eig[0].abs() <= 1e-10, "{eig:?}");
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn kraus_step_matches_direct_fraction() {
        // independent evaluation of (𝕀 − iHdt − ½L†Ldt + Ldy)ρ(⋯)†/tr(⋯)
        let (dt, dy) = (1e-4, 0.01);
        let rho = [[0.5, 0.25], [0.25, 0.5]];
        // M = [[1 − dt/2 + dy, −dt], [dt, 1 − dt/2 − dy]], real for H = σ_y
        let m = [[1.0 - 0.5 * dt + dy, -dt], [dt, 1.0 - 0.5 * dt - dy]];
        let mut num = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        num[i][j] += m[i][k] * rho[k][l] * m[j][l];
                    }
                }
            }
        }
        let tr = num[0][0] + num[1][1];
        let out = kraus_step(&rho_paper(), &[dy], dt, &SystemModel::paper_qubit()).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((out.matrix()[(i, j)] - c(num[i][j] / tr)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn em_step_trivial_and_mean() {
        let mut rng = trajectory_rng(4, 0);
        let rho = random_mixed(&mut rng, 2);
        let out = em_step(&rho, Increment::Wiener(&[0.2]), 1e-3, &zero_model()).unwrap();
        assert!((out - rho.matrix()).norm() < 1e-15);

        // the diffusion term is odd in dW: antithetic pairs average to the drift
        let model = SystemModel::paper_qubit();
        let dt = 1e-3;
        let drift = rho.matrix() + model.drift(rho.matrix()) * c(dt);
        for _ in 0..20 {
            let w = sample_wiener(&mut rng, dt);
            let up = em_step(&rho, Increment::Wiener(&[w]), dt, &model).unwrap();
            let down = em_step(&rho, Increment::Wiener(&[-w]), dt, &model).unwrap();
            assert!(((up + down) * c(0.5) - &drift).norm() < 1e-15);
        }
        // and sampled: the mean over many dW converges to the drift step
        let n = 200_000;
        let mut acc = ComplexMatrix::zeros(2, 2);
        for _ in 0..n {
            let w = sample_wiener(&mut rng, dt);
            acc += em_step(&rho, Increment::Wiener(&[w]), dt, &model).unwrap();
        }
        let mean = acc / c(n as f64);
        // Λ(ρ) entries are O(1), so the sample mean is within ~4·√(dt/n)
        assert!((mean - drift).norm() < 4.0 * 2.0 * (dt / n as f64).sqrt());
    }

    #[test]
    fn em_filter_form_matches_true_form_on_own_record() {
        let model = SystemModel::paper_qubit();
        let rho = rho_paper();
        let dt = 1e-3;
        let dw = 0.02;
        let dy = measurement_increment(&rho, &pauli_z(), dw, dt);
        let a = em_step(&rho, Increment::Wiener(&[dw]), dt, &model).unwrap();
        let b = em_step(&rho, Increment::Record(&[dy]), dt, &model).unwrap();
        assert!((a - b).norm() < 1e-15);
    }

    #[test]
    fn em_and_kraus_agree_to_three_halves_order() {
        // with |dW| = √dt the Itô correction dW² − dt vanishes and the two
        // schemes differ at O(dt^{3/2})
        let model = SystemModel::paper_qubit();
        let rho = rho_paper();
        let dts: [f64; 3] = [1e-2, 1e-3, 1e-4];
        let mut logs = Vec::new();
        for &dt in &dts {
            let dw = dt.sqrt();
            let dy = measurement_increment(&rho, &pauli_z(), dw, dt);
            let k = kraus_step(&rho, &[dy], dt, &model).unwrap();
            let e = em_step(&rho, Increment::Wiener(&[dw]), dt, &model).unwrap();
            logs.push((dt.ln(), (k.matrix() - e).norm().ln()));
        }
        let slope = fit_slope(&logs);
        assert!((slope - 1.5).abs() < 0.15, "slope {slope}");
    }

    fn fit_slope(pts: &[(f64, f64)]) -> f64 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    }

    #[test]
    fn coupled_step_shares_record_and_is_reproducible() {
        let model = SystemModel::paper_qubit();
        let cfg = IntegratorConfig::kraus(1e-4);
        let pair = TrajectoryPair::new(
            rho_paper(),
            DensityMatrix::from_diagonal(&[1.0 / 3.0, 2.0 / 3.0]).unwrap(),
        )
        .unwrap();
        let a = coupled_step(&pair, &mut trajectory_rng(9, 0), &cfg, &model).unwrap();
        let b = coupled_step(&pair, &mut trajectory_rng(9, 0), &cfg, &model).unwrap();
        assert_eq!(a.pair, b.pair);
        assert_eq!(a.dy, b.dy);
        assert_eq!(a.pair.step, 1);
        // filter advanced with the very same dy
        let hat = kraus_step(&pair.rho_hat, &a.dy, 1e-4, &model).unwrap();
        assert_eq!(&hat, &a.pair.rho_hat);
        assert_eq!(
            a.dy[0],
            measurement_increment(&pair.rho, &pauli_z(), a.dw[0], 1e-4)
        );
    }

    #[test]
    fn identical_initial_states_stay_identical() {
        let model = SystemModel::paper_qubit();
        for cfg in [
            IntegratorConfig::kraus(1e-4),
            IntegratorConfig::euler_maruyama(1e-4, &model),
        ] {
            let mut pair = TrajectoryPair::new(rho_paper(), rho_paper()).unwrap();
            let mut rng = trajectory_rng(10, 0);
            for _ in 0..10_000 {
                pair = coupled_step(&pair, &mut rng, &cfg, &model).unwrap().pair;
            }
            assert!((pair.fidelity().unwrap() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn step_guard_rejects_huge_dt() {
        let model = SystemModel::paper_qubit();
        assert!(IntegratorConfig::kraus(1e-4).validate(&model).is_ok());
        assert!(matches!(
            IntegratorConfig::kraus(0.5).validate(&model),
            Err(Error::DegenerateNormalization { step: None, .. })
        ));
        assert!(IntegratorConfig::kraus(-1.0).validate(&model).is_err());
    }

    #[test]
    fn unmeasured_channel_enters_additively() {
        // L′ = σ_z alone: pure dephasing, ρ_01 decays by (1 − 2dt)/(1) per step
        let model =
            SystemModel::new(ComplexMatrix::zeros(2, 2), Vec::new(), vec![pauli_z()]).unwrap();
        let dt = 1e-3;
        let out = kraus_step(&rho_paper(), &[], dt, &model).unwrap();
        // (1 − dt/2)² ρ_01 − dt ρ_01 over trace (1 − dt/2)² + dt
        let a = (1.0 - 0.5 * dt) * (1.0 - 0.5 * dt);
        let expected = 0.25 * (a - dt) / (a + dt);
        assert!((out.matrix()[(0, 1)].re - expected).abs() < 1e-15);
        assert!(matches!(
            kraus_step(&rho_paper(), &[0.1], dt, &model),
            Err(Error::ChannelCount { .. })
        ));
    }

    #[test]
    fn measurement_record_bookkeeping() {
        let mut rec = MeasurementRecord::new(2, 0.0);
        rec.push(0.1, &[1.0, 2.0]).unwrap();
        rec.push(0.2, &[3.0, 4.0]).unwrap();
        assert_eq!(rec.len(), 2);
        assert_eq!(rec.dy[1], vec![2.0, 4.0]);
        assert!(rec.push(0.2, &[0.0, 0.0]).is_err());
        assert!(rec.push(0.3, &[0.0]).is_err());
    }

    #[test]
    fn dump_csv_layout() {
        let pair =
            TrajectoryPair::new(rho_paper(), DensityMatrix::maximally_mixed(2).unwrap()).unwrap();
        let rows = vec![DumpRow::from_pair(&pair, vec![]).unwrap()];
        let mut buf = Vec::new();
        write_dump_csv(&mut buf, &["dy_0".to_string()], &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,fidelity,tr_rho,lambda_min_rho,purity_rho,purity_rhohat,dy_0"
        );
        assert!(lines.next().unwrap().ends_with(','));
    }
}
