//! Homodyne photon-counting model: Poisson-jump master equations driven by a
//! local oscillator of amplitude α, its three-outcome discrete Kraus chain,
//! exact one-step fidelity expectations, and the α → ∞ diffusion-limit
//! comparison against the Wiener model.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::densitymat::{
    fidelity, hermitian_eigen, hermitian_part, identity, project_to_density, trace_re,
    ComplexMatrix, DensityMatrix, DomainTolerances, PROJECTION_TOL,
};
use crate::error::{Error, Result};
use crate::model::{
    displaced, hamiltonian_drift, lambda_raw, lindblad_raw, spectral_norm, upsilon_raw, SystemModel,
};
use crate::sde::TrajectoryPair;

/// Completeness tolerance ‖Σ M†M − 𝕀‖_F of a normalized Kraus set.
pub const COMPLETENESS_TOL: f64 = 1e-12;

/// Smallest eigenvalue of Σ M†M accepted by [`normalize_kraus_set`].
pub const MIN_NORMALIZER_EIGENVALUE: f64 = 1e-12;

/// Smallest post-outcome normalizer accepted by the chain.
pub const MIN_OUTCOME_NORM: f64 = 1e-15;

pub const DEFAULT_MAX_JUMP_PROB: f64 = 0.1;

/// Relative round-off allowance on the rate bound, which states with
/// tr{L†Lρ} = ‖L‖² meet with equality.
const RATE_SLACK: f64 = 1e-12;

/// How the no-jump drift is built from the displaced operators L ± α.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpDrift {
    /// −¼Λ[(L†+α)(L+α)] − ¼Λ[(L†−α)(L−α)], the first-order expansion of
    /// the no-click Kraus operator M₀. Its ensemble average reproduces the
    /// Lindblad equation for every α.
    #[default]
    Quadratic,
    /// −¼Λ_α − ¼Λ_{−α} with Λ_α built on L+α itself. Kept for comparison;
    /// its mean dynamics differ from the Lindblad equation by −½Λ(ρ).
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpConfig {
    pub alpha: f64,
    pub dt: f64,
    pub max_jump_prob: f64,
    /// Projection tolerance after each explicit Euler step; `None` sizes it
    /// from the O(dt²) positivity defect of the drift.
    pub domain_tol: Option<f64>,
    pub drift: JumpDrift,
}

impl JumpConfig {
    pub fn new(alpha: f64, dt: f64) -> Self {
        JumpConfig {
            alpha,
            dt,
            max_jump_prob: DEFAULT_MAX_JUMP_PROB,
            domain_tol: None,
            drift: JumpDrift::default(),
        }
    }

    /// Largest dt honouring the rate bound for every state:
    /// (r₁ + r₂)dt = (α² + tr{L†Lρ})dt ≤ (α² + ‖L‖²)dt.
    pub fn suggested_dt(&self, model: &SystemModel) -> Result<f64> {
        let l = model.sole_measured_channel()?;
        let l_norm = spectral_norm(l);
        Ok(self.max_jump_prob / (self.alpha * self.alpha + l_norm * l_norm))
    }

    pub fn validate(&self, model: &SystemModel) -> Result<()> {
        model.sole_measured_channel()?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Validation(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.max_jump_prob > 0.0 && self.max_jump_prob < 1.0) {
            return Err(Error::Validation("max_jump_prob must lie in (0, 1)".into()));
        }
        if !self.alpha.is_finite() {
            return Err(Error::Validation("alpha must be finite".into()));
        }
        let suggested_dt = self.suggested_dt(model)?;
        let prob = self.max_jump_prob * self.dt / suggested_dt;
        if prob > self.max_jump_prob * (1.0 + RATE_SLACK) {
            return Err(Error::RateOverflow {
                alpha: self.alpha,
                dt: self.dt,
                prob,
                max: self.max_jump_prob,
                suggested_dt,
            });
        }
        Ok(())
    }

    pub fn effective_domain_tol(&self, model: &SystemModel) -> f64 {
        self.domain_tol.unwrap_or_else(|| {
            let g = model.drift_scale();
            (4.0 * self.dt * self.dt * g * g).max(PROJECTION_TOL)
        })
    }
}

/// Jump rates (r₁, r₂) = (½tr{(L†+α)(L+α)ρ}, ½tr{(L†−α)(L−α)ρ}).
pub fn jump_rates(rho: &DensityMatrix, l: &ComplexMatrix, alpha: f64) -> (f64, f64) {
    let rate = |a: f64| {
        let k = displaced(l, a);
        0.5 * rho.expectation(&(k.adjoint() * k))
    };
    (rate(alpha).max(0.0), rate(-alpha).max(0.0))
}

/// Counting increments of one step. At most one counter fires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JumpOutcome {
    None,
    /// dN₁ = 1: the L+α channel clicked.
    Plus,
    /// dN₂ = 1: the L−α channel clicked.
    Minus,
}

impl JumpOutcome {
    /// (dN₁, dN₂).
    pub fn counts(self) -> (u8, u8) {
        match self {
            JumpOutcome::None => (0, 0),
            JumpOutcome::Plus => (1, 0),
            JumpOutcome::Minus => (0, 1),
        }
    }
}

/// Draws the step outcome from one uniform variate: dN₁ with probability
/// `p_plus`, dN₂ with probability `p_minus`, otherwise no click. Each
/// marginal is exact; simultaneous clicks never occur.
pub fn sample_outcome<R: Rng + ?Sized>(rng: &mut R, p_plus: f64, p_minus: f64) -> JumpOutcome {
    let u: f64 = rng.random();
    if u < p_plus {
        JumpOutcome::Plus
    } else if u < p_plus + p_minus {
        JumpOutcome::Minus
    } else {
        JumpOutcome::None
    }
}

#[derive(Debug, Clone)]
pub struct JumpStep {
    pub pair: TrajectoryPair,
    pub outcome: JumpOutcome,
}

/// One explicit step of the jump equations for the true state and the
/// filter. Click probabilities come from the true state; the same counts
/// drive both.
pub fn jump_step<R: Rng + ?Sized>(
    pair: &TrajectoryPair,
    rng: &mut R,
    cfg: &JumpConfig,
    model: &SystemModel,
) -> Result<JumpStep> {
    let l = model.sole_measured_channel()?;
    let (r1, r2) = jump_rates(&pair.rho, l, cfg.alpha);
    let (p1, p2) = (r1 * cfg.dt, r2 * cfg.dt);
    if p1 + p2 > cfg.max_jump_prob * (1.0 + RATE_SLACK) {
        return Err(Error::RateOverflow {
            alpha: cfg.alpha,
            dt: cfg.dt,
            prob: p1 + p2,
            max: cfg.max_jump_prob,
            suggested_dt: cfg.suggested_dt(model)?,
        });
    }
    let outcome = sample_outcome(rng, p1, p2);
    let pair = apply_jump(pair, outcome, cfg, model)?;
    Ok(JumpStep { pair, outcome })
}

/// The deterministic part of [`jump_step`] for a given outcome.
pub fn apply_jump(
    pair: &TrajectoryPair,
    outcome: JumpOutcome,
    cfg: &JumpConfig,
    model: &SystemModel,
) -> Result<TrajectoryPair> {
    let rho = jump_update(&pair.rho, outcome, cfg, model)?;
    let rho_hat = jump_update(&pair.rho_hat, outcome, cfg, model)?;
    Ok(pair.advance(cfg.dt, rho, rho_hat))
}

/// One step of the jump equation, split into the Euler drift step
/// ρ′ = ρ + drift(ρ)dt (projected onto 𝒟) followed, on a click, by the
/// exact jump ρ′ ↦ (L±α)ρ′(L±α)†/tr{·} = ρ′ + Υ_{±α}(ρ′). The splitting
/// differs from ρ + drift(ρ)dt + Υ(ρ)dN by O(dt) on an event of
/// probability O(dt) and keeps post-jump states positive.
pub fn jump_update(
    rho: &DensityMatrix,
    outcome: JumpOutcome,
    cfg: &JumpConfig,
    model: &SystemModel,
) -> Result<DensityMatrix> {
    let l = model.sole_measured_channel()?;
    let m = rho.matrix();
    let drifted = m + no_jump_drift(m, l, cfg, model) * Complex64::new(cfg.dt, 0.0);
    let drifted = project_to_density(&drifted, cfg.effective_domain_tol(model))?.state;
    let k = match outcome {
        JumpOutcome::None => return Ok(drifted),
        JumpOutcome::Plus => displaced(l, cfg.alpha),
        JumpOutcome::Minus => displaced(l, -cfg.alpha),
    };
    let jumped = upsilon_raw(&k, drifted.matrix())? + drifted.matrix();
    Ok(project_to_density(&jumped, PROJECTION_TOL)?.state)
}

fn no_jump_drift(
    rho: &ComplexMatrix,
    l: &ComplexMatrix,
    cfg: &JumpConfig,
    model: &SystemModel,
) -> ComplexMatrix {
    let quarter = Complex64::new(0.25, 0.0);
    let mut out = hamiltonian_drift(model.hamiltonian(), rho);
    for lp in model.unmeasured_channels() {
        out += lindblad_raw(lp, rho);
    }
    let (plus, minus) = (displaced(l, cfg.alpha), displaced(l, -cfg.alpha));
    let (kp, km) = match cfg.drift {
        JumpDrift::Quadratic => (plus.adjoint() * &plus, minus.adjoint() * &minus),
        JumpDrift::Linear => (plus, minus),
    };
    out -= (lambda_raw(&kp, rho) + lambda_raw(&km, rho)) * quarter;
    out
}

/// Operator family {M_r}; `normalized` records whether completeness
/// Σ M_r†M_r = 𝕀 was enforced.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausSet {
    operators: Vec<ComplexMatrix>,
    normalized: bool,
}

impl KrausSet {
    /// Wraps arbitrary operators as an unnormalized set.
    pub fn new(operators: Vec<ComplexMatrix>) -> Result<Self> {
        let first = operators
            .first()
            .ok_or_else(|| Error::Validation("empty Kraus set".into()))?;
        let n = crate::densitymat::check_square(first)?;
        for m in &operators {
            let found = crate::densitymat::check_square(m)?;
            if found != n {
                return Err(Error::ShapeMismatch { expected: n, found });
            }
        }
        Ok(KrausSet {
            operators,
            normalized: false,
        })
    }

    pub fn operators(&self) -> &[ComplexMatrix] {
        &self.operators
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn dim(&self) -> usize {
        self.operators[0].nrows()
    }

    /// Σ M_r†M_r.
    pub fn gram(&self) -> ComplexMatrix {
        let n = self.dim();
        self.operators
            .iter()
            .fold(ComplexMatrix::zeros(n, n), |acc, m| acc + m.adjoint() * m)
    }

    /// ‖Σ M_r†M_r − 𝕀‖_F.
    pub fn completeness_defect(&self) -> f64 {
        (self.gram() - identity(self.dim())).norm()
    }

    /// Refuses sets that are not complete within [`COMPLETENESS_TOL`].
    pub fn require_complete(&self) -> Result<()> {
        let defect = self.completeness_defect();
        if defect > COMPLETENESS_TOL {
            return Err(Error::IncompleteKrausSet { defect });
        }
        Ok(())
    }

    /// P_r = tr{M_r χ M_r†}.
    pub fn probabilities(&self, chi: &DensityMatrix) -> Vec<f64> {
        self.operators
            .iter()
            .map(|m| trace_re(&(m * chi.matrix() * m.adjoint())).max(0.0))
            .collect()
    }

    /// M_r χ M_r† / tr{M_r χ M_r†}.
    pub fn apply(&self, state: &DensityMatrix, outcome: usize) -> Result<DensityMatrix> {
        let m = self
            .operators
            .get(outcome)
            .ok_or_else(|| Error::Validation(format!("no Kraus operator {outcome}")))?;
        let num = m * state.matrix() * m.adjoint();
        let norm = trace_re(&num);
        if !(norm > MIN_OUTCOME_NORM) {
            return Err(Error::DegenerateOutcome { outcome, norm });
        }
        Ok(DensityMatrix::from_trusted(
            hermitian_part(&num.map(|z| z / norm)),
            DomainTolerances::default(),
        ))
    }
}

/// M₀ = 𝕀 − ¼(L†+α)(L+α)ε − ¼(L†−α)(L−α)ε − iHε, M₁ = (L+α)√(ε/2),
/// M₂ = (L−α)√(ε/2). Unmeasured channels contribute −½L′†L′ε to M₀ and
/// an extra operator L′√ε each.
pub fn build_kraus_set(model: &SystemModel, alpha: f64, eps: f64) -> Result<KrausSet> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Validation(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let l = model.sole_measured_channel()?;
    let n = model.dim();
    let (plus, minus) = (displaced(l, alpha), displaced(l, -alpha));
    let mut m0 = identity(n)
        - (plus.adjoint() * &plus + minus.adjoint() * &minus) * Complex64::new(0.25 * eps, 0.0)
        - model.hamiltonian() * Complex64::new(0.0, eps);
    for lp in model.unmeasured_channels() {
        m0 -= lp.adjoint() * lp * Complex64::new(0.5 * eps, 0.0);
    }
    let root = Complex64::new((0.5 * eps).sqrt(), 0.0);
    let mut ops = vec![m0, plus * root, minus * root];
    for lp in model.unmeasured_channels() {
        ops.push(lp * Complex64::new(eps.sqrt(), 0.0));
    }
    KrausSet::new(ops)
}

/// (√A)⁻¹ for A = Σ M_r†M_r, via a Hermitian eigendecomposition.
pub fn inverse_sqrt_normalizer(set: &KrausSet) -> Result<ComplexMatrix> {
    let eig = hermitian_eigen(&set.gram());
    if eig.min() <= MIN_NORMALIZER_EIGENVALUE {
        return Err(Error::SingularNormalizer {
            min_eigenvalue: eig.min(),
        });
    }
    Ok(eig.reconstruct(|l| 1.0 / l.sqrt()))
}

/// M̃_r = M_r (√A)⁻¹, so that Σ M̃_r†M̃_r = (√A)⁻¹ A (√A)⁻¹ = 𝕀.
pub fn normalize_kraus_set(set: &KrausSet) -> Result<KrausSet> {
    let inv = inverse_sqrt_normalizer(set)?;
    let operators = set.operators.iter().map(|m| m * &inv).collect();
    let out = KrausSet {
        operators,
        normalized: true,
    };
    out.require_complete()?;
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ChainStep {
    pub chi: DensityMatrix,
    pub chi_hat: DensityMatrix,
    pub outcome: usize,
}

fn require_usable(set: &KrausSet) -> Result<()> {
    if !set.is_normalized() {
        return Err(Error::IncompleteKrausSet {
            defect: set.completeness_defect(),
        });
    }
    set.require_complete()
}

/// Samples μ with probability tr{M̃_μ χ M̃_μ†} from the true state and
/// updates both states with that outcome.
pub fn chain_step<R: Rng + ?Sized>(
    chi: &DensityMatrix,
    chi_hat: &DensityMatrix,
    rng: &mut R,
    set: &KrausSet,
) -> Result<ChainStep> {
    let probs = set.probabilities(chi);
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::IncompleteKrausSet {
            defect: (total - 1.0).abs(),
        });
    }
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut outcome = probs.len() - 1;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            outcome = k;
            break;
        }
    }
    Ok(ChainStep {
        chi: set.apply(chi, outcome)?,
        chi_hat: set.apply(chi_hat, outcome)?,
        outcome,
    })
}

/// E[F(χ_{k+1}, χ̂_{k+1}) | χ_k, χ̂_k] by enumeration over outcomes, next to
/// the current F(χ_k, χ̂_k).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneStepFidelity {
    pub expected: f64,
    pub current: f64,
}

impl OneStepFidelity {
    pub fn gap(&self) -> f64 {
        self.expected - self.current
    }
}

pub fn one_step_expected_fidelity(
    chi: &DensityMatrix,
    chi_hat: &DensityMatrix,
    set: &KrausSet,
) -> Result<OneStepFidelity> {
    require_usable(set)?;
    let current = fidelity(chi, chi_hat)?;
    let mut expected = 0.0;
    for (mu, p) in set.probabilities(chi).into_iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        let post = set.apply(chi, mu)?;
        let post_hat = set.apply(chi_hat, mu)?;
        expected += p * fidelity(&post, &post_hat)?;
    }
    Ok(OneStepFidelity { expected, current })
}

/// Parameters of [`diffusion_limit_check`].
#[derive(Debug, Clone)]
pub struct DiffusionLimitSpec {
    pub alphas: Vec<f64>,
    /// Common step for every α and the Wiener reference; `None` picks the
    /// largest step that satisfies the rate bound of the largest α.
    pub dt: Option<f64>,
    pub horizon: f64,
    /// Number of equally spaced report times in (0, horizon].
    pub report_points: usize,
    pub n_traj: usize,
    pub seed: u64,
    /// Observable σ whose mean tr(σρ_t) is compared.
    pub observable: ComplexMatrix,
    pub max_jump_prob: f64,
    pub workers: Option<usize>,
    /// Width (in standard errors) of the "decreasing within noise" test.
    pub trend_sigmas: f64,
}

impl DiffusionLimitSpec {
    pub fn new(alphas: Vec<f64>, observable: ComplexMatrix) -> Self {
        DiffusionLimitSpec {
            alphas,
            dt: None,
            horizon: 0.5,
            report_points: 5,
            n_traj: 2000,
            seed: 0,
            observable,
            max_jump_prob: DEFAULT_MAX_JUMP_PROB,
            workers: None,
            trend_sigmas: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRow {
    pub alpha: f64,
    pub t: f64,
    pub obs_gap: f64,
    pub fid_gap: f64,
    pub stderr_obs: f64,
    pub stderr_fid: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiffusionLimitReport {
    pub dt: f64,
    pub rows: Vec<GapRow>,
    /// Whether both gaps at the horizon are non-increasing in α within
    /// `trend_sigmas` standard errors. Vacuously true for a single α.
    pub trend_ok: bool,
    pub violations: Vec<String>,
}

impl DiffusionLimitReport {
    /// Rows at the final report time, in α order.
    pub fn final_rows(&self) -> Vec<&GapRow> {
        let t_end = self.rows.iter().map(|r| r.t).fold(f64::MIN, f64::max);
        self.rows.iter().filter(|r| r.t == t_end).collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "alpha,t,obs_gap,fid_gap,stderr_obs,stderr_fid")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.alpha, r.t, r.obs_gap, r.fid_gap, r.stderr_obs, r.stderr_fid
            )?;
        }
        Ok(())
    }
}

/// Picks a common dt for the α sweep: the rate bound of the largest α,
/// rounded down so that every report time is a whole number of steps.
pub fn sweep_dt(model: &SystemModel, spec: &DiffusionLimitSpec) -> Result<f64> {
    let alpha_max = spec.alphas.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    let bound = JumpConfig {
        max_jump_prob: spec.max_jump_prob,
        ..JumpConfig::new(alpha_max, 1.0)
    }
    .suggested_dt(model)?;
    let points = spec.report_points.max(1);
    let per_point = (spec.horizon / points as f64 / bound).ceil().max(1.0);
    Ok(spec.horizon / (per_point * points as f64))
}

/// Runs, for each α, a jump ensemble and an independent Wiener ensemble of
/// the same size and step, and reports the gaps between their mean
/// observable and mean fidelity at the report times.
pub fn diffusion_limit_check(
    model: &SystemModel,
    rho0: &DensityMatrix,
    rho_hat0: &DensityMatrix,
    spec: &DiffusionLimitSpec,
) -> Result<DiffusionLimitReport> {
    use crate::stats::{run_paths, Driver, EnsembleConfig};

    if spec.alphas.is_empty() {
        return Err(Error::Validation("alpha list is empty".into()));
    }
    if spec.report_points == 0 {
        return Err(Error::Validation("report_points must be positive".into()));
    }
    let dt = match spec.dt {
        Some(dt) => dt,
        None => sweep_dt(model, spec)?,
    };
    for &alpha in &spec.alphas {
        JumpConfig {
            max_jump_prob: spec.max_jump_prob,
            ..JumpConfig::new(alpha, dt)
        }
        .validate(model)?;
    }
    let checkpoints: Vec<f64> = (0..=spec.report_points)
        .map(|k| spec.horizon * k as f64 / spec.report_points as f64)
        .collect();
    let probe = |pair: &TrajectoryPair| -> Result<(f64, f64)> {
        Ok((pair.rho.expectation(&spec.observable), pair.fidelity()?))
    };

    let mut rows = Vec::new();
    for (k, &alpha) in spec.alphas.iter().enumerate() {
        let base = EnsembleConfig {
            n_traj: spec.n_traj,
            seed: spec.seed.wrapping_add(2 * k as u64),
            dt,
            horizon: spec.horizon,
            checkpoints: checkpoints.clone(),
            driver: Driver::Jump {
                alpha,
                max_jump_prob: spec.max_jump_prob,
            },
            workers: spec.workers,
            project_every: 1,
            domain_tol: None,
        };
        let jump = run_paths(model, rho0, rho_hat0, &base, probe)?;
        let wiener_cfg = EnsembleConfig {
            seed: spec.seed.wrapping_add(2 * k as u64 + 1),
            driver: Driver::DiffusiveKraus,
            ..base
        };
        let wiener = run_paths(model, rho0, rho_hat0, &wiener_cfg, probe)?;
        for (c, &t) in checkpoints.iter().enumerate().skip(1) {
            let (jo, jo_se) = mean_se(jump.paths.iter().map(|p| p[c].0));
            let (wo, wo_se) = mean_se(wiener.paths.iter().map(|p| p[c].0));
            let (jf, jf_se) = mean_se(jump.paths.iter().map(|p| p[c].1));
            let (wf, wf_se) = mean_se(wiener.paths.iter().map(|p| p[c].1));
            rows.push(GapRow {
                alpha,
                t,
                obs_gap: (jo - wo).abs(),
                fid_gap: (jf - wf).abs(),
                stderr_obs: jo_se.hypot(wo_se),
                stderr_fid: jf_se.hypot(wf_se),
            });
        }
    }

    let mut report = DiffusionLimitReport {
        dt,
        rows,
        trend_ok: true,
        violations: Vec::new(),
    };
    let finals: Vec<GapRow> = report.final_rows().into_iter().cloned().collect();
    for w in finals.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let obs_slack = spec.trend_sigmas * a.stderr_obs.hypot(b.stderr_obs);
        if b.obs_gap > a.obs_gap + obs_slack {
            report.violations.push(format!(
                "observable gap grows from {} (alpha {}) to {} (alpha {})",
                a.obs_gap, a.alpha, b.obs_gap, b.alpha
            ));
        }
        let fid_slack = spec.trend_sigmas * a.stderr_fid.hypot(b.stderr_fid);
        if b.fid_gap > a.fid_gap + fid_slack {
            report.violations.push(format!(
                "fidelity gap grows from {} (alpha {}) to {} (alpha {})",
                a.fid_gap, a.alpha, b.fid_gap, b.alpha
            ));
        }
    }
    report.trend_ok = report.violations.is_empty();
    Ok(report)
}

fn mean_se(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
