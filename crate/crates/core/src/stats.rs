//! Ensemble execution over many coupled (true state, filter) trajectories,
//! mean-fidelity series with standard errors, and the paired-increment
//! submartingale test.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::densitymat::DensityMatrix;
use crate::error::{Error, Result};
use crate::jump::{
    build_kraus_set, chain_step, jump_step, normalize_kraus_set, JumpConfig, KrausSet,
    DEFAULT_MAX_JUMP_PROB,
};
use crate::model::SystemModel;
use crate::sde::{coupled_step, trajectory_rng, DumpRow, IntegratorConfig, TrajectoryPair};

/// Largest tolerated fraction of aborted trajectories.
pub const ABORT_BUDGET: f64 = 0.01;

pub const DEFAULT_Z_CRIT: f64 = 3.0;

/// Smallest ensemble accepted by [`submartingale_test`].
pub const MIN_TEST_TRAJECTORIES: usize = 50;

/// Absolute slack added to the z-test so that round-off jitter of a
/// constant series (increments of order 1e-16) is not read as a decrease.
pub const INCREMENT_FLOOR: f64 = 1e-12;

/// Relative tolerance for a checkpoint to count as a multiple of dt.
const GRID_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Driver {
    DiffusiveKraus,
    DiffusiveEm,
    Jump {
        alpha: f64,
        max_jump_prob: f64,
    },
    /// Discrete Kraus chain with ε = dt.
    Chain {
        alpha: f64,
    },
}

impl Driver {
    pub fn jump(alpha: f64) -> Self {
        Driver::Jump {
            alpha,
            max_jump_prob: DEFAULT_MAX_JUMP_PROB,
        }
    }

    /// Column names of the per-step record written to dumps.
    pub fn record_names(&self, model: &SystemModel) -> Vec<String> {
        match self {
            Driver::DiffusiveKraus | Driver::DiffusiveEm => (0..model.measured_channels().len())
                .map(|k| format!("dy_{k}"))
                .collect(),
            Driver::Jump { .. } => vec!["dn_1".into(), "dn_2".into()],
            Driver::Chain { .. } => vec!["outcome".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleConfig {
    pub n_traj: usize,
    pub seed: u64,
    pub dt: f64,
    pub horizon: f64,
    pub checkpoints: Vec<f64>,
    pub driver: Driver,
    /// Worker threads; `None` uses all available cores. Never affects results.
    pub workers: Option<usize>,
    /// Steps between eigenvalue projections for the Euler–Maruyama driver.
    pub project_every: usize,
    /// Overrides the driver's default projection tolerance.
    pub domain_tol: Option<f64>,
}

impl EnsembleConfig {
    pub fn new(n_traj: usize, seed: u64, dt: f64, horizon: f64, checkpoints: usize) -> Self {
        EnsembleConfig {
            n_traj,
            seed,
            dt,
            horizon,
            checkpoints: uniform_checkpoints(horizon, checkpoints),
            driver: Driver::DiffusiveKraus,
            workers: None,
            project_every: 1,
            domain_tol: None,
        }
    }

    /// 500 trajectories, dt = 1e-4, T = 3, checkpoints every 0.05.
    pub fn paper_qubit(seed: u64) -> Self {
        EnsembleConfig::new(500, seed, 1e-4, 3.0, 61)
    }

    /// Step index of every checkpoint.
    pub fn checkpoint_steps(&self) -> Result<Vec<usize>> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Validation(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Validation(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if self.checkpoints.is_empty() {
            return Err(Error::Validation("no checkpoints".into()));
        }
        let mut steps = Vec::with_capacity(self.checkpoints.len());
        for &t in &self.checkpoints {
            if !(t >= 0.0 && t <= self.horizon * (1.0 + GRID_TOL)) {
                return Err(Error::Validation(format!(
                    "checkpoint {t} outside [0, {}]",
                    self.horizon
                )));
            }
            let k = (t / self.dt).round();
            if (k * self.dt - t).abs() > GRID_TOL * t.max(1.0) {
                return Err(Error::Validation(format!(
                    "checkpoint {t} is not a multiple of dt = {}",
                    self.dt
                )));
            }
            let k = k as usize;
            if steps.last().is_some_and(|&prev| k <= prev) {
                return Err(Error::Validation(
                    "checkpoints must be strictly increasing".into(),
                ));
            }
            steps.push(k);
        }
        Ok(steps)
    }

    pub fn validate(&self, model: &SystemModel) -> Result<()> {
        if self.n_traj == 0 {
            return Err(Error::Validation("n_traj must be positive".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Validation("workers must be positive".into()));
        }
        self.checkpoint_steps()?;
        Stepper::build(self, model).map(|_| ())
    }
}

/// `count` equally spaced times covering [0, horizon].
pub fn uniform_checkpoints(horizon: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![horizon],
        _ => (0..count)
            .map(|k| horizon * k as f64 / (count - 1) as f64)
            .collect(),
    }
}

enum Stepper {
    Diffusive(IntegratorConfig),
    Jump(JumpConfig),
    Chain(KrausSet),
}

impl Stepper {
    fn build(cfg: &EnsembleConfig, model: &SystemModel) -> Result<Self> {
        let stepper = match cfg.driver {
            Driver::DiffusiveKraus | Driver::DiffusiveEm => {
                let mut ic = if cfg.driver == Driver::DiffusiveKraus {
                    IntegratorConfig::kraus(cfg.dt)
                } else {
                    IntegratorConfig::euler_maruyama(cfg.dt, model)
                };
                ic.project_every = cfg.project_every;
                if let Some(tol) = cfg.domain_tol {
                    ic.domain_tol = tol;
                }
                ic.validate(model)?;
                Stepper::Diffusive(ic)
            }
            Driver::Jump {
                alpha,
                max_jump_prob,
            } => {
                let jc = JumpConfig {
                    max_jump_prob,
                    domain_tol: cfg.domain_tol,
                    ..JumpConfig::new(alpha, cfg.dt)
                };
                jc.validate(model)?;
                Stepper::Jump(jc)
            }
            Driver::Chain { alpha } => Stepper::Chain(normalize_kraus_set(&build_kraus_set(
                model, alpha, cfg.dt,
            )?)?),
        };
        Ok(stepper)
    }

    fn step(
        &self,
        pair: &TrajectoryPair,
        rng: &mut rand_chacha::ChaCha8Rng,
        dt: f64,
        model: &SystemModel,
    ) -> Result<(TrajectoryPair, Vec<f64>)> {
        match self {
            Stepper::Diffusive(ic) => {
                let s = coupled_step(pair, rng, ic, model)?;
                Ok((s.pair, s.dy))
            }
            Stepper::Jump(jc) => {
                let s = jump_step(pair, rng, jc, model)?;
                let (n1, n2) = s.outcome.counts();
                Ok((s.pair, vec![n1 as f64, n2 as f64]))
            }
            Stepper::Chain(set) => {
                let s = chain_step(&pair.rho, &pair.rho_hat, rng, set)?;
                Ok((pair.advance(dt, s.chi, s.chi_hat), vec![s.outcome as f64]))
            }
        }
    }
}

/// Per-trajectory samples of an arbitrary probe at every checkpoint.
#[derive(Debug, Clone)]
pub struct EnsembleSamples<T> {
    pub checkpoints: Vec<f64>,
    /// Surviving trajectories in index order.
    pub paths: Vec<Vec<T>>,
    pub n_traj: usize,
    pub aborted: usize,
}

/// Runs `cfg.n_traj` coupled trajectories and evaluates `probe` at every
/// checkpoint. Trajectory i draws from stream i of the seed, and results
/// are gathered in index order, so the output does not depend on the
/// number of workers.
pub fn run_paths<T, F>(
    model: &SystemModel,
    rho0: &DensityMatrix,
    rho_hat0: &DensityMatrix,
    cfg: &EnsembleConfig,
    probe: F,
) -> Result<EnsembleSamples<T>>
where
    T: Send,
    F: Fn(&TrajectoryPair) -> Result<T> + Sync,
{
    if cfg.n_traj == 0 {
        return Err(Error::Validation("n_traj must be positive".into()));
    }
    let steps = cfg.checkpoint_steps()?;
    let stepper = Stepper::build(cfg, model)?;
    let start = TrajectoryPair::new(rho0.clone(), rho_hat0.clone())?;
    if rho0.dim() != model.dim() {
        return Err(Error::ShapeMismatch {
            expected: model.dim(),
            found: rho0.dim(),
        });
    }

    let run_one = |index: usize| -> Result<Vec<T>> {
        let mut rng = trajectory_rng(cfg.seed, index as u64);
        let mut pair = start.clone();
        let mut out = Vec::with_capacity(steps.len());
        for &target in &steps {
            while pair.step < target {
                pair = stepper.step(&pair, &mut rng, cfg.dt, model)?.0;
            }
            out.push(probe(&pair)?);
        }
        Ok(out)
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Validation(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<Vec<T>>> =
        pool.install(|| (0..cfg.n_traj).into_par_iter().map(run_one).collect());

    let mut paths = Vec::with_capacity(cfg.n_traj);
    let mut first_error = None;
    let mut aborted = 0;
    for r in results {
        match r {
            Ok(p) => paths.push(p),
            Err(e) => {
                aborted += 1;
                first_error.get_or_insert(e);
            }
        }
    }
    if let Some(first) = first_error {
        if aborted as f64 > ABORT_BUDGET * cfg.n_traj as f64 {
            return Err(Error::TooManyAborted {
                aborted,
                n_traj: cfg.n_traj,
                first: Box::new(first),
            });
        }
    }
    Ok(EnsembleSamples {
        checkpoints: cfg.checkpoints.clone(),
        paths,
        n_traj: cfg.n_traj,
        aborted,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleResult {
    pub checkpoints: Vec<f64>,
    pub mean_fidelity: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_traj: usize,
    pub aborted: usize,
    /// Fidelity of every surviving trajectory at every checkpoint.
    #[serde(skip)]
    pub paths: Vec<Vec<f64>>,
}

impl EnsembleResult {
    /// Builds the summary statistics from per-trajectory fidelity paths.
    pub fn from_paths(
        checkpoints: Vec<f64>,
        paths: Vec<Vec<f64>>,
        n_traj: usize,
        aborted: usize,
    ) -> Result<Self> {
        if paths.iter().any(|p| p.len() != checkpoints.len()) {
            return Err(Error::Validation(
                "path length differs from checkpoint count".into(),
            ));
        }
        let (mean_fidelity, stderr) = (0..checkpoints.len())
            .map(|c| mean_stderr(paths.iter().map(|p| p[c])))
            .unzip();
        Ok(EnsembleResult {
            checkpoints,
            mean_fidelity,
            stderr,
            n_traj,
            aborted,
            paths,
        })
    }

    /// Trajectories that contributed to the statistics.
    pub fn n_used(&self) -> usize {
        self.paths.len()
    }

    pub fn final_mean(&self) -> Option<f64> {
        self.mean_fidelity.last().copied()
    }

    /// CSV with columns t, mean_fidelity, stderr, n.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,mean_fidelity,stderr,n")?;
        for ((t, m), s) in self
            .checkpoints
            .iter()
            .zip(&self.mean_fidelity)
            .zip(&self.stderr)
        {
            writeln!(out, "{t},{m},{s},{}", self.n_used())?;
        }
        Ok(())
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self).map_err(|e| Error::Io(e.to_string()))
    }
}

/// Sample mean and standard error of the mean, summed in iteration order.
pub fn mean_stderr(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    // shifted by the first sample so that a constant series is exact
    let mean = v[0] + v.iter().map(|x| x - v[0]).sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Mean fidelity F(ρ_t, ρ̂_t) over an ensemble.
pub fn run_ensemble(
    model: &SystemModel,
    rho0: &DensityMatrix,
    rho_hat0: &DensityMatrix,
    cfg: &EnsembleConfig,
) -> Result<EnsembleResult> {
    let samples = run_paths(model, rho0, rho_hat0, cfg, |pair| pair.fidelity())?;
    EnsembleResult::from_paths(
        samples.checkpoints,
        samples.paths,
        samples.n_traj,
        samples.aborted,
    )
}

/// Rows of one trajectory at every `stride`-th step, for inspection.
pub fn dump_trajectory(
    model: &SystemModel,
    rho0: &DensityMatrix,
    rho_hat0: &DensityMatrix,
    cfg: &EnsembleConfig,
    index: usize,
    stride: usize,
) -> Result<Vec<DumpRow>> {
    let steps = cfg.checkpoint_steps()?;
    let last = *steps.last().unwrap_or(&0);
    let stride = stride.max(1);
    let stepper = Stepper::build(cfg, model)?;
    let mut rng = trajectory_rng(cfg.seed, index as u64);
    let mut pair = TrajectoryPair::new(rho0.clone(), rho_hat0.clone())?;
    let mut rows = vec![DumpRow::from_pair(&pair, Vec::new())?];
    while pair.step < last {
        let (next, record) = stepper.step(&pair, &mut rng, cfg.dt, model)?;
        pair = next;
        if pair.step % stride == 0 || pair.step == last {
            rows.push(DumpRow::from_pair(&pair, record)?);
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubmartingaleReport {
    pub pass: bool,
    pub z_crit: f64,
    /// Most negative interval z-score, or 0 if none is negative.
    pub worst_violation: f64,
    pub mean_increments: Vec<f64>,
    pub stderr_increments: Vec<f64>,
    pub z_scores: Vec<f64>,
    /// Indices of intervals that failed the test.
    pub failed_intervals: Vec<usize>,
}

/// One-sided paired test: interval k passes iff the mean per-trajectory
/// increment is at least −z_crit·stderr (less [`INCREMENT_FLOOR`]).
pub fn submartingale_test(result: &EnsembleResult, z_crit: f64) -> Result<SubmartingaleReport> {
    if !(z_crit > 0.0) {
        return Err(Error::Validation(format!(
            "z_crit must be positive, got {z_crit}"
        )));
    }
    if result.checkpoints.len() < 2 {
        return Err(Error::InsufficientData(
            "need at least two checkpoints".into(),
        ));
    }
    if result.n_used() < MIN_TEST_TRAJECTORIES {
        return Err(Error::InsufficientData(format!(
            "need at least {MIN_TEST_TRAJECTORIES} trajectories, have {}",
            result.n_used()
        )));
    }
    let mut report = SubmartingaleReport {
        pass: true,
        z_crit,
        worst_violation: 0.0,
        mean_increments: Vec::new(),
        stderr_increments: Vec::new(),
        z_scores: Vec::new(),
        failed_intervals: Vec::new(),
    };
    for k in 0..result.checkpoints.len() - 1 {
        let (mean, se) = mean_stderr(result.paths.iter().map(|p| p[k + 1] - p[k]));
        let z = if se > 0.0 {
            mean / se
        } else if mean >= 0.0 {
            0.0
        } else {
            f64::NEG_INFINITY
        };
        if mean < -(z_crit * se + INCREMENT_FLOOR) {
            report.pass = false;
            report.failed_intervals.push(k);
        }
        report.worst_violation = report.worst_violation.min(z);
        report.mean_increments.push(mean);
        report.stderr_increments.push(se);
        report.z_scores.push(z);
    }
    Ok(report)
}

impl SubmartingaleReport {
    /// CSV with one row per checkpoint interval.
    pub fn write_csv<W: Write>(&self, mut out: W, checkpoints: &[f64]) -> Result<()> {
        writeln!(out, "t_start,t_end,mean_increment,stderr,z")?;
        for k in 0..self.z_scores.len() {
            writeln!(
                out,
                "{},{},{},{},{}",
                checkpoints[k],
                checkpoints[k + 1],
                self.mean_increments[k],
                self.stderr_increments[k],
                self.z_scores[k]
            )?;
        }
        Ok(())
    }
}

/// Whether the mean fidelity at the last checkpoint reaches `threshold`.
/// A diagnostic only: the submartingale property does not imply it.
pub fn final_convergence(result: &EnsembleResult, threshold: f64) -> bool {
    result.final_mean().is_some_and(|m| m >= threshold)
}
