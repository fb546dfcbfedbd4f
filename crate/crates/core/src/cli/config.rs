//! Experiment configuration documents (TOML) and their validation.

use std::path::PathBuf;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::densitymat::{matrix_from_literal, matrix_to_literal, ComplexMatrix, DensityMatrix};
use crate::error::{Error, Result};
use crate::jump::DEFAULT_MAX_JUMP_PROB;
use crate::model::{pauli_x, pauli_y, pauli_z, SystemModel};
use crate::stats::{uniform_checkpoints, Driver, EnsembleConfig, DEFAULT_Z_CRIT};

pub const PAPER_QUBIT: &str = "paper-qubit";

/// A matrix given by name or as a literal: rows of reals, or rows of
/// `[re, im]` pairs.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Name(String),
    Real(Vec<Vec<f64>>),
    Complex(Vec<Vec<[f64; 2]>>),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    preset: Option<String>,
    #[serde(default)]
    model: RawModel,
    #[serde(default)]
    initial: RawInitial,
    #[serde(default)]
    ensemble: RawEnsemble,
    #[serde(default)]
    jump: RawJump,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    preset: Option<String>,
    hamiltonian: Option<MatrixSpec>,
    #[serde(default)]
    measured: Option<Vec<MatrixSpec>>,
    #[serde(default)]
    unmeasured: Option<Vec<MatrixSpec>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    rho0: Option<MatrixSpec>,
    rho_hat0: Option<MatrixSpec>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnsemble {
    n_traj: Option<usize>,
    seed: Option<u64>,
    dt: Option<f64>,
    horizon: Option<f64>,
    checkpoints: Option<usize>,
    checkpoint_times: Option<Vec<f64>>,
    driver: Option<DriverKind>,
    workers: Option<usize>,
    project_every: Option<usize>,
    domain_tol: Option<f64>,
    z_crit: Option<f64>,
    convergence_threshold: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DriverKind {
    DiffusiveKraus,
    DiffusiveEm,
    Jump,
    Chain,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawJump {
    alpha: Option<f64>,
    alphas: Option<Vec<f64>>,
    eps: Option<f64>,
    pairs: Option<usize>,
    max_jump_prob: Option<f64>,
    sweep_dt: Option<f64>,
    sweep_horizon: Option<f64>,
    sweep_n_traj: Option<usize>,
    sweep_report_points: Option<usize>,
    observable: Option<MatrixSpec>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
    format: Option<Format>,
    gnuplot: Option<bool>,
    dump_stride: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Settings of the jump model used by chain-check, sweep-alpha and the
/// jump/chain drivers.
#[derive(Debug, Clone, Serialize)]
pub struct JumpSettings {
    pub alpha: f64,
    pub alphas: Vec<f64>,
    pub eps: f64,
    pub pairs: usize,
    pub max_jump_prob: f64,
    pub sweep_dt: Option<f64>,
    pub sweep_horizon: f64,
    pub sweep_n_traj: usize,
    pub sweep_report_points: usize,
    #[serde(serialize_with = "serialize_matrix")]
    pub observable: ComplexMatrix,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputSettings {
    pub dir: PathBuf,
    pub format: Format,
    pub gnuplot: bool,
    /// Write trajectory 0 at every `dump_stride`-th step.
    pub dump_stride: Option<usize>,
}

/// A fully validated experiment.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    #[serde(serialize_with = "serialize_model")]
    pub model: SystemModel,
    #[serde(serialize_with = "serialize_state")]
    pub rho0: DensityMatrix,
    #[serde(serialize_with = "serialize_state")]
    pub rho_hat0: DensityMatrix,
    pub ensemble: EnsembleConfig,
    pub z_crit: f64,
    pub convergence_threshold: f64,
    pub jump: JumpSettings,
    pub output: OutputSettings,
}

fn serialize_matrix<S: serde::Serializer>(
    m: &ComplexMatrix,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    matrix_to_literal(m).serialize(s)
}

fn serialize_state<S: serde::Serializer>(
    m: &DensityMatrix,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    matrix_to_literal(m.matrix()).serialize(s)
}

fn serialize_model<S: serde::Serializer>(
    m: &SystemModel,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    #[derive(Serialize)]
    struct Echo {
        hamiltonian: Vec<Vec<[f64; 2]>>,
        measured: Vec<Vec<Vec<[f64; 2]>>>,
        unmeasured: Vec<Vec<Vec<[f64; 2]>>>,
    }
    Echo {
        hamiltonian: matrix_to_literal(m.hamiltonian()),
        measured: m
            .measured_channels()
            .iter()
            .map(matrix_to_literal)
            .collect(),
        unmeasured: m
            .unmeasured_channels()
            .iter()
            .map(matrix_to_literal)
            .collect(),
    }
    .serialize(s)
}

fn invalid(field: &str, e: impl std::fmt::Display) -> Error {
    Error::Validation(format!("{field}: {e}"))
}

fn require<T>(value: Option<T>, field: &str) -> Result<T> {
    value.ok_or_else(|| {
        Error::Validation(format!(
            "{field} is required (or set preset = \"{PAPER_QUBIT}\")"
        ))
    })
}

fn named_operator(name: &str) -> Option<ComplexMatrix> {
    match name {
        "sigma_x" => Some(pauli_x()),
        "sigma_y" => Some(pauli_y()),
        "sigma_z" => Some(pauli_z()),
        _ => None,
    }
}

fn resolve_operator(spec: &MatrixSpec, field: &str) -> Result<ComplexMatrix> {
    match spec {
        MatrixSpec::Name(name) => named_operator(name).ok_or_else(|| {
            invalid(
                field,
                format!("unknown operator name {name:?} (expected sigma_x, sigma_y or sigma_z)"),
            )
        }),
        MatrixSpec::Real(rows) => {
            let pairs: Vec<Vec<[f64; 2]>> = rows
                .iter()
                .map(|r| r.iter().map(|&x| [x, 0.0]).collect())
                .collect();
            matrix_from_literal(&pairs).map_err(|e| invalid(field, e))
        }
        MatrixSpec::Complex(rows) => matrix_from_literal(rows).map_err(|e| invalid(field, e)),
    }
}

/// ρ₀ = [[1/2, 1/4], [1/4, 1/2]].
pub fn paper_rho0() -> DensityMatrix {
    let c = |x: f64| Complex64::new(x, 0.0);
    DensityMatrix::new(ComplexMatrix::from_row_slice(
        2,
        2,
        &[c(0.5), c(0.25), c(0.25), c(0.5)],
    ))
    .expect("valid density matrix")
}

/// ρ̂₀ = diag(1/3, 2/3).
pub fn paper_rho_hat0() -> DensityMatrix {
    DensityMatrix::from_diagonal(&[1.0 / 3.0, 2.0 / 3.0]).expect("valid density matrix")
}

fn resolve_state(spec: &MatrixSpec, dim: usize, field: &str) -> Result<DensityMatrix> {
    let state = match spec {
        MatrixSpec::Name(name) => match name.as_str() {
            "paper-rho0" => paper_rho0(),
            "paper-rho-hat0" => paper_rho_hat0(),
            "maximally-mixed" => DensityMatrix::maximally_mixed(dim).map_err(|e| invalid(field, e))?,
            other => match other.strip_prefix("basis:").map(str::parse::<usize>) {
                Some(Ok(k)) if k < dim => DensityMatrix::basis(dim, k).map_err(|e| invalid(field, e))?,
                _ => {
                    return Err(invalid(
                        field,
                        format!("unknown state {other:?} (expected paper-rho0, paper-rho-hat0, maximally-mixed or basis:k with k < {dim})"),
                    ))
                }
            },
        },
        literal => DensityMatrix::new(resolve_operator(literal, field)?).map_err(|e| invalid(field, e))?,
    };
    if state.dim() != dim {
        return Err(invalid(
            field,
            format!(
                "dimension {} does not match the model dimension {dim}",
                state.dim()
            ),
        ));
    }
    Ok(state)
}

fn preset_defaults(name: &str) -> Result<RawConfig> {
    if name != PAPER_QUBIT {
        return Err(Error::Validation(format!(
            "unknown preset {name:?} (available: {PAPER_QUBIT})"
        )));
    }
    Ok(RawConfig {
        preset: None,
        model: RawModel {
            preset: Some(PAPER_QUBIT.into()),
            ..RawModel::default()
        },
        initial: RawInitial {
            rho0: Some(MatrixSpec::Name("paper-rho0".into())),
            rho_hat0: Some(MatrixSpec::Name("paper-rho-hat0".into())),
        },
        ensemble: RawEnsemble {
            n_traj: Some(500),
            seed: Some(0),
            dt: Some(1e-4),
            horizon: Some(3.0),
            checkpoints: Some(61),
            ..RawEnsemble::default()
        },
        jump: RawJump::default(),
        output: RawOutput::default(),
    })
}

macro_rules! overlay {
    ($base:expr, $top:expr, [$($f:ident),*]) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f; } )*
    };
}

fn merge(mut base: RawConfig, top: RawConfig) -> RawConfig {
    if top.model.preset.is_some() || top.model.hamiltonian.is_some() {
        base.model = RawModel::default();
    }
    overlay!(
        base.model,
        top.model,
        [preset, hamiltonian, measured, unmeasured]
    );
    overlay!(base.initial, top.initial, [rho0, rho_hat0]);
    if top.ensemble.checkpoint_times.is_some() {
        base.ensemble.checkpoints = None;
    }
    overlay!(
        base.ensemble,
        top.ensemble,
        [
            n_traj,
            seed,
            dt,
            horizon,
            checkpoints,
            checkpoint_times,
            driver,
            workers,
            project_every,
            domain_tol,
            z_crit,
            convergence_threshold
        ]
    );
    overlay!(
        base.jump,
        top.jump,
        [
            alpha,
            alphas,
            eps,
            pairs,
            max_jump_prob,
            sweep_dt,
            sweep_horizon,
            sweep_n_traj,
            sweep_report_points,
            observable
        ]
    );
    overlay!(base.output, top.output, [dir, format, gnuplot, dump_stride]);
    base
}

/// Parses and validates a configuration document. `preset` (for example
/// from the command line) supplies defaults beneath the document.
pub fn parse_config_with(text: &str, preset: Option<&str>) -> Result<ExperimentConfig> {
    let raw: RawConfig =
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string().trim_end().to_string()))?;
    let preset = raw.preset.clone().or(preset.map(String::from));
    let raw = match preset {
        Some(name) => merge(preset_defaults(&name)?, raw),
        None => raw,
    };
    resolve(raw)
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    parse_config_with(text, None)
}

/// The configuration of a preset with no overrides.
pub fn preset_config(name: &str) -> Result<ExperimentConfig> {
    resolve(preset_defaults(name)?)
}

fn resolve(raw: RawConfig) -> Result<ExperimentConfig> {
    let model = match (&raw.model.preset, &raw.model.hamiltonian) {
        (Some(_), Some(_)) => {
            return Err(Error::Validation(
                "model: give either preset or hamiltonian, not both".into(),
            ))
        }
        (Some(name), None) if name == PAPER_QUBIT => {
            if raw.model.measured.is_some() || raw.model.unmeasured.is_some() {
                return Err(Error::Validation(
                    "model: preset cannot be combined with channel lists".into(),
                ));
            }
            SystemModel::paper_qubit()
        }
        (Some(name), None) => {
            return Err(invalid("model.preset", format!("unknown preset {name:?}")))
        }
        (None, Some(h)) => {
            let h = resolve_operator(h, "model.hamiltonian")?;
            let list =
                |specs: &Option<Vec<MatrixSpec>>, field: &str| -> Result<Vec<ComplexMatrix>> {
                    specs
                        .iter()
                        .flatten()
                        .enumerate()
                        .map(|(k, s)| resolve_operator(s, &format!("{field}[{k}]")))
                        .collect()
                };
            let measured = list(&raw.model.measured, "model.measured")?;
            let unmeasured = list(&raw.model.unmeasured, "model.unmeasured")?;
            SystemModel::new(h, measured, unmeasured).map_err(|e| invalid("model", e))?
        }
        (None, None) => return Err(require::<()>(None, "model.hamiltonian").unwrap_err()),
    };
    let dim = model.dim();
    let rho0 = resolve_state(
        &require(raw.initial.rho0, "initial.rho0")?,
        dim,
        "initial.rho0",
    )?;
    let rho_hat0 = resolve_state(
        &require(raw.initial.rho_hat0, "initial.rho_hat0")?,
        dim,
        "initial.rho_hat0",
    )?;

    let e = raw.ensemble;
    let j = raw.jump;
    let alpha = j.alpha.unwrap_or(2.0);
    let max_jump_prob = j.max_jump_prob.unwrap_or(DEFAULT_MAX_JUMP_PROB);
    let horizon = require(e.horizon, "ensemble.horizon")?;
    let checkpoints = match (e.checkpoint_times, e.checkpoints) {
        (Some(times), _) => times,
        (None, count) => uniform_checkpoints(horizon, count.unwrap_or(61)),
    };
    let driver = match e.driver.unwrap_or(DriverKind::DiffusiveKraus) {
        DriverKind::DiffusiveKraus => Driver::DiffusiveKraus,
        DriverKind::DiffusiveEm => Driver::DiffusiveEm,
        DriverKind::Jump => Driver::Jump {
            alpha,
            max_jump_prob,
        },
        DriverKind::Chain => Driver::Chain { alpha },
    };
    let ensemble = EnsembleConfig {
        n_traj: require(e.n_traj, "ensemble.n_traj")?,
        seed: e.seed.unwrap_or(0),
        dt: require(e.dt, "ensemble.dt")?,
        horizon,
        checkpoints,
        driver,
        workers: e.workers,
        project_every: e.project_every.unwrap_or(1),
        domain_tol: e.domain_tol,
    };
    if ensemble.n_traj == 0 {
        return Err(invalid("ensemble.n_traj", "must be positive"));
    }
    if ensemble.workers == Some(0) {
        return Err(invalid("ensemble.workers", "must be positive"));
    }
    if ensemble.project_every == 0 {
        return Err(invalid("ensemble.project_every", "must be at least 1"));
    }
    ensemble
        .checkpoint_steps()
        .map_err(|e| invalid("ensemble", e))?;

    let z_crit = e.z_crit.unwrap_or(DEFAULT_Z_CRIT);
    if !(z_crit > 0.0) {
        return Err(invalid("ensemble.z_crit", "must be positive"));
    }
    let convergence_threshold = e.convergence_threshold.unwrap_or(0.99);
    if !(convergence_threshold > 0.0 && convergence_threshold < 1.0) {
        return Err(invalid(
            "ensemble.convergence_threshold",
            "must lie in (0, 1)",
        ));
    }

    let observable = match &j.observable {
        Some(spec) => resolve_operator(spec, "jump.observable")?,
        None if dim == 2 => pauli_z(),
        None => {
            return Err(invalid(
                "jump.observable",
                "required when the model is not a qubit",
            ))
        }
    };
    if observable.nrows() != dim {
        return Err(invalid(
            "jump.observable",
            format!("dimension {} differs from {dim}", observable.nrows()),
        ));
    }
    let jump = JumpSettings {
        alpha,
        alphas: j.alphas.unwrap_or_else(|| vec![1.0, 2.0, 5.0, 10.0]),
        eps: j.eps.unwrap_or(1e-3),
        pairs: j.pairs.unwrap_or(1000),
        max_jump_prob,
        sweep_dt: j.sweep_dt,
        sweep_horizon: j.sweep_horizon.unwrap_or(0.5),
        sweep_n_traj: j.sweep_n_traj.unwrap_or(2000),
        sweep_report_points: j.sweep_report_points.unwrap_or(5),
        observable,
    };
    if !(jump.eps > 0.0 && jump.eps.is_finite()) {
        return Err(invalid("jump.eps", "must be positive"));
    }
    if !(jump.max_jump_prob > 0.0 && jump.max_jump_prob < 1.0) {
        return Err(invalid("jump.max_jump_prob", "must lie in (0, 1)"));
    }
    if jump.alphas.is_empty() || jump.alphas.iter().any(|a| !a.is_finite()) {
        return Err(invalid(
            "jump.alphas",
            "must be a nonempty list of finite numbers",
        ));
    }
    if !(jump.sweep_horizon > 0.0) || jump.sweep_n_traj == 0 || jump.sweep_report_points == 0 {
        return Err(invalid(
            "jump",
            "sweep_horizon, sweep_n_traj and sweep_report_points must be positive",
        ));
    }

    let output = OutputSettings {
        dir: raw
            .output
            .dir
            .unwrap_or_else(|| PathBuf::from("qfilter-out")),
        format: raw.output.format.unwrap_or_default(),
        gnuplot: raw.output.gnuplot.unwrap_or(false),
        dump_stride: raw.output.dump_stride,
    };
    if output.dump_stride == Some(0) {
        return Err(invalid("output.dump_stride", "must be positive"));
    }

    Ok(ExperimentConfig {
        model,
        rho0,
        rho_hat0,
        ensemble,
        z_crit,
        convergence_threshold,
        jump,
        output,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_preset() {
        let cfg = parse_config("preset = \"paper-qubit\"").unwrap();
        assert_eq!(cfg.model, SystemModel::paper_qubit());
        assert_eq!(cfg.rho0, paper_rho0());
        assert_eq!(cfg.rho_hat0, paper_rho_hat0());
        assert_eq!(cfg.ensemble.dt, 1e-4);
        assert_eq!(cfg.ensemble.horizon, 3.0);
        assert_eq!(cfg.ensemble.n_traj, 500);
        assert_eq!(cfg.ensemble.checkpoints.len(), 61);
        assert_eq!(cfg.ensemble.driver, Driver::DiffusiveKraus);
    }

    #[test]
    fn explicit_model_and_overrides() {
        let text = r#"
            [model]
            hamiltonian = [[0.0, 1.0], [1.0, 0.0]]
            measured = ["sigma_z", [[[0.0, 0.0], [0.0, 1.0]], [[0.0, 0.0], [0.0, 0.0]]]]
            [initial]
            rho0 = "basis:0"
            rho_hat0 = "maximally-mixed"
            [ensemble]
            n_traj = 10
            dt = 0.001
            horizon = 0.5
            checkpoints = 6
            driver = "diffusive_em"
        "#;
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.model.measured_channels().len(), 2);
        assert_eq!(cfg.model.measured_channels()[1][(0, 1)], Complex64::i());
        assert_eq!(cfg.ensemble.checkpoints, vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5]);
        assert_eq!(cfg.ensemble.driver, Driver::DiffusiveEm);
    }

    #[test]
    fn preset_with_overrides() {
        let cfg = parse_config_with(
            "[ensemble]\nn_traj = 3\ndriver = \"jump\"\n[jump]\nalpha = 4.0",
            Some(PAPER_QUBIT),
        )
        .unwrap();
        assert_eq!(cfg.ensemble.n_traj, 3);
        assert_eq!(cfg.ensemble.dt, 1e-4);
        assert!(matches!(cfg.ensemble.driver, Driver::Jump { alpha, .. } if alpha == 4.0));
    }

    #[test]
    fn non_hermitian_hamiltonian_is_rejected() {
        let text = r#"
            [model]
            hamiltonian = [[0.0, 1.0], [0.0, 0.0]]
            measured = ["sigma_z"]
            [initial]
            rho0 = "paper-rho0"
            rho_hat0 = "paper-rho-hat0"
            [ensemble]
            n_traj = 1
            dt = 0.001
            horizon = 0.1
        "#;
        let err = parse_config(text).unwrap_err();
        assert_eq!(err.kind(), "ValidationError");
        assert!(err.to_string().contains("model"));
    }

    #[test]
    fn bad_trace_is_rejected() {
        let text = "preset = \"paper-qubit\"\n[initial]\nrho0 = [[0.5, 0.0], [0.0, 0.4]]\n";
        let err = parse_config(text).unwrap_err();
        assert_eq!(err.kind(), "ValidationError");
        assert!(err.to_string().contains("initial.rho0"), "{err}");
    }

    #[test]
    fn unknown_keys_are_parse_errors() {
        let err = parse_config("preset = \"paper-qubit\"\n[ensemble]\nntraj = 5\n").unwrap_err();
        assert_eq!(err.kind(), "ParseError");
        assert!(err.to_string().contains("ntraj"), "{err}");
        assert!(err.to_string().contains("line"), "{err}");
    }

    #[test]
    fn missing_fields_are_named() {
        let err = parse_config("[ensemble]\nn_traj = 5\n").unwrap_err();
        assert!(err.to_string().contains("model.hamiltonian"), "{err}");
    }

    #[test]
    fn checkpoints_off_grid_are_rejected() {
        let err = parse_config(
            "preset = \"paper-qubit\"\n[ensemble]\ncheckpoint_times = [0.0, 0.00015]\n",
        )
        .unwrap_err();
        assert_eq!(err.kind(), "ValidationError");
    }
}
