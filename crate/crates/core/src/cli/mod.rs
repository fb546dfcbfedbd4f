//! Command-line front end: `simulate`, `chain-check`, `sweep-alpha` and
//! `validate`.
//!
//! Exit codes: 0 success, 1 a scientific check failed, 2 configuration
//! error, 3 runtime or numerical error. Failures print a JSON object with
//! `error`, `message` and `exit_code` to stderr.

mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

pub use config::{
    paper_rho0, paper_rho_hat0, parse_config, parse_config_with, preset_config, ExperimentConfig,
    Format, JumpSettings, MatrixSpec, OutputSettings, PAPER_QUBIT,
};

use crate::densitymat::random_mixed;
use crate::error::Error;
use crate::jump::{
    build_kraus_set, diffusion_limit_check, normalize_kraus_set, one_step_expected_fidelity,
    DiffusionLimitSpec, KrausSet,
};
use crate::sde::{trajectory_rng, write_dump_csv};
use crate::stats::{
    dump_trajectory, final_convergence, run_ensemble, submartingale_test, EnsembleResult,
};

pub const EXIT_OK: u8 = 0;
pub const EXIT_SCIENTIFIC: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

/// Violations of the one-step check below this gap are reported.
pub const CHAIN_CHECK_TOL: f64 = 1e-9;

pub const SEED_ENV: &str = "QFILTER_SEED";

#[derive(Debug, Parser)]
#[command(name = "qfilter", version, about = "Quantum filter fidelity simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an ensemble and test the mean fidelity for the submartingale property.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Also write trajectory 0 at every STRIDE-th step.
        #[arg(long, value_name = "STRIDE", num_args = 0..=1, default_missing_value = "1")]
        dump: Option<usize>,
    },
    /// Check E[F(χ₁, χ̂₁)] ≥ F(χ₀, χ̂₀) exactly over random state pairs.
    ChainCheck {
        #[command(flatten)]
        common: CommonArgs,
        /// Use χ̂ = χ for every pair.
        #[arg(long)]
        identical_pairs: bool,
        /// Skip Kraus normalization (the check must then refuse to run).
        #[arg(long, hide = true)]
        skip_normalize: bool,
    },
    /// Compare jump and diffusive ensembles over a list of α.
    SweepAlpha {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated α values, overriding the config.
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
        /// Common time step, overriding the automatic choice.
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Parse and validate a configuration without running anything.
    Validate {
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML experiment configuration.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Named preset supplying defaults (paper-qubit).
    #[arg(long)]
    pub preset: Option<String>,
    /// Seed; overrides QFILTER_SEED and the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads. Changes wall time only.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory, created if missing
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Output format for result tables
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Emit a gnuplot script next to the CSV output (csv format only).
    #[arg(long)]
    pub gnuplot: bool,
}

/// A failed command with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: Error,
}

impl Failure {
    fn config(error: Error) -> Self {
        Failure {
            code: EXIT_CONFIG,
            error,
        }
    }

    fn runtime(error: Error) -> Self {
        Failure {
            code: EXIT_RUNTIME,
            error,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({
            "error": self.error.kind(),
            "message": self.error.to_string(),
            "exit_code": self.code,
        });
        if let Error::RateOverflow { suggested_dt, .. } = &self.error {
            v["suggested_dt"] = json!(suggested_dt);
        }
        if let Error::TooManyAborted {
            aborted, n_traj, ..
        } = &self.error
        {
            v["aborted"] = json!(aborted);
            v["n_traj"] = json!(n_traj);
        }
        v
    }
}

/// Result of a completed command.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub code: u8,
    pub summary: serde_json::Value,
    pub files: Vec<PathBuf>,
}

/// Loads the configuration named by the common flags and applies the
/// command-line overrides. Seed precedence: --seed, then QFILTER_SEED,
/// then the config.
pub fn load_config(args: &CommonArgs) -> Result<ExperimentConfig, Error> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), preset) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            parse_config_with(&text, preset.as_deref())?
        }
        (None, Some(preset)) => preset_config(preset)?,
        (None, None) => return Err(Error::Validation("give --config or --preset".into())),
    };
    let env_seed = match std::env::var(SEED_ENV) {
        Ok(s) => Some(s.trim().parse::<u64>().map_err(|_| {
            Error::Validation(format!("{SEED_ENV}={s:?} is not an unsigned integer"))
        })?),
        Err(_) => None,
    };
    if let Some(seed) = args.seed.or(env_seed) {
        cfg.ensemble.seed = seed;
    }
    if let Some(w) = args.workers {
        if w == 0 {
            return Err(Error::Validation("--workers must be positive".into()));
        }
        cfg.ensemble.workers = Some(w);
    }
    if let Some(dir) = &args.out_dir {
        cfg.output.dir = dir.clone();
    }
    if let Some(format) = args.format {
        cfg.output.format = format;
    }
    cfg.output.gnuplot |= args.gnuplot;
    Ok(cfg)
}

/// Parses arguments, runs the command and reports failures on stderr.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(outcome) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&outcome.summary).unwrap_or_default()
            );
            outcome.code
        }
        Err(f) => {
            eprintln!("{}", f.to_json());
            f.code
        }
    }
}

pub fn execute(command: &Command) -> Result<Outcome, Failure> {
    match command {
        Command::Simulate { common, dump } => {
            let mut cfg = load_config(common).map_err(Failure::config)?;
            if dump.is_some() {
                cfg.output.dump_stride = *dump;
            }
            cmd_simulate(&cfg)
        }
        Command::ChainCheck {
            common,
            identical_pairs,
            skip_normalize,
        } => {
            let cfg = load_config(common).map_err(Failure::config)?;
            cmd_chain_check(
                &cfg,
                &ChainCheckOptions {
                    identical_pairs: *identical_pairs,
                    skip_normalize: *skip_normalize,
                },
            )
        }
        Command::SweepAlpha { common, alphas, dt } => {
            let mut cfg = load_config(common).map_err(Failure::config)?;
            if let Some(a) = alphas {
                cfg.jump.alphas = a.clone();
            }
            if dt.is_some() {
                cfg.jump.sweep_dt = *dt;
            }
            cmd_sweep_alpha(&cfg)
        }
        Command::Validate { common } => {
            let cfg = load_config(common).map_err(Failure::config)?;
            cfg.ensemble.validate(&cfg.model).map_err(Failure::config)?;
            Ok(Outcome {
                code: EXIT_OK,
                summary: json!({ "command": "validate", "valid": true, "config": cfg }),
                files: Vec::new(),
            })
        }
    }
}

/// Writes `bytes` to `dir/name` through a temporary file and a rename.
fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, Error> {
    let path = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, &path)?;
    Ok(path)
}

fn json_bytes(v: &impl serde::Serialize) -> Result<Vec<u8>, Error> {
    let mut out = serde_json::to_vec_pretty(v).map_err(|e| Error::Io(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

fn prepare_dir(cfg: &ExperimentConfig) -> Result<&Path, Failure> {
    fs::create_dir_all(&cfg.output.dir)
        .map_err(|e| Failure::runtime(Error::Io(format!("{}: {e}", cfg.output.dir.display()))))?;
    Ok(&cfg.output.dir)
}

fn fidelity_gnuplot(data: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set key autotitle columnhead\n\
         set xlabel 't'\n\
         set ylabel 'mean fidelity'\n\
         set yrange [0:1.05]\n\
         plot '{data}' using 1:2:3 with yerrorlines title 'E F(rho_t, rho_hat_t)'\n"
    )
}

/// Runs the ensemble, writes the fidelity series, the submartingale
/// report and `summary.json`. Exit code 1 when the submartingale test
/// fails.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<Outcome, Failure> {
    cfg.ensemble.validate(&cfg.model).map_err(Failure::config)?;
    let dir = prepare_dir(cfg)?;
    let start = Instant::now();
    let result = run_ensemble(&cfg.model, &cfg.rho0, &cfg.rho_hat0, &cfg.ensemble)
        .map_err(Failure::runtime)?;
    let report = match submartingale_test(&result, cfg.z_crit) {
        Ok(r) => Some(r),
        Err(Error::InsufficientData(_)) => None,
        Err(e) => return Err(Failure::runtime(e)),
    };
    let wall = start.elapsed().as_secs_f64();
    let io = |e: Error| Failure::runtime(e);

    let mut files = Vec::new();
    match cfg.output.format {
        Format::Csv => {
            let mut buf = Vec::new();
            result.write_csv(&mut buf).map_err(io)?;
            files.push(write_atomic(dir, "fidelity.csv", &buf).map_err(io)?);
            if let Some(r) = &report {
                let mut buf = Vec::new();
                r.write_csv(&mut buf, &result.checkpoints).map_err(io)?;
                files.push(write_atomic(dir, "submartingale.csv", &buf).map_err(io)?);
            }
        }
        Format::Json => {
            files.push(
                write_atomic(dir, "fidelity.json", &json_bytes(&result).map_err(io)?)
                    .map_err(io)?,
            );
            if let Some(r) = &report {
                files.push(
                    write_atomic(dir, "submartingale.json", &json_bytes(r).map_err(io)?)
                        .map_err(io)?,
                );
            }
        }
    }
    if cfg.output.gnuplot && cfg.output.format == Format::Csv {
        files.push(
            write_atomic(
                dir,
                "fidelity.gp",
                fidelity_gnuplot("fidelity.csv").as_bytes(),
            )
            .map_err(io)?,
        );
    }
    if let Some(stride) = cfg.output.dump_stride {
        let rows = dump_trajectory(
            &cfg.model,
            &cfg.rho0,
            &cfg.rho_hat0,
            &cfg.ensemble,
            0,
            stride,
        )
        .map_err(io)?;
        let mut buf = Vec::new();
        write_dump_csv(
            &mut buf,
            &cfg.ensemble.driver.record_names(&cfg.model),
            &rows,
        )
        .map_err(io)?;
        files.push(write_atomic(dir, "trajectory_0.csv", &buf).map_err(io)?);
    }

    let pass = report.as_ref().map(|r| r.pass);
    let summary = json!({
        "command": "simulate",
        "config": cfg,
        "n_traj": result.n_traj,
        "aborted": result.aborted,
        "initial_mean_fidelity": result.mean_fidelity.first(),
        "final_mean_fidelity": result.final_mean(),
        "final_convergence": final_convergence(&result, cfg.convergence_threshold),
        "convergence_threshold": cfg.convergence_threshold,
        "submartingale": report.as_ref().map(|r| json!({
            "pass": r.pass,
            "z_crit": r.z_crit,
            "worst_violation": r.worst_violation,
            "failed_intervals": r.failed_intervals,
        })),
        "pass": pass,
        "wall_clock_seconds": wall,
    });
    files.push(write_atomic(dir, "summary.json", &json_bytes(&summary).map_err(io)?).map_err(io)?);
    Ok(Outcome {
        code: if pass == Some(false) {
            EXIT_SCIENTIFIC
        } else {
            EXIT_OK
        },
        summary,
        files,
    })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ChainCheckOptions {
    pub identical_pairs: bool,
    /// Hand the raw, unnormalized Kraus set to the check.
    pub skip_normalize: bool,
}

/// One row of the chain-check report.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PairCheck {
    pub pair: usize,
    pub fid_before: f64,
    pub fid_expected_after: f64,
    pub gap: f64,
}

/// Exact one-step enumeration over `cfg.jump.pairs` random mixed pairs.
/// Pair k is drawn from stream k of the seed.
pub fn chain_check_rows(
    cfg: &ExperimentConfig,
    set: &KrausSet,
    identical: bool,
) -> Result<Vec<PairCheck>, Error> {
    let dim = cfg.model.dim();
    (0..cfg.jump.pairs)
        .map(|k| {
            let mut rng = trajectory_rng(cfg.ensemble.seed, k as u64);
            let chi = random_mixed(&mut rng, dim);
            let chi_hat = if identical {
                chi.clone()
            } else {
                random_mixed(&mut rng, dim)
            };
            let r = one_step_expected_fidelity(&chi, &chi_hat, set)?;
            Ok(PairCheck {
                pair: k,
                fid_before: r.current,
                fid_expected_after: r.expected,
                gap: r.gap(),
            })
        })
        .collect()
}

pub fn cmd_chain_check(
    cfg: &ExperimentConfig,
    opts: &ChainCheckOptions,
) -> Result<Outcome, Failure> {
    let raw = build_kraus_set(&cfg.model, cfg.jump.alpha, cfg.jump.eps).map_err(Failure::config)?;
    let set = if opts.skip_normalize {
        raw
    } else {
        normalize_kraus_set(&raw).map_err(Failure::runtime)?
    };
    let rows = chain_check_rows(cfg, &set, opts.identical_pairs).map_err(Failure::runtime)?;
    let dir = prepare_dir(cfg)?;
    let io = |e: Error| Failure::runtime(e);
    let violations: Vec<&PairCheck> = rows.iter().filter(|r| r.gap < -CHAIN_CHECK_TOL).collect();
    let min_gap = rows.iter().map(|r| r.gap).fold(f64::INFINITY, f64::min);

    let mut files = Vec::new();
    match cfg.output.format {
        Format::Csv => {
            let mut buf = Vec::new();
            writeln!(buf, "pair,fid_before,fid_expected_after,gap").map_err(|e| io(e.into()))?;
            for r in &rows {
                writeln!(
                    buf,
                    "{},{},{},{}",
                    r.pair, r.fid_before, r.fid_expected_after, r.gap
                )
                .map_err(|e| io(e.into()))?;
            }
            files.push(write_atomic(dir, "chain_check.csv", &buf).map_err(io)?);
        }
        Format::Json => {
            files.push(
                write_atomic(dir, "chain_check.json", &json_bytes(&rows).map_err(io)?)
                    .map_err(io)?,
            );
        }
    }
    let summary = json!({
        "command": "chain-check",
        "alpha": cfg.jump.alpha,
        "eps": cfg.jump.eps,
        "pairs": rows.len(),
        "seed": cfg.ensemble.seed,
        "completeness_defect": set.completeness_defect(),
        "min_gap": min_gap,
        "tolerance": CHAIN_CHECK_TOL,
        "violations": violations,
        "pass": violations.is_empty(),
    });
    files.push(write_atomic(dir, "summary.json", &json_bytes(&summary).map_err(io)?).map_err(io)?);
    Ok(Outcome {
        code: if violations.is_empty() {
            EXIT_OK
        } else {
            EXIT_SCIENTIFIC
        },
        summary,
        files,
    })
}

/// The α-sweep parameters implied by a configuration.
pub fn sweep_spec(cfg: &ExperimentConfig) -> DiffusionLimitSpec {
    DiffusionLimitSpec {
        dt: cfg.jump.sweep_dt,
        horizon: cfg.jump.sweep_horizon,
        report_points: cfg.jump.sweep_report_points,
        n_traj: cfg.jump.sweep_n_traj,
        seed: cfg.ensemble.seed,
        max_jump_prob: cfg.jump.max_jump_prob,
        workers: cfg.ensemble.workers,
        ..DiffusionLimitSpec::new(cfg.jump.alphas.clone(), cfg.jump.observable.clone())
    }
}

pub fn cmd_sweep_alpha(cfg: &ExperimentConfig) -> Result<Outcome, Failure> {
    let spec = sweep_spec(cfg);
    if let Some(dt) = spec.dt {
        for &alpha in &spec.alphas {
            crate::jump::JumpConfig {
                max_jump_prob: spec.max_jump_prob,
                ..crate::jump::JumpConfig::new(alpha, dt)
            }
            .validate(&cfg.model)
            .map_err(Failure::config)?;
        }
    }
    let dir = prepare_dir(cfg)?;
    let start = Instant::now();
    let report = diffusion_limit_check(&cfg.model, &cfg.rho0, &cfg.rho_hat0, &spec).map_err(
        |e| match e {
            Error::RateOverflow { .. } | Error::ChannelCount { .. } | Error::Validation(_) => {
                Failure::config(e)
            }
            other => Failure::runtime(other),
        },
    )?;
    let io = |e: Error| Failure::runtime(e);
    let mut files = Vec::new();
    match cfg.output.format {
        Format::Csv => {
            let mut buf = Vec::new();
            report.write_csv(&mut buf).map_err(io)?;
            files.push(write_atomic(dir, "sweep.csv", &buf).map_err(io)?);
        }
        Format::Json => {
            files.push(
                write_atomic(dir, "sweep.json", &json_bytes(&report.rows).map_err(io)?)
                    .map_err(io)?,
            );
        }
    }
    if cfg.output.gnuplot && cfg.output.format == Format::Csv {
        let script = "set datafile separator ','\n\
                      set key autotitle columnhead\n\
                      set logscale x\n\
                      set xlabel 'alpha'\n\
                      set ylabel 'gap at final time'\n\
                      stats 'sweep.csv' using 2 nooutput\n\
                      plot 'sweep.csv' using ($2 == STATS_max ? $1 : 1/0):3:5 with yerrorlines title 'observable gap', \\\n     \
                      'sweep.csv' using ($2 == STATS_max ? $1 : 1/0):4:6 with yerrorlines title 'fidelity gap'\n";
        files.push(write_atomic(dir, "sweep.gp", script.as_bytes()).map_err(io)?);
    }
    let assert_trend = spec.alphas.len() > 1;
    let summary = json!({
        "command": "sweep-alpha",
        "alphas": spec.alphas,
        "dt": report.dt,
        "horizon": spec.horizon,
        "n_traj": spec.n_traj,
        "seed": spec.seed,
        "trend_asserted": assert_trend,
        "trend_ok": report.trend_ok,
        "violations": report.violations,
        "pass": report.trend_ok,
        "wall_clock_seconds": start.elapsed().as_secs_f64(),
    });
    files.push(write_atomic(dir, "summary.json", &json_bytes(&summary).map_err(io)?).map_err(io)?);
    Ok(Outcome {
        code: if report.trend_ok {
            EXIT_OK
        } else {
            EXIT_SCIENTIFIC
        },
        summary,
        files,
    })
}

/// Loads a fidelity CSV written by [`cmd_simulate`] back into its columns.
pub fn read_fidelity_csv(text: &str) -> Result<EnsembleResult, Error> {
    let mut checkpoints = Vec::new();
    let mut mean = Vec::new();
    let mut stderr = Vec::new();
    let mut n = 0;
    for (k, line) in text.lines().enumerate().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let parse = |i: usize| -> Result<f64, Error> {
            cols.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Parse(format!("line {}: bad column {i}", k + 1)))
        };
        checkpoints.push(parse(0)?);
        mean.push(parse(1)?);
        stderr.push(parse(2)?);
        n = parse(3)? as usize;
    }
    Ok(EnsembleResult {
        checkpoints,
        mean_fidelity: mean,
        stderr,
        n_traj: n,
        aborted: 0,
        paths: Vec::new(),
    })
}
