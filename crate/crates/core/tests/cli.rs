use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qfilter::cli::{self, parse_config, ExperimentConfig, PAPER_QUBIT};

fn qfilter(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qfilter"));
    cmd.args(args).env_remove(cli::SEED_ENV);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const SMALL: &str = r#"
preset = "paper-qubit"
[ensemble]
n_traj = 60
dt = 1e-3
horizon = 0.2
checkpoints = 5
"#;

#[test]
fn shipped_configs_parse() {
    for name in ["paper-qubit.toml", "three-level.toml"] {
        let text = std::fs::read_to_string(configs_dir().join(name)).unwrap();
        let cfg: ExperimentConfig = parse_config(&text).unwrap();
        cfg.ensemble.validate(&cfg.model).unwrap();
    }
    let text = std::fs::read_to_string(configs_dir().join("paper-qubit.toml")).unwrap();
    let shipped = parse_config(&text).unwrap();
    let preset = cli::preset_config(PAPER_QUBIT).unwrap();
    assert_eq!(shipped.model, preset.model);
    assert_eq!(shipped.ensemble, preset.ensemble);
    assert!((shipped.rho_hat0.matrix() - preset.rho_hat0.matrix()).norm() < 1e-15);
}

#[test]
fn simulate_exit_zero_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", SMALL);
    let out_dir = tmp.path().join("out");
    let out = qfilter(
        &[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out-dir",
            out_dir.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["pass"], serde_json::json!(true));
    assert_eq!(
        summary["config"]["ensemble"]["n_traj"],
        serde_json::json!(60)
    );
}

#[test]
fn identical_initial_states_give_unit_fidelity() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("{SMALL}\n[initial]\nrho_hat0 = \"paper-rho0\"\n");
    let cfg = write(tmp.path(), "c.toml", &text);
    let out_dir = tmp.path().join("out");
    let out = qfilter(
        &[
            "simulate",
            "-c",
            cfg.to_str().unwrap(),
            "--out-dir",
            out_dir.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(out_dir.join("fidelity.csv")).unwrap();
    let r = cli::read_fidelity_csv(&csv).unwrap();
    assert!(r.mean_fidelity.iter().all(|f| (f - 1.0).abs() <= 1e-8));
}

#[test]
fn huge_step_is_reported_and_creates_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let text = "preset = \"paper-qubit\"\n[ensemble]\ndt = 0.5\nhorizon = 1.0\ncheckpoints = 3\n";
    let cfg = write(tmp.path(), "c.toml", text);
    let out_dir = tmp.path().join("out");
    let out = qfilter(
        &[
            "simulate",
            "-c",
            cfg.to_str().unwrap(),
            "--out-dir",
            out_dir.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "DegenerateNormalization");
    assert!(!out_dir.exists());
}

#[test]
fn config_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let cases = [
        ("unknown.toml", "preset = \"paper-qubit\"\n[ensemble]\nbogus = 1\n", "ParseError"),
        ("trace.toml", "preset = \"paper-qubit\"\n[initial]\nrho0 = [[0.5, 0.0], [0.0, 0.4]]\n", "ValidationError"),
        (
            "herm.toml",
            "preset = \"paper-qubit\"\n[model]\nhamiltonian = [[0.0, 1.0], [0.0, 0.0]]\nmeasured = [\"sigma_z\"]\n",
            "ValidationError",
        ),
    ];
    for (name, text, kind) in cases {
        let cfg = write(tmp.path(), name, text);
        let out = qfilter(
            &[
                "simulate",
                "-c",
                cfg.to_str().unwrap(),
                "--out-dir",
                out_dir.to_str().unwrap(),
            ],
            &[],
        );
        assert_eq!(out.status.code(), Some(2), "{name}");
        let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
        assert_eq!(err["error"], kind, "{name}");
        assert!(!out_dir.exists(), "{name}");
    }
}

#[test]
fn validate_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let out = qfilter(
        &[
            "validate",
            "--preset",
            "paper-qubit",
            "--out-dir",
            out_dir.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(!out_dir.exists());
}

#[test]
fn seed_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("{SMALL}seed = 5\n");
    let cfg = write(tmp.path(), "c.toml", &text);
    let run = |dir: &str, extra: &[&str], envs: &[(&str, &str)]| {
        let out_dir = tmp.path().join(dir);
        let mut args = vec![
            "simulate",
            "-c",
            cfg.to_str().unwrap(),
            "--out-dir",
            out_dir.to_str().unwrap(),
        ];
        args.extend_from_slice(extra);
        assert_eq!(qfilter(&args, envs).status.code(), Some(0));
        std::fs::read(out_dir.join("fidelity.csv")).unwrap()
    };
    let config_seed = run("a", &[], &[]);
    let flag_seed = run("b", &["--seed", "5"], &[]);
    let env_seed = run("c", &[], &[(cli::SEED_ENV, "9")]);
    let flag_beats_env = run("d", &["--seed", "5"], &[(cli::SEED_ENV, "9")]);
    assert_eq!(config_seed, flag_seed);
    assert_ne!(config_seed, env_seed);
    assert_eq!(config_seed, flag_beats_env);
}

#[test]
fn workers_do_not_change_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", SMALL);
    let run = |w: &str| {
        let out_dir = tmp.path().join(format!("w{w}"));
        let out = qfilter(
            &[
                "simulate",
                "-c",
                cfg.to_str().unwrap(),
                "--workers",
                w,
                "--out-dir",
                out_dir.to_str().unwrap(),
            ],
            &[],
        );
        assert_eq!(out.status.code(), Some(0));
        (
            std::fs::read(out_dir.join("fidelity.csv")).unwrap(),
            std::fs::read(out_dir.join("submartingale.csv")).unwrap(),
        )
    };
    assert_eq!(run("1"), run("4"));
}

#[test]
fn chain_check_command() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let out = qfilter(
        &[
            "chain-check",
            "--preset",
            "paper-qubit",
            "--out-dir",
            out_dir.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(out_dir.join("chain_check.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1001);
    assert!(csv.starts_with("pair,fid_before,fid_expected_after,gap\n"));

    let refused = tmp.path().join("refused");
    let out = qfilter(
        &[
            "chain-check",
            "--preset",
            "paper-qubit",
            "--skip-normalize",
            "--out-dir",
            refused.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(3));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "IncompleteKrausSet");
    assert!(!refused.exists());
}

#[test]
fn sweep_rate_overflow_suggests_dt() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let out = qfilter(
        &[
            "sweep-alpha",
            "--preset",
            "paper-qubit",
            "--alphas",
            "100",
            "--dt",
            "1e-3",
            "--out-dir",
            out_dir.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "RateOverflow");
    assert!(err["suggested_dt"].as_f64().unwrap() <= 1e-5);
}

#[test]
fn json_format_and_gnuplot() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", SMALL);
    let out_dir = tmp.path().join("out");
    let out = qfilter(
        &[
            "simulate",
            "-c",
            cfg.to_str().unwrap(),
            "--format",
            "json",
            "--gnuplot",
            "--out-dir",
            out_dir.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(out_dir.join("fidelity.json").exists());
    assert!(out_dir.join("submartingale.json").exists());
    assert!(!out_dir.join("fidelity.csv").exists());
    assert!(
        !out_dir.join("fidelity.gp").exists(),
        "the script plots CSV data only"
    );
}
