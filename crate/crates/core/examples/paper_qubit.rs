//! Mean fidelity between the true state and the filter for H = σ_y,
//! L = σ_z, with the paired-increment submartingale test.
//!
//! cargo run --release --example paper_qubit -- [n_traj]

use qfilter::cli::{paper_rho0, paper_rho_hat0};
use qfilter::model::SystemModel;
use qfilter::stats::{final_convergence, run_ensemble, submartingale_test, EnsembleConfig};

fn main() -> qfilter::Result<()> {
    let n_traj = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(500);
    let model = SystemModel::paper_qubit();
    let cfg = EnsembleConfig {
        n_traj,
        ..EnsembleConfig::paper_qubit(0)
    };
    let result = run_ensemble(&model, &paper_rho0(), &paper_rho_hat0(), &cfg)?;
    let report = submartingale_test(&result, 3.0)?;

    println!("    t   mean F     stderr");
    for (k, t) in result.checkpoints.iter().enumerate().step_by(5) {
        println!(
            "{t:5.2}   {:.6}   {:.2e}",
            result.mean_fidelity[k], result.stderr[k]
        );
    }
    println!(
        "\nsubmartingale test (z = 3): {} (worst z {:.2})",
        if report.pass { "pass" } else { "fail" },
        report.worst_violation
    );
    println!(
        "final mean fidelity >= 0.99: {}",
        final_convergence(&result, 0.99)
    );
    Ok(())
}
