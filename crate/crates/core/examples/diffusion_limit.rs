//! Jump ensembles against the Wiener ensemble as α grows.
//!
//! cargo run --release --example diffusion_limit -- [n_traj]

use qfilter::cli::{paper_rho0, paper_rho_hat0};
use qfilter::jump::{diffusion_limit_check, DiffusionLimitSpec};
use qfilter::model::{pauli_z, SystemModel};

fn main() -> qfilter::Result<()> {
    let n_traj = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1000);
    let spec = DiffusionLimitSpec {
        n_traj,
        ..DiffusionLimitSpec::new(vec![1.0, 2.0, 5.0, 10.0], pauli_z())
    };
    let report = diffusion_limit_check(
        &SystemModel::paper_qubit(),
        &paper_rho0(),
        &paper_rho_hat0(),
        &spec,
    )?;
    println!("common dt = {:.4e}", report.dt);
    println!("alpha   |d<sigma_z>|          |dF|");
    for r in report.final_rows() {
        println!(
            "{:5}   {:.4} +- {:.4}   {:.5} +- {:.5}",
            r.alpha, r.obs_gap, r.stderr_obs, r.fid_gap, r.stderr_fid
        );
    }
    println!("gaps non-increasing within 2 se: {}", report.trend_ok);
    Ok(())
}
