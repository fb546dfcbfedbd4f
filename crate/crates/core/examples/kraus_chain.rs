//! The three-outcome Kraus chain of the homodyne jump model: completeness
//! before and after normalization, the exact one-step fidelity
//! expectation, and one sampled chain.

use qfilter::cli::{paper_rho0, paper_rho_hat0};
use qfilter::fidelity;
use qfilter::jump::{build_kraus_set, chain_step, normalize_kraus_set, one_step_expected_fidelity};
use qfilter::model::SystemModel;
use qfilter::sde::trajectory_rng;

fn main() -> qfilter::Result<()> {
    let model = SystemModel::paper_qubit();
    let alpha = 2.0;
    println!("   eps     raw defect   normalized defect");
    for eps in [1e-2, 1e-3, 1e-4] {
        let raw = build_kraus_set(&model, alpha, eps)?;
        let set = normalize_kraus_set(&raw)?;
        println!(
            "{eps:.0e}   {:.3e}    {:.3e}",
            raw.completeness_defect(),
            set.completeness_defect()
        );
    }

    let eps = 1e-2;
    let set = normalize_kraus_set(&build_kraus_set(&model, alpha, eps)?)?;
    let (mut chi, mut chi_hat) = (paper_rho0(), paper_rho_hat0());
    let step = one_step_expected_fidelity(&chi, &chi_hat, &set)?;
    println!(
        "\nE[F1] - F0 = {:.3e} (F0 = {:.6})",
        step.gap(),
        step.current
    );

    let mut rng = trajectory_rng(3, 0);
    let mut clicks = [0usize; 3];
    for k in 1..=300 {
        let s = chain_step(&chi, &chi_hat, &mut rng, &set)?;
        clicks[s.outcome] += 1;
        chi = s.chi;
        chi_hat = s.chi_hat;
        if k % 50 == 0 {
            println!(
                "k = {k:3}  F = {:.6}  outcomes (none, +, -) = {clicks:?}",
                fidelity(&chi, &chi_hat)?
            );
        }
    }
    Ok(())
}
