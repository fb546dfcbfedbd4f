//! Uhlmann fidelity F(ρ, σ) = [tr √(√ρ σ √ρ)]² on a few states.

use qfilter::cli::{paper_rho0, paper_rho_hat0};
use qfilter::densitymat::{random_mixed, random_pure};
use qfilter::{fidelity, frobenius_inner, DensityMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> qfilter::Result<()> {
    let rho = paper_rho0();
    let rho_hat = paper_rho_hat0();
    println!(
        "F(rho0, rho_hat0)           = {:.12}",
        fidelity(&rho, &rho_hat)?
    );
    println!(
        "closed form tr + 2sqrt(det) = {:.12}",
        0.5 + 2.0 * (0.1875_f64 * 2.0 / 9.0).sqrt()
    );

    let up = DensityMatrix::basis(2, 0)?;
    let down = DensityMatrix::basis(2, 1)?;
    println!("F(|0><0|, |1><1|)           = {}", fidelity(&up, &down)?);
    println!(
        "F(|0><0|, I/2)              = {}",
        fidelity(&up, &DensityMatrix::maximally_mixed(2)?)?
    );

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    println!("\ndim  F(pure, mixed)   tr(pure mixed)   F(mixed, mixed)");
    for dim in 2..=5 {
        let p = random_pure(&mut rng, dim);
        let a = random_mixed(&mut rng, dim);
        let b = random_mixed(&mut rng, dim);
        println!(
            "{dim:>3}  {:.12}  {:.12}  {:.12}",
            fidelity(&p, &a)?,
            frobenius_inner(&p, &a),
            fidelity(&a, &b)?
        );
    }
    Ok(())
}
