//! One trajectory of the homodyne jump model with α = 3: click times and
//! the fidelity between the true state and the filter.

use qfilter::cli::{paper_rho0, paper_rho_hat0};
use qfilter::jump::{jump_step, JumpConfig, JumpOutcome};
use qfilter::model::SystemModel;
use qfilter::sde::{trajectory_rng, TrajectoryPair};

fn main() -> qfilter::Result<()> {
    let model = SystemModel::paper_qubit();
    let cfg = JumpConfig::new(3.0, 1e-3);
    cfg.validate(&model)?;
    println!("rate bound allows dt <= {:.3e}", cfg.suggested_dt(&model)?);

    let mut pair = TrajectoryPair::new(paper_rho0(), paper_rho_hat0())?;
    let mut rng = trajectory_rng(1, 0);
    let (mut plus, mut minus) = (0, 0);
    while pair.t < 2.0 - 1e-12 {
        let step = jump_step(&pair, &mut rng, &cfg, &model)?;
        match step.outcome {
            JumpOutcome::Plus => plus += 1,
            JumpOutcome::Minus => minus += 1,
            JumpOutcome::None => {}
        }
        pair = step.pair;
        if pair.step % 250 == 0 {
            println!(
                "t = {:4.2}  F = {:.6}  <sigma_z> = {:+.4}  clicks (+, -) = ({plus}, {minus})",
                pair.t,
                pair.fidelity()?,
                pair.rho.expectation(&qfilter::model::pauli_z())
            );
        }
    }
    Ok(())
}
