//! A three-level system with two measured channels and one unmeasured
//! channel, integrated with the Kraus scheme.

use num_complex::Complex64;
use qfilter::model::SystemModel;
use qfilter::stats::{run_ensemble, submartingale_test, EnsembleConfig};
use qfilter::{ComplexMatrix, DensityMatrix};

fn real(rows: [[f64; 3]; 3]) -> ComplexMatrix {
    ComplexMatrix::from_fn(3, 3, |i, j| Complex64::new(rows[i][j], 0.0))
}

fn main() -> qfilter::Result<()> {
    let h = real([[1.0, 0.5, 0.0], [0.5, 0.0, 0.5], [0.0, 0.5, -1.0]]);
    let lower = real([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]]);
    let number = real([[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]]);
    let dephase = real([[0.3, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, -0.3]]);
    let model = SystemModel::new(
        h,
        vec![lower, number * Complex64::new(0.5, 0.0)],
        vec![dephase],
    )?;

    let rho0 = DensityMatrix::from_diagonal(&[0.2, 0.5, 0.3])?;
    let rho_hat0 = DensityMatrix::maximally_mixed(3)?;
    let cfg = EnsembleConfig::new(300, 4, 1e-3, 3.0, 31);
    let result = run_ensemble(&model, &rho0, &rho_hat0, &cfg)?;
    for (k, t) in result.checkpoints.iter().enumerate().step_by(5) {
        println!(
            "t = {t:3.1}  mean F = {:.5} +- {:.5}",
            result.mean_fidelity[k], result.stderr[k]
        );
    }
    let report = submartingale_test(&result, 3.0)?;
    println!(
        "submartingale test: {} (worst z {:.2})",
        report.pass, report.worst_violation
    );
    Ok(())
}
