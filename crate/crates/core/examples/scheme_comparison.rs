//! Kraus scheme against Euler–Maruyama on identical Wiener paths: the
//! mean distance between the two end states shrinks with dt, and
//! Euler–Maruyama leaves the density-matrix domain before projection.

use qfilter::cli::paper_rho0;
use qfilter::model::SystemModel;
use qfilter::sde::{
    em_step, kraus_step, measurement_increment, sample_wiener, trajectory_rng, Increment,
};
use qfilter::{project_to_density, DensityMatrix};

fn main() -> qfilter::Result<()> {
    let model = SystemModel::paper_qubit();
    let l = model.measured_channels()[0].clone();
    let pure = DensityMatrix::basis(2, 0)?;
    println!("    dt      mean |rho_K - rho_EM|_F   worst EM eigenvalue before projection");
    for dt in [1e-2, 1e-3, 1e-4] {
        let steps = (0.5 / dt) as usize;
        let mut dist = 0.0;
        let mut worst_eig: f64 = 0.0;
        let paths = 50;
        for path in 0..paths {
            let mut rng = trajectory_rng(9, path);
            let (mut rk, mut re) = (paper_rho0(), paper_rho0());
            if path % 2 == 0 {
                rk = pure.clone();
                re = pure.clone();
            }
            for _ in 0..steps {
                let dw = sample_wiener(&mut rng, dt);
                let dy = measurement_increment(&rk, &l, dw, dt);
                rk = kraus_step(&rk, &[dy], dt, &model)?;
                let dw_em = dy - 2.0 * re.expectation(&l) * dt;
                let raw = em_step(&re, Increment::Wiener(&[dw_em]), dt, &model)?;
                let projection = project_to_density(&raw, 1.0)?;
                worst_eig = worst_eig.min(qfilter::densitymat::hermitian_eigen(&raw).min());
                re = projection.state;
            }
            dist += (rk.matrix() - re.matrix()).norm() / paths as f64;
        }
        println!("{dt:.0e}   {dist:.3e}                 {worst_eig:.3e}");
    }
    Ok(())
}
