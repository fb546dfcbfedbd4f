#![allow(dead_code)]

use num_complex::Complex64;
use qfilter::{ComplexMatrix, DensityMatrix};

pub type M2 = [[Complex64; 2]; 2];

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn paper_rho0() -> DensityMatrix {
    DensityMatrix::new(ComplexMatrix::from_row_slice(
        2,
        2,
        &[c(0.5, 0.0), c(0.25, 0.0), c(0.25, 0.0), c(0.5, 0.0)],
    ))
    .unwrap()
}

pub fn paper_rho_hat0() -> DensityMatrix {
    DensityMatrix::from_diagonal(&[1.0 / 3.0, 2.0 / 3.0]).unwrap()
}

pub fn to_m2(m: &ComplexMatrix) -> M2 {
    [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]]
}

fn mul(a: &M2, b: &M2) -> M2 {
    let mut out = [[c(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn adj(a: &M2) -> M2 {
    [
        [a[0][0].conj(), a[1][0].conj()],
        [a[0][1].conj(), a[1][1].conj()],
    ]
}

fn lin(terms: &[(Complex64, &M2)]) -> M2 {
    let mut out = [[c(0.0, 0.0); 2]; 2];
    for (s, m) in terms {
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] += *s * m[i][j];
            }
        }
    }
    out
}

/// −i[H, ρ] + LρL† − ½{L†L, ρ}, on plain 2×2 arrays.
pub fn lindblad_rhs(h: &M2, l: &M2, rho: &M2) -> M2 {
    let ld = adj(l);
    let ldl = mul(&ld, l);
    let hr = mul(h, rho);
    let rh = mul(rho, h);
    let lrl = mul(&mul(l, rho), &ld);
    let ar = mul(&ldl, rho);
    let ra = mul(rho, &ldl);
    lin(&[
        (c(0.0, -1.0), &hr),
        (c(0.0, 1.0), &rh),
        (c(1.0, 0.0), &lrl),
        (c(-0.5, 0.0), &ar),
        (c(-0.5, 0.0), &ra),
    ])
}

/// Classical RK4 for the Lindblad equation from ρ(0) to ρ(t).
pub fn lindblad_rk4(h: &M2, l: &M2, rho0: &M2, t: f64, steps: usize) -> M2 {
    let dt = t / steps as f64;
    let mut rho = *rho0;
    let one = c(1.0, 0.0);
    for _ in 0..steps {
        let k1 = lindblad_rhs(h, l, &rho);
        let k2 = lindblad_rhs(h, l, &lin(&[(one, &rho), (c(0.5 * dt, 0.0), &k1)]));
        let k3 = lindblad_rhs(h, l, &lin(&[(one, &rho), (c(0.5 * dt, 0.0), &k2)]));
        let k4 = lindblad_rhs(h, l, &lin(&[(one, &rho), (c(dt, 0.0), &k3)]));
        rho = lin(&[
            (one, &rho),
            (c(dt / 6.0, 0.0), &k1),
            (c(dt / 3.0, 0.0), &k2),
            (c(dt / 3.0, 0.0), &k3),
            (c(dt / 6.0, 0.0), &k4),
        ]);
    }
    rho
}

pub fn sigma_y() -> M2 {
    [[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]]
}

pub fn sigma_z() -> M2 {
    [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]]
}

/// Qubit fidelity in closed form: tr(ρσ) + 2√(det ρ · det σ).
pub fn qubit_fidelity(rho: &M2, sigma: &M2) -> f64 {
    let tr = mul(rho, sigma);
    let det = |m: &M2| (m[0][0] * m[1][1] - m[0][1] * m[1][0]).re;
    (tr[0][0] + tr[1][1]).re + 2.0 * (det(rho).max(0.0) * det(sigma).max(0.0)).sqrt()
}

/// Per-entry ensemble mean and standard error of ρ_t (re and im parts).
pub fn entry_stats(samples: &[M2]) -> [[(f64, f64, f64, f64); 2]; 2] {
    let n = samples.len() as f64;
    let mut out = [[(0.0, 0.0, 0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let re: Vec<f64> = samples.iter().map(|m| m[i][j].re).collect();
            let im: Vec<f64> = samples.iter().map(|m| m[i][j].im).collect();
            let ms = |v: &[f64]| {
                let mean = v.iter().sum::<f64>() / n;
                let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
                (mean, (var / n).sqrt())
            };
            let (mr, sr) = ms(&re);
            let (mi, si) = ms(&im);
            out[i][j] = (mr, sr, mi, si);
        }
    }
    out
}
