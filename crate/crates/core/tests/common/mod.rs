//! Independent reference solutions shared by the integration targets.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use polaron_core::{Grid, ScalarField, WaveField};
use statrs::function::erf::erf;

/// Unit-mass normalized Gaussian density `(2πσ²)^{-3/2} e^{-r²/2σ²}`.
pub fn gaussian_density(grid: &Arc<Grid>, sigma: f64) -> ScalarField {
    let c = (2.0 * PI * sigma * sigma).powf(-1.5);
    ScalarField::from_fn(grid, |x| c * (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (2.0 * sigma * sigma)).exp())
}

/// Whole-space potential of the unit Gaussian: `-erf(r/√2σ)/(4πr)`.
pub fn whole_space_potential(r: f64, sigma: f64) -> f64 {
    let a = 2f64.sqrt() * sigma;
    if r < 1e-8 {
        return -2.0 / (PI.sqrt() * a) / (4.0 * PI);
    }
    -erf(r / a) / (4.0 * PI * r)
}

/// Mean-zero periodic solution of `Δφ = ρ - ⟨ρ⟩` for the unit Gaussian,
/// by Ewald splitting with width `eta > sigma`.
///
/// The short-range part `[erf(r/√2σ) - erf(r/√2η)]/(4πr)` is summed over the
/// 27 nearest images; the smooth remainder `e^{-η²k²/2}/k²` is summed over
/// modes with a naive separable DFT.
pub fn ewald_periodic_potential(grid: &Arc<Grid>, sigma: f64, eta: f64) -> ScalarField {
    assert!(eta > sigma);
    let n = grid.n();
    let l = grid.length();
    let (a, b) = (2f64.sqrt() * sigma, 2f64.sqrt() * eta);
    let short = |r: f64| {
        if r < 1e-8 {
            2.0 / PI.sqrt() * (1.0 / a - 1.0 / b) / (4.0 * PI)
        } else {
            (erf(r / a) - erf(r / b)) / (4.0 * PI * r)
        }
    };
    let mut phi = vec![0.0; grid.len()];
    for (idx, x) in grid.positions().enumerate() {
        let mut acc = 0.0;
        for m0 in -1..=1 {
            for m1 in -1..=1 {
                for m2 in -1..=1 {
                    let d = [x[0] + m0 as f64 * l, x[1] + m1 as f64 * l, x[2] + m2 as f64 * l];
                    acc += short((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt());
                }
            }
        }
        phi[idx] = -acc;
    }

    // smooth part: -(1/L³) Σ_{k≠0} e^{-η²k²/2}/k² e^{ik·x}
    let dk = 2.0 * PI / l;
    let cutoff: f64 = 40.0; // e^{-40} is below roundoff
    let m_max = ((2.0 * cutoff).sqrt() / (eta * dk)).ceil() as i64;
    let modes: Vec<i64> = (-m_max..=m_max).collect();
    let nm = modes.len();
    let phase: Vec<Vec<Complex64>> = modes
        .iter()
        .map(|&m| (0..n).map(|j| Complex64::from_polar(1.0, m as f64 * dk * grid.coordinate(j))).collect())
        .collect();
    let mut coef = vec![0.0; nm * nm * nm];
    for (i0, &m0) in modes.iter().enumerate() {
        for (i1, &m1) in modes.iter().enumerate() {
            for (i2, &m2) in modes.iter().enumerate() {
                let k2 = dk * dk * (m0 * m0 + m1 * m1 + m2 * m2) as f64;
                if k2 > 0.0 && eta * eta * k2 / 2.0 < cutoff {
                    coef[(i0 * nm + i1) * nm + i2] = -(-eta * eta * k2 / 2.0).exp() / k2 / l.powi(3);
                }
            }
        }
    }
    // contract one axis at a time
    let mut a2 = vec![Complex64::new(0.0, 0.0); nm * nm * n];
    for i0 in 0..nm {
        for i1 in 0..nm {
            for j2 in 0..n {
                let mut s = Complex64::new(0.0, 0.0);
                for i2 in 0..nm {
                    s += coef[(i0 * nm + i1) * nm + i2] * phase[i2][j2];
                }
                a2[(i0 * nm + i1) * n + j2] = s;
            }
        }
    }
    let mut a1 = vec![Complex64::new(0.0, 0.0); nm * n * n];
    for i0 in 0..nm {
        for j1 in 0..n {
            for j2 in 0..n {
                let mut s = Complex64::new(0.0, 0.0);
                for i1 in 0..nm {
                    s += a2[(i0 * nm + i1) * n + j2] * phase[i1][j1];
                }
                a1[(i0 * n + j1) * n + j2] = s;
            }
        }
    }
    for j0 in 0..n {
        for j1 in 0..n {
            for j2 in 0..n {
                let mut s = Complex64::new(0.0, 0.0);
                for i0 in 0..nm {
                    s += a1[(i0 * n + j1) * n + j2] * phase[i0][j0];
                }
                phi[(j0 * n + j1) * n + j2] += s.re;
            }
        }
    }
    let mean = phi.iter().sum::<f64>() / phi.len() as f64;
    phi.iter_mut().for_each(|p| *p -= mean);
    ScalarField::from_values(grid, phi).unwrap()
}

/// `e^{itΔ}` applied to `e^{-r²/2σ²}` on the periodic box, as a sum of the
/// whole-space solution over the 27 nearest images.
pub fn free_gaussian(grid: &Arc<Grid>, sigma: f64, t: f64) -> WaveField {
    let l = grid.length();
    let a = Complex64::new(sigma * sigma, 2.0 * t);
    let amp = (Complex64::new(sigma * sigma, 0.0) / a).sqrt().powi(3);
    WaveField::from_fn(grid, |x| {
        let mut acc = Complex64::new(0.0, 0.0);
        for m0 in -1..=1 {
            for m1 in -1..=1 {
                for m2 in -1..=1 {
                    let d = [x[0] + m0 as f64 * l, x[1] + m1 as f64 * l, x[2] + m2 as f64 * l];
                    let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
                    acc += amp * (-r2 / (2.0 * a)).exp();
                }
            }
        }
        acc
    })
}

pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn sup_diff_c(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Observed convergence order from two successive error levels.
pub fn order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}
