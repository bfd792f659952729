//! Oracle checks with closed-form answers, run at n = 32.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use polaron_core::analysis::fit_power_law;
use polaron_core::choquard::{fit_dt, mild_residual_choquard};
use polaron_core::initdata::gaussian_amplitude_for_mass;
use polaron_core::operators::lambda_rotate;
use polaron_core::*;

use crate::Status;

type Check = Result<String, String>;

const N: usize = 32;
const L: f64 = 16.0;

fn grid() -> Arc<Grid> {
    Grid::new(N, L).expect("valid selftest grid")
}

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn sup_c(a: &WaveField, b: &WaveField) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn sup_r(a: &ScalarField, b: &ScalarField) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn plane_wave(g: &Arc<Grid>, m: [f64; 3]) -> WaveField {
    let k = m.map(|x| 2.0 * PI * x / L);
    WaveField::from_fn(g, |x| Complex64::from_polar(1.0, k[0] * x[0] + k[1] * x[1] + k[2] * x[2]))
}

fn sobolev_plane_wave() -> Check {
    let u = plane_wave(&grid(), [1.0, -2.0, 0.0]);
    let k2 = 5.0 * (2.0 * PI / L).powi(2);
    let expected = L.powf(1.5) * (1.0 + k2);
    let got = norm_sobolev(&u, 2.0).map_err(|e| e.to_string())?;
    let err = (got - expected).abs() / expected;
    ensure(err <= 1e-12, format!("relative error {err:.1e}"))
}

fn inverse_laplacian_cosine() -> Check {
    let g = grid();
    let k = 2.0 * PI * 3.0 / L;
    let f = ScalarField::from_fn(&g, |x| (k * x[1]).cos());
    let expected = f.scale(-1.0 / (k * k));
    let err = sup_r(&inv_laplacian(&f), &expected);
    ensure(err <= 1e-12, format!("sup error {err:.1e}"))
}

fn inverse_laplacian_drops_mean() -> Check {
    let g = grid();
    let f = ScalarField::from_fn(&g, |x| 2.0 + (2.0 * PI * x[0] / L).sin());
    let mean = inv_laplacian(&f).mean().abs();
    ensure(mean <= 1e-14, format!("mean {mean:.1e}"))
}

fn hartree_of_constant_density() -> Check {
    let v = hartree_potential(&plane_wave(&grid(), [2.0, 1.0, 0.0]));
    let sup = norm_sup(&v);
    ensure(sup <= 1e-12, format!("sup {sup:.1e}"))
}

fn free_propagator(corrupt: bool) -> Check {
    let g = grid();
    let m = [1.0, 2.0, 0.0];
    let t = 0.3;
    let mut prop = FourierMultiplier::free_propagator(&g, t);
    if corrupt {
        // the mode carrying the plane wave below
        let idx = (0..g.len()).find(|&i| g.mode_indices(i) == [1, 2, 0]).expect("mode on grid");
        prop.table_mut()[idx] *= Complex64::new(0.0, 1.0);
    }
    let u = plane_wave(&g, m);
    let got = u.apply_fourier_multiplier(&prop).map_err(|e| e.to_string())?;
    let k2 = (m[0] * m[0] + m[1] * m[1]) * (2.0 * PI / L).powi(2);
    let expected = u.scale(Complex64::from_polar(1.0, -k2 * t));
    let err = sup_c(&got, &expected);
    ensure(err <= 1e-12, format!("sup error {err:.1e}"))
}

fn free_flow_gaussian() -> Check {
    let g = grid();
    let t = 0.5;
    let u0 = gaussian_wave(&g, 1.0, [0.0; 3], [0.0; 3], 1.0).map_err(|e| e.to_string())?;
    let a = Complex64::new(1.0, 2.0 * t);
    let amp = (Complex64::new(1.0, 0.0) / a).sqrt().powi(3);
    let exact = WaveField::from_fn(&g, |x| {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in -1..=1 {
            for j in -1..=1 {
                for k in -1..=1 {
                    let d = [x[0] + i as f64 * L, x[1] + j as f64 * L, x[2] + k as f64 * L];
                    acc += amp * (-(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) / (2.0 * a)).exp();
                }
            }
        }
        acc
    });
    // the grid samples the Gaussian spectrum down to about e^{-k_max²/2}
    let err = sup_c(&free_flow(&u0, t), &exact);
    ensure(err <= 1e-7, format!("sup error {err:.1e}"))
}

fn rotation_closed_form() -> Check {
    let g = grid();
    let v = ScalarField::from_fn(&g, |x| (2.0 * PI * x[0] / L).cos());
    let w = ScalarField::from_fn(&g, |x| (2.0 * PI * x[2] / L).sin());
    let theta = 1.234;
    let (rv, rw) = lambda_rotate(&v, &w, theta);
    let ev = &v.scale(theta.cos()) + &w.scale(theta.sin());
    let ew = &w.scale(theta.cos()) - &v.scale(theta.sin());
    let err = sup_r(&rv, &ev).max(sup_r(&rw, &ew));
    ensure(err <= 1e-14, format!("sup error {err:.1e}"))
}

fn choquard_plane_wave() -> Check {
    let g = grid();
    let m = [1.0, 0.0, -1.0];
    let u0 = plane_wave(&g, m);
    let t = 0.5;
    let traj = choquard_integrate(&u0, t, 0.05, 100, &SolverOptions::default()).map_err(|e| e.to_string())?;
    let k2 = 2.0 * (2.0 * PI / L).powi(2);
    let expected = u0.scale(Complex64::from_polar(1.0, -k2 * t));
    let err = sup_c(&traj.states.last().unwrap().u, &expected);
    ensure(err <= 1e-12, format!("sup error {err:.1e}"))
}

fn gaussian(g: &Arc<Grid>) -> Result<WaveField, String> {
    gaussian_wave(g, 1.0, [0.0; 3], [0.0; 3], gaussian_amplitude_for_mass(1.0, 1.0)).map_err(|e| e.to_string())
}

fn choquard_conservation() -> Check {
    let g = grid();
    let traj = choquard_integrate(&gaussian(&g)?, 0.2, 1e-3, 50, &SolverOptions::default()).map_err(|e| e.to_string())?;
    let (m, e) = (traj.mass_drift(), traj.energy_drift());
    ensure(m <= 1e-9 && e <= 1e-6, format!("mass drift {m:.1e}, energy drift {e:.1e}"))
}

fn coupled_conservation() -> Check {
    let g = grid();
    let u0 = gaussian(&g)?;
    let state = PolaronState::new(u0.clone(), hartree_potential(&u0), ScalarField::zeros(&g), 0.1).map_err(|e| e.to_string())?;
    let traj = polaron_integrate(&state, 0.2, 0.005, 10, &SolverOptions::default()).map_err(|e| e.to_string())?;
    let (m, e) = (traj.mass_drift(), traj.energy_drift());
    ensure(m <= 1e-9 && e <= 1e-5, format!("mass drift {m:.1e}, energy drift {e:.1e}"))
}

fn strang_order() -> Check {
    let g = grid();
    let u0 = gaussian(&g)?.scale(Complex64::new(3.0, 0.0));
    let opts = SolverOptions::default();
    let end = |dt: f64| -> Result<WaveField, String> {
        let (_, dt) = fit_dt(0.4, dt);
        let mut traj = choquard_integrate(&u0, 0.4, dt, usize::MAX, &opts).map_err(|e| e.to_string())?;
        Ok(traj.states.pop().unwrap().u)
    };
    let (a, b, c) = (end(0.02)?, end(0.01)?, end(0.005)?);
    let d1 = norm_sobolev(&(&a - &b), 2.0).map_err(|e| e.to_string())?;
    let d2 = norm_sobolev(&(&b - &c), 2.0).map_err(|e| e.to_string())?;
    let p = (d1 / d2).log2();
    ensure((1.8..=2.2).contains(&p), format!("observed order {p:.3}"))
}

fn linear_mild_residual() -> Check {
    let g = grid();
    let u0 = plane_wave(&g, [0.0, 1.0, 1.0]);
    let u0 = u0.scale(Complex64::new(1.0 / norm_sobolev(&u0, 2.0).map_err(|e| e.to_string())?, 0.0));
    let traj = choquard_integrate(&u0, 0.2, 0.01, 2, &SolverOptions::default()).map_err(|e| e.to_string())?;
    let r = mild_residual_choquard(&traj).map_err(|e| e.to_string())?;
    ensure(r <= 1e-12, format!("residual {r:.1e}"))
}

fn resonance_example() -> Check {
    let r = resonance_gap(0.2, 3.0, 1.0).map_err(|e| e.to_string())?;
    ensure(r.gap == 0.0, format!("gap {} at k = {:?}, l = {:?}", r.gap, r.k, r.l))
}

fn exact_power_fit() -> Check {
    let pts: Vec<(f64, f64)> = [0.2, 0.1, 0.05, 0.025].iter().map(|&e| (e, 3.0 * e)).collect();
    let fit = fit_power_law(&pts).map_err(|e| e.to_string())?;
    ensure((fit.slope - 1.0).abs() <= 1e-12 && fit.residual <= 1e-12, format!("slope {}", fit.slope))
}

fn ground_state_mass() -> Check {
    let gs = pekar_ground_state(&grid(), 50.0, 1e-5, 5000).map_err(|e| e.to_string())?;
    let monotone = gs.energy_history.windows(2).all(|w| w[1] < w[0]);
    let dm = (gs.u.mass() - 50.0).abs() / 50.0;
    ensure(monotone && dm <= 1e-12, format!("energy {:.6}, mass error {dm:.1e}, monotone {monotone}", gs.energy))
}

/// Runs every check and returns `(name, outcome, seconds)` triples.
pub fn run_checks(corrupt_multiplier: bool) -> Vec<(&'static str, Check, f64)> {
    let checks: [(&'static str, &dyn Fn() -> Check); 15] = [
        ("sobolev_norm_plane_wave", &sobolev_plane_wave),
        ("inverse_laplacian_cosine", &inverse_laplacian_cosine),
        ("inverse_laplacian_mean_zero", &inverse_laplacian_drops_mean),
        ("hartree_constant_density", &hartree_of_constant_density),
        ("free_propagator_plane_wave", &|| free_propagator(corrupt_multiplier)),
        ("free_flow_gaussian", &free_flow_gaussian),
        ("rotation_closed_form", &rotation_closed_form),
        ("choquard_plane_wave", &choquard_plane_wave),
        ("choquard_conservation", &choquard_conservation),
        ("coupled_conservation", &coupled_conservation),
        ("strang_order", &strang_order),
        ("linear_mild_residual", &linear_mild_residual),
        ("resonance_gap_example", &resonance_example),
        ("exact_power_fit", &exact_power_fit),
        ("ground_state_mass", &ground_state_mass),
    ];
    checks
        .iter()
        .map(|(name, check)| {
            let started = std::time::Instant::now();
            let outcome = check();
            (*name, outcome, started.elapsed().as_secs_f64())
        })
        .collect()
}

pub fn report(corrupt_multiplier: bool) -> Status {
    let results = run_checks(corrupt_multiplier);
    let mut failed = 0;
    for (name, outcome, seconds) in &results {
        match outcome {
            Ok(detail) => println!("ok    {name}: {detail} ({seconds:.2}s)"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail} ({seconds:.2}s)");
            }
        }
    }
    println!("{} of {} checks passed", results.len() - failed, results.len());
    if failed == 0 {
        Status::Ok
    } else {
        Status::CheckFailed
    }
}
