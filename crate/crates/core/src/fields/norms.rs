use num_complex::Complex64;

use super::{GridFunction, Grid, ScalarField};
use crate::error::{Error, Result};

/// Per-mode weights `ρ_s(k) = (1+|k|²)^{s/2}` and `σ_s(k) = |k|^s`.
#[derive(Clone, Debug)]
pub struct SpectralWeights {
    pub s: f64,
    pub rho: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl SpectralWeights {
    pub fn new(grid: &Grid, s: f64) -> Result<Self> {
        check_order(s)?;
        let rho = grid.k_squared().iter().map(|&k2| pow(1.0 + k2, 0.5 * s)).collect();
        let sigma = grid
            .k_squared()
            .iter()
            .map(|&k2| if k2 == 0.0 { if s == 0.0 { 1.0 } else { 0.0 } } else { pow(k2, 0.5 * s) })
            .collect();
        Ok(SpectralWeights { s, rho, sigma })
    }
}

fn check_order(s: f64) -> Result<()> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::invalid(format!("Sobolev order must be a nonnegative number (got {s})")));
    }
    Ok(())
}

fn pow(base: f64, e: f64) -> f64 {
    if e.fract() == 0.0 && e.abs() < 64.0 {
        base.powi(e as i32)
    } else {
        base.powf(e)
    }
}

pub(crate) fn sobolev_from_spectrum(grid: &Grid, coefficients: &[Complex64], s: f64) -> f64 {
    let sum: f64 = if s == 0.0 {
        coefficients.iter().map(|c| c.norm_sqr()).sum()
    } else {
        coefficients
            .iter()
            .zip(grid.k_squared())
            .map(|(c, &k2)| pow(1.0 + k2, s) * c.norm_sqr())
            .sum()
    };
    (grid.volume() * sum).sqrt()
}

/// `‖f‖_{X_s} = (L³ Σ_k (1+|k|²)^s |f̂(k)|²)^{1/2}`.
pub fn norm_sobolev<F: GridFunction + ?Sized>(f: &F, s: f64) -> Result<f64> {
    check_order(s)?;
    Ok(sobolev_from_spectrum(f.grid(), &f.spectrum(), s))
}

/// Rectangle-rule `∫|f|`.
pub fn norm_l1<F: GridFunction + ?Sized>(f: &F) -> f64 {
    f.grid().cell_volume() * f.magnitudes().sum::<f64>()
}

/// `max_x |f(x)|` over the grid.
pub fn norm_sup<F: GridFunction + ?Sized>(f: &F) -> f64 {
    f.magnitudes().fold(0.0, f64::max)
}

/// `‖v‖_{Y_s} = ‖v‖_{C_0} + ‖Δv‖_{X_s} + ‖Δv‖_{L¹}` with a spectral Laplacian.
pub fn norm_y(v: &ScalarField, s: f64) -> Result<f64> {
    check_order(s)?;
    let grid = v.grid();
    let mut coefficients = v.spectrum();
    for (c, &k2) in coefficients.iter_mut().zip(grid.k_squared()) {
        *c *= -k2;
    }
    let sobolev = sobolev_from_spectrum(grid, &coefficients, s);
    grid.inverse(&mut coefficients);
    let l1 = grid.cell_volume() * coefficients.iter().map(|z| z.re.abs()).sum::<f64>();
    Ok(norm_sup(v) + sobolev + l1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::WaveField;
    use proptest::prelude::*;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn gaussian(grid: &Arc<Grid>, amp: f64, sigma: f64) -> ScalarField {
        ScalarField::from_fn(grid, |x| amp * (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (2.0 * sigma * sigma)).exp())
    }

    // ∫|cos x| over one period, by adaptive-free composite Simpson on [0, π/2] where |cos| is smooth.
    fn abs_cos_period_integral() -> f64 {
        let m = 2000;
        let h = 0.5 * PI / m as f64;
        let mut acc = 0.0;
        for i in 0..=m {
            let w = if i == 0 || i == m { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * (i as f64 * h).cos();
        }
        4.0 * acc * h / 3.0
    }

    #[test]
    fn sobolev_single_mode() {
        let g = Grid::new(8, 2.0 * PI).unwrap();
        let f = WaveField::from_fn(&g, |x| Complex64::from_polar(1.0, x[0]));
        let expected = 2.0 * (2.0 * PI).powf(1.5);
        assert!((norm_sobolev(&f, 2.0).unwrap() - expected).abs() < 1e-12 * expected);
        assert_eq!(norm_sobolev(&WaveField::zeros(&g), 2.0).unwrap(), 0.0);
        assert!(norm_sobolev(&f, -1.0).is_err());
    }

    #[test]
    fn sobolev_zero_is_gaussian_mass() {
        let g = Grid::new(32, 16.0).unwrap();
        let (a, sigma) = (1.7, 1.0);
        let f = gaussian(&g, a, sigma);
        let analytic = a * a * PI.powf(1.5) * sigma.powi(3);
        let got = norm_sobolev(&f, 0.0).unwrap().powi(2);
        assert!((got - analytic).abs() <= 1e-8 * analytic, "{got} vs {analytic}");
    }

    #[test]
    fn l1_examples() {
        let g = Grid::new(8, 2.0).unwrap();
        assert_eq!(norm_l1(&ScalarField::zeros(&g)), 0.0);
        assert!((norm_l1(&ScalarField::constant(&g, 1.0)) - 8.0).abs() < 1e-12);

        let oracle = abs_cos_period_integral();
        assert!((oracle - 4.0).abs() < 1e-12);
        let expected = oracle * (2.0 * PI).powi(2);
        let g = Grid::new(16, 2.0 * PI).unwrap();
        let coarse = norm_l1(&ScalarField::from_fn(&g, |x| x[0].cos()));
        // The kinks of |cos| sit on grid points, so the rule is a trapezoid sum
        // on each smooth arc: h Σ|cos| = 4 (h/2) cot(h/2) per period.
        let h = g.spacing();
        let trapezoid = 4.0 * (0.5 * h) / (0.5 * h).tan() * (2.0 * PI).powi(2);
        assert!((coarse - trapezoid).abs() < 1e-10 * trapezoid, "{coarse}");
        assert!((coarse - 157.91).abs() < 0.015 * 157.91);
        let g = Grid::new(64, 2.0 * PI).unwrap();
        let fine = norm_l1(&ScalarField::from_fn(&g, |x| x[0].cos()));
        assert!((fine - expected).abs() <= 1e-3 * expected);

        let g = Grid::new(32, 16.0).unwrap();
        let gauss = norm_l1(&gaussian(&g, 1.0, 1.0));
        let analytic = (2.0 * PI).powf(1.5);
        assert!((gauss - analytic).abs() <= 1e-8 * analytic);
    }

    #[test]
    fn sup_examples() {
        let g = Grid::new(16, 2.0 * PI).unwrap();
        assert_eq!(norm_sup(&ScalarField::zeros(&g)), 0.0);
        assert!((norm_sup(&ScalarField::from_fn(&g, |x| 3.0 * x[0].cos())) - 3.0).abs() < 1e-15);
        let g = Grid::new(16, 16.0).unwrap();
        assert_eq!(norm_sup(&gaussian(&g, 2.0, 1.0)), 2.0);
    }

    #[test]
    fn y_norm_of_cosine() {
        let g = Grid::new(64, 2.0 * PI).unwrap();
        let v = ScalarField::from_fn(&g, |x| x[0].cos());
        let expected = 1.0 + (2.0 * PI).powf(1.5) / 2f64.sqrt() + abs_cos_period_integral() * (2.0 * PI).powi(2);
        let got = norm_y(&v, 0.0).unwrap();
        assert!((got - expected).abs() <= 1e-3 * expected, "{got} vs {expected}");
        assert_eq!(norm_y(&ScalarField::zeros(&g), 0.0).unwrap(), 0.0);
    }

    #[test]
    fn weights_at_zero_mode() {
        let g = Grid::new(8, 1.0).unwrap();
        let w = SpectralWeights::new(&g, 2.0).unwrap();
        assert_eq!(w.rho[0], 1.0);
        assert_eq!(w.sigma[0], 0.0);
        assert!(w.rho.iter().chain(&w.sigma).all(|&x| x >= 0.0));
        let k2 = g.k_squared()[9];
        assert!((w.rho[9] - (1.0 + k2)).abs() < 1e-12 && (w.sigma[9] - k2).abs() < 1e-12);
    }

    fn seeded_wave(grid: &Arc<Grid>, values: &[(f64, f64)]) -> WaveField {
        WaveField::from_values(grid, values.iter().map(|&(a, b)| Complex64::new(a, b)).collect()).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn parseval_and_round_trip(values in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 512)) {
            let g = Grid::new(8, 3.7).unwrap();
            let f = seeded_wave(&g, &values);
            let direct = (g.cell_volume() * f.values().iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt();
            let spectral = norm_sobolev(&f, 0.0).unwrap();
            prop_assert!((direct - spectral).abs() <= 1e-12 * direct);

            let mut data = f.values().to_vec();
            g.forward(&mut data);
            g.inverse(&mut data);
            let scale = norm_sup(&f);
            for (a, b) in data.iter().zip(f.values()) {
                prop_assert!((a - b).norm() <= 1e-12 * scale);
            }
        }

        #[test]
        fn sobolev_monotone_in_order(
            values in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 512),
            s in 0.0f64..4.0, ds in 0.0f64..2.0,
        ) {
            let g = Grid::new(8, 2.0).unwrap();
            let f = seeded_wave(&g, &values);
            prop_assert!(norm_sobolev(&f, s).unwrap() <= norm_sobolev(&f, s + ds).unwrap() * (1.0 + 1e-14));
        }

        #[test]
        fn norms_are_homogeneous_and_subadditive(
            a in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 512),
            b in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 512),
            c in -3.0f64..3.0,
        ) {
            let g = Grid::new(8, 2.0).unwrap();
            let (f, h) = (seeded_wave(&g, &a), seeded_wave(&g, &b));
            let cf = &f * c;
            let sum = &f + &h;
            let tol = 1e-12;
            let checks: [(f64, f64, f64, f64); 3] = [
                (norm_sobolev(&cf, 2.0).unwrap(), norm_sobolev(&f, 2.0).unwrap(), norm_sobolev(&sum, 2.0).unwrap(), norm_sobolev(&h, 2.0).unwrap()),
                (norm_l1(&cf), norm_l1(&f), norm_l1(&sum), norm_l1(&h)),
                (norm_sup(&cf), norm_sup(&f), norm_sup(&sum), norm_sup(&h)),
            ];
            for (scaled, base, total, other) in checks {
                prop_assert!((scaled - c.abs() * base).abs() <= tol * (1.0 + scaled));
                prop_assert!(total <= (base + other) * (1.0 + tol));
            }
            let (fr, hr) = (f.re(), h.re());
            let y_scaled = norm_y(&(&fr * c), 0.0).unwrap();
            prop_assert!((y_scaled - c.abs() * norm_y(&fr, 0.0).unwrap()).abs() <= tol * (1.0 + y_scaled));
            prop_assert!(norm_y(&(&fr + &hr), 0.0).unwrap() <= (norm_y(&fr, 0.0).unwrap() + norm_y(&hr, 0.0).unwrap()) * (1.0 + tol));
        }
    }
}
