//! Smooth localized initial data and prepared data for the coupled system.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::choquard::{choquard_energy, ChoquardState};
use crate::error::{Error, Result};
use crate::fields::{norm_sobolev, norm_y, Grid, ScalarField, WaveField};
use crate::operators::{hartree_potential, hartree_potential_rate, FourierMultiplier, SpectralField};

/// `A e^{-|x-c|²/(2σ²)} e^{ik₀·x}` on the grid.
///
/// The centre must sit on a grid point and the bump must fit the box
/// (`6σ ≤ L/2`) so that periodic truncation stays below solver tolerance.
pub fn gaussian_wave(
    grid: &Arc<Grid>,
    sigma: f64,
    center: [f64; 3],
    momentum: [f64; 3],
    amplitude: f64,
) -> Result<WaveField> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("sigma must be positive (got {sigma})")));
    }
    if 6.0 * sigma > 0.5 * grid.length() {
        return Err(Error::invalid(format!(
            "truncation guard: 6σ = {} exceeds L/2 = {}",
            6.0 * sigma,
            0.5 * grid.length()
        )));
    }
    for c in center {
        let j = (c + 0.5 * grid.length()) / grid.spacing();
        if (j - j.round()).abs() > 1e-9 {
            return Err(Error::invalid(format!("centre coordinate {c} is not on a grid point")));
        }
    }
    let inv = 1.0 / (2.0 * sigma * sigma);
    Ok(WaveField::from_fn(grid, |x| {
        let r2: f64 = (0..3).map(|d| (x[d] - center[d]).powi(2)).sum();
        let phase: f64 = (0..3).map(|d| momentum[d] * x[d]).sum();
        Complex64::from_polar(amplitude * (-r2 * inv).exp(), phase)
    }))
}

/// Amplitude giving a centred Gaussian of width `σ` the mass `m` on ℝ³.
pub fn gaussian_amplitude_for_mass(sigma: f64, mass: f64) -> f64 {
    (mass / (PI.powf(1.5) * sigma.powi(3))).sqrt()
}

/// Rescales `u` so that `cell_volume · Σ|u|² = target_mass`.
pub fn normalize_mass(u: &WaveField, target_mass: f64) -> Result<WaveField> {
    if !(target_mass >= 0.0 && target_mass.is_finite()) {
        return Err(Error::invalid(format!("target mass must be nonnegative (got {target_mass})")));
    }
    let mass = u.mass();
    if mass == 0.0 {
        return Err(Error::invalid("cannot normalize the zero field"));
    }
    Ok(u.scale(Complex64::new((target_mass / mass).sqrt(), 0.0)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preparation {
    /// Deficits in `u` and `v` are `O(ε)`.
    Well,
    /// The `v` perturbation is not scaled by `ε`.
    Ill,
}

/// Initial value of `w = ε ∂_t v`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum W0Rule {
    /// `w₀ = ε V₀'`: the potential starts moving with the limit flow.
    Rate,
    /// `w₀ = 0`: the potential starts at rest.
    Zero,
}

#[derive(Clone, Debug)]
pub struct PreparedData {
    pub u0: WaveField,
    pub v0: ScalarField,
    pub w0: ScalarField,
    pub eps: f64,
    pub preparation: Preparation,
    /// `‖u₀ - U₀‖_{X_s}`
    pub u_deficit: f64,
    /// `‖v₀ - V₀‖_{Y_{s-2}}`
    pub v_deficit: f64,
    /// `‖v₀' - V₀'‖_{Y_{s-2}}` with `v₀' = w₀/ε`
    pub rate_deficit: f64,
}

impl PreparedData {
    pub fn to_state(&self) -> crate::polaron::PolaronState {
        crate::polaron::PolaronState {
            u: self.u0.clone(),
            v: self.v0.clone(),
            w: self.w0.clone(),
            t: 0.0,
            eps: self.eps,
        }
    }
}

/// Optional perturbations of the coupled data; `dw` perturbs the initial
/// rate `v₀' = w₀/ε`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Perturbations<'a> {
    pub du: Option<&'a WaveField>,
    pub dv: Option<&'a ScalarField>,
    pub dw: Option<&'a ScalarField>,
}

/// Builds coupled initial data around the limit datum `U₀`.
///
/// `u₀ = U₀ + ε δu` renormalized to the mass of `U₀`; `v₀ = V₀ + ε δv` (well)
/// or `V₀ + δv` (ill); `w₀` per `w0_rule` plus `ε δw`.
pub fn prepared_polaron_data(
    big_u0: &WaveField,
    eps: f64,
    preparation: Preparation,
    w0_rule: W0Rule,
    perturbations: Perturbations<'_>,
    s: f64,
) -> Result<PreparedData> {
    let Perturbations { du, dv, dw } = perturbations;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::invalid(format!("eps must be positive (got {eps})")));
    }
    let grid = big_u0.grid();
    if du.is_some_and(|d| d.grid() != grid)
        || dv.is_some_and(|d| d.grid() != grid)
        || dw.is_some_and(|d| d.grid() != grid)
    {
        return Err(Error::invalid("perturbation shapes do not match the grid of U0"));
    }
    let mass = big_u0.mass();
    if mass <= 0.0 {
        return Err(Error::invalid("U0 must have positive mass"));
    }
    let y_order = s - 2.0;
    let big_v0 = hartree_potential(big_u0);
    let rate = hartree_potential_rate(big_u0);

    let u0 = match du {
        Some(d) => normalize_mass(&big_u0.add_scaled(Complex64::new(eps, 0.0), d)?, mass)?,
        None => big_u0.clone(),
    };
    let v_scale = match preparation {
        Preparation::Well => eps,
        Preparation::Ill => 1.0,
    };
    let v0 = match dv {
        Some(d) => big_v0.add_scaled(v_scale, d)?,
        None => big_v0.clone(),
    };
    let mut w0 = match w0_rule {
        W0Rule::Rate => rate.scale(eps),
        W0Rule::Zero => ScalarField::zeros(grid),
    };
    if let Some(d) = dw {
        w0 = w0.add_scaled(eps, d)?;
    }
    let rate_deficit = norm_y(&(&w0.scale(1.0 / eps) - &rate), y_order)?;
    Ok(PreparedData {
        u_deficit: norm_sobolev(&(&u0 - big_u0), s)?,
        v_deficit: norm_y(&(&v0 - &big_v0), y_order)?,
        rate_deficit,
        u0,
        v0,
        w0,
        eps,
        preparation,
    })
}

/// Perturbation shapes with unit norms: `δu` in `X_s` (L²-orthogonal to
/// `U₀`), `δv` and `δw` in `Y_{s-2}` (mean zero).
#[derive(Clone, Debug)]
pub struct PerturbationShapes {
    pub du: WaveField,
    pub dv: ScalarField,
    pub dw: ScalarField,
}

impl PerturbationShapes {
    /// Lowest-frequency trigonometric shapes of the box.
    pub fn trigonometric(big_u0: &WaveField, s: f64) -> Result<Self> {
        let grid = big_u0.grid();
        let k = 2.0 * PI / grid.length();
        let du = WaveField::from_fn(grid, |x| Complex64::new((k * x[0]).cos(), (k * x[1]).sin()));
        let dv = ScalarField::from_fn(grid, |x| (k * x[0]).cos());
        let dw = ScalarField::from_fn(grid, |x| (k * x[1]).cos());
        Self::normalized(big_u0, du, dv, dw, s)
    }

    /// Seeded random band-limited shapes (integer wavenumbers up to 2 per axis).
    pub fn random(big_u0: &WaveField, s: f64, seed: u64) -> Result<Self> {
        let grid = big_u0.grid();
        let du = random_band_limited(grid, 2, &mut ChaCha8Rng::seed_from_u64(seed));
        let dv = random_band_limited(grid, 2, &mut ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15)).re();
        let dw = random_band_limited(grid, 2, &mut ChaCha8Rng::seed_from_u64(seed ^ 0x6a09_e667_f3bc_c909)).re();
        Self::normalized(big_u0, du, dv, dw, s)
    }

    pub fn perturbations(&self) -> Perturbations<'_> {
        Perturbations { du: Some(&self.du), dv: Some(&self.dv), dw: Some(&self.dw) }
    }

    /// Shapes multiplied by the given deficit scales.
    pub fn scaled(&self, du: f64, dv: f64, dw: f64) -> Self {
        PerturbationShapes { du: self.du.scale(Complex64::new(du, 0.0)), dv: self.dv.scale(dv), dw: self.dw.scale(dw) }
    }

    fn normalized(big_u0: &WaveField, du: WaveField, dv: ScalarField, dw: ScalarField, s: f64) -> Result<Self> {
        let grid = big_u0.grid();
        let h3 = grid.cell_volume();
        let inner: Complex64 = big_u0.values().iter().zip(du.values()).map(|(a, b)| a.conj() * b).sum::<Complex64>() * h3;
        let du = du.add_scaled(-inner / big_u0.mass(), big_u0)?;
        let unit_mean_zero = |f: ScalarField| -> Result<ScalarField> {
            let mean = f.mean();
            let f = f.map(|x| x - mean);
            let n = norm_y(&f, s - 2.0)?;
            if n == 0.0 {
                return Err(Error::invalid("degenerate perturbation shape"));
            }
            Ok(f.scale(1.0 / n))
        };
        let nu = norm_sobolev(&du, s)?;
        if nu == 0.0 {
            return Err(Error::invalid("degenerate perturbation shape"));
        }
        Ok(PerturbationShapes {
            du: du.scale(Complex64::new(1.0 / nu, 0.0)),
            dv: unit_mean_zero(dv)?,
            dw: unit_mean_zero(dw)?,
        })
    }
}

/// Random field with independent Gaussian coefficients on modes with
/// `|m_j| ≤ band` on every axis.
pub fn random_band_limited(grid: &Arc<Grid>, band: i64, rng: &mut impl Rng) -> WaveField {
    let coefficients: Vec<Complex64> = (0..grid.len())
        .map(|i| {
            if grid.mode_indices(i).iter().all(|m| m.abs() <= band) {
                Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    WaveField::from_spectrum(grid, coefficients).expect("length matches grid")
}

#[derive(Clone, Debug)]
pub struct GroundState {
    pub u: WaveField,
    pub energy: f64,
    /// Lagrange multiplier (chemical potential) of the mass constraint.
    pub mu: f64,
    pub residual: f64,
    pub iterations: usize,
    /// Energy after every accepted iteration, starting with the initial guess.
    pub energy_history: Vec<f64>,
}

/// Minimizes the Choquard energy at fixed mass by a preconditioned,
/// normalized gradient flow with backtracking.
///
/// The residual is `‖HU - μU‖_{L²} / ‖U‖_{L²}` with `H = -Δ + Δ⁻¹|U|²` and
/// `μ = ⟨U, HU⟩ / ⟨U, U⟩`; iteration stops once it drops to `tol`. Since
/// every accepted step must lower the energy, the attainable residual is
/// limited by rounding in the energy (about `1e-6` on `64³` grids).
pub fn pekar_ground_state(grid: &Arc<Grid>, mass: f64, tol: f64, max_iters: usize) -> Result<GroundState> {
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::invalid(format!("mass must be positive (got {mass})")));
    }
    // Pekar length scale ~ 8π/mass for this coupling, clamped to the box.
    let (lo, hi) = (2.0 * grid.spacing(), grid.length() / 12.0);
    if lo > hi {
        return Err(Error::InvalidGrid(format!(
            "n = {} is too coarse for a localized ground state (needs n ≥ 24)",
            grid.n()
        )));
    }
    let sigma = (8.0 * PI / mass).clamp(lo, hi);
    let guess = gaussian_wave(grid, sigma, [0.0; 3], [0.0; 3], 1.0)?;
    let mut u = normalize_mass(&guess, mass)?;
    let energy = |u: &WaveField| choquard_energy(&ChoquardState::new(u.clone()));
    let mut e = energy(&u);
    let mut history = vec![e];
    let mut tau = 0.5;
    let mut last_residual = f64::INFINITY;

    for iteration in 0..=max_iters {
        let (gradient, mu) = constrained_gradient(&u);
        let norm_u = u.mass().sqrt();
        last_residual = gradient.mass().sqrt() / norm_u;
        if last_residual <= tol {
            return Ok(GroundState {
                u: realify(&u),
                energy: e,
                mu,
                residual: last_residual,
                iterations: iteration,
                energy_history: history,
            });
        }
        if iteration == max_iters {
            break;
        }
        let shift = (-mu).max(0.0) + 1.0;
        let precond = FourierMultiplier::radial(grid, |k2| 1.0 / (shift + k2));
        let direction = gradient.map_spectrum(|i, z| z * precond.table()[i]);
        let tangent = project_out(&direction, &u);

        let mut accepted = false;
        while tau > 1e-14 {
            let trial = normalize_mass(&u.add_scaled(Complex64::new(-tau, 0.0), &tangent)?, mass)?;
            let e_trial = energy(&trial);
            if e_trial < e {
                u = trial;
                e = e_trial;
                history.push(e);
                tau = (tau * 1.5).min(4.0);
                accepted = true;
                break;
            }
            tau *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Err(Error::NonConvergence { iterations: history.len() - 1, residual: last_residual })
}

fn constrained_gradient(u: &WaveField) -> (WaveField, f64) {
    let potential = hartree_potential(u);
    let hu = &u.laplacian().scale(Complex64::new(-1.0, 0.0)) + &u.mul_scalar_field(&potential).expect("same grid");
    let mu = inner(u, &hu).re / inner(u, u).re;
    (hu.add_scaled(Complex64::new(-mu, 0.0), u).expect("same grid"), mu)
}

fn inner(a: &WaveField, b: &WaveField) -> Complex64 {
    a.values().iter().zip(b.values()).map(|(x, y)| x.conj() * y).sum::<Complex64>() * a.grid().cell_volume()
}

fn project_out(d: &WaveField, u: &WaveField) -> WaveField {
    let c = inner(u, d) / inner(u, u);
    d.add_scaled(-c, u).expect("same grid")
}

fn realify(u: &WaveField) -> WaveField {
    u.map(|z| Complex64::new(z.re, 0.0))
}
