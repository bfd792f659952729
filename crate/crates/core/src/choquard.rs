//! Strang split-step integrator for the Choquard equation
//! `i ∂_t U = -ΔU + (Δ⁻¹|U|²) U`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::norms::sobolev_from_spectrum;
use crate::fields::{norm_sobolev, Grid, GridFunction, WaveField};
use crate::operators::{hartree_from_density, hartree_potential, kick_in_place, FourierMultiplier};

#[derive(Clone, Debug)]
pub struct ChoquardState {
    pub u: WaveField,
    pub t: f64,
}

impl ChoquardState {
    pub fn new(u: WaveField) -> Self {
        ChoquardState { u, t: 0.0 }
    }
}

/// Options shared by both integrators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Sobolev order of the reported norms.
    pub s: f64,
    /// Apply the two-thirds filter to the nonlinear terms.
    pub dealias: bool,
    /// Abort when the monitored norm exceeds this value.
    pub norm_ceiling: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { s: 2.0, dealias: false, norm_ceiling: 1e6 }
    }
}

/// Default step `1e-3 (L/2π)²`.
pub fn default_dt(grid: &Grid) -> f64 {
    1e-3 * (grid.length() / (2.0 * PI)).powi(2)
}

/// Largest step `≤ max_dt` that divides `t_final` into whole steps.
pub fn fit_dt(t_final: f64, max_dt: f64) -> (usize, f64) {
    let steps = ((t_final / max_dt) - 1e-9).ceil().max(1.0) as usize;
    (steps, t_final / steps as f64)
}

pub(crate) fn whole_steps(t_final: f64, dt: f64) -> Result<usize> {
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::invalid(format!("final time must be positive (got {t_final})")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("time step must be positive (got {dt})")));
    }
    let ratio = t_final / dt;
    let steps = ratio.round();
    if steps < 1.0 || (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::invalid(format!("dt = {dt} does not divide T = {t_final}")));
    }
    Ok(steps as usize)
}

/// Reusable stepper holding the half-step propagator for a fixed `dt`.
pub struct ChoquardStepper {
    grid: Arc<Grid>,
    dt: f64,
    half_flow: FourierMultiplier,
    filter: Option<FourierMultiplier>,
    buf: Vec<Complex64>,
}

impl ChoquardStepper {
    /// `dt` may be negative for backward integration; it must be nonzero.
    pub fn new(grid: &Arc<Grid>, dt: f64, dealias: bool) -> Result<Self> {
        if !(dt.is_finite() && dt != 0.0) {
            return Err(Error::invalid(format!("time step must be finite and nonzero (got {dt})")));
        }
        Ok(ChoquardStepper {
            grid: grid.clone(),
            dt,
            half_flow: FourierMultiplier::free_propagator(grid, 0.5 * dt),
            filter: dealias.then(|| FourierMultiplier::two_thirds_filter(grid)),
            buf: vec![Complex64::new(0.0, 0.0); grid.len()],
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn half_flow(&mut self, u: &mut [Complex64]) {
        self.buf.copy_from_slice(u);
        self.grid.forward(&mut self.buf);
        self.half_flow.apply_spectrum(&mut self.buf);
        if let Some(f) = &self.filter {
            f.apply_spectrum(&mut self.buf);
        }
        self.grid.inverse(&mut self.buf);
        u.copy_from_slice(&self.buf);
    }

    /// One Strang step: half free flow, exact Hartree kick with the midpoint
    /// potential, half free flow.
    pub fn step(&mut self, state: &mut ChoquardState) -> Result<()> {
        let grid = self.grid.clone();
        let u = state.u.values_mut();
        self.half_flow(u);
        let potential = hartree_from_density(&grid, u.iter().map(|z| z.norm_sqr()), self.filter.as_ref());
        kick_in_place(u, potential.values(), self.dt);
        self.half_flow(u);
        state.t += self.dt;
        if !state.u.is_finite() {
            return Err(Error::Blowup { t: state.t, eps: None, reason: "non-finite field values".into() });
        }
        Ok(())
    }
}

/// Advances `state` by one Strang step of size `dt`.
pub fn choquard_step(state: &ChoquardState, dt: f64) -> Result<ChoquardState> {
    let mut next = state.clone();
    ChoquardStepper::new(state.u.grid(), dt, false)?.step(&mut next)?;
    Ok(next)
}

/// `E = ∫|∇U|² + ½∫V|U|²` with `V = Δ⁻¹|U|²`.
pub fn choquard_energy(state: &ChoquardState) -> f64 {
    let u = &state.u;
    let grid = u.grid();
    let spectrum = u.spectrum();
    let kinetic = grid.volume()
        * spectrum.iter().zip(grid.k_squared()).map(|(c, k2)| k2 * c.norm_sqr()).sum::<f64>();
    let v = hartree_potential(u);
    let interaction =
        0.5 * grid.cell_volume() * u.values().iter().zip(v.values()).map(|(z, p)| p * z.norm_sqr()).sum::<f64>();
    kinetic + interaction
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChoquardSample {
    pub t: f64,
    pub mass: f64,
    pub sobolev_norm: f64,
    pub energy: f64,
}

impl ChoquardSample {
    pub fn of(state: &ChoquardState, s: f64) -> Result<Self> {
        Ok(ChoquardSample {
            t: state.t,
            mass: state.u.mass(),
            sobolev_norm: norm_sobolev(&state.u, s)?,
            energy: choquard_energy(state),
        })
    }
}

#[derive(Clone, Debug)]
pub struct ChoquardTrajectory {
    pub dt: f64,
    pub stride: usize,
    pub s: f64,
    pub states: Vec<ChoquardState>,
    pub samples: Vec<ChoquardSample>,
}

impl ChoquardTrajectory {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    /// Largest relative deviation of the sampled mass from its initial value.
    pub fn mass_drift(&self) -> f64 {
        relative_drift(self.samples.iter().map(|s| s.mass))
    }

    pub fn energy_drift(&self) -> f64 {
        relative_drift(self.samples.iter().map(|s| s.energy))
    }
}

pub(crate) fn relative_drift(mut values: impl Iterator<Item = f64>) -> f64 {
    let Some(first) = values.next() else { return 0.0 };
    let worst = values.map(|v| (v - first).abs()).fold(0.0, f64::max);
    if first == 0.0 {
        worst
    } else {
        worst / first.abs()
    }
}

/// Integrates from `u0` at `t = 0` to `t_final`, sampling every `stride`
/// steps (and at `t_final`). `observer` sees every sampled state.
pub fn choquard_integrate_with(
    u0: &WaveField,
    t_final: f64,
    dt: f64,
    stride: usize,
    options: &SolverOptions,
    mut observer: impl FnMut(&ChoquardState) -> Result<()>,
) -> Result<()> {
    let steps = whole_steps(t_final, dt)?;
    if stride == 0 {
        return Err(Error::invalid("sampling stride must be at least 1"));
    }
    let mut stepper = ChoquardStepper::new(u0.grid(), dt, options.dealias)?;
    let mut state = ChoquardState::new(u0.clone());
    let check = |state: &ChoquardState| -> Result<()> {
        let norm = norm_sobolev(&state.u, options.s)?;
        if !(norm <= options.norm_ceiling) {
            return Err(Error::Blowup {
                t: state.t,
                eps: None,
                reason: format!("norm {norm:e} exceeds ceiling {:e}", options.norm_ceiling),
            });
        }
        Ok(())
    };
    check(&state)?;
    observer(&state)?;
    for step in 1..=steps {
        stepper.step(&mut state)?;
        if step % stride == 0 || step == steps {
            state.t = step as f64 * dt;
            check(&state)?;
            observer(&state)?;
        }
    }
    Ok(())
}

/// Collects the full sampled trajectory with its norm time series.
pub fn choquard_integrate(
    u0: &WaveField,
    t_final: f64,
    dt: f64,
    stride: usize,
    options: &SolverOptions,
) -> Result<ChoquardTrajectory> {
    let mut states = Vec::new();
    let mut samples = Vec::new();
    choquard_integrate_with(u0, t_final, dt, stride, options, |state| {
        samples.push(ChoquardSample::of(state, options.s)?);
        states.push(state.clone());
        Ok(())
    })?;
    Ok(ChoquardTrajectory { dt, stride, s: options.s, states, samples })
}

pub(crate) fn uniform_spacing(times: &[f64], min_samples: usize) -> Result<f64> {
    if times.len() < min_samples {
        return Err(Error::InsufficientData(format!(
            "need at least {min_samples} samples for the quadrature, got {}",
            times.len()
        )));
    }
    let h = times[1] - times[0];
    if !(h > 0.0) {
        return Err(Error::SamplingMismatch("sample times must increase".into()));
    }
    for w in times.windows(2) {
        if ((w[1] - w[0]) - h).abs() > 1e-9 * h {
            return Err(Error::SamplingMismatch("samples must be uniformly spaced".into()));
        }
    }
    Ok(h)
}

/// Largest `X_s` residual of the Duhamel identity
/// `U(t) = e^{iΔt}U₀ - i∫₀ᵗ e^{iΔ(t-r)} U(r)V(r) dr`,
/// with the integral evaluated by the trapezoid rule over the stored samples.
pub fn mild_residual_choquard(trajectory: &ChoquardTrajectory) -> Result<f64> {
    let states = &trajectory.states;
    let times: Vec<f64> = states.iter().map(|s| s.t).collect();
    let h = uniform_spacing(&times, 3)?;
    let grid = states[0].u.grid().clone();
    let k2 = grid.k_squared();
    let t0 = times[0];
    let u0_hat = states[0].u.spectrum();

    // G(r) = e^{+i|k|²(r - t0)} FT[U(r) V(r)]
    let integrand = |state: &ChoquardState| -> Vec<Complex64> {
        let v = hartree_potential(&state.u);
        let mut g: Vec<Complex64> = state.u.values().iter().zip(v.values()).map(|(z, p)| z * p).collect();
        grid.forward(&mut g);
        let r = state.t - t0;
        for (z, &k) in g.iter_mut().zip(k2) {
            *z *= Complex64::from_polar(1.0, k * r);
        }
        g
    };

    let mut integral = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut previous = integrand(&states[0]);
    let mut worst = 0.0f64;
    let mut residual = vec![Complex64::new(0.0, 0.0); grid.len()];
    for state in &states[1..] {
        let current = integrand(state);
        for ((acc, a), b) in integral.iter_mut().zip(&previous).zip(&current) {
            *acc += 0.5 * h * (a + b);
        }
        let t = state.t - t0;
        let u_hat = state.u.spectrum();
        for i in 0..grid.len() {
            let free = Complex64::from_polar(1.0, -k2[i] * t);
            residual[i] = u_hat[i] - free * (u0_hat[i] - Complex64::i() * integral[i]);
        }
        worst = worst.max(sobolev_from_spectrum(&grid, &residual, trajectory.s));
        previous = current;
    }
    Ok(worst)
}
