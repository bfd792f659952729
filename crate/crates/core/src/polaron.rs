//! Split-step integrator for the coupled system in first-order form
//!
//! ```text
//! u' = iΔu - i u v
//! v' = w / ε
//! w' = -v / ε + Δ⁻¹|u|² / ε
//! ```
//!
//! The stiff `ε⁻¹` oscillation is the exact rotation group, never a generic
//! ODE scheme, so no `e^{t/ε}` amplification can enter through the linear part.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::choquard::{relative_drift, uniform_spacing, whole_steps, SolverOptions};
use crate::error::{Error, Result};
use crate::fields::norms::sobolev_from_spectrum;
use crate::fields::{norm_sobolev, norm_y, Grid, GridFunction, ScalarField, WaveField};
use crate::operators::{
    hartree_from_density, hartree_potential, kick_in_place, rotate_in_place, FourierMultiplier,
};

/// Steps larger than `ε / RECOMMENDED_STEPS_PER_EPS` trigger a warning.
pub const RECOMMENDED_STEPS_PER_EPS: f64 = 10.0;

#[derive(Clone, Debug)]
pub struct PolaronState {
    pub u: WaveField,
    pub v: ScalarField,
    /// `w = ε ∂_t v` in the continuum model.
    pub w: ScalarField,
    pub t: f64,
    pub eps: f64,
}

impl PolaronState {
    pub fn new(u: WaveField, v: ScalarField, w: ScalarField, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::invalid(format!("eps must be positive (got {eps})")));
        }
        if u.grid() != v.grid() || u.grid() != w.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(PolaronState { u, v, w, t: 0.0, eps })
    }

    fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite() && self.w.is_finite()
    }

    /// `‖u‖_{X_s} + ‖v‖_{Y_{s-2}} + ‖w‖_{Y_{s-2}}`.
    pub fn composite_norm(&self, s: f64) -> Result<f64> {
        Ok(norm_sobolev(&self.u, s)? + norm_y(&self.v, s - 2.0)? + norm_y(&self.w, s - 2.0)?)
    }
}

pub struct PolaronStepper {
    grid: Arc<Grid>,
    dt: f64,
    eps: f64,
    half_flow: FourierMultiplier,
    filter: Option<FourierMultiplier>,
    buf: Vec<Complex64>,
}

impl PolaronStepper {
    pub fn new(grid: &Arc<Grid>, dt: f64, eps: f64, dealias: bool) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("time step must be positive (got {dt})")));
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::invalid(format!("eps must be positive (got {eps})")));
        }
        if dt > eps / RECOMMENDED_STEPS_PER_EPS * (1.0 + 1e-12) {
            log::warn!("dt = {dt} exceeds the recommended eps/10 = {} for eps = {eps}", eps / RECOMMENDED_STEPS_PER_EPS);
        }
        Ok(PolaronStepper {
            grid: grid.clone(),
            dt,
            eps,
            half_flow: FourierMultiplier::free_propagator(grid, 0.5 * dt),
            filter: dealias.then(|| FourierMultiplier::two_thirds_filter(grid)),
            buf: vec![Complex64::new(0.0, 0.0); grid.len()],
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn half_linear(&mut self, state: &mut PolaronState) {
        let u = state.u.values_mut();
        self.buf.copy_from_slice(u);
        self.grid.forward(&mut self.buf);
        self.half_flow.apply_spectrum(&mut self.buf);
        if let Some(f) = &self.filter {
            f.apply_spectrum(&mut self.buf);
        }
        self.grid.inverse(&mut self.buf);
        u.copy_from_slice(&self.buf);
        rotate_in_place(state.v.values_mut(), state.w.values_mut(), 0.5 * self.dt / self.eps);
    }

    /// Half linear flow, exact nonlinear flow over `dt` (|u| and v are
    /// invariant under it), half linear flow.
    pub fn step(&mut self, state: &mut PolaronState) -> Result<()> {
        if state.eps != self.eps {
            return Err(Error::invalid("stepper and state disagree on eps"));
        }
        self.half_linear(state);
        kick_in_place(state.u.values_mut(), state.v.values(), self.dt);
        let forcing = hartree_from_density(
            &self.grid,
            state.u.values().iter().map(|z| z.norm_sqr()),
            self.filter.as_ref(),
        );
        let gain = self.dt / self.eps;
        for (w, f) in state.w.values_mut().iter_mut().zip(forcing.values()) {
            *w += gain * f;
        }
        self.half_linear(state);
        state.t += self.dt;
        if !state.is_finite() {
            return Err(Error::Blowup { t: state.t, eps: Some(state.eps), reason: "non-finite field values".into() });
        }
        Ok(())
    }
}

pub fn polaron_step(state: &PolaronState, dt: f64) -> Result<PolaronState> {
    let mut next = state.clone();
    PolaronStepper::new(state.u.grid(), dt, state.eps, false)?.step(&mut next)?;
    Ok(next)
}

fn dirichlet_energy(field: &ScalarField) -> f64 {
    let grid = field.grid();
    let spectrum = field.spectrum();
    grid.volume() * spectrum.iter().zip(grid.k_squared()).map(|(c, k2)| k2 * c.norm_sqr()).sum::<f64>()
}

/// `E_ε = ∫|∇u|² + ∫v|u|² + ½∫|∇v|² + ½∫|∇w|²`, conserved by the coupled flow.
pub fn polaron_energy(state: &PolaronState) -> f64 {
    let grid = state.u.grid();
    let spectrum = state.u.spectrum();
    let kinetic = grid.volume()
        * spectrum.iter().zip(grid.k_squared()).map(|(c, k2)| k2 * c.norm_sqr()).sum::<f64>();
    let coupling = grid.cell_volume()
        * state.u.values().iter().zip(state.v.values()).map(|(z, p)| p * z.norm_sqr()).sum::<f64>();
    kinetic + coupling + 0.5 * dirichlet_energy(&state.v) + 0.5 * dirichlet_energy(&state.w)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolaronSample {
    pub t: f64,
    pub mass: f64,
    pub xs_norm_u: f64,
    pub y_norm_v: f64,
    pub y_norm_w: f64,
    pub energy: f64,
}

impl PolaronSample {
    pub fn of(state: &PolaronState, s: f64) -> Result<Self> {
        Ok(PolaronSample {
            t: state.t,
            mass: state.u.mass(),
            xs_norm_u: norm_sobolev(&state.u, s)?,
            y_norm_v: norm_y(&state.v, s - 2.0)?,
            y_norm_w: norm_y(&state.w, s - 2.0)?,
            energy: polaron_energy(state),
        })
    }

    pub fn composite_norm(&self) -> f64 {
        self.xs_norm_u + self.y_norm_v + self.y_norm_w
    }
}

#[derive(Clone, Debug)]
pub struct PolaronTrajectory {
    pub dt: f64,
    pub stride: usize,
    pub eps: f64,
    pub s: f64,
    pub states: Vec<PolaronState>,
    pub samples: Vec<PolaronSample>,
}

impl PolaronTrajectory {
    pub fn mass_drift(&self) -> f64 {
        relative_drift(self.samples.iter().map(|s| s.mass))
    }

    pub fn energy_drift(&self) -> f64 {
        relative_drift(self.samples.iter().map(|s| s.energy))
    }
}

/// Step size for a given `ε`: `min(dt_base, fraction·ε)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DtRule {
    pub base: f64,
    pub eps_fraction: f64,
}

impl Default for DtRule {
    fn default() -> Self {
        DtRule { base: f64::INFINITY, eps_fraction: 1.0 / RECOMMENDED_STEPS_PER_EPS }
    }
}

impl DtRule {
    pub fn max_dt(&self, eps: f64) -> f64 {
        self.base.min(self.eps_fraction * eps)
    }

    /// Largest admissible step that fits a whole number of times into
    /// `interval`; returns `(steps per interval, dt)`.
    pub fn fit(&self, eps: f64, interval: f64) -> (usize, f64) {
        crate::choquard::fit_dt(interval, self.max_dt(eps))
    }
}

fn validate_s(s: f64) -> Result<()> {
    if !(s >= 2.0) {
        return Err(Error::invalid(format!("the coupled solver needs s ≥ 2 (got {s})")));
    }
    Ok(())
}

/// Integrates the coupled system, handing every sampled state to `observer`.
#[allow(clippy::too_many_arguments)]
pub fn polaron_integrate_with(
    initial: &PolaronState,
    t_final: f64,
    dt: f64,
    stride: usize,
    options: &SolverOptions,
    mut observer: impl FnMut(&PolaronState) -> Result<()>,
) -> Result<()> {
    validate_s(options.s)?;
    let steps = whole_steps(t_final, dt)?;
    if stride == 0 {
        return Err(Error::invalid("sampling stride must be at least 1"));
    }
    let mut stepper = PolaronStepper::new(initial.u.grid(), dt, initial.eps, options.dealias)?;
    let mut state = initial.clone();
    state.t = 0.0;
    let check = |state: &PolaronState| -> Result<()> {
        let norm = state.composite_norm(options.s)?;
        if !(norm <= options.norm_ceiling) {
            return Err(Error::Blowup {
                t: state.t,
                eps: Some(state.eps),
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

pub fn polaron_integrate(
    initial: &PolaronState,
    t_final: f64,
    dt: f64,
    stride: usize,
    options: &SolverOptions,
) -> Result<PolaronTrajectory> {
    let mut states = Vec::new();
    let mut samples = Vec::new();
    polaron_integrate_with(initial, t_final, dt, stride, options, |state| {
        samples.push(PolaronSample::of(state, options.s)?);
        states.push(state.clone());
        Ok(())
    })?;
    Ok(PolaronTrajectory { dt, stride, eps: initial.eps, s: options.s, states, samples })
}

/// Largest residual, in `X_s × Y_{s-2} × Y_{s-2}`, of the Duhamel identity for
/// the coupled system with the exact group `diag(e^{iΔt}, e^{ε⁻¹Λt})`, using
/// the trapezoid rule over the stored samples.
pub fn mild_residual_polaron(trajectory: &PolaronTrajectory) -> Result<f64> {
    validate_s(trajectory.s)?;
    let states = &trajectory.states;
    let times: Vec<f64> = states.iter().map(|s| s.t).collect();
    let h = uniform_spacing(&times, 3)?;
    let eps = trajectory.eps;
    let s = trajectory.s;
    let grid = states[0].u.grid().clone();
    let k2 = grid.k_squared();
    let t0 = times[0];
    let first = &states[0];
    let u0_hat = first.u.spectrum();

    // u-part: e^{+i|k|²r} FT[-i u v](r); (v,w)-part: e^{-ε⁻¹Λr}(0, F/ε) with F = Δ⁻¹|u|²
    let integrand = |state: &PolaronState| -> (Vec<Complex64>, Vec<f64>, Vec<f64>) {
        let r = state.t - t0;
        let mut g: Vec<Complex64> =
            state.u.values().iter().zip(state.v.values()).map(|(z, p)| -Complex64::i() * z * p).collect();
        grid.forward(&mut g);
        for (z, &k) in g.iter_mut().zip(k2) {
            *z *= Complex64::from_polar(1.0, k * r);
        }
        let forcing = hartree_potential(&state.u);
        let (sn, cs) = (r / eps).sin_cos();
        let gv = forcing.values().iter().map(|f| -f / eps * sn).collect();
        let gw = forcing.values().iter().map(|f| f / eps * cs).collect();
        (g, gv, gw)
    };

    let n = grid.len();
    let mut int_u = vec![Complex64::new(0.0, 0.0); n];
    let mut int_v = vec![0.0; n];
    let mut int_w = vec![0.0; n];
    let mut previous = integrand(first);
    let mut residual_u = vec![Complex64::new(0.0, 0.0); n];
    let mut worst = 0.0f64;
    for state in &states[1..] {
        let current = integrand(state);
        for i in 0..n {
            int_u[i] += 0.5 * h * (previous.0[i] + current.0[i]);
            int_v[i] += 0.5 * h * (previous.1[i] + current.1[i]);
            int_w[i] += 0.5 * h * (previous.2[i] + current.2[i]);
        }
        let t = state.t - t0;
        let u_hat = state.u.spectrum();
        for i in 0..n {
            residual_u[i] = u_hat[i] - Complex64::from_polar(1.0, -k2[i] * t) * (u0_hat[i] + int_u[i]);
        }
        let mut pv: Vec<f64> = first.v.values().iter().zip(&int_v).map(|(a, b)| a + b).collect();
        let mut pw: Vec<f64> = first.w.values().iter().zip(&int_w).map(|(a, b)| a + b).collect();
        rotate_in_place(&mut pv, &mut pw, t / eps);
        let rv: Vec<f64> = state.v.values().iter().zip(&pv).map(|(a, b)| a - b).collect();
        let rw: Vec<f64> = state.w.values().iter().zip(&pw).map(|(a, b)| a - b).collect();
        let total = sobolev_from_spectrum(&grid, &residual_u, s)
            + norm_y(&ScalarField::from_values(&grid, rv)?, s - 2.0)?
            + norm_y(&ScalarField::from_values(&grid, rw)?, s - 2.0)?;
        worst = worst.max(total);
        previous = current;
    }
    Ok(worst)
}
