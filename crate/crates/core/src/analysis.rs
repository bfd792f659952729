//! Scaled errors between the coupled and limit solutions, ε-sweeps with
//! power-law fits, the resonance-gap diagnostic and empirical constants of
//! the product estimates.

use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::choquard::{choquard_integrate_with, ChoquardState, ChoquardTrajectory};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::fields::{norm_l1, norm_sobolev, norm_y, Grid, ScalarField, WaveField};
use crate::initdata::random_band_limited;
use crate::operators::{hartree_potential, hartree_potential_rate, inv_laplacian};
use crate::polaron::{polaron_integrate_with, PolaronSample, PolaronState, PolaronTrajectory};

/// Norms of `R_u = (u-U)/ε`, `R_v = (v-V)/ε` and `R_w = w/ε - V'` at one time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaledErrors {
    pub ru: f64,
    pub rv: f64,
    pub rw: f64,
}

/// Time series of scaled errors with their running suprema.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorSeries {
    pub eps: f64,
    pub s: f64,
    pub times: Vec<f64>,
    pub ru: Vec<f64>,
    pub rv: Vec<f64>,
    pub rw: Vec<f64>,
    /// `S_u(t) = sup_{r≤t} ‖R_u(r)‖_{X_s}`
    pub sup_u: Vec<f64>,
    /// `S_{(v,w)}(t) = sup_{r≤t} (‖R_v(r)‖ + ‖R_w(r)‖)`
    pub sup_vw: Vec<f64>,
    /// `S_ε = S_u + S_{(v,w)}`
    pub sup_total: Vec<f64>,
}

impl ErrorSeries {
    pub fn new(eps: f64, s: f64) -> Self {
        ErrorSeries { eps, s, ..Default::default() }
    }

    pub fn push(&mut self, t: f64, e: ScaledErrors) {
        let prev_u = self.sup_u.last().copied().unwrap_or(0.0);
        let prev_vw = self.sup_vw.last().copied().unwrap_or(0.0);
        let su = prev_u.max(e.ru);
        let svw = prev_vw.max(e.rv + e.rw);
        self.times.push(t);
        self.ru.push(e.ru);
        self.rv.push(e.rv);
        self.rw.push(e.rw);
        self.sup_u.push(su);
        self.sup_vw.push(svw);
        self.sup_total.push(su + svw);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `‖u-U‖_{X_s} + ‖v-V‖_{Y} + ε‖v'-V'‖_{Y}` at sample `i`.
    pub fn composite(&self, i: usize) -> f64 {
        self.eps * (self.ru[i] + self.rv[i] + self.rw[i])
    }

    pub fn sup_composite(&self) -> f64 {
        (0..self.len()).map(|i| self.composite(i)).fold(0.0, f64::max)
    }

    pub fn final_composite(&self) -> f64 {
        self.len().checked_sub(1).map_or(0.0, |i| self.composite(i))
    }

    pub fn sup_s(&self) -> f64 {
        self.sup_total.last().copied().unwrap_or(0.0)
    }
}

/// Limit solution sampled on a uniform time grid, with its potential and
/// potential rate precomputed for reuse across many `ε`.
#[derive(Clone, Debug)]
pub struct LimitReference {
    pub dt: f64,
    pub stride: usize,
    pub times: Vec<f64>,
    pub u: Vec<WaveField>,
    pub potential: Vec<ScalarField>,
    pub rate: Vec<ScalarField>,
}

impl LimitReference {
    pub fn from_states(dt: f64, stride: usize, states: &[ChoquardState]) -> Self {
        let u: Vec<WaveField> = states.iter().map(|s| s.u.clone()).collect();
        LimitReference {
            dt,
            stride,
            times: states.iter().map(|s| s.t).collect(),
            potential: u.par_iter().map(hartree_potential).collect(),
            rate: u.par_iter().map(hartree_potential_rate).collect(),
            u,
        }
    }

    pub fn from_trajectory(trajectory: &ChoquardTrajectory) -> Self {
        Self::from_states(trajectory.dt, trajectory.stride, &trajectory.states)
    }

    /// Integrates the limit equation at the finest step of the sweep.
    pub fn compute(config: &ExperimentConfig, big_u0: &WaveField) -> Result<Self> {
        let (stride, dt) = config.reference_steps();
        let mut states = Vec::new();
        choquard_integrate_with(big_u0, config.t_final, dt, stride, &config.solver_options(), |state| {
            states.push(state.clone());
            Ok(())
        })?;
        Ok(Self::from_states(dt, stride, &states))
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.u[0].grid()
    }

    /// Index of the sample at time `t`.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let h = self.dt * self.stride as f64;
        let i = (t / h).round() as usize;
        match self.times.get(i) {
            Some(&ti) if (ti - t).abs() <= 1e-9 * h.max(t) => Ok(i),
            _ => Err(Error::SamplingMismatch(format!("no reference sample at t = {t}"))),
        }
    }
}

fn scaled_difference(p: &PolaronState, big_u: &WaveField, big_v: &ScalarField, eps: f64) -> Result<(WaveField, ScalarField)> {
    let ru = (&p.u - big_u).scale(Complex64::new(1.0 / eps, 0.0));
    let rv = (&p.v - big_v).scale(1.0 / eps);
    Ok((ru, rv))
}

fn check_grids(p: &PolaronState, big_u: &WaveField) -> Result<()> {
    if p.u.grid() != big_u.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// Scaled error norms of a coupled state against the limit state
/// `(U, V, V')` at the same time.
pub fn scaled_errors_at(
    p: &PolaronState,
    big_u: &WaveField,
    big_v: &ScalarField,
    rate: &ScalarField,
    eps: f64,
    s: f64,
) -> Result<ScaledErrors> {
    check_grids(p, big_u)?;
    let (ru, rv) = scaled_difference(p, big_u, big_v, eps)?;
    let rw = &p.w.scale(1.0 / eps) - rate;
    Ok(ScaledErrors { ru: norm_sobolev(&ru, s)?, rv: norm_y(&rv, s - 2.0)?, rw: norm_y(&rw, s - 2.0)? })
}

/// Error series of two trajectories sampled at the same times.
pub fn scaled_errors(
    polaron: &PolaronTrajectory,
    choquard: &ChoquardTrajectory,
    eps: f64,
    s: f64,
) -> Result<ErrorSeries> {
    if polaron.states.len() != choquard.states.len() {
        return Err(Error::SamplingMismatch(format!(
            "{} coupled samples vs {} limit samples",
            polaron.states.len(),
            choquard.states.len()
        )));
    }
    let mut series = ErrorSeries::new(eps, s);
    for (p, c) in polaron.states.iter().zip(&choquard.states) {
        if (p.t - c.t).abs() > 1e-9 * p.t.abs().max(1.0) {
            return Err(Error::SamplingMismatch(format!("sample times {} and {} differ", p.t, c.t)));
        }
        let big_v = hartree_potential(&c.u);
        let rate = hartree_potential_rate(&c.u);
        series.push(p.t, scaled_errors_at(p, &c.u, &big_v, &rate, eps, s)?);
    }
    Ok(series)
}

/// `(‖f_u‖_{X_s}, ‖f_v‖_{Y_{s-2}})` with
/// `f_u = R_u V + U R_v + ε R_u R_v` and `f_v = Δ⁻¹(R_u Ū + conj(R_u) U + ε|R_u|²)`.
pub fn error_forcings(p: &PolaronState, c: &ChoquardState, eps: f64, s: f64) -> Result<(f64, f64)> {
    let big_v = hartree_potential(&c.u);
    let f = Forcings::evaluate(p, &c.u, &big_v, eps, s)?;
    Ok((f.f_u, f.f_v))
}

struct Forcings {
    f_u: f64,
    f_v: f64,
    ru: f64,
    rv: f64,
}

impl Forcings {
    fn evaluate(p: &PolaronState, big_u: &WaveField, big_v: &ScalarField, eps: f64, s: f64) -> Result<Self> {
        check_grids(p, big_u)?;
        let (ru, rv) = scaled_difference(p, big_u, big_v, eps)?;
        let fu: Vec<Complex64> = ru
            .values()
            .iter()
            .zip(rv.values())
            .zip(big_u.values().iter().zip(big_v.values()))
            .map(|((&r, &q), (&uu, &vv))| r * vv + uu * q + eps * r * q)
            .collect();
        let fu = WaveField::from_values(big_u.grid(), fu)?;
        let source: Vec<f64> = ru
            .values()
            .iter()
            .zip(big_u.values())
            .map(|(r, uu)| 2.0 * (r * uu.conj()).re + eps * r.norm_sqr())
            .collect();
        let fv = inv_laplacian(&ScalarField::from_values(big_u.grid(), source)?);
        Ok(Forcings {
            f_u: norm_sobolev(&fu, s)?,
            f_v: norm_y(&fv, s - 2.0)?,
            ru: norm_sobolev(&ru, s)?,
            rv: norm_y(&rv, s - 2.0)?,
        })
    }
}

/// Largest observed ratios of the forcings to the right-hand sides of their
/// product bounds:
/// `‖f_u‖ / (‖R_u‖‖V‖ + ‖U‖‖R_v‖ + ε‖R_u‖‖R_v‖)` and
/// `‖f_v‖ / (‖R_u‖(2‖U‖ + ε‖R_u‖))`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ForcingConstants {
    pub c_u: f64,
    pub c_v: f64,
    pub samples: usize,
}

impl ForcingConstants {
    pub fn observe(&mut self, p: &PolaronState, big_u: &WaveField, big_v: &ScalarField, eps: f64, s: f64) -> Result<()> {
        let f = Forcings::evaluate(p, big_u, big_v, eps, s)?;
        let nu = norm_sobolev(big_u, s)?;
        let nv = norm_y(big_v, s - 2.0)?;
        let den_u = f.ru * nv + nu * f.rv + eps * f.ru * f.rv;
        let den_v = f.ru * (2.0 * nu + eps * f.ru);
        // Skip samples where the bound degenerates (e.g. t = 0 with exact data).
        let floor = 1e-12 * (nu * nv).max(1.0);
        if den_u > floor && den_v > floor {
            self.c_u = self.c_u.max(f.f_u / den_u);
            self.c_v = self.c_v.max(f.f_v / den_v);
            self.samples += 1;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub eps: f64,
    /// `sup_t` of the unscaled composite error.
    pub sup_composite: f64,
    /// Composite error at the last sample reached.
    pub final_composite: f64,
    /// `sup_t S_ε(t)`
    pub sup_s: f64,
    pub seconds: f64,
    pub dt: f64,
    pub completed: bool,
    pub blowup_time: Option<f64>,
    pub forcing: ForcingConstants,
    /// Initial deficits `(‖u₀-U₀‖, ‖v₀-V₀‖, ‖v₀'-V₀'‖)`.
    pub deficits: [f64; 3],
}

/// Everything measured along one coupled run.
#[derive(Clone, Debug)]
pub struct Comparison {
    pub series: ErrorSeries,
    pub samples: Vec<PolaronSample>,
    pub record: SweepRecord,
}

/// Runs the coupled system at `eps` and measures it against `reference`.
/// A blowup ends the run early and is reported through `record.completed`.
pub fn run_comparison(
    config: &ExperimentConfig,
    big_u0: &WaveField,
    reference: &LimitReference,
    eps: f64,
) -> Result<Comparison> {
    let started = Instant::now();
    let prepared = config.prepared(big_u0, eps)?;
    let (stride, dt) = config.polaron_steps(eps);
    let s = config.s;
    let mut series = ErrorSeries::new(eps, s);
    let mut samples = Vec::new();
    let mut forcing = ForcingConstants::default();
    let outcome = polaron_integrate_with(&prepared.to_state(), config.t_final, dt, stride, &config.solver_options(), |state| {
        let i = reference.index_of(state.t)?;
        let (big_u, big_v, rate) = (&reference.u[i], &reference.potential[i], &reference.rate[i]);
        series.push(state.t, scaled_errors_at(state, big_u, big_v, rate, eps, s)?);
        forcing.observe(state, big_u, big_v, eps, s)?;
        samples.push(PolaronSample::of(state, s)?);
        Ok(())
    });
    let blowup_time = match outcome {
        Ok(()) => None,
        Err(Error::Blowup { t, reason, .. }) => {
            log::warn!("eps = {eps}: blowup at t = {t}: {reason}");
            Some(t)
        }
        Err(e) => return Err(e),
    };
    let record = SweepRecord {
        eps,
        sup_composite: series.sup_composite(),
        final_composite: series.final_composite(),
        sup_s: series.sup_s(),
        seconds: started.elapsed().as_secs_f64(),
        dt,
        completed: blowup_time.is_none(),
        blowup_time,
        forcing,
        deficits: [prepared.u_deficit, prepared.v_deficit, prepared.rate_deficit],
    };
    Ok(Comparison { series, samples, record })
}

/// One record per `ε`, computed in parallel against a single shared limit
/// trajectory. The output order follows `config.eps`.
pub fn sweep_epsilon(config: &ExperimentConfig) -> Result<Vec<SweepRecord>> {
    config.validate()?;
    let grid = config.build_grid()?;
    let big_u0 = config.limit_datum(&grid)?;
    let reference = LimitReference::compute(config, &big_u0)?;
    sweep_with_reference(config, &big_u0, &reference)
}

pub fn sweep_with_reference(
    config: &ExperimentConfig,
    big_u0: &WaveField,
    reference: &LimitReference,
) -> Result<Vec<SweepRecord>> {
    config
        .eps
        .par_iter()
        .map(|&eps| run_comparison(config, big_u0, reference, eps).map(|c| c.record))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit in natural-log units.
    pub residual: f64,
    /// `(ε, error)` pairs used in the fit.
    pub points: Vec<(f64, f64)>,
    /// `ε` values left out because their run did not complete.
    pub excluded: Vec<f64>,
}

impl SlopeFit {
    pub fn within(&self, window: [f64; 2], max_residual: f64) -> bool {
        (window[0]..=window[1]).contains(&self.slope) && self.residual <= max_residual
    }
}

/// Least-squares fit of `log(error) = p·log(ε) + c`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!("a slope fit needs at least 3 points, got {}", points.len())));
    }
    if let Some(&(e, y)) = points.iter().find(|&&(e, y)| !(e > 0.0 && y > 0.0 && e.is_finite() && y.is_finite())) {
        return Err(Error::invalid(format!("cannot fit nonpositive point ({e}, {y})")));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("all ε values coincide"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs.iter().zip(&ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum::<f64>() / n).sqrt();
    Ok(SlopeFit { slope, intercept, residual, points: points.to_vec(), excluded: Vec::new() })
}

/// Fits the sup composite error of completed records against `ε`.
pub fn fit_slope(records: &[SweepRecord]) -> Result<SlopeFit> {
    fit_records(records, |r| r.sup_composite)
}

/// Like [`fit_slope`] for an arbitrary per-record quantity.
pub fn fit_records(records: &[SweepRecord], value: impl Fn(&SweepRecord) -> f64) -> Result<SlopeFit> {
    let mut excluded = Vec::new();
    let mut points = Vec::new();
    for r in records {
        if r.completed {
            points.push((r.eps, value(r)));
        } else {
            log::warn!("excluding eps = {} from the slope fit: run did not complete", r.eps);
            excluded.push(r.eps);
        }
    }
    let mut fit = fit_power_law(&points)?;
    fit.excluded = excluded;
    Ok(fit)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceGap {
    pub gap: f64,
    /// Integer lattice coordinates; the wavevectors are `spacing · k`.
    pub k: [i64; 3],
    pub l: [i64; 3],
    /// `+1` or `-1`: the sign in front of `ε⁻¹`.
    pub sign: i8,
}

/// `min |±ε⁻¹ + |k-l|² - |l|²|` over lattice vectors `k, l ∈ spacing·ℤ³`
/// with `|k|, |l| ≤ bound`.
pub fn resonance_gap(eps: f64, bound: f64, spacing: f64) -> Result<ResonanceGap> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::invalid(format!("eps must be positive (got {eps})")));
    }
    if !(bound >= 1.0 && bound.is_finite()) {
        return Err(Error::invalid(format!("lattice bound must be at least 1 (got {bound})")));
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::invalid(format!("lattice spacing must be positive (got {spacing})")));
    }
    let r = (bound / spacing + 1e-9).floor() as i64;
    let limit = (bound / spacing).powi(2) * (1.0 + 1e-12);
    let mut ball = Vec::new();
    for a in -r..=r {
        for b in -r..=r {
            for c in -r..=r {
                let m2 = (a * a + b * b + c * c) as f64;
                if m2 <= limit {
                    ball.push(([a, b, c], m2));
                }
            }
        }
    }
    let h2 = spacing * spacing;
    let inv = 1.0 / eps;
    let mut best = ResonanceGap { gap: f64::INFINITY, k: [0; 3], l: [0; 3], sign: 1 };
    for &(k, _) in &ball {
        for &(l, l2) in &ball {
            let d = [k[0] - l[0], k[1] - l[1], k[2] - l[2]];
            let d2 = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) as f64;
            let q = h2 * (d2 - l2);
            for sign in [1i8, -1] {
                let g = (f64::from(sign) * inv + q).abs();
                if g < best.gap {
                    best = ResonanceGap { gap: g, k, l, sign };
                }
            }
        }
    }
    Ok(best)
}

/// Largest observed ratios for the three product bounds:
/// `‖uv‖_{X_s∩L¹} / (‖u‖_{X_s}‖v‖_{X_s})`,
/// `‖uv‖_{X_{s-2}∩L¹} / (‖u‖_{X_{s-2}}‖v‖_{X_s})` and
/// `‖u Δ⁻¹w‖_{X_s} / (‖u‖_{X_s}(‖w‖_{X_{s-2}} + ‖w‖_{L¹}))`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProductConstants {
    pub algebra: f64,
    pub mixed: f64,
    pub hartree: f64,
    pub evaluated: usize,
    pub skipped: usize,
}

/// Pair ratios for one `(u, v)`; `v` doubles as `w` in the Hartree bound.
/// `None` when a denominator vanishes.
pub fn product_ratios(u: &WaveField, v: &WaveField, s: f64) -> Result<Option<[f64; 3]>> {
    if u.grid() != v.grid() {
        return Err(Error::GridMismatch);
    }
    let uv = u.mul_field(v)?;
    let (us, ul) = (norm_sobolev(u, s)?, norm_sobolev(u, s - 2.0)?);
    let (vs, vl) = (norm_sobolev(v, s)?, norm_sobolev(v, s - 2.0)?);
    let wl = vl + norm_l1(v);
    if us == 0.0 || ul == 0.0 || vs == 0.0 || wl == 0.0 {
        return Ok(None);
    }
    let l1 = norm_l1(&uv);
    let algebra = (norm_sobolev(&uv, s)? + l1) / (us * vs);
    let mixed = (norm_sobolev(&uv, s - 2.0)? + l1) / (ul * vs);
    let hartree = norm_sobolev(&u.mul_field(&inv_laplacian(v))?, s)? / (us * wl);
    Ok(Some([algebra, mixed, hartree]))
}

pub fn product_constant_probe(pairs: &[(WaveField, WaveField)], s: f64) -> Result<ProductConstants> {
    if pairs.is_empty() {
        return Err(Error::InsufficientData("no sample pairs".into()));
    }
    if !(s >= 2.0 && s.is_finite()) {
        return Err(Error::invalid(format!("the probe needs s ≥ 2 (got {s})")));
    }
    let mut out = ProductConstants::default();
    for (u, v) in pairs {
        match product_ratios(u, v, s)? {
            Some(r) => {
                if r.iter().any(|x| !x.is_finite()) {
                    return Err(Error::invalid("non-finite product ratio"));
                }
                out.algebra = out.algebra.max(r[0]);
                out.mixed = out.mixed.max(r[1]);
                out.hartree = out.hartree.max(r[2]);
                out.evaluated += 1;
            }
            None => out.skipped += 1,
        }
    }
    Ok(out)
}

/// Seeded random pairs with integer wavenumbers up to `band` per axis.
pub fn random_probe_pairs(grid: &Arc<Grid>, count: usize, band: i64, seed: u64) -> Vec<(WaveField, WaveField)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (random_band_limited(grid, band, &mut rng), random_band_limited(grid, band, &mut rng)))
        .collect()
}
