//! Experiment configuration shared by the sweep driver and the command line.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::choquard::SolverOptions;
use crate::error::{Error, Result};
use crate::fields::{Grid, WaveField};
use crate::initdata::{
    gaussian_amplitude_for_mass, gaussian_wave, pekar_ground_state, prepared_polaron_data, PerturbationShapes,
    PreparedData, Preparation, W0Rule,
};
use crate::polaron::DtRule;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    /// Gaussian bump; `amplitude` wins over `mass` when both are given.
    Gaussian {
        sigma: f64,
        #[serde(default)]
        amplitude: Option<f64>,
        #[serde(default)]
        mass: Option<f64>,
        #[serde(default)]
        momentum: [f64; 3],
        #[serde(default)]
        center: [f64; 3],
    },
    GroundState {
        mass: f64,
        #[serde(default = "default_gs_tol")]
        tol: f64,
        #[serde(default = "default_gs_iters")]
        max_iters: usize,
    },
}

fn default_gs_tol() -> f64 {
    1e-5
}

fn default_gs_iters() -> usize {
    5000
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    None,
    Trigonometric,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreparationConfig {
    pub mode: Preparation,
    pub shapes: ShapeKind,
    /// Multiplies the unit `δu` shape.
    pub du_scale: f64,
    /// Multiplies the unit `δv` shape.
    pub dv_scale: f64,
    /// Multiplies the unit `δw` shape: the O(1) deficit of the initial rate.
    pub dw_scale: f64,
    pub w0: W0Rule,
}

impl Default for PreparationConfig {
    fn default() -> Self {
        PreparationConfig {
            mode: Preparation::Well,
            shapes: ShapeKind::None,
            du_scale: 1.0,
            dv_scale: 1.0,
            dw_scale: 0.0,
            w0: W0Rule::Rate,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    #[serde(default = "default_s")]
    pub s: f64,
    pub t_final: f64,
    /// Spacing of the stored samples; both solvers land on these times.
    pub sample_interval: f64,
    #[serde(default)]
    pub dt: DtRule,
    pub eps: Vec<f64>,
    pub initial: InitialData,
    #[serde(default)]
    pub preparation: PreparationConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_ceiling")]
    pub norm_ceiling: f64,
    #[serde(default)]
    pub dealias: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_window")]
    pub slope_window: [f64; 2],
    #[serde(default = "default_max_residual")]
    pub max_residual: f64,
}

fn default_s() -> f64 {
    2.0
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_ceiling() -> f64 {
    1e6
}

fn default_window() -> [f64; 2] {
    [0.85, 1.15]
}

fn default_max_residual() -> f64 {
    0.1
}

fn positive(name: &str, x: f64) -> Result<()> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::invalid(format!("{name} must be positive and finite (got {x})")));
    }
    Ok(())
}

/// Whether `a` is an integer multiple of `b` up to rounding.
pub(crate) fn is_multiple(a: f64, b: f64) -> bool {
    let r = a / b;
    r >= 1.0 - 1e-9 && (r - r.round()).abs() <= 1e-9 * r.max(1.0)
}

impl ExperimentConfig {
    /// Rate deficit `‖v₀' - V₀'‖` of [`ExperimentConfig::headline`].
    pub const HEADLINE_RATE_DEFICIT: f64 = 30.0;

    /// The headline Gaussian experiment: unit mass, `σ = 1`, `L = 16`,
    /// `n = 32`, `T₀ = 1`, `dt = ε/10`, well-prepared with `δu = δv = 0` and
    /// an O(1) deficit in the initial rate of the potential.
    pub fn headline() -> Self {
        ExperimentConfig {
            grid: GridConfig { n: 32, length: 16.0 },
            s: 2.0,
            t_final: 1.0,
            sample_interval: 0.02,
            dt: DtRule::default(),
            eps: vec![0.2, 0.1, 0.05, 0.025],
            initial: InitialData::Gaussian {
                sigma: 1.0,
                amplitude: None,
                mass: Some(1.0),
                momentum: [0.0; 3],
                center: [0.0; 3],
            },
            preparation: PreparationConfig {
                shapes: ShapeKind::Trigonometric,
                du_scale: 0.0,
                dv_scale: 0.0,
                dw_scale: Self::HEADLINE_RATE_DEFICIT,
                ..PreparationConfig::default()
            },
            output_dir: default_output_dir(),
            norm_ceiling: default_ceiling(),
            dealias: false,
            seed: 0,
            slope_window: default_window(),
            max_residual: default_max_residual(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.n < 8 || self.grid.n % 2 == 1 {
            return Err(Error::InvalidGrid(format!("grid.n must be even ≥ 8 (got {})", self.grid.n)));
        }
        positive("grid.length", self.grid.length)?;
        if !(self.s >= 2.0 && self.s.is_finite()) {
            return Err(Error::invalid(format!("s must be at least 2 (got {})", self.s)));
        }
        positive("t_final", self.t_final)?;
        positive("sample_interval", self.sample_interval)?;
        if !is_multiple(self.t_final, self.sample_interval) {
            return Err(Error::invalid("t_final must be a whole multiple of sample_interval"));
        }
        if !(self.dt.base > 0.0) || self.dt.base.is_nan() {
            return Err(Error::invalid(format!("dt.base must be positive (got {})", self.dt.base)));
        }
        positive("dt.eps_fraction", self.dt.eps_fraction)?;
        if self.eps.is_empty() {
            return Err(Error::invalid("eps list is empty"));
        }
        for &e in &self.eps {
            positive("eps", e)?;
        }
        if self.eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::invalid("eps list must be strictly decreasing (no duplicates)"));
        }
        match &self.initial {
            InitialData::Gaussian { sigma, amplitude, mass, .. } => {
                positive("initial.sigma", *sigma)?;
                match (amplitude, mass) {
                    (Some(a), _) if !a.is_finite() => return Err(Error::invalid("initial.amplitude must be finite")),
                    (None, Some(m)) => positive("initial.mass", *m)?,
                    (None, None) => return Err(Error::invalid("initial needs amplitude or mass")),
                    _ => {}
                }
            }
            InitialData::GroundState { mass, tol, max_iters } => {
                positive("initial.mass", *mass)?;
                positive("initial.tol", *tol)?;
                if *max_iters == 0 {
                    return Err(Error::invalid("initial.max_iters must be at least 1"));
                }
            }
        }
        let p = &self.preparation;
        for (name, x) in [("preparation.du_scale", p.du_scale), ("preparation.dv_scale", p.dv_scale), ("preparation.dw_scale", p.dw_scale)] {
            if !(x >= 0.0 && x.is_finite()) {
                return Err(Error::invalid(format!("{name} must be nonnegative (got {x})")));
            }
        }
        positive("norm_ceiling", self.norm_ceiling)?;
        if !(self.slope_window[0] < self.slope_window[1]) {
            return Err(Error::invalid("slope_window must be an increasing pair"));
        }
        positive("max_residual", self.max_residual)?;
        Ok(())
    }

    pub fn build_grid(&self) -> Result<Arc<Grid>> {
        Grid::new(self.grid.n, self.grid.length)
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions { s: self.s, dealias: self.dealias, norm_ceiling: self.norm_ceiling }
    }

    /// Sample stride and step for the coupled solver at `eps`.
    pub fn polaron_steps(&self, eps: f64) -> (usize, f64) {
        self.dt.fit(eps, self.sample_interval)
    }

    /// Sample stride and step of the shared limit reference: the finest step
    /// used by any `ε` in the list.
    pub fn reference_steps(&self) -> (usize, f64) {
        self.eps
            .iter()
            .map(|&e| self.polaron_steps(e))
            .max_by_key(|&(m, _)| m)
            .expect("validated eps list is nonempty")
    }

    /// The limit datum `U₀`.
    pub fn limit_datum(&self, grid: &Arc<Grid>) -> Result<WaveField> {
        match &self.initial {
            InitialData::Gaussian { sigma, amplitude, mass, momentum, center } => {
                let a = match (amplitude, mass) {
                    (Some(a), _) => *a,
                    (None, Some(m)) => gaussian_amplitude_for_mass(*sigma, *m),
                    (None, None) => return Err(Error::invalid("initial needs amplitude or mass")),
                };
                let u = gaussian_wave(grid, *sigma, *center, *momentum, a)?;
                match (amplitude, mass) {
                    (None, Some(m)) => crate::initdata::normalize_mass(&u, *m),
                    _ => Ok(u),
                }
            }
            InitialData::GroundState { mass, tol, max_iters } => Ok(pekar_ground_state(grid, *mass, *tol, *max_iters)?.u),
        }
    }

    /// Coupled initial data at `eps` around `big_u0`.
    pub fn prepared(&self, big_u0: &WaveField, eps: f64) -> Result<PreparedData> {
        let p = &self.preparation;
        let shapes = match p.shapes {
            ShapeKind::None => None,
            ShapeKind::Trigonometric => Some(PerturbationShapes::trigonometric(big_u0, self.s)?),
            ShapeKind::Random => Some(PerturbationShapes::random(big_u0, self.s, self.seed)?),
        };
        let scaled = shapes.map(|sh| sh.scaled(p.du_scale, p.dv_scale, p.dw_scale));
        let perturbations = scaled.as_ref().map(PerturbationShapes::perturbations).unwrap_or_default();
        prepared_polaron_data(big_u0, eps, p.mode, p.w0, perturbations, self.s)
    }
}
