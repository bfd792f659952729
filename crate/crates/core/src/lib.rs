//! Pseudo-spectral solver for the mean-field polaron system and its
//! weak-coupling (Choquard) limit on a periodic box.
//!
//! The coupled system
//!
//! ```text
//! u' = iΔu - iuv,    v' = w/ε,    w' = (-v + Δ⁻¹|u|²)/ε
//! ```
//!
//! is integrated with a Strang splitting whose stiff oscillator part is an
//! exact rotation; the limit `iU' = -ΔU + (Δ⁻¹|U|²)U` uses the matching
//! splitting without the oscillator. [`analysis`] measures how fast the
//! coupled solution approaches the limit as `ε → 0`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod choquard;
pub mod config;
pub mod error;
pub mod fields;
pub mod initdata;
pub mod operators;
pub mod polaron;

pub use analysis::{
    fit_slope, product_constant_probe, resonance_gap, scaled_errors, sweep_epsilon, ErrorSeries, LimitReference,
    SlopeFit, SweepRecord,
};
pub use choquard::{choquard_energy, choquard_integrate, choquard_step, ChoquardState, ChoquardTrajectory, SolverOptions};
pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use fields::{norm_l1, norm_sobolev, norm_sup, norm_y, Grid, GridFunction, ScalarField, WaveField};
pub use initdata::{gaussian_wave, normalize_mass, pekar_ground_state, prepared_polaron_data, PreparedData};
pub use operators::{free_flow, hartree_potential, hartree_potential_rate, inv_laplacian, FourierMultiplier};
pub use polaron::{polaron_energy, polaron_integrate, polaron_step, DtRule, PolaronState, PolaronTrajectory};
