//! Shared inputs for the benchmarks.

use std::sync::Arc;

use polaron_core::initdata::gaussian_amplitude_for_mass;
use polaron_core::{gaussian_wave, hartree_potential, Grid, PolaronState, ScalarField, WaveField};

/// Unit-mass Gaussian on an `n³` grid with `L = 16`.
pub fn gaussian(n: usize) -> (Arc<Grid>, WaveField) {
    let grid = Grid::new(n, 16.0).expect("bench grid");
    let u = gaussian_wave(&grid, 1.0, [0.0; 3], [0.5, 0.0, 0.0], gaussian_amplitude_for_mass(1.0, 1.0)).expect("bench datum");
    (grid, u)
}

pub fn coupled_state(n: usize, eps: f64) -> PolaronState {
    let (grid, u) = gaussian(n);
    let v = hartree_potential(&u);
    PolaronState::new(u, v, ScalarField::zeros(&grid), eps).expect("bench state")
}
