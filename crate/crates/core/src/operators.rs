//! Exactly solvable building-block flows: the inverse Laplacian, the free
//! Schrödinger group, the oscillator rotation and potential phase kicks.

use std::sync::Arc;

use num_complex::Complex64;

use crate::fields::{Grid, GridFunction, ScalarField, WaveField};

const SYMMETRY_TOL: f64 = 1e-12;

/// Per-mode complex symbol on a grid, FFT order.
#[derive(Clone, Debug)]
pub struct FourierMultiplier {
    grid: Arc<Grid>,
    table: Vec<Complex64>,
    real_preserving: bool,
}

impl FourierMultiplier {
    pub fn new(grid: &Arc<Grid>, table: Vec<Complex64>) -> crate::Result<Self> {
        if table.len() != grid.len() {
            return Err(crate::Error::invalid(format!(
                "multiplier has {} entries, grid has {} modes",
                table.len(),
                grid.len()
            )));
        }
        Ok(Self::build(grid, table))
    }

    /// Builds the table from `f(flat_index, wavevector)`.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(usize, [f64; 3]) -> Complex64) -> Self {
        let table = (0..grid.len()).map(|i| f(i, grid.wavevector(i))).collect();
        Self::build(grid, table)
    }

    /// Radial real symbol `f(|k|²)`; always real-preserving.
    pub fn radial(grid: &Arc<Grid>, f: impl Fn(f64) -> f64) -> Self {
        let table = grid.k_squared().iter().map(|&k2| Complex64::new(f(k2), 0.0)).collect();
        FourierMultiplier { grid: grid.clone(), table, real_preserving: true }
    }

    /// `i k_axis`, with the unpaired Nyquist mode zeroed so the symbol stays
    /// real-preserving.
    pub fn derivative(grid: &Arc<Grid>, axis: usize) -> Self {
        assert!(axis < 3);
        let half = (grid.n() / 2) as i64;
        Self::from_fn(grid, |i, k| {
            if grid.mode_indices(i)[axis] == -half {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, k[axis])
            }
        })
    }

    /// Free Schrödinger propagator `e^{iΔt}`, i.e. `e^{-i|k|²t}` per mode.
    pub fn free_propagator(grid: &Arc<Grid>, t: f64) -> Self {
        let table = grid.k_squared().iter().map(|&k2| Complex64::from_polar(1.0, -k2 * t)).collect();
        // not real-preserving, and never applied to real fields
        Self::build(grid, table)
    }

    /// Two-thirds dealiasing mask: drops modes with `|m| > n/3` on any axis.
    pub fn two_thirds_filter(grid: &Arc<Grid>) -> Self {
        let cutoff = grid.n() as i64 / 3;
        let table = (0..grid.len())
            .map(|i| {
                let keep = grid.mode_indices(i).iter().all(|m| m.abs() <= cutoff);
                Complex64::new(if keep { 1.0 } else { 0.0 }, 0.0)
            })
            .collect();
        FourierMultiplier { grid: grid.clone(), table, real_preserving: true }
    }

    fn build(grid: &Arc<Grid>, table: Vec<Complex64>) -> Self {
        let mut m = FourierMultiplier { grid: grid.clone(), table, real_preserving: false };
        m.real_preserving = m.find_symmetry_defect().is_none();
        m
    }

    fn find_symmetry_defect(&self) -> Option<usize> {
        let scale = self.table.iter().map(|z| z.norm()).fold(0.0, f64::max);
        (0..self.table.len()).find(|&i| {
            let j = self.grid.negated_mode(i);
            (self.table[j] - self.table[i].conj()).norm() > SYMMETRY_TOL * scale
        })
    }

    /// Replaces the table by `(m(k) + conj(m(-k)))/2`.
    pub fn symmetrized(&self) -> Self {
        let table = (0..self.table.len())
            .map(|i| 0.5 * (self.table[i] + self.table[self.grid.negated_mode(i)].conj()))
            .collect();
        FourierMultiplier { grid: self.grid.clone(), table, real_preserving: true }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn table(&self) -> &[Complex64] {
        &self.table
    }

    pub fn table_mut(&mut self) -> &mut [Complex64] {
        self.real_preserving = false;
        &mut self.table
    }

    pub fn is_real_preserving(&self) -> bool {
        self.real_preserving
    }

    /// First mode violating `m(-k) = conj(m(k))`, if any.
    pub fn symmetry_defect(&self) -> Option<usize> {
        if self.real_preserving {
            None
        } else {
            self.find_symmetry_defect()
        }
    }

    /// Multiplies spectral data in place.
    pub fn apply_spectrum(&self, coefficients: &mut [Complex64]) {
        for (z, m) in coefficients.iter_mut().zip(&self.table) {
            *z *= m;
        }
    }
}

/// Fields that can be pushed through a real-preserving spectral multiplier.
pub trait SpectralField: GridFunction + Sized {
    fn map_spectrum(&self, f: impl Fn(usize, Complex64) -> Complex64) -> Self;
}

impl SpectralField for ScalarField {
    fn map_spectrum(&self, f: impl Fn(usize, Complex64) -> Complex64) -> Self {
        let mut data = self.spectrum();
        for (i, z) in data.iter_mut().enumerate() {
            *z = f(i, *z);
        }
        self.grid().inverse(&mut data);
        ScalarField::from_complex_unchecked(self.grid(), &data)
    }
}

impl SpectralField for WaveField {
    fn map_spectrum(&self, f: impl Fn(usize, Complex64) -> Complex64) -> Self {
        let mut data = self.spectrum();
        for (i, z) in data.iter_mut().enumerate() {
            *z = f(i, *z);
        }
        self.grid().inverse(&mut data);
        WaveField::from_values_unchecked(self.grid(), data)
    }
}

/// Spectral `Δ⁻¹`: mode `k ≠ 0` is multiplied by `-1/|k|²`, the zero mode of
/// the result is set to 0 (mean-zero gauge), so `Δ Δ⁻¹ w = w - mean(w)`.
pub fn inv_laplacian<F: SpectralField>(w: &F) -> F {
    let k2 = w.grid().k_squared().to_vec();
    w.map_spectrum(|i, z| if i == 0 { Complex64::new(0.0, 0.0) } else { -z / k2[i] })
}

pub(crate) fn inv_laplacian_in_place(grid: &Grid, coefficients: &mut [Complex64]) {
    coefficients[0] = Complex64::new(0.0, 0.0);
    for (z, &k2) in coefficients.iter_mut().zip(grid.k_squared()).skip(1) {
        *z /= -k2;
    }
}

/// `V = Δ⁻¹|u|²`, real and mean zero.
pub fn hartree_potential(u: &WaveField) -> ScalarField {
    hartree_from_density(u.grid(), u.values().iter().map(|z| z.norm_sqr()), None)
}

/// Hartree potential with an optional spectral filter applied to the source.
pub(crate) fn hartree_from_density(
    grid: &Arc<Grid>,
    density: impl Iterator<Item = f64>,
    filter: Option<&FourierMultiplier>,
) -> ScalarField {
    let mut data: Vec<Complex64> = density.map(|r| Complex64::new(r, 0.0)).collect();
    grid.forward(&mut data);
    if let Some(f) = filter {
        f.apply_spectrum(&mut data);
    }
    inv_laplacian_in_place(grid, &mut data);
    grid.inverse(&mut data);
    ScalarField::from_complex_unchecked(grid, &data)
}

/// Time derivative of the Hartree potential along the Choquard flow,
/// `V' = Δ⁻¹(∂_t|U|²) = Δ⁻¹(-2 Im(Ū ΔU))`.
pub fn hartree_potential_rate(u: &WaveField) -> ScalarField {
    let lap = u.laplacian();
    let source = u.values().iter().zip(lap.values()).map(|(a, b)| -2.0 * (a.conj() * b).im);
    hartree_from_density(u.grid(), source, None)
}

/// Free Schrödinger flow `e^{iΔt}u`: mode `k` picks up `e^{-i|k|²t}`.
pub fn free_flow(u: &WaveField, t: f64) -> WaveField {
    let k2 = u.grid().k_squared().to_vec();
    u.map_spectrum(|i, z| z * Complex64::from_polar(1.0, -k2[i] * t))
}

/// Oscillator flow `e^{Λθ}` applied pointwise:
/// `(v, w) ↦ (v cos θ + w sin θ, -v sin θ + w cos θ)`. Callers pass `θ = t/ε`.
pub fn lambda_rotate(v: &ScalarField, w: &ScalarField, theta: f64) -> (ScalarField, ScalarField) {
    let (mut v, mut w) = (v.clone(), w.clone());
    rotate_in_place(v.values_mut(), w.values_mut(), theta);
    (v, w)
}

pub(crate) fn rotate_in_place(v: &mut [f64], w: &mut [f64], theta: f64) {
    let (s, c) = theta.sin_cos();
    for (a, b) in v.iter_mut().zip(w.iter_mut()) {
        let (x, y) = (*a, *b);
        *a = x * c + y * s;
        *b = -x * s + y * c;
    }
}

/// Exact flow of `u' = -i v u` with frozen real `v`: `u e^{-i v τ}`.
pub fn phase_kick(u: &WaveField, v: &ScalarField, tau: f64) -> WaveField {
    let mut out = u.clone();
    kick_in_place(out.values_mut(), v.values(), tau);
    out
}

pub(crate) fn kick_in_place(u: &mut [Complex64], v: &[f64], tau: f64) {
    for (z, &p) in u.iter_mut().zip(v) {
        *z *= Complex64::from_polar(1.0, -p * tau);
    }
}
