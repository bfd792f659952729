//! Periodic-box discretization, spectral transforms and the norms used by the
//! error functionals.
//!
//! Two field kinds live on a [`Grid`]: [`WaveField`] (complex, the electron
//! wave function) and [`ScalarField`] (real, potentials). Both are value types
//! holding an `Arc<Grid>`.

mod grid;
pub(crate) mod norms;

use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use num_complex::Complex64;

pub use grid::Grid;
pub use norms::{norm_l1, norm_sobolev, norm_sup, norm_y, SpectralWeights};

use crate::error::{Error, Result};
use crate::operators::FourierMultiplier;

/// Relative tolerance for the imaginary residue accepted when a spectral
/// computation is expected to return a real field.
pub const REALNESS_TOL: f64 = 1e-12;

/// Common access for norms and transforms over both field kinds.
pub trait GridFunction {
    fn grid(&self) -> &Arc<Grid>;
    /// Normalized Fourier coefficients `f̂(k)` in FFT order.
    fn spectrum(&self) -> Vec<Complex64>;
    /// Pointwise modulus.
    fn magnitudes(&self) -> Box<dyn Iterator<Item = f64> + '_>;
}

#[derive(Clone, Debug)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct WaveField {
    grid: Arc<Grid>,
    values: Vec<Complex64>,
}

fn check_len(grid: &Grid, len: usize) -> Result<()> {
    if len != grid.len() {
        return Err(Error::invalid(format!(
            "expected {} values for an n = {} grid, got {len}",
            grid.len(),
            grid.n()
        )));
    }
    Ok(())
}

fn check_same_grid(a: &Grid, b: &Grid) -> Result<()> {
    if a != b {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

impl ScalarField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        ScalarField { grid: grid.clone(), values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: &Arc<Grid>, value: f64) -> Self {
        ScalarField { grid: grid.clone(), values: vec![value; grid.len()] }
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl FnMut([f64; 3]) -> f64) -> Self {
        ScalarField { grid: grid.clone(), values: grid.positions().map(f).collect() }
    }

    pub fn from_values(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        check_len(grid, values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite value at sample {i}")));
        }
        Ok(ScalarField { grid: grid.clone(), values })
    }

    /// Builds a field from spectral data, rejecting results whose imaginary
    /// part is not roundoff.
    pub(crate) fn from_complex(grid: &Arc<Grid>, data: Vec<Complex64>) -> Result<Self> {
        let scale = data.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let (worst, idx) = data
            .iter()
            .enumerate()
            .map(|(i, z)| (z.im.abs(), i))
            .fold((0.0, 0), |acc, x| if x.0 > acc.0 { x } else { acc });
        if worst > REALNESS_TOL * scale {
            return Err(Error::SymmetryViolation { index: idx });
        }
        Ok(Self::from_complex_unchecked(grid, &data))
    }

    pub(crate) fn from_complex_unchecked(grid: &Arc<Grid>, data: &[Complex64]) -> Self {
        ScalarField { grid: grid.clone(), values: data.iter().map(|z| z.re).collect() }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect()
    }

    pub fn to_wave(&self) -> WaveField {
        WaveField { grid: self.grid.clone(), values: self.to_complex() }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// `self + c·other`.
    pub fn add_scaled(&self, c: f64, other: &ScalarField) -> Result<Self> {
        check_same_grid(&self.grid, &other.grid)?;
        Ok(ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + c * b).collect(),
        })
    }

    /// Spectral Laplacian.
    pub fn laplacian(&self) -> ScalarField {
        let mut data = self.to_complex();
        self.grid.forward(&mut data);
        for (z, k2) in data.iter_mut().zip(self.grid.k_squared()) {
            *z *= -k2;
        }
        self.grid.inverse(&mut data);
        ScalarField::from_complex_unchecked(&self.grid, &data)
    }

    /// Inverse transform of `m · f̂`. Fails unless `m` is conjugate-symmetric,
    /// since only then is the result real.
    pub fn apply_fourier_multiplier(&self, m: &FourierMultiplier) -> Result<ScalarField> {
        check_same_grid(&self.grid, m.grid())?;
        if let Some(index) = m.symmetry_defect() {
            return Err(Error::SymmetryViolation { index });
        }
        let mut data = self.to_complex();
        self.grid.forward(&mut data);
        for (z, c) in data.iter_mut().zip(m.table()) {
            *z *= c;
        }
        self.grid.inverse(&mut data);
        ScalarField::from_complex(&self.grid, data)
    }

    /// Circular shift by whole grid cells along each axis.
    pub fn roll(&self, shift: [usize; 3]) -> Self {
        ScalarField { grid: self.grid.clone(), values: roll(&self.grid, &self.values, shift) }
    }
}

impl WaveField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        WaveField { grid: grid.clone(), values: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl FnMut([f64; 3]) -> Complex64) -> Self {
        WaveField { grid: grid.clone(), values: grid.positions().map(f).collect() }
    }

    pub fn from_values(grid: &Arc<Grid>, values: Vec<Complex64>) -> Result<Self> {
        check_len(grid, values.len())?;
        if let Some(i) = values.iter().position(|z| !z.is_finite()) {
            return Err(Error::invalid(format!("non-finite value at sample {i}")));
        }
        Ok(WaveField { grid: grid.clone(), values })
    }

    /// Field from normalized Fourier coefficients.
    pub fn from_spectrum(grid: &Arc<Grid>, mut coefficients: Vec<Complex64>) -> Result<Self> {
        check_len(grid, coefficients.len())?;
        grid.inverse(&mut coefficients);
        Ok(WaveField { grid: grid.clone(), values: coefficients })
    }

    pub(crate) fn from_values_unchecked(grid: &Arc<Grid>, values: Vec<Complex64>) -> Self {
        WaveField { grid: grid.clone(), values }
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.is_finite())
    }

    /// `∫|u|²` by the rectangle rule.
    pub fn mass(&self) -> f64 {
        self.grid.cell_volume() * self.values.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    /// `|u|²` as a real field.
    pub fn density(&self) -> ScalarField {
        ScalarField { grid: self.grid.clone(), values: self.values.iter().map(|z| z.norm_sqr()).collect() }
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    pub fn re(&self) -> ScalarField {
        ScalarField { grid: self.grid.clone(), values: self.values.iter().map(|z| z.re).collect() }
    }

    pub fn im(&self) -> ScalarField {
        ScalarField { grid: self.grid.clone(), values: self.values.iter().map(|z| z.im).collect() }
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        WaveField { grid: self.grid.clone(), values: self.values.iter().map(|&z| f(z)).collect() }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        self.map(|z| c * z)
    }

    /// `self + c·other`.
    pub fn add_scaled(&self, c: Complex64, other: &WaveField) -> Result<Self> {
        check_same_grid(&self.grid, &other.grid)?;
        Ok(WaveField {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + c * b).collect(),
        })
    }

    /// Pointwise product with a real field.
    pub fn mul_scalar_field(&self, v: &ScalarField) -> Result<Self> {
        check_same_grid(&self.grid, &v.grid)?;
        Ok(WaveField {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&v.values).map(|(a, b)| a * b).collect(),
        })
    }

    /// Pointwise product.
    pub fn mul_field(&self, other: &WaveField) -> Result<Self> {
        check_same_grid(&self.grid, &other.grid)?;
        Ok(WaveField {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(),
        })
    }

    /// Spectral Laplacian.
    pub fn laplacian(&self) -> WaveField {
        let mut data = self.values.clone();
        self.grid.forward(&mut data);
        for (z, k2) in data.iter_mut().zip(self.grid.k_squared()) {
            *z *= -k2;
        }
        self.grid.inverse(&mut data);
        WaveField { grid: self.grid.clone(), values: data }
    }

    /// Inverse transform of `m · f̂`.
    pub fn apply_fourier_multiplier(&self, m: &FourierMultiplier) -> Result<WaveField> {
        check_same_grid(&self.grid, m.grid())?;
        let mut data = self.values.clone();
        self.grid.forward(&mut data);
        for (z, c) in data.iter_mut().zip(m.table()) {
            *z *= c;
        }
        self.grid.inverse(&mut data);
        Ok(WaveField { grid: self.grid.clone(), values: data })
    }

    /// Circular shift by whole grid cells along each axis.
    pub fn roll(&self, shift: [usize; 3]) -> Self {
        WaveField { grid: self.grid.clone(), values: roll(&self.grid, &self.values, shift) }
    }
}

fn roll<T: Copy>(grid: &Grid, values: &[T], shift: [usize; 3]) -> Vec<T> {
    let n = grid.n();
    let mut out = values.to_vec();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let dst = (((i + shift[0]) % n) * n + (j + shift[1]) % n) * n + (k + shift[2]) % n;
                out[dst] = values[(i * n + j) * n + k];
            }
        }
    }
    out
}

impl GridFunction for ScalarField {
    fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    fn spectrum(&self) -> Vec<Complex64> {
        let mut data = self.to_complex();
        self.grid.forward(&mut data);
        data
    }

    fn magnitudes(&self) -> Box<dyn Iterator<Item = f64> + '_> {
        Box::new(self.values.iter().map(|v| v.abs()))
    }
}

impl GridFunction for WaveField {
    fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    fn spectrum(&self) -> Vec<Complex64> {
        let mut data = self.values.clone();
        self.grid.forward(&mut data);
        data
    }

    fn magnitudes(&self) -> Box<dyn Iterator<Item = f64> + '_> {
        Box::new(self.values.iter().map(|z| z.norm()))
    }
}

// Arithmetic on fields panics on grid mismatch, like slice length mismatches.

impl Add for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: &ScalarField) -> ScalarField {
        self.add_scaled(1.0, rhs).expect("grid mismatch")
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: &ScalarField) -> ScalarField {
        self.add_scaled(-1.0, rhs).expect("grid mismatch")
    }
}

impl Mul<f64> for &ScalarField {
    type Output = ScalarField;
    fn mul(self, c: f64) -> ScalarField {
        self.scale(c)
    }
}

impl Add for &WaveField {
    type Output = WaveField;
    fn add(self, rhs: &WaveField) -> WaveField {
        self.add_scaled(Complex64::new(1.0, 0.0), rhs).expect("grid mismatch")
    }
}

impl Sub for &WaveField {
    type Output = WaveField;
    fn sub(self, rhs: &WaveField) -> WaveField {
        self.add_scaled(Complex64::new(-1.0, 0.0), rhs).expect("grid mismatch")
    }
}

impl Mul<f64> for &WaveField {
    type Output = WaveField;
    fn mul(self, c: f64) -> WaveField {
        self.scale(Complex64::new(c, 0.0))
    }
}
