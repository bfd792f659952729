use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Periodic cube `[-L/2, L/2)^3` sampled at `n` points per axis.
///
/// Samples are stored row-major: index `(i * n + j) * n + k` holds the value at
/// `(x_i, x_j, x_k)` with `x_j = -L/2 + j h`. The grid centre `x = 0` is the
/// sample `j = n/2` on every axis.
///
/// Transforms use the convention `f̂(k) = n⁻³ Σ_x f(x) e^{-ik·x}` so that plane
/// waves have unit coefficients independent of `n`; coefficients are stored in
/// FFT order (axis index `m` carries the integer wavenumber `m` for `m < n/2`
/// and `m - n` otherwise).
pub struct Grid {
    n: usize,
    length: f64,
    axis_k: Vec<f64>,
    k2: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Grid {
    pub fn new(n: usize, length: f64) -> Result<Arc<Self>> {
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!("n must be even ≥ 8 (got {n})")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidGrid(format!("box length must be positive (got {length})")));
        }
        let dk = 2.0 * PI / length;
        let axis_k: Vec<f64> = (0..n).map(|m| dk * signed_index(m, n) as f64).collect();
        let mut k2 = Vec::with_capacity(n * n * n);
        for a in &axis_k {
            for b in &axis_k {
                for c in &axis_k {
                    k2.push(a * a + b * b + c * c);
                }
            }
        }
        let mut planner = FftPlanner::new();
        Ok(Arc::new(Grid {
            n,
            length,
            axis_k,
            k2,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(3)
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(3)
    }

    /// Coordinate of sample `j` along any axis.
    pub fn coordinate(&self, j: usize) -> f64 {
        -0.5 * self.length + j as f64 * self.spacing()
    }

    /// Per-axis wavenumbers in FFT order.
    pub fn axis_wavenumbers(&self) -> &[f64] {
        &self.axis_k
    }

    /// Per-axis wavenumbers in increasing order, `(2π/L)·{-n/2, …, n/2-1}`.
    pub fn centered_wavenumbers(&self) -> Vec<f64> {
        let dk = 2.0 * PI / self.length;
        let half = (self.n / 2) as i64;
        (-half..half).map(|m| dk * m as f64).collect()
    }

    /// `|k|²` for every mode, FFT order, row-major.
    pub fn k_squared(&self) -> &[f64] {
        &self.k2
    }

    /// Integer wavenumber triple of a flat mode index.
    pub fn mode_indices(&self, flat: usize) -> [i64; 3] {
        let n = self.n;
        [
            signed_index(flat / (n * n), n),
            signed_index((flat / n) % n, n),
            signed_index(flat % n, n),
        ]
    }

    /// Physical wavevector of a flat mode index.
    pub fn wavevector(&self, flat: usize) -> [f64; 3] {
        let n = self.n;
        [self.axis_k[flat / (n * n)], self.axis_k[(flat / n) % n], self.axis_k[flat % n]]
    }

    /// Flat index of the mode `-k`.
    pub fn negated_mode(&self, flat: usize) -> usize {
        let n = self.n;
        let neg = |m: usize| (n - m) % n;
        (neg(flat / (n * n)) * n + neg((flat / n) % n)) * n + neg(flat % n)
    }

    /// Position of a flat sample index.
    pub fn position(&self, flat: usize) -> [f64; 3] {
        let n = self.n;
        [
            self.coordinate(flat / (n * n)),
            self.coordinate((flat / n) % n),
            self.coordinate(flat % n),
        ]
    }

    pub fn positions(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        (0..self.len()).map(move |i| self.position(i))
    }

    /// In-place forward transform, normalized by `n⁻³`.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, self.forward.as_ref());
        let scale = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|z| *z *= scale);
    }

    /// In-place inverse transform (plain sum over modes).
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, self.inverse.as_ref());
    }

    fn transform(&self, data: &mut [Complex64], fft: &dyn Fft<f64>) {
        let n = self.n;
        assert_eq!(data.len(), self.len(), "field length does not match grid");
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        let mut buf = vec![Complex64::new(0.0, 0.0); n * n];

        // last axis is contiguous
        fft.process_with_scratch(data, &mut scratch);

        // middle axis, one plane at a time
        for plane in data.chunks_exact_mut(n * n) {
            for j in 0..n {
                for k in 0..n {
                    buf[k * n + j] = plane[j * n + k];
                }
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            for j in 0..n {
                for k in 0..n {
                    plane[j * n + k] = buf[k * n + j];
                }
            }
        }

        // first axis, one j-slab at a time
        for j in 0..n {
            for i in 0..n {
                for k in 0..n {
                    buf[k * n + i] = data[(i * n + j) * n + k];
                }
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            for i in 0..n {
                for k in 0..n {
                    data[(i * n + j) * n + k] = buf[k * n + i];
                }
            }
        }
    }
}

fn signed_index(m: usize, n: usize) -> i64 {
    if m < n / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.length == other.length
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("n", &self.n).field("length", &self.length).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_is_centered_lattice() {
        let g = Grid::new(8, 2.0 * PI).unwrap();
        let k: Vec<i64> = g.centered_wavenumbers().iter().map(|k| k.round() as i64).collect();
        assert_eq!(k, vec![-4, -3, -2, -1, 0, 1, 2, 3]);
        let mut fft_order: Vec<f64> = g.axis_wavenumbers().to_vec();
        fft_order.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(fft_order, g.centered_wavenumbers());
    }

    #[test]
    fn spacing_and_volume() {
        let g = Grid::new(16, 16.0).unwrap();
        assert_eq!(g.spacing(), 1.0);
        assert_eq!(g.cell_volume(), 1.0);
        assert!((g.cell_volume() * g.len() as f64 - g.volume()).abs() < 1e-12);
        assert_eq!(g.coordinate(8), 0.0);
    }

    #[test]
    fn rejects_bad_sizes() {
        let err = Grid::new(7, 1.0).unwrap_err();
        assert!(err.to_string().contains("n must be even ≥ 8"));
        assert!(Grid::new(6, 1.0).is_err());
        assert!(Grid::new(8, 0.0).is_err());
        assert!(Grid::new(8, -1.0).is_err());
    }

    #[test]
    fn negated_mode_is_involution() {
        let g = Grid::new(8, 1.0).unwrap();
        for i in 0..g.len() {
            let j = g.negated_mode(i);
            assert_eq!(g.negated_mode(j), i);
            let (a, b) = (g.mode_indices(i), g.mode_indices(j));
            for d in 0..3 {
                assert!(a[d] == -b[d] || (a[d] == -4 && b[d] == -4));
            }
        }
    }

    #[test]
    fn plane_wave_has_unit_coefficient() {
        let g = Grid::new(8, 2.0 * PI).unwrap();
        let mut data: Vec<Complex64> =
            g.positions().map(|x| Complex64::from_polar(1.0, 2.0 * x[1] - x[2])).collect();
        g.forward(&mut data);
        for (i, c) in data.iter().enumerate() {
            let expected = if g.mode_indices(i) == [0, 2, -1] { 1.0 } else { 0.0 };
            assert!((c.norm() - expected).abs() < 1e-13, "mode {:?}", g.mode_indices(i));
        }
    }
}
