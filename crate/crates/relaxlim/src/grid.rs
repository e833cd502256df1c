//! Periodic grid descriptor and the FFT plumbing shared by every spectral
//! operation.
//!
//! Wavenumber convention per axis of n points and length L:
//!
//! ```text
//! k = [0, 1, ..., n/2, -(n/2-1), ..., -1] * (2*pi / L)
//! ```
//!
//! Index n/2 is the Nyquist mode. Odd-order derivative weights zero it so
//! real fields stay real and the first derivative stays skew-adjoint; even
//! powers (the Laplacian) keep its full weight.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

pub const TWO_PI: f64 = 2.0 * PI;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Descriptor of a flat periodic torus in 1, 2 or 3 dimensions.
#[derive(Debug, Clone)]
pub struct SpectralGrid {
    shape: Vec<usize>,
    lengths: Vec<f64>,
}

impl PartialEq for SpectralGrid {
    fn eq(&self, other: &Self) -> bool {
        self.shape == other.shape && self.lengths == other.lengths
    }
}

impl SpectralGrid {
    /// Grid with explicit axis lengths.
    pub fn new(shape: &[usize], lengths: &[f64]) -> Result<Self> {
        if shape.is_empty() || shape.len() > 3 {
            return Err(Error::BadDimension(shape.len()));
        }
        if lengths.len() != shape.len() {
            return Err(Error::BadDimension(lengths.len()));
        }
        for (axis, &n) in shape.iter().enumerate() {
            if n < 8 || n % 2 != 0 {
                return Err(Error::BadGridSize { axis, n });
            }
        }
        for (axis, &len) in lengths.iter().enumerate() {
            if !(len > 0.0) || !len.is_finite() {
                return Err(Error::BadGridLength { axis, len });
            }
        }
        Ok(Self {
            shape: shape.to_vec(),
            lengths: lengths.to_vec(),
        })
    }

    /// Grid with the default length 2*pi on every axis.
    pub fn unit_torus(shape: &[usize]) -> Result<Self> {
        Self::new(shape, &vec![TWO_PI; shape.len()])
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    /// Total number of grid points.
    pub fn n_total(&self) -> usize {
        self.shape.iter().product()
    }

    /// Volume of one grid cell (uniform quadrature weight).
    pub fn cell_volume(&self) -> f64 {
        self.shape
            .iter()
            .zip(&self.lengths)
            .map(|(&n, &l)| l / n as f64)
            .product()
    }

    /// Physical coordinates of the flattened point index.
    pub fn coords(&self, mut idx: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for axis in (0..self.dim()).rev() {
            let n = self.shape[axis];
            let i = idx % n;
            idx /= n;
            out[axis] = self.lengths[axis] * i as f64 / n as f64;
        }
        out
    }

    /// Signed integer mode index on one axis for storage index `i`.
    /// The Nyquist mode n/2 is reported as +n/2.
    pub fn signed_mode(&self, axis: usize, i: usize) -> i64 {
        let n = self.shape[axis];
        if i <= n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    /// True wavenumber of storage index `i` on `axis`.
    pub fn wavenumber(&self, axis: usize, i: usize) -> f64 {
        TWO_PI / self.lengths[axis] * self.signed_mode(axis, i) as f64
    }

    /// Wavenumber used for odd-order derivatives: Nyquist weight is zero.
    pub fn deriv_wavenumber(&self, axis: usize, i: usize) -> f64 {
        let n = self.shape[axis];
        if i == n / 2 {
            0.0
        } else {
            self.wavenumber(axis, i)
        }
    }

    /// Largest representable |k| over all modes (Euclidean magnitude).
    pub fn max_wavenumber(&self) -> f64 {
        let mut s = 0.0;
        for axis in 0..self.dim() {
            let k = TWO_PI / self.lengths[axis] * (self.shape[axis] / 2) as f64;
            s += k * k;
        }
        s.sqrt()
    }

    /// |k|^2 per flattened mode with the true wavenumber table (Laplacian
    /// weight).
    pub fn ksq_table(&self) -> Vec<f64> {
        self.mode_table(|axis, i| {
            let k = self.wavenumber(axis, i);
            k * k
        })
    }

    /// |k|^2 per flattened mode with the odd-derivative table (Nyquist
    /// zeroed); this is the weight produced by iterated gradients.
    pub fn deriv_ksq_table(&self) -> Vec<f64> {
        self.mode_table(|axis, i| {
            let k = self.deriv_wavenumber(axis, i);
            k * k
        })
    }

    /// Per-mode sum of `f(axis, storage index)` over the axes.
    fn mode_table(&self, f: impl Fn(usize, usize) -> f64) -> Vec<f64> {
        let n_total = self.n_total();
        let mut out = vec![0.0; n_total];
        for (flat, v) in out.iter_mut().enumerate() {
            let mut rem = flat;
            let mut acc = 0.0;
            for axis in (0..self.dim()).rev() {
                let n = self.shape[axis];
                acc += f(axis, rem % n);
                rem /= n;
            }
            *v = acc;
        }
        out
    }

    /// Per-mode table of the derivative wavenumber along one axis.
    pub fn axis_deriv_table(&self, axis: usize) -> Vec<f64> {
        let n_total = self.n_total();
        let mut out = vec![0.0; n_total];
        let stride: usize = self.shape[axis + 1..].iter().product();
        let n = self.shape[axis];
        for (flat, v) in out.iter_mut().enumerate() {
            let i = (flat / stride) % n;
            *v = self.deriv_wavenumber(axis, i);
        }
        out
    }

    /// True or false per mode: survives the 2/3 dealiasing truncation.
    pub fn dealias_mask(&self) -> Vec<bool> {
        let n_total = self.n_total();
        let mut out = vec![true; n_total];
        for (flat, keep) in out.iter_mut().enumerate() {
            let mut rem = flat;
            for axis in (0..self.dim()).rev() {
                let n = self.shape[axis];
                let m = self.signed_mode(axis, rem % n).unsigned_abs() as usize;
                if m > n / 3 {
                    *keep = false;
                }
                rem /= n;
            }
        }
        out
    }
}

/// Forward FFT of one real component into an unnormalized complex spectrum.
pub fn fft_forward(grid: &SpectralGrid, comp: &[f64]) -> Vec<Complex64> {
    debug_assert_eq!(comp.len(), grid.n_total());
    let mut buf: Vec<Complex64> = comp.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft_nd(grid, &mut buf, false);
    buf
}

/// Inverse FFT back to real samples (imaginary residue discarded; every
/// multiplier used in this crate preserves conjugate symmetry).
pub fn fft_inverse(grid: &SpectralGrid, spec: &[Complex64]) -> Vec<f64> {
    debug_assert_eq!(spec.len(), grid.n_total());
    let mut buf = spec.to_vec();
    fft_nd(grid, &mut buf, true);
    let scale = 1.0 / grid.n_total() as f64;
    buf.iter().map(|z| z.re * scale).collect()
}

fn fft_nd(grid: &SpectralGrid, data: &mut [Complex64], inverse: bool) {
    PLANNER.with(|p| {
        let mut planner = p.borrow_mut();
        for axis in 0..grid.dim() {
            let n = grid.shape()[axis];
            let fft = if inverse {
                planner.plan_fft_inverse(n)
            } else {
                planner.plan_fft_forward(n)
            };
            let stride: usize = grid.shape()[axis + 1..].iter().product();
            let block = stride * n;
            let mut line = vec![Complex64::new(0.0, 0.0); n];
            for base in (0..data.len()).step_by(block) {
                for off in 0..stride {
                    for (j, item) in line.iter_mut().enumerate() {
                        *item = data[base + off + j * stride];
                    }
                    fft.process(&mut line);
                    for (j, item) in line.iter().enumerate() {
                        data[base + off + j * stride] = *item;
                    }
                }
            }
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(SpectralGrid::unit_torus(&[7]).is_err());
        assert!(SpectralGrid::unit_torus(&[6]).is_err());
        assert!(SpectralGrid::unit_torus(&[8]).is_ok());
        assert!(SpectralGrid::unit_torus(&[16, 16, 16, 16]).is_err());
        assert!(SpectralGrid::new(&[16], &[0.0]).is_err());
    }

    #[test]
    fn roundtrip_fft_2d() {
        let grid = SpectralGrid::unit_torus(&[8, 12]).unwrap();
        let vals: Vec<f64> = (0..grid.n_total()).map(|i| (i as f64 * 0.7).sin()).collect();
        let spec = fft_forward(&grid, &vals);
        let back = fft_inverse(&grid, &spec);
        for (a, b) in vals.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn wavenumber_tables() {
        let grid = SpectralGrid::unit_torus(&[8]).unwrap();
        let ks: Vec<i64> = (0..8).map(|i| grid.signed_mode(0, i)).collect();
        assert_eq!(ks, vec![0, 1, 2, 3, 4, -3, -2, -1]);
        assert_eq!(grid.deriv_wavenumber(0, 4), 0.0);
        assert_eq!(grid.wavenumber(0, 4), 4.0);
        // scaled by 2*pi/L
        let grid = SpectralGrid::new(&[8], &[PI]).unwrap();
        assert!((grid.wavenumber(0, 1) - 2.0).abs() < 1e-15);
    }
}
