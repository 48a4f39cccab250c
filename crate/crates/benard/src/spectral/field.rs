//! Field containers in physical (collocation values) and spectral (coefficient) form.
//!
//! Conventions, fixed once for the whole crate:
//!
//! * Fourier (x1): real half-spectrum of `nk = nx1/2 + 1` complex coefficients
//!   `c_k`, scaled so that `c_0` is the x1-mean of the field. Synthesis is
//!   `f_j = c_0 + 2 sum_{0<k<nx1/2} Re(c_k e^{2 pi i k j / nx1}) + (-1)^j c_{nx1/2}`.
//! * Chebyshev (x2): coefficients `a_n` in the cosine-transform convention with
//!   halved first and last terms: `f = a_0/2 + sum_{0<n<N} a_n T_n + a_N/2 T_N`
//!   on `xi = 2 x2 - 1`.
//!
//! Layout: physical values are `(nx1, nx2)` with x2 contiguous; spectral
//! coefficients are `(nk, nx2)` with the Chebyshev index contiguous.

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;

use super::grid::Grid;

/// Values on the collocation grid.
#[derive(Clone, Debug)]
pub struct PhysicalField {
    /// `(nx1, nx2)` array of point values, x2 fastest.
    pub values: Array2<f64>,
    grid: Arc<Grid>,
}

/// Fourier x Chebyshev coefficients of one scalar field.
#[derive(Clone, Debug)]
pub struct SpectralField {
    /// `(nx1/2 + 1, nx2)` array of coefficients, Chebyshev degree fastest.
    pub coeffs: Array2<Complex64>,
    grid: Arc<Grid>,
}

impl PhysicalField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        PhysicalField {
            values: Array2::zeros((grid.nx1, grid.nx2)),
            grid: grid.clone(),
        }
    }

    /// Sample a function of `(x1, x2)` on the grid.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = Self::zeros(grid);
        for (j, &x1) in grid.x1.iter().enumerate() {
            for (i, &x2) in grid.x2.iter().enumerate() {
                out.values[[j, i]] = f(x1, x2);
            }
        }
        out
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Contiguous value slice.
    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice().expect("standard layout")
    }

    pub fn as_slice_mut(&mut self) -> &mut [f64] {
        self.values.as_slice_mut().expect("standard layout")
    }
}

impl SpectralField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        SpectralField {
            coeffs: Array2::zeros((grid.nk(), grid.nx2)),
            grid: grid.clone(),
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |m, v| m.max(v.norm()))
    }

    pub fn as_slice(&self) -> &[Complex64] {
        self.coeffs.as_slice().expect("standard layout")
    }

    pub fn as_slice_mut(&mut self) -> &mut [Complex64] {
        self.coeffs.as_slice_mut().expect("standard layout")
    }

    /// In-place `self += scale * other`.
    pub fn axpy(&mut self, scale: f64, other: &SpectralField) {
        debug_assert!(self.grid.same_as(&other.grid));
        for (a, b) in self.as_slice_mut().iter_mut().zip(other.as_slice()) {
            *a += scale * b;
        }
    }

    /// `out = a + scale * b`, reusing `out`'s storage.
    pub fn scaled_sum_into(&mut self, a: &SpectralField, scale: f64, b: &SpectralField) {
        let out = self.as_slice_mut();
        for ((o, &x), &y) in out.iter_mut().zip(a.as_slice()).zip(b.as_slice()) {
            *o = x + scale * y;
        }
    }
}
