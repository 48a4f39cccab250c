//! Forward/inverse transforms between collocation values and Fourier-Chebyshev
//! coefficients, with reusable scratch storage.
//!
//! x1 uses a real FFT (half-spectrum), x2 a DCT-I. The x2 grid ascends from the
//! bottom wall while the standard CGL ordering descends, so columns are index-
//! reversed around the DCT. All plans live in [`Grid`]; a [`Workspace`] only
//! holds buffers and may be reused across calls on the same grid.

use std::sync::Arc;

use num_complex::Complex64;

use super::field::{PhysicalField, SpectralField};
use super::grid::Grid;

/// Scratch buffers for transforms on one grid.
///
/// Not thread-safe; give each worker its own.
pub struct Workspace {
    grid: Arc<Grid>,
    rows_f: Vec<f64>,        // (nx2, nx1) physical rows
    rows_c: Vec<Complex64>,  // (nx2, nk) half-spectrum rows
    semi: Vec<Complex64>,    // (nk, nx2) Fourier-spectral, x2 physical
    col_re: Vec<f64>,
    col_im: Vec<f64>,
    fft_scratch: Vec<Complex64>,
    dct_scratch: Vec<f64>,
}

impl Workspace {
    pub fn new(grid: &Arc<Grid>) -> Self {
        let nk = grid.nk();
        let scratch_len = grid
            .r2c
            .get_scratch_len()
            .max(grid.c2r.get_scratch_len());
        Workspace {
            grid: grid.clone(),
            rows_f: vec![0.0; grid.nx2 * grid.nx1],
            rows_c: vec![Complex64::default(); grid.nx2 * nk],
            semi: vec![Complex64::default(); nk * grid.nx2],
            col_re: vec![0.0; grid.nx2],
            col_im: vec![0.0; grid.nx2],
            fft_scratch: vec![Complex64::default(); scratch_len],
            dct_scratch: vec![0.0; grid.dct1.get_scratch_len()],
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Physical -> spectral. Coefficient rows with Fourier index above `kmax`
    /// are zeroed (pass `grid.nk() - 1` for the full spectrum).
    pub fn forward_into(&mut self, phys: &PhysicalField, out: &mut SpectralField, kmax: usize) {
        let g = self.grid.clone();
        debug_assert!(g.same_as(phys.grid()) && g.same_as(out.grid()));
        let (nx1, nx2, nk) = (g.nx1, g.nx2, g.nk());
        let n = nx2 - 1;
        let kmax = kmax.min(nk - 1);

        transpose_f64(phys.as_slice(), nx1, nx2, &mut self.rows_f);
        for i in 0..nx2 {
            g.r2c
                .process_with_scratch(
                    &mut self.rows_f[i * nx1..(i + 1) * nx1],
                    &mut self.rows_c[i * nk..(i + 1) * nk],
                    &mut self.fft_scratch,
                )
                .expect("r2c length mismatch");
        }
        let coeffs = out.as_slice_mut();
        transpose_c64(&self.rows_c, nx2, nk, coeffs);

        // Per retained Fourier mode: index-reverse, DCT-I on real and imaginary
        // parts, apply the combined forward scaling.
        let scale = 2.0 / (n as f64 * nx1 as f64);
        for k in 0..=kmax {
            let row = &mut coeffs[k * nx2..(k + 1) * nx2];
            for j in 0..nx2 {
                let v = row[n - j];
                self.col_re[j] = v.re;
                self.col_im[j] = v.im;
            }
            g.dct1
                .process_dct1_with_scratch(&mut self.col_re, &mut self.dct_scratch);
            g.dct1
                .process_dct1_with_scratch(&mut self.col_im, &mut self.dct_scratch);
            for (r, (&re, &im)) in row
                .iter_mut()
                .zip(self.col_re.iter().zip(self.col_im.iter()))
            {
                *r = Complex64::new(re * scale, im * scale);
            }
        }
        coeffs[(kmax + 1) * nx2..].fill(Complex64::default());
    }

    /// Spectral -> physical. Fourier rows above `kmax` are treated as zero.
    /// The imaginary parts of the k = 0 and Nyquist bins are dropped, which
    /// projects the result onto real fields.
    pub fn inverse_into(&mut self, spec: &SpectralField, out: &mut PhysicalField, kmax: usize) {
        let g = self.grid.clone();
        debug_assert!(g.same_as(spec.grid()) && g.same_as(out.grid()));
        let (nx1, nx2, nk) = (g.nx1, g.nx2, g.nk());
        let n = nx2 - 1;
        let kmax = kmax.min(nk - 1);

        let coeffs = spec.as_slice();
        for k in 0..=kmax {
            let row = &coeffs[k * nx2..(k + 1) * nx2];
            for j in 0..nx2 {
                self.col_re[j] = row[j].re;
                self.col_im[j] = row[j].im;
            }
            g.dct1
                .process_dct1_with_scratch(&mut self.col_re, &mut self.dct_scratch);
            g.dct1
                .process_dct1_with_scratch(&mut self.col_im, &mut self.dct_scratch);
            let srow = &mut self.semi[k * nx2..(k + 1) * nx2];
            for (i, s) in srow.iter_mut().enumerate() {
                *s = Complex64::new(self.col_re[n - i], self.col_im[n - i]);
            }
        }
        self.semi[(kmax + 1) * nx2..].fill(Complex64::default());

        transpose_c64(&self.semi, nk, nx2, &mut self.rows_c);
        for i in 0..nx2 {
            let row = &mut self.rows_c[i * nk..(i + 1) * nk];
            row[0].im = 0.0;
            row[nk - 1].im = 0.0;
            g.c2r
                .process_with_scratch(
                    row,
                    &mut self.rows_f[i * nx1..(i + 1) * nx1],
                    &mut self.fft_scratch,
                )
                .expect("c2r length mismatch");
        }
        transpose_f64(&self.rows_f, nx2, nx1, out.as_slice_mut());
    }
}

/// `dst(cols, rows) = transpose of src(rows, cols)`, blocked for locality.
pub(crate) fn transpose_f64(src: &[f64], rows: usize, cols: usize, dst: &mut [f64]) {
    debug_assert_eq!(src.len(), rows * cols);
    debug_assert_eq!(dst.len(), rows * cols);
    const B: usize = 32;
    for cb in (0..cols).step_by(B) {
        let ce = (cb + B).min(cols);
        for rb in (0..rows).step_by(B) {
            let re = (rb + B).min(rows);
            for c in cb..ce {
                for r in rb..re {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

pub(crate) fn transpose_c64(src: &[Complex64], rows: usize, cols: usize, dst: &mut [Complex64]) {
    debug_assert_eq!(src.len(), rows * cols);
    debug_assert_eq!(dst.len(), rows * cols);
    const B: usize = 32;
    for cb in (0..cols).step_by(B) {
        let ce = (cb + B).min(cols);
        for rb in (0..rows).step_by(B) {
            let re = (rb + B).min(rows);
            for c in cb..ce {
                for r in rb..re {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}
