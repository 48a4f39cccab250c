//! Spectral-space operators: differentiation, dealiasing, mode projection,
//! quadrature inner product.

use num_complex::Complex64;

use super::field::{PhysicalField, SpectralField};
use super::transform::Workspace;
use crate::error::{Error, Result};

/// Discrete Fourier-Chebyshev transform of a physical field.
pub fn to_spectral(f: &PhysicalField) -> SpectralField {
    let grid = f.grid();
    let mut ws = Workspace::new(grid);
    let mut out = SpectralField::zeros(grid);
    ws.forward_into(f, &mut out, grid.nk() - 1);
    out
}

/// Inverse transform onto the collocation grid.
///
/// Errors if the coefficients cannot represent a real field: the k = 0 and
/// Nyquist columns must be real (the stored half-spectrum makes the remaining
/// conjugate symmetry structural).
pub fn to_physical(c: &SpectralField) -> Result<PhysicalField> {
    let grid = c.grid();
    let nx2 = grid.nx2;
    let nk = grid.nk();
    let coeffs = c.as_slice();
    let mut max_im = 0.0f64;
    let mut max_mag = 0.0f64;
    for row in [0, nk - 1] {
        for v in &coeffs[row * nx2..(row + 1) * nx2] {
            max_im = max_im.max(v.im.abs());
        }
    }
    for v in coeffs {
        max_mag = max_mag.max(v.norm());
    }
    if max_im > 1e-10 * max_mag.max(1e-300) {
        return Err(Error::NotRealizable { max_im });
    }
    Ok(to_physical_unchecked(c))
}

/// Inverse transform that silently drops the (structurally meaningless)
/// imaginary parts of the k = 0 and Nyquist columns.
pub fn to_physical_unchecked(c: &SpectralField) -> PhysicalField {
    let grid = c.grid();
    let mut ws = Workspace::new(grid);
    let mut out = PhysicalField::zeros(grid);
    ws.inverse_into(c, &mut out, grid.nk() - 1);
    out
}

/// d/dx1: multiply mode k by `i 2 pi k / L`; the Nyquist derivative is zeroed.
pub fn ddx1(c: &SpectralField) -> SpectralField {
    let mut out = c.clone();
    ddx1_in_place(&mut out);
    out
}

fn ddx1_in_place(c: &mut SpectralField) {
    let grid = c.grid().clone();
    let nx2 = grid.nx2;
    let nk = grid.nk();
    let s = c.as_slice_mut();
    for k in 0..nk {
        let row = &mut s[k * nx2..(k + 1) * nx2];
        if k == nk - 1 {
            row.fill(Complex64::default());
        } else {
            let ik = Complex64::new(0.0, grid.kappa(k));
            for v in row.iter_mut() {
                *v *= ik;
            }
        }
    }
}

/// d/dx2: Chebyshev coefficient recurrence, including the factor 2 from the
/// `[0,1] -> [-1,1]` map.
pub fn ddx2(c: &SpectralField) -> SpectralField {
    let grid = c.grid();
    let mut out = SpectralField::zeros(grid);
    let nx2 = grid.nx2;
    for (rin, rout) in c
        .as_slice()
        .chunks_exact(nx2)
        .zip(out.as_slice_mut().chunks_exact_mut(nx2))
    {
        cheb_derivative_row(rin, rout, 2.0);
    }
    out
}

/// Derivative of one Chebyshev coefficient row (halved-ends storage convention),
/// scaled by `scale` (the x2 chain-rule factor).
///
/// Works on the plain-coefficient backward recurrence
/// `c_{m-1} b_{m-1} = b_{m+1} + 2 m a_m`, `b_N = 0`, `b_{N-1} = 2 N a_N`.
pub(crate) fn cheb_derivative_row(a: &[Complex64], out: &mut [Complex64], scale: f64) {
    let n = a.len() - 1;
    debug_assert_eq!(out.len(), n + 1);
    // Plain coefficients: ends are stored doubled.
    let plain = |m: usize| -> Complex64 {
        if m == 0 || m == n {
            0.5 * a[m]
        } else {
            a[m]
        }
    };
    out[n] = Complex64::default();
    out[n - 1] = 2.0 * n as f64 * plain(n);
    for m in (1..n).rev() {
        let b = out[m + 1] + 2.0 * m as f64 * plain(m);
        if m == 1 {
            // c_0 = 2, and storage doubles the first coefficient again.
            out[0] = b; // (b/2 plain) * 2 stored
        } else {
            out[m - 1] = b;
        }
    }
    // Stored convention doubles the last coefficient: b_N = 0 either way.
    for v in out.iter_mut() {
        *v *= scale;
    }
}

/// Second x2 derivative of one coefficient row (recurrence applied twice).
pub(crate) fn cheb_second_derivative_row(
    a: &[Complex64],
    tmp: &mut [Complex64],
    out: &mut [Complex64],
) {
    cheb_derivative_row(a, tmp, 2.0);
    cheb_derivative_row(tmp, out, 2.0);
}

/// Spectral Laplacian: `d^2/dx1^2 + d^2/dx2^2` on coefficients.
pub fn laplacian(c: &SpectralField) -> SpectralField {
    let grid = c.grid();
    let nx2 = grid.nx2;
    let nk = grid.nk();
    let mut out = SpectralField::zeros(grid);
    let mut tmp = vec![Complex64::default(); nx2];
    for k in 0..nk {
        let rin = &c.as_slice()[k * nx2..(k + 1) * nx2];
        let rout = &mut out.as_slice_mut()[k * nx2..(k + 1) * nx2];
        cheb_second_derivative_row(rin, &mut tmp, rout);
        if k < nk - 1 {
            let k2 = grid.kappa(k).powi(2);
            for (o, &i) in rout.iter_mut().zip(rin) {
                *o -= k2 * i;
            }
        } else {
            // Nyquist: consistent with ddx1 zeroing the Nyquist derivative.
            // Only the x2 part contributes.
        }
    }
    out
}

/// 2/3-rule dealiasing: zero Fourier rows with `k > nx1/3`. Chebyshev
/// direction is untouched.
pub fn dealias(c: &SpectralField) -> SpectralField {
    let mut out = c.clone();
    dealias_in_place(&mut out);
    out
}

fn dealias_in_place(c: &mut SpectralField) {
    let grid = c.grid().clone();
    let nx2 = grid.nx2;
    let kc = grid.k_cut();
    let s = c.as_slice_mut();
    if kc + 1 < grid.nk() {
        s[(kc + 1) * nx2..].fill(Complex64::default());
    }
}

/// Orthogonal projection onto Fourier wavenumbers `|k| <= nf` and Chebyshev
/// degrees `< nc`. This is the spectral interpolant I_h = P_h.
pub fn project_low_modes(c: &SpectralField, nf: usize, nc: usize) -> Result<SpectralField> {
    let grid = c.grid();
    validate_projection(grid.nx1, grid.nx2, nf, nc)?;
    let mut out = c.clone();
    project_low_modes_in_place(&mut out, nf, nc);
    Ok(out)
}

pub(crate) fn validate_projection(nx1: usize, nx2: usize, nf: usize, nc: usize) -> Result<()> {
    if nf < 1 || nf > nx1 / 2 {
        return Err(Error::InvalidModes(format!(
            "nf must satisfy 1 <= nf <= nx1/2 = {}, got {nf}",
            nx1 / 2
        )));
    }
    if nc < 1 || nc > nx2 {
        return Err(Error::InvalidModes(format!(
            "nc must satisfy 1 <= nc <= nx2 = {nx2}, got {nc}"
        )));
    }
    Ok(())
}

fn project_low_modes_in_place(c: &mut SpectralField, nf: usize, nc: usize) {
    let grid = c.grid().clone();
    let nx2 = grid.nx2;
    let nk = grid.nk();
    let s = c.as_slice_mut();
    if nf + 1 < nk {
        s[(nf + 1) * nx2..].fill(Complex64::default());
    }
    for k in 0..=nf.min(nk - 1) {
        s[k * nx2 + nc..(k + 1) * nx2].fill(Complex64::default());
    }
}

/// L2 inner product over the domain by trapezoid (x1) x Clenshaw-Curtis (x2)
/// quadrature.
pub fn l2_inner(a: &PhysicalField, b: &PhysicalField) -> Result<f64> {
    let grid = a.grid();
    if !grid.same_as(b.grid()) {
        return Err(Error::GridMismatch);
    }
    let nx2 = grid.nx2;
    let mut total = 0.0;
    for (ra, rb) in a
        .as_slice()
        .chunks_exact(nx2)
        .zip(b.as_slice().chunks_exact(nx2))
    {
        let mut row = 0.0;
        for ((&x, &y), &w) in ra.iter().zip(rb).zip(&grid.w2) {
            row += w * x * y;
        }
        total += row;
    }
    Ok(total * grid.w1)
}

/// L2 norm of a physical field.
pub fn l2_norm(a: &PhysicalField) -> f64 {
    l2_inner(a, a).expect("same grid").max(0.0).sqrt()
}

/// Evaluate the spectral interpolant at an arbitrary point of the domain.
///
/// Fourier synthesis in x1 (periodic), Clenshaw evaluation of the Chebyshev
/// series in x2. Diagnostic path; cost is O(nk * nx2) per point.
pub fn eval_at(c: &SpectralField, x1: f64, x2: f64) -> f64 {
    let grid = c.grid();
    let nx2 = grid.nx2;
    let nk = grid.nk();
    let xi = 2.0 * x2 - 1.0;
    let mut total = 0.0;
    for (k, row) in c.as_slice().chunks_exact(nx2).enumerate() {
        // Clenshaw on plain coefficients (ends stored doubled).
        let n = nx2 - 1;
        let mut b1 = Complex64::default();
        let mut b2 = Complex64::default();
        for m in (1..=n).rev() {
            let p = if m == n { 0.5 * row[m] } else { row[m] };
            let b0 = p + 2.0 * xi * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        let val = 0.5 * row[0] + xi * b1 - b2;
        let th = grid.kappa(k) * x1;
        let e = Complex64::new(th.cos(), th.sin());
        total += if k == 0 {
            val.re
        } else if k == nk - 1 {
            (val * e).re
        } else {
            2.0 * (val * e).re
        };
    }
    total
}

/// Field values on the two walls, per Fourier mode, straight from the
/// coefficients: `T_n(-1) = (-1)^n`, `T_n(1) = 1` with halved-ends weights.
pub(crate) fn wall_values_row(a: &[Complex64]) -> (Complex64, Complex64) {
    let n = a.len() - 1;
    let mut bot = 0.5 * (a[0] + sign(n) * a[n]);
    let mut top = 0.5 * (a[0] + a[n]);
    for (m, &v) in a.iter().enumerate().take(n).skip(1) {
        bot += sign(m) * v;
        top += v;
    }
    (bot, top)
}

fn sign(m: usize) -> f64 {
    if m % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Add `delta_bot`, `delta_top` to the wall values of one coefficient row
/// without touching interior collocation values (discrete cardinal update).
pub(crate) fn add_wall_deltas_row(a: &mut [Complex64], delta_bot: Complex64, delta_top: Complex64) {
    let n = (a.len() - 1) as f64;
    let inv_n = 1.0 / n;
    for (m, v) in a.iter_mut().enumerate() {
        *v += (sign(m) * delta_bot + delta_top) * inv_n;
    }
}

