//! Streamfunction Poisson solver and velocity reconstruction.
//!
//! `Delta psi = omega` with psi periodic in x1 and homogeneous Dirichlet at the
//! walls. The Fourier transform in x1 decouples the problem into one 1D
//! Helmholtz solve `(D2 - kappa_k^2) psi = omega` per wavenumber on the
//! interior Chebyshev nodes; the x2 operator is diagonalized once per grid and
//! every solve is two dense matrix products over all modes at once.
//!
//! The stored factors are fused with the Chebyshev analysis/synthesis matrices,
//! so solves map coefficients to coefficients directly and the wall rows of the
//! result are zero by construction.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::spectral::{
    ddx1, ddx2, to_physical_unchecked, Grid, PhysicalField, SpectralField,
};

/// Precomputed per-grid factorization of the Dirichlet Laplacian.
pub struct PoissonSolver {
    grid: Arc<Grid>,
    /// Eigenvalues of the interior second-derivative collocation operator.
    eigs: Vec<f64>,
    /// `V^-1 * S_int`: coefficients -> eigenbasis of interior values, (ni x nx2).
    b_in: Vec<f64>,
    /// `A_int * V`: eigenbasis -> coefficients of a wall-zero field, (nx2 x ni).
    b_out: Vec<f64>,
}

/// Reusable buffers for [`PoissonSolver::solve_into`].
pub struct PoissonScratch {
    g: Vec<f64>,
    t: Vec<f64>,
    u: Vec<f64>,
}

impl PoissonScratch {
    pub fn new(grid: &Grid) -> Self {
        let ni = grid.nx2 - 2;
        let cols = 2 * grid.nk();
        PoissonScratch {
            g: vec![0.0; grid.nx2 * cols],
            t: vec![0.0; ni * cols],
            u: vec![0.0; grid.nx2 * cols],
        }
    }
}

/// Build the solver for a grid. Construction cost is paid once; solves are
/// reusable and thread-safe.
pub fn build_poisson(grid: &Arc<Grid>) -> Result<PoissonSolver> {
    PoissonSolver::new(grid)
}

impl PoissonSolver {
    pub fn new(grid: &Arc<Grid>) -> Result<Self> {
        let nx2 = grid.nx2;
        if nx2 < 9 {
            return Err(Error::InvalidGrid(
                "grid too small for wall-normal differentiation".into(),
            ));
        }
        let n = nx2 - 1;
        let ni = nx2 - 2;

        let d2 = cheb_second_derivative_matrix(&grid.x2);
        // Interior block: Dirichlet rows and columns removed.
        let a = DMatrix::from_fn(ni, ni, |r, c| d2[(r + 1) * nx2 + (c + 1)]);

        let (eigs, v) = eigendecompose(&a)?;
        let v_inv = v
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Eigen("eigenvector matrix is singular".into()))?;

        // Residual check: A V = V Lambda.
        let mut lam = DMatrix::<f64>::zeros(ni, ni);
        for (i, &e) in eigs.iter().enumerate() {
            lam[(i, i)] = e;
        }
        let resid = (&a * &v - &v * &lam).norm() / a.norm();
        if resid > 1e-8 {
            return Err(Error::Eigen(format!(
                "eigendecomposition residual too large: {resid:e}"
            )));
        }

        // Chebyshev synthesis at interior nodes (values from coefficients) and
        // analysis from interior values (walls pinned to zero).
        let nf = n as f64;
        let mut s_int = DMatrix::<f64>::zeros(ni, nx2);
        for i in 0..ni {
            let node = i + 1;
            for m in 0..nx2 {
                let sigma = if m == 0 || m == n { 0.5 } else { 1.0 };
                s_int[(i, m)] =
                    sigma * (std::f64::consts::PI * (m * (n - node)) as f64 / nf).cos();
            }
        }
        let mut a_int = DMatrix::<f64>::zeros(nx2, ni);
        for m in 0..nx2 {
            for i in 0..ni {
                let node = i + 1;
                a_int[(m, i)] =
                    (2.0 / nf) * (std::f64::consts::PI * (m * (n - node)) as f64 / nf).cos();
            }
        }

        let b_in_m = &v_inv * &s_int;
        let b_out_m = &a_int * &v;

        let to_vec = |m: &DMatrix<f64>| -> Vec<f64> {
            let (r, c) = m.shape();
            let mut out = vec![0.0; r * c];
            for i in 0..r {
                for j in 0..c {
                    out[i * c + j] = m[(i, j)];
                }
            }
            out
        };

        Ok(PoissonSolver {
            grid: grid.clone(),
            eigs,
            b_in: to_vec(&b_in_m),
            b_out: to_vec(&b_out_m),
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Eigenvalues of the k = 0 interior operator (all negative).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigs
    }

    /// Solve `Delta psi = omega`; psi has exact zero wall rows.
    pub fn solve(&self, omega: &SpectralField) -> Result<SpectralField> {
        if !self.grid.same_as(omega.grid()) {
            return Err(Error::GridMismatch);
        }
        let mut psi = SpectralField::zeros(&self.grid);
        let mut scratch = PoissonScratch::new(&self.grid);
        self.solve_into(omega, &mut psi, self.grid.nk() - 1, &mut scratch);
        Ok(psi)
    }

    /// In-place solve over Fourier modes `0..=kmax`; rows above are zeroed.
    pub fn solve_into(
        &self,
        omega: &SpectralField,
        psi: &mut SpectralField,
        kmax: usize,
        scratch: &mut PoissonScratch,
    ) {
        let nx2 = self.grid.nx2;
        let ni = nx2 - 2;
        let nk = self.grid.nk();
        let kmax = kmax.min(nk - 1);
        let cols = 2 * (kmax + 1);

        // Gather: column pair (2k, 2k+1) = (re, im) of mode k, rows = Chebyshev degree.
        let src = omega.as_slice();
        for m in 0..nx2 {
            let row = &mut scratch.g[m * cols..(m + 1) * cols];
            for k in 0..=kmax {
                let v = src[k * nx2 + m];
                row[2 * k] = v.re;
                row[2 * k + 1] = v.im;
            }
        }

        // t = b_in * g
        unsafe {
            matrixmultiply::dgemm(
                ni,
                nx2,
                cols,
                1.0,
                self.b_in.as_ptr(),
                nx2 as isize,
                1,
                scratch.g.as_ptr(),
                cols as isize,
                1,
                0.0,
                scratch.t.as_mut_ptr(),
                cols as isize,
                1,
            );
        }

        // Divide by the per-mode shifted eigenvalue.
        for i in 0..ni {
            let lam = self.eigs[i];
            let row = &mut scratch.t[i * cols..(i + 1) * cols];
            for k in 0..=kmax {
                let kap = self.grid.kappa(k);
                let d = 1.0 / (lam - kap * kap);
                row[2 * k] *= d;
                row[2 * k + 1] *= d;
            }
        }

        // u = b_out * t
        unsafe {
            matrixmultiply::dgemm(
                nx2,
                ni,
                cols,
                1.0,
                self.b_out.as_ptr(),
                ni as isize,
                1,
                scratch.t.as_ptr(),
                cols as isize,
                1,
                0.0,
                scratch.u.as_mut_ptr(),
                cols as isize,
                1,
            );
        }

        // Scatter back into coefficient rows.
        let dst = psi.as_slice_mut();
        for k in 0..=kmax {
            for m in 0..nx2 {
                let row = &scratch.u[m * cols..(m + 1) * cols];
                dst[k * nx2 + m] = num_complex::Complex64::new(row[2 * k], row[2 * k + 1]);
            }
        }
        dst[(kmax + 1) * nx2..].fill(num_complex::Complex64::default());
    }
}

/// `u = grad^perp psi = (-d psi/dx2, d psi/dx1)` evaluated in physical space.
pub fn velocity(psi: &SpectralField) -> (PhysicalField, PhysicalField) {
    let (u1_hat, u2_hat) = velocity_spectral(psi);
    (
        to_physical_unchecked(&u1_hat),
        to_physical_unchecked(&u2_hat),
    )
}

pub(crate) fn velocity_spectral(psi: &SpectralField) -> (SpectralField, SpectralField) {
    let mut u1 = ddx2(psi);
    for v in u1.as_slice_mut() {
        *v = -*v;
    }
    let u2 = ddx1(psi);
    (u1, u2)
}

/// Chebyshev collocation second-derivative matrix on the given (ascending CGL)
/// nodes, built from barycentric first-derivative entries with Welfert's
/// recursion and negative-sum diagonals.
fn cheb_second_derivative_matrix(x: &[f64]) -> Vec<f64> {
    let nx2 = x.len();
    let n = nx2 - 1;
    // Barycentric weights for CGL nodes in ascending order.
    let mut lam = vec![0.0; nx2];
    for (i, l) in lam.iter_mut().enumerate() {
        let delta = if i == 0 || i == n { 0.5 } else { 1.0 };
        *l = if (n - i) % 2 == 0 { delta } else { -delta };
    }
    let mut d1 = vec![0.0; nx2 * nx2];
    for i in 0..nx2 {
        let mut diag = 0.0;
        for j in 0..nx2 {
            if i != j {
                let v = (lam[j] / lam[i]) / (x[i] - x[j]);
                d1[i * nx2 + j] = v;
                diag -= v;
            }
        }
        d1[i * nx2 + i] = diag;
    }
    let mut d2 = vec![0.0; nx2 * nx2];
    for i in 0..nx2 {
        let mut diag = 0.0;
        for j in 0..nx2 {
            if i != j {
                let v = 2.0 * d1[i * nx2 + j] * (d1[i * nx2 + i] - 1.0 / (x[i] - x[j]));
                d2[i * nx2 + j] = v;
                diag -= v;
            }
        }
        d2[i * nx2 + i] = diag;
    }
    d2
}

/// Real eigendecomposition of a matrix with distinct real eigenvalues, via the
/// real Schur form plus back-substitution for the eigenvectors.
fn eigendecompose(a: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let ni = a.nrows();
    let schur = a
        .clone()
        .try_schur(1e-14, 10_000)
        .ok_or_else(|| Error::Eigen("Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();

    // The operator has real, distinct, negative eigenvalues; any 2x2 block in
    // the quasi-triangular factor means something went numerically wrong.
    let scale = t.norm();
    for i in 0..ni - 1 {
        if t[(i + 1, i)].abs() > 1e-9 * scale {
            return Err(Error::Eigen(format!(
                "unexpected complex eigenvalue pair at index {i}"
            )));
        }
    }

    let mut order: Vec<usize> = (0..ni).collect();
    order.sort_by(|&i, &j| t[(i, i)].partial_cmp(&t[(j, j)]).unwrap());

    let mut eigs = vec![0.0; ni];
    let mut v = DMatrix::<f64>::zeros(ni, ni);
    let mut y = vec![0.0; ni];
    for (col, &idx) in order.iter().enumerate() {
        let lam = t[(idx, idx)];
        eigs[col] = lam;
        y[..ni].fill(0.0);
        y[idx] = 1.0;
        for j in (0..idx).rev() {
            let mut s = 0.0;
            for m in j + 1..=idx {
                s += t[(j, m)] * y[m];
            }
            let denom = t[(j, j)] - lam;
            if denom.abs() < 1e-300 {
                return Err(Error::Eigen("degenerate eigenvalues".into()));
            }
            y[j] = -s / denom;
        }
        // v_col = Q[:, 0..=idx] * y
        let mut norm2 = 0.0;
        for r in 0..ni {
            let mut s = 0.0;
            for m in 0..=idx {
                s += q[(r, m)] * y[m];
            }
            v[(r, col)] = s;
            norm2 += s * s;
        }
        let norm = norm2.sqrt();
        // Deterministic sign: largest-magnitude component positive.
        let mut lead = 0.0f64;
        for r in 0..ni {
            if v[(r, col)].abs() > lead.abs() {
                lead = v[(r, col)];
            }
        }
        let sgn = if lead < 0.0 { -1.0 } else { 1.0 };
        for r in 0..ni {
            v[(r, col)] *= sgn / norm;
        }
    }
    Ok((eigs, v))
}
