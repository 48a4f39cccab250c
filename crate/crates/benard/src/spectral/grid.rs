//! Tensor-product collocation grid: uniform (Fourier) in x1, Chebyshev-Gauss-Lobatto in x2.
//!
//! The domain is `[0, L] x [0, 1]`. The x2 nodes are
//! `x2_i = (1 - cos(pi i / N)) / 2` with `N = nx2 - 1`, so `x2_0 = 0` (bottom wall)
//! and `x2_N = 1` (top wall). The map to the standard Chebyshev interval is
//! `xi = 2 x2 - 1`.

use std::f64::consts::PI;
use std::sync::Arc;

use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustdct::{Dct1, DctPlanner};

use crate::error::{Error, Result};

/// Collocation grid with precomputed abscissae, quadrature weights and transform plans.
pub struct Grid {
    /// Number of uniform points in x1 (even, >= 8).
    pub nx1: usize,
    /// Number of Chebyshev-Gauss-Lobatto points in x2 (>= 9).
    pub nx2: usize,
    /// Domain length in x1.
    pub lx: f64,
    /// x1 abscissae, `x1_j = j L / nx1`.
    pub x1: Vec<f64>,
    /// x2 abscissae, `x2_i = (1 - cos(pi i / (nx2-1))) / 2`, ascending from 0 to 1.
    pub x2: Vec<f64>,
    /// Uniform x1 quadrature weight (periodic trapezoid), `L / nx1`.
    pub w1: f64,
    /// Clenshaw-Curtis quadrature weights on [0, 1], one per x2 node; sums to 1.
    pub w2: Vec<f64>,
    pub(crate) r2c: Arc<dyn RealToComplex<f64>>,
    pub(crate) c2r: Arc<dyn ComplexToReal<f64>>,
    pub(crate) dct1: Arc<dyn Dct1<f64>>,
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid")
            .field("nx1", &self.nx1)
            .field("nx2", &self.nx2)
            .field("lx", &self.lx)
            .finish()
    }
}

impl Grid {
    /// Build a grid, precomputing abscissae, weights and FFT/DCT plans.
    pub fn new(nx1: usize, nx2: usize, lx: f64) -> Result<Arc<Self>> {
        if nx1 < 8 || nx1 % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "nx1 must be even and >= 8, got {nx1}"
            )));
        }
        if nx2 < 9 {
            return Err(Error::InvalidGrid(format!("nx2 must be >= 9, got {nx2}")));
        }
        if !(lx > 0.0) || !lx.is_finite() {
            return Err(Error::InvalidGrid(format!("L must be positive, got {lx}")));
        }
        let n = nx2 - 1;
        let x1: Vec<f64> = (0..nx1).map(|j| j as f64 * lx / nx1 as f64).collect();
        let mut x2: Vec<f64> = (0..nx2)
            .map(|i| (1.0 - (PI * i as f64 / n as f64).cos()) / 2.0)
            .collect();
        // Walls are grid points exactly.
        x2[0] = 0.0;
        x2[n] = 1.0;

        let w2 = clenshaw_curtis_unit(nx2);

        let mut real_planner = RealFftPlanner::<f64>::new();
        let r2c = real_planner.plan_fft_forward(nx1);
        let c2r = real_planner.plan_fft_inverse(nx1);
        let mut dct_planner = DctPlanner::<f64>::new();
        let dct1 = dct_planner.plan_dct1(nx2);

        Ok(Arc::new(Grid {
            nx1,
            nx2,
            lx,
            x1,
            x2,
            w1: lx / nx1 as f64,
            w2,
            r2c,
            c2r,
            dct1,
        }))
    }

    /// Number of stored Fourier wavenumbers (`nx1/2 + 1`, real transform half-spectrum).
    pub fn nk(&self) -> usize {
        self.nx1 / 2 + 1
    }

    /// Chebyshev polynomial order `N = nx2 - 1`.
    pub fn n_cheb(&self) -> usize {
        self.nx2 - 1
    }

    /// Physical wavenumber of Fourier index k: `2 pi k / L`.
    pub fn kappa(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.lx
    }

    /// Largest Fourier index kept by the 2/3-rule dealiasing filter.
    pub fn k_cut(&self) -> usize {
        self.nx1 / 3
    }

    /// True if `other` discretizes the same domain with the same resolution.
    pub fn same_as(&self, other: &Grid) -> bool {
        self.nx1 == other.nx1 && self.nx2 == other.nx2 && self.lx == other.lx
    }

    /// Smallest x2 spacing (at the walls).
    pub fn dx2_min(&self) -> f64 {
        self.x2[1] - self.x2[0]
    }

    /// Local x2 spacing at node i (minimum of the adjacent gaps).
    pub fn dx2_local(&self, i: usize) -> f64 {
        let n = self.nx2 - 1;
        if i == 0 {
            self.x2[1] - self.x2[0]
        } else if i == n {
            self.x2[n] - self.x2[n - 1]
        } else {
            (self.x2[i] - self.x2[i - 1]).min(self.x2[i + 1] - self.x2[i])
        }
    }
}

/// Clenshaw-Curtis weights on [0, 1] for the ascending CGL nodes.
///
/// Weight i equals the integral over [0, 1] of the degree-N polynomial that is
/// 1 at node i and 0 at the others, evaluated by expanding that cardinal
/// polynomial in Chebyshev coefficients and integrating term by term
/// (`int_{-1}^{1} T_n = 2/(1-n^2)` for even n, 0 for odd n).
fn clenshaw_curtis_unit(nx2: usize) -> Vec<f64> {
    let n = nx2 - 1;
    let nf = n as f64;
    let mut w = vec![0.0; nx2];
    for (i, wi) in w.iter_mut().enumerate() {
        // Reversed index of node i on the standard descending CGL ordering.
        let j = n - i;
        let tau = if j == 0 || j == n { 0.5 } else { 1.0 };
        let mut s = 0.0;
        let mut m = 0usize;
        while m <= n {
            let sigma = if m == 0 || m == n { 0.5 } else { 1.0 };
            let q = 2.0 / (1.0 - (m * m) as f64);
            s += sigma * q * (PI * (m * j) as f64 / nf).cos();
            m += 2;
        }
        // (1/2): interval [0,1] is half of [-1,1]; (2/N) tau: forward DCT scaling.
        *wi = 0.5 * (2.0 / nf) * tau * s;
    }
    w
}
