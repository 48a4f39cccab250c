//! The reference system: vorticity transport with buoyancy forcing, temperature
//! advection-diffusion, wall-vorticity closure, RK4 stepping and Nusselt
//! diagnostics.
//!
//! The state advances as collocation values; each step transforms to
//! coefficients, runs four tendency evaluations and transforms back. Wall
//! vorticity is diagnostic: every tendency evaluation first solves for the
//! streamfunction, then resets the vorticity wall rows from a one-sided
//! formula that encodes the no-slip (Neumann) condition.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::elliptic::{PoissonScratch, PoissonSolver};
use crate::error::{Error, Result};
use crate::spectral::{
    self, to_physical_unchecked, to_spectral, Grid, PhysicalField, SpectralField, Workspace,
};

/// Rayleigh and Prandtl numbers with the derived diffusivities
/// `nu = (Pr/Ra)^(1/2)`, `kappa = (Pr Ra)^(-1/2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysParams {
    pub ra: f64,
    pub pr: f64,
    /// Domain aspect length L (must match the grid).
    pub lx: f64,
}

impl PhysParams {
    pub fn new(ra: f64, pr: f64, lx: f64) -> Result<Self> {
        for (name, v) in [("Ra", ra), ("Pr", pr), ("L", lx)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParam(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(PhysParams { ra, pr, lx })
    }

    pub fn nu(&self) -> f64 {
        (self.pr / self.ra).sqrt()
    }

    pub fn kappa(&self) -> f64 {
        1.0 / (self.pr * self.ra).sqrt()
    }
}

/// Vorticity, temperature and simulation time. Collocation values are the
/// canonical representation so that checkpoints and restarts are bit-exact.
#[derive(Clone, Debug)]
pub struct State {
    pub omega: PhysicalField,
    pub theta: PhysicalField,
    pub t: f64,
}

impl State {
    pub fn grid(&self) -> &Arc<Grid> {
        self.omega.grid()
    }

    pub fn is_finite(&self) -> bool {
        self.omega.is_finite() && self.theta.is_finite() && self.t.is_finite()
    }
}

/// The motionless conduction solution: `omega = 0`, `theta = 1 - x2`.
pub fn conduction_state(grid: &Arc<Grid>) -> State {
    State {
        omega: PhysicalField::zeros(grid),
        theta: PhysicalField::from_fn(grid, |_, x2| 1.0 - x2),
        t: 0.0,
    }
}

/// Conduction state plus a seeded, band-limited temperature perturbation that
/// vanishes at both walls. Deterministic per seed; the perturbation L2 norm is
/// proportional to `amplitude`.
pub fn random_perturbed_ic(grid: &Arc<Grid>, seed: u64, amplitude: f64) -> State {
    let mut state = conduction_state(grid);
    if amplitude == 0.0 {
        return state;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut unit = move || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
    let kmax = 4usize;
    let mmax = 3usize;
    let mut coeffs = Vec::new();
    for k in 1..=kmax {
        for m in 1..=mmax {
            coeffs.push((k, m, unit(), unit()));
        }
    }
    let lx = grid.lx;
    for (j, &x1) in grid.x1.iter().enumerate() {
        // Wall rows stay exact: the sine factor vanishes there analytically.
        for i in 1..grid.nx2 - 1 {
            let x2 = grid.x2[i];
            let mut p = 0.0;
            for &(k, m, a, b) in &coeffs {
                let th = 2.0 * PI * k as f64 * x1 / lx;
                let decay = 1.0 / (k + m) as f64;
                p += decay * (a * th.cos() + b * th.sin()) * (PI * m as f64 * x2).sin();
            }
            state.theta.values[[j, i]] += amplitude * p;
        }
    }
    state
}

const STENCIL: usize = 6;

/// One-sided wall-vorticity formula.
///
/// Per Fourier mode, `omega_wall = psi''(wall)` of the polynomial that matches
/// psi at the first [`STENCIL`] interior nodes and satisfies
/// `psi(wall) = psi'(wall) = 0`. Exact for polynomials through degree
/// `STENCIL + 1`, formally well above 4th order in the wall-normal resolution.
pub(crate) struct WallClosure {
    /// Per-coefficient weights: `omega_bot[k] = sum_m r_bot[m] psi_hat[k][m]`.
    r_bot: Vec<f64>,
    r_top: Vec<f64>,
}

impl WallClosure {
    pub fn new(grid: &Grid) -> Result<Self> {
        let n = grid.nx2 - 1;
        let m = STENCIL.min(grid.nx2 - 2);

        // Hermite-constrained stencil weights for distances d_1..d_m from the
        // wall: sum_j w_j d_j^q = 2 delta_{q,2} for q = 2..=m+1.
        let weights = |dist: &[f64]| -> Result<Vec<f64>> {
            let s = dist[m - 1];
            let mut mat = DMatrix::<f64>::zeros(m, m);
            let mut rhs = DVector::<f64>::zeros(m);
            for (qi, q) in (2..=m + 1).enumerate() {
                for j in 0..m {
                    mat[(qi, j)] = (dist[j] / s).powi(q as i32);
                }
                rhs[qi] = if q == 2 { 2.0 / (s * s) } else { 0.0 };
            }
            mat.lu()
                .solve(&rhs)
                .map(|w| w.iter().cloned().collect())
                .ok_or_else(|| Error::InvalidGrid("wall stencil system singular".into()))
        };

        let d_bot: Vec<f64> = (1..=m).map(|j| grid.x2[j]).collect();
        let w_bot = weights(&d_bot)?;
        let d_top: Vec<f64> = (1..=m).map(|j| 1.0 - grid.x2[n - j]).collect();
        let w_top = weights(&d_top)?;

        // Fold stencil weights with Chebyshev evaluation at the stencil nodes.
        let nf = n as f64;
        let mut r_bot = vec![0.0; grid.nx2];
        let mut r_top = vec![0.0; grid.nx2];
        for mm in 0..grid.nx2 {
            let sigma = if mm == 0 || mm == n { 0.5 } else { 1.0 };
            let mut sb = 0.0;
            let mut st = 0.0;
            for j in 1..=m {
                // T_mm at ascending node j (bottom side) and n - j (top side).
                sb += w_bot[j - 1] * (PI * (mm * (n - j)) as f64 / nf).cos();
                st += w_top[j - 1] * (PI * (mm * j) as f64 / nf).cos();
            }
            r_bot[mm] = sigma * sb;
            r_top[mm] = sigma * st;
        }
        Ok(WallClosure { r_bot, r_top })
    }

    /// Wall vorticity of one streamfunction coefficient row.
    pub fn wall_omega_row(&self, psi_row: &[Complex64]) -> (Complex64, Complex64) {
        let mut bot = Complex64::default();
        let mut top = Complex64::default();
        for ((&rb, &rt), &p) in self.r_bot.iter().zip(&self.r_top).zip(psi_row) {
            bot += rb * p;
            top += rt * p;
        }
        (bot, top)
    }
}

/// Vorticity at both walls from the streamfunction, as physical rows
/// `(bottom, top)` of length `nx1`.
pub fn wall_vorticity(psi: &SpectralField) -> Result<(Vec<f64>, Vec<f64>)> {
    let grid = psi.grid();
    let closure = WallClosure::new(grid)?;
    let nx2 = grid.nx2;
    let nk = grid.nk();
    let mut bot_modes = vec![Complex64::default(); nk];
    let mut top_modes = vec![Complex64::default(); nk];
    for (k, row) in psi.as_slice().chunks_exact(nx2).enumerate() {
        let (b, t) = closure.wall_omega_row(row);
        bot_modes[k] = b;
        top_modes[k] = t;
    }
    let synth = |modes: &[Complex64]| -> Vec<f64> {
        (0..grid.nx1)
            .map(|j| {
                let mut s = modes[0].re;
                for (k, &c) in modes.iter().enumerate().take(nk - 1).skip(1) {
                    let th = 2.0 * PI * (k * j) as f64 / grid.nx1 as f64;
                    s += 2.0 * (c * Complex64::new(th.cos(), th.sin())).re;
                }
                s += if j % 2 == 0 { 1.0 } else { -1.0 } * modes[nk - 1].re;
                s
            })
            .collect()
    };
    Ok((synth(&bot_modes), synth(&top_modes)))
}

/// Spectral (omega, theta) pair used by the stepping machinery.
#[derive(Clone)]
pub struct SpectralPair {
    pub omega: SpectralField,
    pub theta: SpectralField,
}

impl SpectralPair {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        SpectralPair {
            omega: SpectralField::zeros(grid),
            theta: SpectralField::zeros(grid),
        }
    }
}

/// Immutable per-run context: grid, parameters, elliptic solver, wall closure.
pub struct Model {
    pub grid: Arc<Grid>,
    pub params: PhysParams,
    pub poisson: Arc<PoissonSolver>,
    pub(crate) closure: WallClosure,
}

impl Model {
    pub fn new(grid: &Arc<Grid>, params: PhysParams) -> Result<Arc<Self>> {
        let poisson = Arc::new(PoissonSolver::new(grid)?);
        Self::with_poisson(grid, params, poisson)
    }

    /// Reuse an existing Poisson factorization (e.g. shared by twin runs).
    pub fn with_poisson(
        grid: &Arc<Grid>,
        params: PhysParams,
        poisson: Arc<PoissonSolver>,
    ) -> Result<Arc<Self>> {
        if params.lx != grid.lx {
            return Err(Error::InvalidParam(format!(
                "params.lx = {} does not match grid L = {}",
                params.lx, grid.lx
            )));
        }
        if !poisson.grid().same_as(grid) {
            return Err(Error::GridMismatch);
        }
        Ok(Arc::new(Model {
            grid: grid.clone(),
            params,
            poisson,
            closure: WallClosure::new(grid)?,
        }))
    }
}

/// RK4 stage weights.
const STAGE_A: [f64; 4] = [0.0, 0.5, 0.5, 1.0];
const STAGE_B: [f64; 4] = [1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0];

/// Scratch and stage storage for advancing one run.
pub struct Stepper {
    pub model: Arc<Model>,
    ws: Workspace,
    ps_scratch: PoissonScratch,
    // rhs temporaries
    psi: SpectralField,
    dsp: SpectralField,
    u1: PhysicalField,
    u2: PhysicalField,
    fx: PhysicalField,
    fy: PhysicalField,
    adv: PhysicalField,
    row_tmp: Vec<Complex64>,
    row_tmp2: Vec<Complex64>,
    // stage storage
    pub(crate) y: SpectralPair,
    pub(crate) s: SpectralPair,
    pub(crate) k: SpectralPair,
    acc: SpectralPair,
}

impl Stepper {
    pub fn new(model: &Arc<Model>) -> Self {
        let grid = &model.grid;
        Stepper {
            model: model.clone(),
            ws: Workspace::new(grid),
            ps_scratch: PoissonScratch::new(grid),
            psi: SpectralField::zeros(grid),
            dsp: SpectralField::zeros(grid),
            u1: PhysicalField::zeros(grid),
            u2: PhysicalField::zeros(grid),
            fx: PhysicalField::zeros(grid),
            fy: PhysicalField::zeros(grid),
            adv: PhysicalField::zeros(grid),
            row_tmp: vec![Complex64::default(); grid.nx2],
            row_tmp2: vec![Complex64::default(); grid.nx2],
            y: SpectralPair::zeros(grid),
            s: SpectralPair::zeros(grid),
            k: SpectralPair::zeros(grid),
            acc: SpectralPair::zeros(grid),
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.model.grid
    }

    /// Closure-completed vorticity of the most recently evaluated stage.
    pub fn closed_stage_omega(&self) -> &SpectralField {
        &self.s.omega
    }

    /// Load a physical state into spectral stage storage (dealiased).
    pub fn load(&mut self, state: &State) {
        let kc = self.model.grid.k_cut();
        self.ws.forward_into(&state.omega, &mut self.y.omega, kc);
        self.ws.forward_into(&state.theta, &mut self.y.theta, kc);
    }

    /// Form the stage input `s = y + a dt k` (stage 0 copies y).
    pub fn stage_input(&mut self, stage: usize, dt: f64) {
        if stage == 0 {
            self.s
                .omega
                .as_slice_mut()
                .copy_from_slice(self.y.omega.as_slice());
            self.s
                .theta
                .as_slice_mut()
                .copy_from_slice(self.y.theta.as_slice());
        } else {
            let a = STAGE_A[stage] * dt;
            self.s.omega.scaled_sum_into(&self.y.omega, a, &self.k.omega);
            self.s.theta.scaled_sum_into(&self.y.theta, a, &self.k.theta);
        }
    }

    /// Evaluate the tendency of the current stage input into `k`.
    /// Closes the vorticity wall rows of `s.omega` in place first, so callers
    /// may read closure-completed vorticity from `s` afterwards.
    pub fn eval_rhs(&mut self) {
        let model = self.model.clone();
        let grid = &model.grid;
        let nx2 = grid.nx2;
        let kc = grid.k_cut();
        let nu = model.params.nu();
        let kap = model.params.kappa();

        // Streamfunction from interior vorticity, then wall closure.
        model
            .poisson
            .solve_into(&self.s.omega, &mut self.psi, kc, &mut self.ps_scratch);
        {
            let psi_rows = self.psi.as_slice();
            let om = self.s.omega.as_slice_mut();
            for k in 0..=kc {
                let (wb, wt) = model
                    .closure
                    .wall_omega_row(&psi_rows[k * nx2..(k + 1) * nx2]);
                let row = &mut om[k * nx2..(k + 1) * nx2];
                let (cb, ct) = spectral::wall_values_row(row);
                spectral::add_wall_deltas_row(row, wb - cb, wt - ct);
            }
        }

        // u1 = -d psi/dx2, u2 = d psi/dx1.
        for (rin, rout) in self
            .psi
            .as_slice()
            .chunks_exact(nx2)
            .zip(self.dsp.as_slice_mut().chunks_exact_mut(nx2))
            .take(kc + 1)
        {
            spectral::cheb_derivative_row(rin, rout, -2.0);
        }
        self.ws.inverse_into(&self.dsp, &mut self.u1, kc);
        mul_ik_rows(&self.psi, &mut self.dsp, grid, kc);
        self.ws.inverse_into(&self.dsp, &mut self.u2, kc);

        // Advection of vorticity: u . grad omega, pseudo-spectral.
        mul_ik_rows(&self.s.omega, &mut self.dsp, grid, kc);
        self.ws.inverse_into(&self.dsp, &mut self.fx, kc);
        for (rin, rout) in self
            .s
            .omega
            .as_slice()
            .chunks_exact(nx2)
            .zip(self.dsp.as_slice_mut().chunks_exact_mut(nx2))
            .take(kc + 1)
        {
            spectral::cheb_derivative_row(rin, rout, 2.0);
        }
        self.ws.inverse_into(&self.dsp, &mut self.fy, kc);
        dot_advection(&self.u1, &self.u2, &self.fx, &self.fy, &mut self.adv);
        self.ws.forward_into(&self.adv, &mut self.k.omega, kc);

        // Advection of temperature.
        mul_ik_rows(&self.s.theta, &mut self.dsp, grid, kc);
        self.ws.inverse_into(&self.dsp, &mut self.fx, kc);
        for (rin, rout) in self
            .s
            .theta
            .as_slice()
            .chunks_exact(nx2)
            .zip(self.dsp.as_slice_mut().chunks_exact_mut(nx2))
            .take(kc + 1)
        {
            spectral::cheb_derivative_row(rin, rout, 2.0);
        }
        self.ws.inverse_into(&self.dsp, &mut self.fy, kc);
        dot_advection(&self.u1, &self.u2, &self.fx, &self.fy, &mut self.adv);
        self.ws.forward_into(&self.adv, &mut self.k.theta, kc);

        // Assemble per mode:
        //   d omega = -adv + nu Lap(omega) + d theta / dx1
        //   d theta = -adv + kappa Lap(theta)
        // The buoyancy sign is fixed by curl(theta e2) with omega = Lap(psi)
        // and u = grad^perp(psi): the opposite sign makes conduction linearly
        // stable at every Rayleigh number.
        let om_in = self.s.omega.as_slice();
        let th_in = self.s.theta.as_slice();
        let k_om = self.k.omega.as_slice_mut();
        let k_th = self.k.theta.as_slice_mut();
        for kk in 0..=kc {
            let k2 = grid.kappa(kk).powi(2);
            let ik = Complex64::new(0.0, grid.kappa(kk));
            let om_row = &om_in[kk * nx2..(kk + 1) * nx2];
            let th_row = &th_in[kk * nx2..(kk + 1) * nx2];

            spectral::cheb_second_derivative_row(om_row, &mut self.row_tmp, &mut self.row_tmp2);
            let ko = &mut k_om[kk * nx2..(kk + 1) * nx2];
            for m in 0..nx2 {
                let lap = self.row_tmp2[m] - k2 * om_row[m];
                ko[m] = -ko[m] + nu * lap + ik * th_row[m];
            }

            spectral::cheb_second_derivative_row(th_row, &mut self.row_tmp, &mut self.row_tmp2);
            let kt = &mut k_th[kk * nx2..(kk + 1) * nx2];
            for m in 0..nx2 {
                let lap = self.row_tmp2[m] - k2 * th_row[m];
                kt[m] = -kt[m] + kap * lap;
            }
        }

        // Tendencies leave the wall rows alone: theta walls are pinned and
        // omega walls are diagnostic (reset by the closure each stage).
        for kk in 0..=kc {
            let ko = &mut k_om[kk * nx2..(kk + 1) * nx2];
            let (cb, ct) = spectral::wall_values_row(ko);
            spectral::add_wall_deltas_row(ko, -cb, -ct);
            let kt = &mut k_th[kk * nx2..(kk + 1) * nx2];
            let (cb, ct) = spectral::wall_values_row(kt);
            spectral::add_wall_deltas_row(kt, -cb, -ct);
        }
    }

    /// Add the current stage tendency into the accumulator.
    pub fn accumulate(&mut self, stage: usize) {
        let b = STAGE_B[stage];
        if stage == 0 {
            for (a, &k) in self
                .acc
                .omega
                .as_slice_mut()
                .iter_mut()
                .zip(self.k.omega.as_slice())
            {
                *a = b * k;
            }
            for (a, &k) in self
                .acc
                .theta
                .as_slice_mut()
                .iter_mut()
                .zip(self.k.theta.as_slice())
            {
                *a = b * k;
            }
        } else {
            self.acc.omega.axpy(b, &self.k.omega);
            self.acc.theta.axpy(b, &self.k.theta);
        }
    }

    /// Apply the accumulated update and write the state back to physical form,
    /// re-imposing the temperature wall rows exactly and refreshing the
    /// diagnostic vorticity wall rows from the updated streamfunction.
    /// Without the refresh the stored wall rows would be dead storage: the
    /// tendencies are wall-zeroed, so stale values (and, in nudged runs, the
    /// integrated wall trace of the nudging increment) would persist forever.
    pub fn finish(&mut self, dt: f64, state: &mut State) -> Result<()> {
        self.y.omega.axpy(dt, &self.acc.omega);
        self.y.theta.axpy(dt, &self.acc.theta);
        let model = self.model.clone();
        let grid = &model.grid;
        let kc = grid.k_cut();
        let nx2 = grid.nx2;
        model
            .poisson
            .solve_into(&self.y.omega, &mut self.psi, kc, &mut self.ps_scratch);
        {
            let psi_rows = self.psi.as_slice();
            let om = self.y.omega.as_slice_mut();
            for k in 0..=kc {
                let (wb, wt) = model
                    .closure
                    .wall_omega_row(&psi_rows[k * nx2..(k + 1) * nx2]);
                let row = &mut om[k * nx2..(k + 1) * nx2];
                let (cb, ct) = spectral::wall_values_row(row);
                spectral::add_wall_deltas_row(row, wb - cb, wt - ct);
            }
        }
        self.ws.inverse_into(&self.y.omega, &mut state.omega, kc);
        self.ws.inverse_into(&self.y.theta, &mut state.theta, kc);
        pin_theta_walls(&mut state.theta);
        state.t += dt;
        if !state.is_finite() {
            return Err(Error::NonFinite {
                context: "time step".into(),
                t: state.t,
            });
        }
        Ok(())
    }

    /// Advance one RK4 step.
    pub fn step(&mut self, state: &mut State, dt: f64) -> Result<()> {
        self.load(state);
        for stage in 0..4 {
            self.stage_input(stage, dt);
            self.eval_rhs();
            self.accumulate(stage);
        }
        self.finish(dt, state)
    }
}

/// `dst = i kappa_k * src` per Fourier row up to `kc`.
fn mul_ik_rows(src: &SpectralField, dst: &mut SpectralField, grid: &Grid, kc: usize) {
    let nx2 = grid.nx2;
    let s = src.as_slice();
    let d = dst.as_slice_mut();
    for k in 0..=kc {
        let kap = grid.kappa(k);
        for m in 0..nx2 {
            let v = s[k * nx2 + m];
            d[k * nx2 + m] = Complex64::new(-kap * v.im, kap * v.re);
        }
    }
}

fn dot_advection(
    u1: &PhysicalField,
    u2: &PhysicalField,
    fx: &PhysicalField,
    fy: &PhysicalField,
    out: &mut PhysicalField,
) {
    let o = out.as_slice_mut();
    let (u1, u2) = (u1.as_slice(), u2.as_slice());
    let (fx, fy) = (fx.as_slice(), fy.as_slice());
    for i in 0..o.len() {
        o[i] = u1[i] * fx[i] + u2[i] * fy[i];
    }
}

/// Pin the temperature wall rows to theta = 1 (bottom) and 0 (top).
pub(crate) fn pin_theta_walls(theta: &mut PhysicalField) {
    let nx2 = theta.grid().nx2;
    for row in theta.as_slice_mut().chunks_exact_mut(nx2) {
        row[0] = 1.0;
        row[nx2 - 1] = 0.0;
    }
}

/// Tendency of the reference system for a physical state. Convenience wrapper
/// around the stepping machinery; aborts with a diagnostic on non-finite data.
pub fn rhs(
    s: &State,
    pp: &PhysParams,
    ps: &Arc<PoissonSolver>,
) -> Result<(SpectralField, SpectralField)> {
    let model = Model::with_poisson(s.grid(), *pp, ps.clone())?;
    let mut stepper = Stepper::new(&model);
    stepper.load(s);
    stepper.stage_input(0, 0.0);
    stepper.eval_rhs();
    let finite = |f: &SpectralField| {
        f.as_slice()
            .iter()
            .all(|c| c.re.is_finite() && c.im.is_finite())
    };
    if !finite(&stepper.k.omega) || !finite(&stepper.k.theta) {
        return Err(Error::NonFinite {
            context: "rhs".into(),
            t: s.t,
        });
    }
    Ok((stepper.k.omega, stepper.k.theta))
}

/// Generic RK4 step on a spectral pair. Pure stage arithmetic: no transforms,
/// no wall handling; this is what the stability-polynomial tests exercise.
pub fn rk4_step_spectral<F>(y: &SpectralPair, dt: f64, mut f: F) -> Result<SpectralPair>
where
    F: FnMut(&SpectralPair) -> Result<SpectralPair>,
{
    let k1 = f(y)?;
    let mut s = y.clone();
    s.omega.scaled_sum_into(&y.omega, 0.5 * dt, &k1.omega);
    s.theta.scaled_sum_into(&y.theta, 0.5 * dt, &k1.theta);
    let k2 = f(&s)?;
    s.omega.scaled_sum_into(&y.omega, 0.5 * dt, &k2.omega);
    s.theta.scaled_sum_into(&y.theta, 0.5 * dt, &k2.theta);
    let k3 = f(&s)?;
    s.omega.scaled_sum_into(&y.omega, dt, &k3.omega);
    s.theta.scaled_sum_into(&y.theta, dt, &k3.theta);
    let k4 = f(&s)?;
    let mut out = y.clone();
    for (field, parts) in [
        (
            &mut out.omega,
            [&k1.omega, &k2.omega, &k3.omega, &k4.omega],
        ),
        (
            &mut out.theta,
            [&k1.theta, &k2.theta, &k3.theta, &k4.theta],
        ),
    ] {
        field.axpy(dt / 6.0, parts[0]);
        field.axpy(dt / 3.0, parts[1]);
        field.axpy(dt / 3.0, parts[2]);
        field.axpy(dt / 6.0, parts[3]);
    }
    Ok(out)
}

/// One RK4 step of a physical state: transforms in, four tendency evaluations,
/// transforms out, theta wall rows re-imposed, time advanced by dt.
pub fn rk4_step(s: &State, dt: f64, pp: &PhysParams, ps: &Arc<PoissonSolver>) -> Result<State> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParam(format!(
            "dt must be positive, got {dt}"
        )));
    }
    let model = Model::with_poisson(s.grid(), *pp, ps.clone())?;
    let mut stepper = Stepper::new(&model);
    let mut out = s.clone();
    stepper.step(&mut out, dt)?;
    Ok(out)
}

/// Largest stable time step estimate: `cfl * min(advective, diffusive)` with
/// the advective limit `min(dx1/|u1|, dx2/|u2|)` taken pointwise and the
/// diffusive limit `min(dx1^2, dx2_min^2) / (4 max(nu, kappa))`. A quiescent
/// field returns the diffusive limit.
pub fn stable_dt(s: &State, pp: &PhysParams, ps: &Arc<PoissonSolver>, cfl: f64) -> Result<f64> {
    if !(cfl > 0.0 && cfl <= 1.0) {
        return Err(Error::InvalidParam(format!(
            "cfl must be in (0, 1], got {cfl}"
        )));
    }
    let grid = s.grid();
    let omega_hat = to_spectral(&s.omega);
    let psi = ps.solve(&omega_hat)?;
    let (u1, u2) = crate::elliptic::velocity(&psi);

    let dx1 = grid.lx / grid.nx1 as f64;
    let mut adv = f64::INFINITY;
    for j in 0..grid.nx1 {
        for i in 0..grid.nx2 {
            let a1 = dx1 / u1.values[[j, i]].abs();
            let a2 = grid.dx2_local(i) / u2.values[[j, i]].abs();
            adv = adv.min(a1).min(a2);
        }
    }
    let diff = dx1.powi(2).min(grid.dx2_min().powi(2)) / (4.0 * pp.nu().max(pp.kappa()));
    Ok(cfl * adv.min(diff))
}

/// Instantaneous Nusselt number: `1 + sqrt(Pr Ra) <u2 theta>` with `<.>` the
/// volume average over the domain. The long-time average is up to the caller.
pub fn nusselt_instant(s: &State, pp: &PhysParams, ps: &Arc<PoissonSolver>) -> Result<f64> {
    let omega_hat = to_spectral(&s.omega);
    let psi = ps.solve(&omega_hat)?;
    let u2 = to_physical_unchecked(&spectral::ddx1(&psi));
    nusselt_from_fields(&u2, &s.theta, pp)
}

/// Nusselt number from given vertical velocity and temperature fields.
pub fn nusselt_from_fields(
    u2: &PhysicalField,
    theta: &PhysicalField,
    pp: &PhysParams,
) -> Result<f64> {
    let flux = spectral::l2_inner(u2, theta)?;
    Ok(1.0 + (pp.pr * pp.ra).sqrt() * flux / u2.grid().lx)
}
