//! Interpolant observables (spectral projection, local volume averages, local
//! circulation), the nudged system, and the lockstep twin-experiment driver.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::Arc;

use num_complex::Complex64;

use crate::benard::{
    conduction_state, stable_dt, Model, PhysParams, State, Stepper,
};
use crate::diagnostics;
use crate::elliptic::PoissonSolver;
use crate::error::{Error, Result};
use crate::spectral::{
    self, eval_at, to_spectral, Grid, PhysicalField, SpectralField, Workspace,
};

/// Which observable operator I_h to apply to the vorticity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InterpolantSpec {
    /// Orthogonal projection onto Fourier wavenumbers `|k| <= nf` and Chebyshev
    /// degrees `< nc`.
    SpectralProjection { nf: usize, nc: usize },
    /// Piecewise-constant local volume averages over an `mx1 x mx2` box tiling.
    LocalAverage { mx1: usize, mx2: usize },
}

impl InterpolantSpec {
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        match *self {
            InterpolantSpec::SpectralProjection { nf, nc } => {
                spectral::validate_projection(grid.nx1, grid.nx2, nf, nc)
            }
            InterpolantSpec::LocalAverage { mx1, mx2 } => {
                BoxPartition::new(grid, mx1, mx2).map(|_| ())
            }
        }
    }

    /// Coarsest length scale the observations resolve; the `h` that enters the
    /// rigorous conditions. Half the finest observed wavelength for the
    /// projection, the box size for local averages.
    pub fn resolution_h(&self, lx: f64) -> f64 {
        match *self {
            InterpolantSpec::SpectralProjection { nf, nc } => {
                (lx / (2.0 * nf as f64)).max(1.0 / (2.0 * nc as f64))
            }
            InterpolantSpec::LocalAverage { mx1, mx2 } => {
                (lx / mx1 as f64).max(1.0 / mx2 as f64)
            }
        }
    }
}

/// Relaxation coefficient and observable.
#[derive(Clone, Copy, Debug)]
pub struct NudgeParams {
    pub mu: f64,
    pub interpolant: InterpolantSpec,
}

impl NudgeParams {
    pub fn new(mu: f64, interpolant: InterpolantSpec) -> Result<Self> {
        if !mu.is_finite() || mu < 0.0 {
            return Err(Error::InvalidParam(format!(
                "mu must be finite and non-negative, got {mu}"
            )));
        }
        Ok(NudgeParams { mu, interpolant })
    }
}

/// One axis-aligned observation box.
#[derive(Clone, Copy, Debug)]
pub struct ObsBox {
    pub x1_lo: f64,
    pub x1_hi: f64,
    pub x2_lo: f64,
    pub x2_hi: f64,
}

impl ObsBox {
    pub fn area(&self) -> f64 {
        (self.x1_hi - self.x1_lo) * (self.x2_hi - self.x2_lo)
    }
}

/// Grid-aligned tiling of the domain into `mx1 x mx2` boxes.
///
/// Box edges sit on grid-cell boundaries (midpoints between collocation
/// points), so every point belongs to exactly one box and the boxes partition
/// the domain exactly. Box means are quadrature means over the points inside,
/// which makes the local-average interpolant idempotent on its own range.
pub struct BoxPartition {
    pub mx1: usize,
    pub mx2: usize,
    boxes: Vec<ObsBox>,
    x1_owner: Vec<usize>,
    x2_owner: Vec<usize>,
    /// Midpoint-rule cell widths in x2 (the per-point weights).
    x2_w: Vec<f64>,
    /// Sum of point weights per box (normalization).
    wsum: Vec<f64>,
}

impl BoxPartition {
    pub fn new(grid: &Grid, mx1: usize, mx2: usize) -> Result<Self> {
        if mx1 < 1 || mx2 < 1 {
            return Err(Error::InvalidModes("box counts must be >= 1".into()));
        }
        if mx1 > grid.nx1 || mx2 > grid.nx2 {
            return Err(Error::InvalidModes(format!(
                "box tiling {mx1}x{mx2} finer than the grid {}x{}",
                grid.nx1, grid.nx2
            )));
        }
        let nx1 = grid.nx1;
        let nx2 = grid.nx2;
        let h1 = grid.lx / nx1 as f64;

        // x1: assign whole cells (centered on the uniform points) to boxes.
        let x1_owner: Vec<usize> = (0..nx1).map(|j| j * mx1 / nx1).collect();
        // x2: cell boundaries halfway between CGL points; assign each point's
        // cell to the box containing the point.
        let mut x2_bnd = vec![0.0; nx2 + 1];
        x2_bnd[nx2] = 1.0;
        for i in 1..nx2 {
            x2_bnd[i] = 0.5 * (grid.x2[i - 1] + grid.x2[i]);
        }
        let x2_owner: Vec<usize> = grid
            .x2
            .iter()
            .map(|&x| ((x * mx2 as f64).floor() as usize).min(mx2 - 1))
            .collect();
        let x2_w: Vec<f64> = (0..nx2).map(|i| x2_bnd[i + 1] - x2_bnd[i]).collect();

        // Every box must own at least one point in each direction.
        for p in 0..mx1 {
            if !x1_owner.contains(&p) {
                return Err(Error::InvalidModes(format!("x1 box {p} contains no grid point")));
            }
        }
        for q in 0..mx2 {
            if !x2_owner.contains(&q) {
                return Err(Error::InvalidModes(format!("x2 box {q} contains no grid point")));
            }
        }

        // Geometric boxes from the owned cell unions; x1 runs are contiguous.
        let mut x1_edges = vec![0.0; mx1 + 1];
        for p in 1..=mx1 {
            let first = x1_owner.iter().position(|&o| o >= p).unwrap_or(nx1);
            x1_edges[p] = if first == nx1 {
                grid.lx - 0.5 * h1
            } else {
                grid.x1[first] - 0.5 * h1
            };
        }
        x1_edges[0] = -0.5 * h1;
        x1_edges[mx1] = grid.lx - 0.5 * h1;
        let mut x2_edges = vec![0.0; mx2 + 1];
        x2_edges[mx2] = 1.0;
        for q in 1..mx2 {
            let first = x2_owner.iter().position(|&o| o >= q).unwrap();
            x2_edges[q] = x2_bnd[first];
        }

        let mut boxes = Vec::with_capacity(mx1 * mx2);
        for p in 0..mx1 {
            for q in 0..mx2 {
                boxes.push(ObsBox {
                    x1_lo: x1_edges[p],
                    x1_hi: x1_edges[p + 1],
                    x2_lo: x2_edges[q],
                    x2_hi: x2_edges[q + 1],
                });
            }
        }

        let mut wsum = vec![0.0; mx1 * mx2];
        for j in 0..nx1 {
            for i in 0..nx2 {
                wsum[x1_owner[j] * mx2 + x2_owner[i]] += h1 * x2_w[i];
            }
        }

        Ok(BoxPartition {
            mx1,
            mx2,
            boxes,
            x1_owner,
            x2_owner,
            x2_w,
            wsum,
        })
    }

    pub fn boxes(&self) -> &[ObsBox] {
        &self.boxes
    }

    /// Quadrature mean of a physical field over each box.
    pub fn box_means(&self, f: &PhysicalField) -> Vec<f64> {
        let nx2 = self.x2_owner.len();
        let mut acc = vec![0.0; self.mx1 * self.mx2];
        for (j, row) in f.as_slice().chunks_exact(nx2).enumerate() {
            let base = self.x1_owner[j] * self.mx2;
            for (i, &v) in row.iter().enumerate() {
                acc[base + self.x2_owner[i]] += self.x2_w[i] * v;
            }
        }
        let h1 = f.grid().w1;
        for (a, &w) in acc.iter_mut().zip(&self.wsum) {
            *a *= h1 / w;
        }
        acc
    }

    /// Paint per-box values back onto the grid (piecewise constant).
    pub fn paint(&self, means: &[f64], out: &mut PhysicalField) {
        let nx2 = self.x2_owner.len();
        for (j, row) in out.as_slice_mut().chunks_exact_mut(nx2).enumerate() {
            let base = self.x1_owner[j] * self.mx2;
            for (i, v) in row.iter_mut().enumerate() {
                *v = means[base + self.x2_owner[i]];
            }
        }
    }
}

/// Apply the interpolant observable to a vorticity field.
pub fn interpolate(spec: &InterpolantSpec, omega: &SpectralField) -> Result<SpectralField> {
    let grid = omega.grid();
    match *spec {
        InterpolantSpec::SpectralProjection { nf, nc } => {
            spectral::project_low_modes(omega, nf, nc)
        }
        InterpolantSpec::LocalAverage { mx1, mx2 } => {
            let part = BoxPartition::new(grid, mx1, mx2)?;
            let mut ws = Workspace::new(grid);
            let mut phys = PhysicalField::zeros(grid);
            ws.inverse_into(omega, &mut phys, grid.nk() - 1);
            let means = part.box_means(&phys);
            part.paint(&means, &mut phys);
            let mut out = SpectralField::zeros(grid);
            ws.forward_into(&phys, &mut out, grid.nk() - 1);
            Ok(out)
        }
    }
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n {
        // Newton iteration from the Chebyshev-based initial guess.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0, x);
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        xs[n - 1 - i] = x;
        ws[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (xs, ws)
}

/// Composite Gauss-Legendre line integral of a function over [a, b].
fn line_integral(f: impl Fn(f64) -> f64, a: f64, b: f64, segments: usize) -> f64 {
    let (xs, ws) = gauss_legendre(8);
    let mut total = 0.0;
    let h = (b - a) / segments as f64;
    for s in 0..segments {
        let lo = a + s as f64 * h;
        let mid = lo + 0.5 * h;
        let half = 0.5 * h;
        for (&x, &w) in xs.iter().zip(&ws) {
            total += w * half * f(mid + half * x);
        }
    }
    total
}

/// Circulation around the box boundary divided by the box area:
/// `(1/|Q|) closed-int u . dx`, with u spectrally interpolated onto the edges.
/// By Green's theorem this equals the mean vorticity over the box.
pub fn local_circulation(
    u1: &PhysicalField,
    u2: &PhysicalField,
    q: &ObsBox,
) -> Result<f64> {
    let grid = u1.grid();
    if !grid.same_as(u2.grid()) {
        return Err(Error::GridMismatch);
    }
    if !(q.x1_hi > q.x1_lo) || !(q.x2_hi > q.x2_lo) {
        return Err(Error::InvalidParam("degenerate observation box".into()));
    }
    let u1_hat = to_spectral(u1);
    let u2_hat = to_spectral(u2);

    // Enough segments to resolve the finest retained scale along each edge.
    let seg1 = (((q.x1_hi - q.x1_lo) / grid.lx * grid.nx1 as f64).ceil() as usize).max(4);
    let seg2 = (((q.x2_hi - q.x2_lo) * grid.nx2 as f64).ceil() as usize).max(4);

    let bottom = line_integral(|x| eval_at(&u1_hat, x, q.x2_lo), q.x1_lo, q.x1_hi, seg1);
    let top = line_integral(|x| eval_at(&u1_hat, x, q.x2_hi), q.x1_lo, q.x1_hi, seg1);
    let right = line_integral(|y| eval_at(&u2_hat, q.x1_hi, y), q.x2_lo, q.x2_hi, seg2);
    let left = line_integral(|y| eval_at(&u2_hat, q.x1_lo, y), q.x2_lo, q.x2_hi, seg2);

    Ok((bottom + right - top - left) / q.area())
}

/// Accurate mean of the vorticity interpolant over a box: analytic Fourier
/// integrals in x1, Gauss-Legendre in x2. Oracle side of the Green's-theorem
/// identity.
pub fn box_mean_vorticity(omega: &SpectralField, q: &ObsBox) -> f64 {
    let grid = omega.grid();
    let nx2 = grid.nx2;
    let nk = grid.nk();
    let (xs, ws) = gauss_legendre(40);
    let mut mean = 0.0;
    for (k, row) in omega.as_slice().chunks_exact(nx2).enumerate() {
        // int_{x1_lo}^{x1_hi} e^{i kappa x} dx
        let kap = grid.kappa(k);
        let fx = if k == 0 {
            Complex64::new(q.x1_hi - q.x1_lo, 0.0)
        } else {
            let e_hi = Complex64::new((kap * q.x1_hi).cos(), (kap * q.x1_hi).sin());
            let e_lo = Complex64::new((kap * q.x1_lo).cos(), (kap * q.x1_lo).sin());
            (e_hi - e_lo) / Complex64::new(0.0, kap)
        };
        // int_{x2_lo}^{x2_hi} of the Chebyshev series by quadrature.
        let mid = 0.5 * (q.x2_lo + q.x2_hi);
        let half = 0.5 * (q.x2_hi - q.x2_lo);
        let mut fy = Complex64::default();
        for (&x, &w) in xs.iter().zip(&ws) {
            let x2 = mid + half * x;
            let xi = 2.0 * x2 - 1.0;
            let n = nx2 - 1;
            let mut b1 = Complex64::default();
            let mut b2 = Complex64::default();
            for m in (1..=n).rev() {
                let p = if m == n { 0.5 * row[m] } else { row[m] };
                let b0 = p + 2.0 * xi * b1 - b2;
                b2 = b1;
                b1 = b0;
            }
            fy += w * half * (0.5 * row[0] + xi * b1 - b2);
        }
        let contrib = fx * fy;
        mean += if k == 0 {
            contrib.re
        } else if k == nk - 1 {
            contrib.re
        } else {
            2.0 * contrib.re
        };
    }
    mean / q.area()
}

/// Tendency of the nudged system: the plain tendency of the assimilated state
/// plus `-mu (I_h(omega_da) - observed)` on the vorticity equation only.
/// `observed` must be `interpolate(spec, omega_ref)` at the same time.
pub fn nudged_rhs(
    s_da: &State,
    observed: &SpectralField,
    np: &NudgeParams,
    pp: &PhysParams,
    ps: &Arc<PoissonSolver>,
) -> Result<(SpectralField, SpectralField)> {
    let grid = s_da.grid();
    np.interpolant.validate(grid)?;
    let model = Model::with_poisson(grid, *pp, ps.clone())?;
    let mut stepper = Stepper::new(&model);
    stepper.load(s_da);
    stepper.stage_input(0, 0.0);
    stepper.eval_rhs();
    let (mut domega, dtheta) = (stepper.k.omega.clone(), stepper.k.theta.clone());
    if np.mu != 0.0 {
        let model_obs = interpolate(&np.interpolant, &stepper.s.omega)?;
        for ((d, &m), &o) in domega
            .as_slice_mut()
            .iter_mut()
            .zip(model_obs.as_slice())
            .zip(observed.as_slice())
        {
            *d -= np.mu * (m - o);
        }
    }
    Ok((domega, dtheta))
}

/// One sampled row of a twin experiment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwinRecord {
    pub t: f64,
    pub err_u: f64,
    pub err_theta: f64,
    pub err_omega: f64,
    pub nu_ref: f64,
    pub nu_da: f64,
}

/// Configuration of a twin experiment.
#[derive(Clone, Debug)]
pub struct TwinConfig {
    pub params: PhysParams,
    pub nudge: NudgeParams,
    /// CFL factor for the fixed step chosen at start (default 0.5).
    pub cfl: f64,
    /// Fixed time step override; bypasses the CFL estimate.
    pub dt_override: Option<f64>,
    pub t_final: f64,
    pub sample_dt: f64,
    /// Assimilated initial state; defaults to omega = 0, theta = 1 - x2.
    pub da_initial: Option<State>,
    /// Stop once every error norm has dropped below this ratio of its initial
    /// value (all channels); None runs to t_final.
    pub stop_ratio: Option<f64>,
    /// Re-evaluate the stable step every N steps, shrink-only. 0 disables.
    pub recheck_every: usize,
    /// Optional checkpoint outputs for the two final states.
    pub ref_checkpoint_out: Option<PathBuf>,
    pub da_checkpoint_out: Option<PathBuf>,
}

impl TwinConfig {
    pub fn new(params: PhysParams, nudge: NudgeParams, t_final: f64, sample_dt: f64) -> Self {
        TwinConfig {
            params,
            nudge,
            cfl: 0.5,
            dt_override: None,
            t_final,
            sample_dt,
            da_initial: None,
            stop_ratio: None,
            recheck_every: 50,
            ref_checkpoint_out: None,
            da_checkpoint_out: None,
        }
    }
}

/// Result of a twin experiment.
pub struct TwinOutput {
    pub records: Vec<TwinRecord>,
    pub final_ref: State,
    pub final_da: State,
    pub dt: f64,
    pub stopped_early: bool,
}

enum InterpolantData {
    Projection { nf: usize, nc: usize },
    Boxes(Box<BoxData>),
}

struct BoxData {
    part: BoxPartition,
    ws: Workspace,
    phys: PhysicalField,
    incr: SpectralField,
}

/// Lockstep stepper for the reference/assimilated pair. Both runs share one
/// Poisson factorization; the two tendency evaluations of each stage run
/// concurrently, and the nudging increment is applied afterwards from the
/// closure-completed stage vorticities.
pub struct TwinStepper {
    r: Stepper,
    d: Stepper,
    mu: f64,
    interp: InterpolantData,
}

impl TwinStepper {
    pub fn new(grid: &Arc<Grid>, params: PhysParams, nudge: &NudgeParams) -> Result<Self> {
        let model = Model::new(grid, params)?;
        Self::with_model(&model, nudge)
    }

    /// Build around an existing model (shares its Poisson factorization).
    pub fn with_model(model: &Arc<Model>, nudge: &NudgeParams) -> Result<Self> {
        let grid = &model.grid;
        nudge.interpolant.validate(grid)?;
        let interp = match nudge.interpolant {
            InterpolantSpec::SpectralProjection { nf, nc } => {
                InterpolantData::Projection { nf, nc }
            }
            InterpolantSpec::LocalAverage { mx1, mx2 } => InterpolantData::Boxes(Box::new(BoxData {
                part: BoxPartition::new(grid, mx1, mx2)?,
                ws: Workspace::new(grid),
                phys: PhysicalField::zeros(grid),
                incr: SpectralField::zeros(grid),
            })),
        };
        Ok(TwinStepper {
            r: Stepper::new(model),
            d: Stepper::new(model),
            mu: nudge.mu,
            interp,
        })
    }

    pub fn model(&self) -> &Arc<Model> {
        &self.r.model
    }

    /// Advance both systems by one RK4 step with stage-synchronous
    /// observations of the reference vorticity.
    pub fn step(&mut self, ref_state: &mut State, da_state: &mut State, dt: f64) -> Result<()> {
        self.r.load(ref_state);
        self.d.load(da_state);
        for stage in 0..4 {
            self.r.stage_input(stage, dt);
            self.d.stage_input(stage, dt);
            let (r, d) = (&mut self.r, &mut self.d);
            join(|| r.eval_rhs(), || d.eval_rhs());
            if self.mu != 0.0 {
                self.apply_nudge();
            }
            self.r.accumulate(stage);
            self.d.accumulate(stage);
        }
        self.r.finish(dt, ref_state).map_err(|e| tag(e, "reference run"))?;
        self.d.finish(dt, da_state).map_err(|e| tag(e, "assimilated run"))?;
        Ok(())
    }

    /// `k_omega_da -= mu (I_h(omega_da) - I_h(omega_ref))`, both sides taken
    /// from the closure-completed stage fields.
    fn apply_nudge(&mut self) {
        let grid = self.r.model.grid.clone();
        let nx2 = grid.nx2;
        match &mut self.interp {
            InterpolantData::Projection { nf, nc } => {
                let (nf, nc) = (*nf, *nc);
                let mu = self.mu;
                let kr = self.r.s.omega.as_slice();
                let kd = self.d.s.omega.as_slice();
                let out = self.d.k.omega.as_slice_mut();
                let kmax = nf.min(grid.nk() - 1);
                for k in 0..=kmax {
                    for m in 0..nc.min(nx2) {
                        let idx = k * nx2 + m;
                        out[idx] -= mu * (kd[idx] - kr[idx]);
                    }
                }
            }
            InterpolantData::Boxes(bd) => {
                let kc = grid.k_cut();
                bd.ws.inverse_into(&self.r.s.omega, &mut bd.phys, kc);
                let means_r = bd.part.box_means(&bd.phys);
                bd.ws.inverse_into(&self.d.s.omega, &mut bd.phys, kc);
                let means_d = bd.part.box_means(&bd.phys);
                let delta: Vec<f64> = means_d
                    .iter()
                    .zip(&means_r)
                    .map(|(d, r)| self.mu * (d - r))
                    .collect();
                bd.part.paint(&delta, &mut bd.phys);
                bd.ws.forward_into(&bd.phys, &mut bd.incr, kc);
                let out = self.d.k.omega.as_slice_mut();
                for (o, &i) in out.iter_mut().zip(bd.incr.as_slice()) {
                    *o -= i;
                }
            }
        }
    }
}

fn tag(e: Error, which: &str) -> Error {
    match e {
        Error::NonFinite { t, .. } => Error::NonFinite {
            context: which.into(),
            t,
        },
        other => other,
    }
}

#[cfg(feature = "parallel")]
fn join<A: Send, B: Send>(a: impl FnOnce() -> A + Send, b: impl FnOnce() -> B + Send) -> (A, B) {
    rayon::join(a, b)
}

#[cfg(not(feature = "parallel"))]
fn join<A, B>(a: impl FnOnce() -> A, b: impl FnOnce() -> B) -> (A, B) {
    (a(), b())
}

/// Run a twin experiment: advance the reference and assimilated systems in
/// lockstep with the same fixed dt, record error norms and Nusselt numbers at
/// the sampling interval, optionally persist the final states.
pub fn run_twin(ref_ic: &State, cfg: &TwinConfig) -> Result<TwinOutput> {
    let grid = ref_ic.grid().clone();
    let mut stepper = TwinStepper::new(&grid, cfg.params, &cfg.nudge)?;
    let poisson = stepper.model().poisson.clone();

    let mut ref_state = ref_ic.clone();
    let mut da_state = match &cfg.da_initial {
        Some(s) => {
            if !s.grid().same_as(&grid) {
                return Err(Error::GridMismatch);
            }
            let mut s = s.clone();
            s.t = ref_state.t;
            s
        }
        None => {
            let mut s = conduction_state(&grid);
            s.t = ref_state.t;
            s
        }
    };

    let mut dt = match cfg.dt_override {
        Some(d) => {
            if !(d > 0.0) {
                return Err(Error::InvalidParam("dt_override must be positive".into()));
            }
            d
        }
        None => stable_dt(&ref_state, &cfg.params, &poisson, cfg.cfl)?,
    };

    let t_end = ref_state.t + cfg.t_final;
    let mut records = Vec::new();
    let sample = |r: &State, d: &State| -> Result<TwinRecord> {
        let (err_u, err_theta, err_omega) = diagnostics::error_norms(r, d, &poisson)?;
        Ok(TwinRecord {
            t: r.t,
            err_u,
            err_theta,
            err_omega,
            nu_ref: crate::benard::nusselt_instant(r, &cfg.params, &poisson)?,
            nu_da: crate::benard::nusselt_instant(d, &cfg.params, &poisson)?,
        })
    };
    let first = sample(&ref_state, &da_state)?;
    let floor = 1e-300;
    let init = (
        first.err_u.max(floor),
        first.err_theta.max(floor),
        first.err_omega.max(floor),
    );
    records.push(first);

    let mut next_sample = ref_state.t + cfg.sample_dt;
    let mut stopped_early = false;
    let mut steps: usize = 0;
    while ref_state.t < t_end - 0.5 * dt {
        stepper.step(&mut ref_state, &mut da_state, dt)?;
        steps += 1;
        if cfg.recheck_every > 0 && steps % cfg.recheck_every == 0 {
            let fresh = stable_dt(&ref_state, &cfg.params, &poisson, cfg.cfl)?;
            if fresh < dt {
                dt = fresh;
            }
        }
        if ref_state.t >= next_sample - 0.5 * dt {
            let rec = sample(&ref_state, &da_state)?;
            records.push(rec);
            next_sample += cfg.sample_dt;
            if let Some(ratio) = cfg.stop_ratio {
                if rec.err_u / init.0 < ratio
                    && rec.err_theta / init.1 < ratio
                    && rec.err_omega / init.2 < ratio
                {
                    stopped_early = true;
                    break;
                }
            }
        }
    }
    if records.last().map(|r| r.t) != Some(ref_state.t) {
        records.push(sample(&ref_state, &da_state)?);
    }

    if let Some(path) = &cfg.ref_checkpoint_out {
        diagnostics::write_checkpoint(&ref_state, &cfg.params, path)?;
    }
    if let Some(path) = &cfg.da_checkpoint_out {
        diagnostics::write_checkpoint(&da_state, &cfg.params, path)?;
    }

    Ok(TwinOutput {
        records,
        final_ref: ref_state,
        final_da: da_state,
        dt,
        stopped_early,
    })
}

/// Fit of one error channel over the second half of a run.
#[derive(Clone, Copy, Debug)]
pub struct ChannelFit {
    pub rate: f64,
    pub r2: f64,
    /// Final error over initial error.
    pub ratio: f64,
}

/// Convergence verdict for a twin run.
#[derive(Clone, Copy, Debug)]
pub struct TwinSummary {
    pub u: ChannelFit,
    pub theta: ChannelFit,
    pub omega: ChannelFit,
    /// All channels: fitted rate negative with r2 >= 0.98 over the second
    /// half, and final error below 1e-6 of the initial error.
    pub converged: bool,
}

impl TwinSummary {
    pub fn channels(&self) -> [(&'static str, ChannelFit); 3] {
        [("u", self.u), ("theta", self.theta), ("omega", self.omega)]
    }
}

/// Decay detection: least-squares exponential fit over the second half of the
/// samples, per channel; convergence requires a negative rate with r2 >= 0.98
/// and a final/initial error ratio below 1e-6 on every channel.
pub fn summarize_twin(records: &[TwinRecord]) -> Result<TwinSummary> {
    if records.len() < 4 {
        return Err(Error::Fit(format!(
            "need at least 4 samples to summarize, got {}",
            records.len()
        )));
    }
    let fit_channel = |pick: fn(&TwinRecord) -> f64| -> ChannelFit {
        let first = pick(&records[0]).max(1e-16);
        let last = pick(records.last().unwrap()).max(1e-16);
        let half = records.len() / 2;
        let series: Vec<(f64, f64)> = records[half..]
            .iter()
            .map(|r| (r.t, pick(r).max(1e-16)))
            .collect();
        let (rate, r2) = crate::diagnostics::fit_exponential_rate(&series)
            .unwrap_or((0.0, 0.0));
        ChannelFit {
            rate,
            r2,
            ratio: last / first,
        }
    };
    let u = fit_channel(|r| r.err_u);
    let theta = fit_channel(|r| r.err_theta);
    let omega = fit_channel(|r| r.err_omega);
    let ok = |c: &ChannelFit| c.rate < 0.0 && c.r2 >= 0.98 && c.ratio < 1e-6;
    Ok(TwinSummary {
        u,
        theta,
        omega,
        converged: ok(&u) && ok(&theta) && ok(&omega),
    })
}
