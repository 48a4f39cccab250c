//! Browser demo: an interactive twin assimilation experiment and a
//! rigorous-bound explorer, exported through wasm-bindgen.
//!
//! Build with `wasm-pack build --target web` (or `cargo build --target
//! wasm32-unknown-unknown` plus `wasm-bindgen`); `www/index.html` is the page.

use std::sync::Arc;

use wasm_bindgen::prelude::*;

use benard::assimilation::{InterpolantSpec, NudgeParams, TwinStepper};
use benard::benard::{
    conduction_state, nusselt_instant, random_perturbed_ic, stable_dt, Model, PhysParams, State,
    Stepper,
};
use benard::diagnostics::error_norms;
use benard::spectral::Grid;
use benard::theory::{BoundConfig, BoundReport};

/// Interactive twin experiment: a reference convection run plus a nudged copy
/// that sees only coarse vorticity observations.
#[wasm_bindgen]
pub struct TwinDemo {
    grid: Arc<Grid>,
    params: PhysParams,
    model: Arc<Model>,
    ref_stepper: Stepper,
    twin: TwinStepper,
    ref_state: State,
    da_state: State,
    mu: f64,
    nf: usize,
    nc: usize,
    dt: f64,
    assimilating: bool,
    history: Vec<f64>, // flattened (t, err_u, err_theta, err_omega)
}

#[wasm_bindgen]
impl TwinDemo {
    /// Create a demo at the given Rayleigh number and resolution.
    #[wasm_bindgen(constructor)]
    pub fn new(ra: f64, nx1: usize, nx2: usize, mu: f64, nf: usize, nc: usize, seed: u64)
        -> Result<TwinDemo, JsError> {
        let grid = Grid::new(nx1, nx2, 2.0).map_err(to_js)?;
        let params = PhysParams::new(ra, 1.0, 2.0).map_err(to_js)?;
        let model = Model::new(&grid, params).map_err(to_js)?;
        let nudge = NudgeParams::new(mu, InterpolantSpec::SpectralProjection { nf, nc })
            .map_err(to_js)?;
        let twin = TwinStepper::with_model(&model, &nudge).map_err(to_js)?;
        let ref_state = random_perturbed_ic(&grid, seed, 0.1);
        let da_state = conduction_state(&grid);
        let dt = stable_dt(&ref_state, &params, &model.poisson, 0.9).map_err(to_js)?;
        Ok(TwinDemo {
            grid,
            params,
            ref_stepper: Stepper::new(&model),
            twin,
            model,
            ref_state,
            da_state,
            mu,
            nf,
            nc,
            dt,
            assimilating: false,
            history: Vec::new(),
        })
    }

    /// Advance the reference flow only (spin-up phase). Returns simulated time.
    pub fn spin(&mut self, time_units: f64) -> Result<f64, JsError> {
        let steps = (time_units / self.dt).ceil() as usize;
        for _ in 0..steps {
            self.ref_stepper
                .step(&mut self.ref_state, self.dt)
                .map_err(to_js)?;
        }
        self.refresh_dt()?;
        Ok(self.ref_state.t)
    }

    /// Reset the assimilated run to the zero-knowledge state and start nudging.
    pub fn start_assimilation(&mut self) {
        self.da_state = conduction_state(&self.grid);
        self.da_state.t = self.ref_state.t;
        self.history.clear();
        self.assimilating = true;
    }

    /// Advance both systems in lockstep; records one error sample at the end.
    pub fn step_twin(&mut self, time_units: f64) -> Result<f64, JsError> {
        if !self.assimilating {
            return self.spin(time_units);
        }
        let steps = (time_units / self.dt).ceil() as usize;
        for _ in 0..steps {
            self.twin
                .step(&mut self.ref_state, &mut self.da_state, self.dt)
                .map_err(to_js)?;
        }
        let (eu, et, eo) =
            error_norms(&self.ref_state, &self.da_state, &self.model.poisson).map_err(to_js)?;
        self.history
            .extend_from_slice(&[self.ref_state.t, eu, et, eo]);
        Ok(self.ref_state.t)
    }

    /// Change the nudging parameters without disturbing the states.
    pub fn set_nudging(&mut self, mu: f64, nf: usize, nc: usize) -> Result<(), JsError> {
        let nudge = NudgeParams::new(mu, InterpolantSpec::SpectralProjection { nf, nc })
            .map_err(to_js)?;
        self.twin = TwinStepper::with_model(&self.model, &nudge).map_err(to_js)?;
        self.mu = mu;
        self.nf = nf;
        self.nc = nc;
        Ok(())
    }

    fn refresh_dt(&mut self) -> Result<(), JsError> {
        let fresh =
            stable_dt(&self.ref_state, &self.params, &self.model.poisson, 0.9).map_err(to_js)?;
        if fresh < self.dt {
            self.dt = fresh;
        }
        Ok(())
    }

    pub fn time(&self) -> f64 {
        self.ref_state.t
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn nx1(&self) -> usize {
        self.grid.nx1
    }

    pub fn nx2(&self) -> usize {
        self.grid.nx2
    }

    pub fn nusselt_ref(&self) -> Result<f64, JsError> {
        nusselt_instant(&self.ref_state, &self.params, &self.model.poisson).map_err(to_js)
    }

    pub fn nusselt_da(&self) -> Result<f64, JsError> {
        nusselt_instant(&self.da_state, &self.params, &self.model.poisson).map_err(to_js)
    }

    /// Flattened error history: groups of (t, err_u, err_theta, err_omega).
    pub fn history(&self) -> Vec<f64> {
        self.history.clone()
    }

    /// RGBA image of the reference temperature, nx1 x nx2 pixels, top wall up.
    pub fn theta_ref_rgba(&self) -> Vec<u8> {
        field_rgba(&self.ref_state.theta, 0.0, 1.0)
    }

    pub fn theta_da_rgba(&self) -> Vec<u8> {
        field_rgba(&self.da_state.theta, 0.0, 1.0)
    }

    pub fn omega_ref_rgba(&self) -> Vec<u8> {
        let m = self.ref_state.omega.max_abs().max(1e-12);
        field_rgba(&self.ref_state.omega, -m, m)
    }

    pub fn omega_da_rgba(&self) -> Vec<u8> {
        let m = self.ref_state.omega.max_abs().max(1e-12);
        field_rgba(&self.da_state.omega, -m, m)
    }
}

/// Diverging blue-white-red colormap over [lo, hi], row-major with x2
/// descending (canvas y grows downward, the hot wall is at the bottom).
fn field_rgba(f: &benard::spectral::PhysicalField, lo: f64, hi: f64) -> Vec<u8> {
    let grid = f.grid();
    let (nx1, nx2) = (grid.nx1, grid.nx2);
    let mut out = vec![0u8; nx1 * nx2 * 4];
    for row in 0..nx2 {
        let i2 = nx2 - 1 - row; // top of the image = top wall
        for j in 0..nx1 {
            let v = ((f.values[[j, i2]] - lo) / (hi - lo)).clamp(0.0, 1.0);
            let (r, g, b) = diverging(v);
            let p = 4 * (row * nx1 + j);
            out[p] = r;
            out[p + 1] = g;
            out[p + 2] = b;
            out[p + 3] = 255;
        }
    }
    out
}

fn diverging(v: f64) -> (u8, u8, u8) {
    // 0 -> blue, 0.5 -> white, 1 -> red
    let (r, g, b) = if v < 0.5 {
        let s = v * 2.0;
        (s, s, 1.0)
    } else {
        let s = (1.0 - v) * 2.0;
        (1.0, s, s)
    };
    ((r * 255.0) as u8, (g * 255.0) as u8, (b * 255.0) as u8)
}

/// Rigorous-bound report for the explorer panel, as key=value text.
#[wasm_bindgen]
pub fn bounds_report_kv(ra: f64, pr: f64, l: f64, mu: f64, nf: usize, nc: usize) -> String {
    match PhysParams::new(ra, pr, l) {
        Ok(pp) => {
            let h = InterpolantSpec::SpectralProjection { nf, nc }.resolution_h(l);
            BoundReport::evaluate(&pp, mu, h, &BoundConfig::default()).to_kv()
        }
        Err(e) => format!("error={e}\n"),
    }
}

/// Human-readable bound report.
#[wasm_bindgen]
pub fn bounds_report_text(ra: f64, pr: f64, l: f64, mu: f64, nf: usize, nc: usize) -> String {
    match PhysParams::new(ra, pr, l) {
        Ok(pp) => {
            let h = InterpolantSpec::SpectralProjection { nf, nc }.resolution_h(l);
            BoundReport::evaluate(&pp, mu, h, &BoundConfig::default()).to_text()
        }
        Err(e) => format!("error: {e}\n"),
    }
}

fn to_js(e: benard::Error) -> JsError {
    JsError::new(&e.to_string())
}
