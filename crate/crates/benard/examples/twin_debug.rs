//! Diagnostic: where does the residual vorticity error live after a twin run?
//! Prints per-Fourier-band and per-Chebyshev-band energy of the difference.

use benard::assimilation::{run_twin, InterpolantSpec, NudgeParams, TwinConfig};
use benard::benard::{random_perturbed_ic, stable_dt, Model, PhysParams, Stepper};
use benard::spectral::{to_spectral, Grid};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let ra: f64 = args[0].parse().unwrap();
    let t_twin: f64 = args[1].parse().unwrap();
    let (nx1, nx2) = (48usize, 25usize);
    let grid = Grid::new(nx1, nx2, 2.0).unwrap();
    let pp = PhysParams::new(ra, 1.0, 2.0).unwrap();
    let model = Model::new(&grid, pp).unwrap();
    let mut stepper = Stepper::new(&model);
    let mut state = random_perturbed_ic(&grid, 3, 0.1);
    let mut dt = stable_dt(&state, &pp, &model.poisson, 1.0).unwrap();
    while state.t < 60.0 {
        stepper.step(&mut state, dt).unwrap();
        let fresh = stable_dt(&state, &pp, &model.poisson, 1.0).unwrap();
        if fresh < dt {
            dt = fresh;
        }
    }

    let np = NudgeParams::new(1.0, InterpolantSpec::SpectralProjection { nf: 8, nc: 8 }).unwrap();
    let mut cfg = TwinConfig::new(pp, np, t_twin, 0.25);
    cfg.cfl = 1.0;
    let out = run_twin(&state, &cfg).unwrap();
    let last = out.records.last().unwrap();
    println!("# final errors: u {:.3e} theta {:.3e} omega {:.3e}", last.err_u, last.err_theta, last.err_omega);

    let dom = {
        let a = to_spectral(&out.final_ref.omega);
        let mut b = to_spectral(&out.final_da.omega);
        for (x, &y) in b.as_slice_mut().iter_mut().zip(a.as_slice()) {
            *x -= y;
        }
        b
    };
    let nk = grid.nk();
    println!("# |diff| energy by Fourier index (summed over degrees):");
    for k in 0..nk {
        let e: f64 = (0..nx2).map(|m| dom.coeffs[[k, m]].norm_sqr()).sum::<f64>().sqrt();
        if e > 1e-10 {
            println!("k = {k:2}: {e:.4e}");
        }
    }
    println!("# |diff| energy by Chebyshev degree (summed over k):");
    for m in 0..nx2 {
        let e: f64 = (0..nk).map(|k| dom.coeffs[[k, m]].norm_sqr()).sum::<f64>().sqrt();
        if e > 1e-10 {
            println!("m = {m:2}: {e:.4e}");
        }
    }
    // Physical-space wall vs interior structure.
    let mut dphys = out.final_da.omega.clone();
    for (v, &r) in dphys.as_slice_mut().iter_mut().zip(out.final_ref.omega.as_slice()) {
        *v -= r;
    }
    println!("# max |diff| per x2 row:");
    for i in 0..nx2 {
        let mut mx = 0.0f64;
        for j in 0..nx1 {
            mx = mx.max(dphys.values[[j, i]].abs());
        }
        if mx > 1e-8 {
            println!("x2[{i:2}] = {:7.4}: {mx:.4e}", grid.x2[i]);
        }
    }
}
