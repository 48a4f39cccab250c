//! Rough timing of the hot kernels at the desk-scale production size.
//! Run with `cargo run --release -p benard --example kernel_timing`.

use std::time::Instant;

use benard::elliptic::{PoissonScratch, PoissonSolver};
use benard::spectral::{Grid, PhysicalField, SpectralField, Workspace};

fn main() {
    let g = Grid::new(128, 65, 2.0).unwrap();
    let mut ws = Workspace::new(&g);
    let f = PhysicalField::from_fn(&g, |x1, x2| (x1 + 0.3).sin() * (3.0 * x2).cos() + x2);
    let mut spec = SpectralField::zeros(&g);
    let mut back = PhysicalField::zeros(&g);
    let kc = g.k_cut();

    let reps = 2000;
    let t0 = Instant::now();
    for _ in 0..reps {
        ws.forward_into(&f, &mut spec, kc);
    }
    let fwd = t0.elapsed().as_secs_f64() / reps as f64;
    let t0 = Instant::now();
    for _ in 0..reps {
        ws.inverse_into(&spec, &mut back, kc);
    }
    let inv = t0.elapsed().as_secs_f64() / reps as f64;

    let ps = PoissonSolver::new(&g).unwrap();
    let mut scratch = PoissonScratch::new(&g);
    let mut psi = SpectralField::zeros(&g);
    let t0 = Instant::now();
    for _ in 0..reps {
        ps.solve_into(&spec, &mut psi, kc, &mut scratch);
    }
    let solve = t0.elapsed().as_secs_f64() / reps as f64;

    println!("grid 128x65, kmax = {kc}");
    println!("forward  : {:8.1} us", fwd * 1e6);
    println!("inverse  : {:8.1} us", inv * 1e6);
    println!("poisson  : {:8.1} us", solve * 1e6);
    let per_rhs = 8.0 * 0.5 * (fwd + inv) * 2.0 + solve;
    println!(
        "~rhs est : {:8.1} us  (8 transforms + 1 solve)",
        per_rhs * 1e6
    );
    println!(
        "~twin/s  : {:8.1} ms per step (4 stages x 2 runs, serial)",
        per_rhs * 8.0 * 1e3
    );
}
