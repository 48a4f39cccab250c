//! Exploration driver: spin up a reference flow, then run a twin experiment
//! and report the fitted decay rates.
//!
//! Usage: twin_explore RA NX1 NX2 MU NF NC T_SPIN T_TWIN [SEED] [CKPT]

use std::time::Instant;

use benard::assimilation::{run_twin, InterpolantSpec, NudgeParams, TwinConfig};
use benard::benard::{
    nusselt_instant, random_perturbed_ic, stable_dt, Model, PhysParams, Stepper,
};
use benard::diagnostics::{fit_exponential_rate, write_checkpoint};
use benard::spectral::Grid;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let ra: f64 = args[0].parse().unwrap();
    let nx1: usize = args[1].parse().unwrap();
    let nx2: usize = args[2].parse().unwrap();
    let mu: f64 = args[3].parse().unwrap();
    let nf: usize = args[4].parse().unwrap();
    let nc: usize = args[5].parse().unwrap();
    let t_spin: f64 = args[6].parse().unwrap();
    let t_twin: f64 = args[7].parse().unwrap();
    let seed: u64 = args.get(8).map(|s| s.parse().unwrap()).unwrap_or(7);
    let ckpt = args.get(9).cloned();

    let grid = Grid::new(nx1, nx2, 2.0).unwrap();
    let pp = PhysParams::new(ra, 1.0, 2.0).unwrap();
    let model = Model::new(&grid, pp).unwrap();
    let mut stepper = Stepper::new(&model);

    let mut state = random_perturbed_ic(&grid, seed, 0.1);
    let mut dt = stable_dt(&state, &pp, &model.poisson, 1.0).unwrap();
    println!("# spin-up: dt = {dt:.3e}, steps to t_spin ~ {}", (t_spin / dt) as u64);
    let t0 = Instant::now();
    let mut step = 0u64;
    let mut next_report = 0.0f64;
    while state.t < t_spin {
        stepper.step(&mut state, dt).unwrap();
        step += 1;
        if step % 50 == 0 {
            let fresh = stable_dt(&state, &pp, &model.poisson, 1.0).unwrap();
            if fresh < dt {
                dt = fresh;
            }
        }
        if state.t >= next_report {
            let nu = nusselt_instant(&state, &pp, &model.poisson).unwrap();
            println!(
                "# t = {:7.3}  Nu = {:8.4}  max|omega| = {:9.3e}  [{:6.1}s]",
                state.t,
                nu,
                state.omega.max_abs(),
                t0.elapsed().as_secs_f64()
            );
            next_report += (t_spin / 40.0).max(0.25);
        }
    }
    if let Some(path) = &ckpt {
        write_checkpoint(&state, &pp, std::path::Path::new(path)).unwrap();
        println!("# wrote checkpoint {path}");
    }

    let np = NudgeParams::new(mu, InterpolantSpec::SpectralProjection { nf, nc }).unwrap();
    let mut cfg = TwinConfig::new(pp, np, t_twin, 0.05);
    cfg.cfl = 1.0;
    cfg.stop_ratio = Some(1e-8);
    println!("# twin: mu = {mu}, projection ({nf}, {nc}), t = {t_twin}");
    let t1 = Instant::now();
    let out = run_twin(&state, &cfg).unwrap();
    println!("# twin wall time {:.1}s, dt = {:.3e}", t1.elapsed().as_secs_f64(), out.dt);
    for rec in out.records.iter().step_by(5.max(out.records.len() / 40)) {
        println!(
            "{:8.3} {:12.5e} {:12.5e} {:12.5e} {:8.3} {:8.3}",
            rec.t, rec.err_u, rec.err_theta, rec.err_omega, rec.nu_ref, rec.nu_da
        );
    }
    let last = out.records.last().unwrap();
    println!(
        "{:8.3} {:12.5e} {:12.5e} {:12.5e} {:8.3} {:8.3}",
        last.t, last.err_u, last.err_theta, last.err_omega, last.nu_ref, last.nu_da
    );

    let half = out.records.len() / 2;
    for (name, sel) in [
        ("u", 0usize),
        ("theta", 1),
        ("omega", 2),
    ] {
        let series: Vec<(f64, f64)> = out.records[half..]
            .iter()
            .map(|r| {
                (
                    r.t,
                    match sel {
                        0 => r.err_u,
                        1 => r.err_theta,
                        _ => r.err_omega,
                    },
                )
            })
            .collect();
        match fit_exponential_rate(&series) {
            Ok((rate, r2)) => println!("# {name}: rate = {rate:+.4}, r2 = {r2:.5}"),
            Err(e) => println!("# {name}: fit failed: {e}"),
        }
    }
    let first = &out.records[0];
    println!(
        "# ratios: u {:.3e}  theta {:.3e}  omega {:.3e}  (early stop: {})",
        last.err_u / first.err_u,
        last.err_theta / first.err_theta,
        last.err_omega / first.err_omega,
        out.stopped_early
    );
}
