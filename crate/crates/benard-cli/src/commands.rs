//! Command implementations shared by the CLI entry point.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use benard::assimilation::{
    run_twin, summarize_twin, NudgeParams, TwinConfig, TwinSummary,
};
use benard::benard::{
    nusselt_instant, random_perturbed_ic, stable_dt, Model, PhysParams, State, Stepper,
};
use benard::diagnostics::{read_checkpoint, write_checkpoint, write_timeseries};
use benard::spectral::Grid;
use benard::theory::{BoundConfig, BoundReport};

use crate::config::RunConfig;
use crate::CliError;

/// Paper-scale runs hide behind --long so default invocations stay desk-scale.
pub const LONG_RA_THRESHOLD: f64 = 2.5e7;

pub fn guard_long(cfg: &RunConfig, long: bool) -> Result<(), CliError> {
    if cfg.ra >= LONG_RA_THRESHOLD && !long {
        return Err(CliError::Config(format!(
            "Ra = {:.3e} is paper scale (hours); pass --long to confirm",
            cfg.ra
        )));
    }
    Ok(())
}

pub struct SpinUp {
    pub state: State,
    pub nu_series: Vec<(f64, f64)>,
    pub on_attractor: bool,
}

/// Integrate from the seeded perturbation until the running Nusselt average
/// changes by less than `spinup_tol` between consecutive windows of
/// `spinup_window` time units, or until `spinup_t_max`.
pub fn spin_up(cfg: &RunConfig, quiet: bool) -> Result<SpinUp, CliError> {
    let grid = Grid::new(cfg.nx1, cfg.nx2, cfg.aspect)?;
    let pp = cfg.params().map_err(CliError::Config)?;
    let model = Model::new(&grid, pp)?;
    let mut stepper = Stepper::new(&model);
    let mut state = random_perturbed_ic(&grid, cfg.seed, cfg.amplitude);
    let mut dt = stable_dt(&state, &pp, &model.poisson, cfg.cfl)?;

    let sample_every = 0.05f64.min(cfg.spinup_window / 20.0);
    let mut nu_series: Vec<(f64, f64)> = Vec::new();
    let mut next_sample = 0.0;
    let mut on_attractor = false;
    let mut steps = 0u64;
    let t0 = Instant::now();
    while state.t < cfg.spinup_t_max {
        if state.t >= next_sample {
            let nu = nusselt_instant(&state, &pp, &model.poisson)?;
            nu_series.push((state.t, nu));
            next_sample = state.t + sample_every;
            if window_converged(&nu_series, cfg.spinup_window, cfg.spinup_tol) {
                on_attractor = true;
                break;
            }
        }
        stepper.step(&mut state, dt)?;
        steps += 1;
        if steps % 50 == 0 {
            let fresh = stable_dt(&state, &pp, &model.poisson, cfg.cfl)?;
            if fresh < dt {
                dt = fresh;
            }
        }
        if !quiet && steps % 20_000 == 0 {
            eprintln!(
                "spin-up: t = {:.2}, Nu = {:.3}, {:.0} steps/s",
                state.t,
                nu_series.last().map(|x| x.1).unwrap_or(f64::NAN),
                steps as f64 / t0.elapsed().as_secs_f64()
            );
        }
    }
    Ok(SpinUp {
        state,
        nu_series,
        on_attractor,
    })
}

/// Running-average plateau test: the Nu average over the last window differs
/// from the previous window's average by less than `tol` relative.
fn window_converged(series: &[(f64, f64)], window: f64, tol: f64) -> bool {
    let t_now = match series.last() {
        Some(&(t, _)) => t,
        None => return false,
    };
    if t_now < 2.0 * window || series.len() < 16 {
        return false;
    }
    let mean_over = |lo: f64, hi: f64| -> Option<f64> {
        let vals: Vec<f64> = series
            .iter()
            .filter(|(t, _)| *t >= lo && *t < hi)
            .map(|&(_, nu)| nu)
            .collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    };
    match (
        mean_over(t_now - window, t_now + 1e-12),
        mean_over(t_now - 2.0 * window, t_now - window),
    ) {
        (Some(recent), Some(prev)) => (recent - prev).abs() < tol * recent.abs().max(1e-12),
        _ => false,
    }
}

pub fn cmd_reference(cfg: &RunConfig, long: bool) -> Result<(), CliError> {
    guard_long(cfg, long)?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(benard::Error::from)?;
    let spin = spin_up(cfg, false)?;
    let pp = cfg.params().map_err(CliError::Config)?;

    let ckpt = cfg.out_dir.join("reference.ckpt");
    write_checkpoint(&spin.state, &pp, &ckpt)?;
    let nu_csv = cfg.out_dir.join("reference_nu.csv");
    write_nu_series(&spin.nu_series, &nu_csv)?;

    let tail = nu_tail_average(&spin.nu_series, cfg.spinup_window);
    println!(
        "reference run: t = {:.3}, on_attractor = {}, Nu (last window avg) = {:.4}",
        spin.state.t, spin.on_attractor, tail
    );
    println!("checkpoint: {}", ckpt.display());
    println!("nu series : {}", nu_csv.display());
    Ok(())
}

pub fn write_nu_series(series: &[(f64, f64)], path: &Path) -> Result<(), CliError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(benard::Error::from)?);
    writeln!(w, "t,nu").map_err(benard::Error::from)?;
    for &(t, nu) in series {
        writeln!(w, "{t:.16e},{nu:.16e}").map_err(benard::Error::from)?;
    }
    Ok(())
}

pub fn nu_tail_average(series: &[(f64, f64)], window: f64) -> f64 {
    let t_end = series.last().map(|x| x.0).unwrap_or(0.0);
    let vals: Vec<f64> = series
        .iter()
        .filter(|(t, _)| *t >= t_end - window)
        .map(|x| x.1)
        .collect();
    if vals.is_empty() {
        f64::NAN
    } else {
        vals.iter().sum::<f64>() / vals.len() as f64
    }
}

/// Obtain the reference initial state: from the configured checkpoint if
/// given, otherwise by spinning up.
pub fn reference_state(cfg: &RunConfig) -> Result<(State, PhysParams), CliError> {
    match &cfg.ref_checkpoint {
        Some(path) => {
            let (state, pp) = read_checkpoint(path)?;
            let expect = cfg.params().map_err(CliError::Config)?;
            if pp != expect {
                return Err(CliError::Config(format!(
                    "checkpoint parameters (Ra={}, Pr={}, L={}) do not match the config",
                    pp.ra, pp.pr, pp.lx
                )));
            }
            if state.grid().nx1 != cfg.nx1 || state.grid().nx2 != cfg.nx2 {
                return Err(CliError::Config(format!(
                    "checkpoint grid {}x{} does not match config {}x{}",
                    state.grid().nx1,
                    state.grid().nx2,
                    cfg.nx1,
                    cfg.nx2
                )));
            }
            Ok((state, pp))
        }
        None => {
            let spin = spin_up(cfg, false)?;
            if !spin.on_attractor {
                eprintln!(
                    "warning: spin-up hit t_max = {} before the Nu plateau",
                    cfg.spinup_t_max
                );
            }
            Ok((spin.state, cfg.params().map_err(CliError::Config)?))
        }
    }
}

pub struct TwinArtifacts {
    pub summary: TwinSummary,
    pub series_path: PathBuf,
}

pub fn run_twin_once(
    cfg: &RunConfig,
    ref_state: &State,
    pp: PhysParams,
    nudge: NudgeParams,
    tag: &str,
) -> Result<TwinArtifacts, CliError> {
    let mut tw = TwinConfig::new(pp, nudge, cfg.t_final, cfg.sample_dt);
    tw.cfl = cfg.cfl;
    tw.stop_ratio = cfg.stop_ratio;
    tw.ref_checkpoint_out = Some(cfg.out_dir.join(format!("twin{tag}_ref_final.ckpt")));
    tw.da_checkpoint_out = Some(cfg.out_dir.join(format!("twin{tag}_da_final.ckpt")));
    let out = run_twin(ref_state, &tw)?;
    let series_path = cfg.out_dir.join(format!("twin{tag}.csv"));
    write_timeseries(&out.records, &series_path)?;
    let summary = summarize_twin(&out.records)?;
    Ok(TwinArtifacts {
        summary,
        series_path,
    })
}

pub fn cmd_twin(cfg: &RunConfig, long: bool) -> Result<(), CliError> {
    guard_long(cfg, long)?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(benard::Error::from)?;
    let (ref_state, pp) = reference_state(cfg)?;
    let nudge = NudgeParams::new(cfg.mu, cfg.interpolant)?;
    let art = run_twin_once(cfg, &ref_state, pp, nudge, "")?;

    println!("twin experiment: mu = {}, interpolant = {:?}", cfg.mu, cfg.interpolant);
    for (name, fit) in art.summary.channels() {
        println!(
            "  {name:<6} rate = {:+.4e}  r2 = {:.4}  final/initial = {:.3e}",
            fit.rate, fit.r2, fit.ratio
        );
    }
    println!("  converged = {}", if art.summary.converged { "yes" } else { "no" });
    println!("  time series: {}", art.series_path.display());

    let report = BoundReport::evaluate(
        &pp,
        cfg.mu,
        cfg.interpolant.resolution_h(cfg.aspect),
        &BoundConfig::default(),
    );
    print!("{}", report.to_text());
    Ok(())
}

pub fn cmd_sweep(
    cfg: &RunConfig,
    pairs: &[(usize, usize)],
    jobs: usize,
    long: bool,
) -> Result<(), CliError> {
    guard_long(cfg, long)?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(benard::Error::from)?;
    let (ref_state, pp) = reference_state(cfg)?;

    let jobs = jobs.max(1);
    let results: Vec<(usize, usize, Result<TwinArtifacts, CliError>)> = if jobs == 1 {
        pairs
            .iter()
            .map(|&(nf, nc)| {
                let nudge = NudgeParams::new(
                    cfg.mu,
                    benard::assimilation::InterpolantSpec::SpectralProjection { nf, nc },
                )
                .map_err(CliError::from);
                let art = nudge.and_then(|n| {
                    run_twin_once(cfg, &ref_state, pp, n, &format!("_{nf}x{nc}"))
                });
                (nf, nc, art)
            })
            .collect()
    } else {
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for chunk in pairs.chunks(pairs.len().div_ceil(jobs)) {
                let ref_state = &ref_state;
                let cfg = &cfg;
                handles.push(scope.spawn(move || {
                    chunk
                        .iter()
                        .map(|&(nf, nc)| {
                            let nudge = NudgeParams::new(
                                cfg.mu,
                                benard::assimilation::InterpolantSpec::SpectralProjection {
                                    nf,
                                    nc,
                                },
                            )
                            .map_err(CliError::from);
                            let art = nudge.and_then(|n| {
                                run_twin_once(cfg, ref_state, pp, n, &format!("_{nf}x{nc}"))
                            });
                            (nf, nc, art)
                        })
                        .collect::<Vec<_>>()
                }));
            }
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("sweep worker panicked"))
                .collect()
        })
    };

    let table_path = cfg.out_dir.join("sweep.csv");
    let mut w =
        std::io::BufWriter::new(std::fs::File::create(&table_path).map_err(benard::Error::from)?);
    writeln!(w, "nf,nc,rate_omega,r2_omega,converged").map_err(benard::Error::from)?;
    println!("nf  nc  rate_omega   r2      converged");
    for (nf, nc, art) in results {
        match art {
            Ok(a) => {
                writeln!(
                    w,
                    "{nf},{nc},{:.16e},{:.16e},{}",
                    a.summary.omega.rate, a.summary.omega.r2, a.summary.converged
                )
                .map_err(benard::Error::from)?;
                println!(
                    "{nf:<3} {nc:<3} {:+.4e}  {:.4}  {}",
                    a.summary.omega.rate,
                    a.summary.omega.r2,
                    if a.summary.converged { "yes" } else { "no" }
                );
            }
            Err(e) => return Err(e),
        }
    }
    println!("table: {}", table_path.display());
    Ok(())
}

pub fn cmd_bounds(cfg: &RunConfig, write_files: bool) -> Result<(), CliError> {
    let pp = cfg.params().map_err(CliError::Config)?;
    let report = BoundReport::evaluate(
        &pp,
        cfg.mu,
        cfg.interpolant.resolution_h(cfg.aspect),
        &BoundConfig::default(),
    );
    print!("{}", report.to_text());
    if write_files {
        std::fs::create_dir_all(&cfg.out_dir).map_err(benard::Error::from)?;
        std::fs::write(cfg.out_dir.join("bounds.txt"), report.to_text())
            .map_err(benard::Error::from)?;
        std::fs::write(cfg.out_dir.join("bounds.kv"), report.to_kv())
            .map_err(benard::Error::from)?;
        println!(
            "wrote {} and {}",
            cfg.out_dir.join("bounds.txt").display(),
            cfg.out_dir.join("bounds.kv").display()
        );
    }
    Ok(())
}

pub fn cmd_plotdata(series: &Path, out_dir: &Path) -> Result<(), CliError> {
    let records = benard::diagnostics::read_timeseries(series)?;
    std::fs::create_dir_all(out_dir).map_err(benard::Error::from)?;
    for (name, pick) in [
        ("err_u", 0usize),
        ("err_theta", 1),
        ("err_omega", 2),
    ] {
        let path = out_dir.join(format!("{name}.dat"));
        let mut w =
            std::io::BufWriter::new(std::fs::File::create(&path).map_err(benard::Error::from)?);
        writeln!(w, "# t log10_{name}").map_err(benard::Error::from)?;
        for r in &records {
            let e = match pick {
                0 => r.err_u,
                1 => r.err_theta,
                _ => r.err_omega,
            };
            writeln!(w, "{:.16e} {:.16e}", r.t, e.max(1e-300).log10())
                .map_err(benard::Error::from)?;
        }
        println!("wrote {}", path.display());
    }
    let path = out_dir.join("nusselt.dat");
    let mut w = std::io::BufWriter::new(std::fs::File::create(&path).map_err(benard::Error::from)?);
    writeln!(w, "# t nu_ref nu_da").map_err(benard::Error::from)?;
    for r in &records {
        writeln!(w, "{:.16e} {:.16e} {:.16e}", r.t, r.nu_ref, r.nu_da)
            .map_err(benard::Error::from)?;
    }
    println!("wrote {}", path.display());
    Ok(())
}
