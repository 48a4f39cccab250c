//! Error norms, exponential decay-rate fitting, and bit-exact persistence of
//! checkpoints and time series.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::assimilation::TwinRecord;
use crate::benard::{PhysParams, State};
use crate::elliptic::{velocity, PoissonSolver};
use crate::error::{Error, Result};
use crate::spectral::{l2_inner, to_spectral, Grid, PhysicalField};

/// L2 norms of the velocity, temperature and vorticity differences between the
/// reference and assimilated states. Velocities are reconstructed through the
/// elliptic solver, the only definition consistent with vorticity nudging.
pub fn error_norms(
    ref_s: &State,
    da_s: &State,
    ps: &Arc<PoissonSolver>,
) -> Result<(f64, f64, f64)> {
    let grid = ref_s.grid();
    if !grid.same_as(da_s.grid()) {
        return Err(Error::GridMismatch);
    }
    let mut diff = PhysicalField::zeros(grid);

    let sub_into = |a: &PhysicalField, b: &PhysicalField, out: &mut PhysicalField| {
        for ((o, &x), &y) in out
            .as_slice_mut()
            .iter_mut()
            .zip(a.as_slice())
            .zip(b.as_slice())
        {
            *o = x - y;
        }
    };

    sub_into(&ref_s.theta, &da_s.theta, &mut diff);
    let err_theta = l2_inner(&diff, &diff)?.max(0.0).sqrt();

    sub_into(&ref_s.omega, &da_s.omega, &mut diff);
    let err_omega = l2_inner(&diff, &diff)?.max(0.0).sqrt();

    let psi_r = ps.solve(&to_spectral(&ref_s.omega))?;
    let psi_d = ps.solve(&to_spectral(&da_s.omega))?;
    let (u1r, u2r) = velocity(&psi_r);
    let (u1d, u2d) = velocity(&psi_d);
    sub_into(&u1r, &u1d, &mut diff);
    let e1 = l2_inner(&diff, &diff)?.max(0.0);
    sub_into(&u2r, &u2d, &mut diff);
    let e2 = l2_inner(&diff, &diff)?.max(0.0);
    Ok(((e1 + e2).sqrt(), err_theta, err_omega))
}

/// Least-squares fit of `ln e` against `t`, returning `(rate, r_squared)`.
/// Samples with `e < 1e-14` (the floating-point floor) are excluded.
pub fn fit_exponential_rate(samples: &[(f64, f64)]) -> Result<(f64, f64)> {
    if samples.len() < 8 {
        return Err(Error::Fit(format!(
            "need at least 8 samples, got {}",
            samples.len()
        )));
    }
    if let Some((t, e)) = samples.iter().find(|(_, e)| !(*e > 0.0)) {
        return Err(Error::Fit(format!("non-positive error {e} at t = {t}")));
    }
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(_, e)| *e >= 1e-14)
        .map(|&(t, e)| (t, e.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Fit("all samples below the floating-point floor".into()));
    }
    let n = pts.len() as f64;
    let mean_t = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mut stt = 0.0;
    let mut sty = 0.0;
    let mut syy = 0.0;
    for &(t, y) in &pts {
        stt += (t - mean_t) * (t - mean_t);
        sty += (t - mean_t) * (y - mean_y);
        syy += (y - mean_y) * (y - mean_y);
    }
    if stt == 0.0 {
        return Err(Error::Fit("all samples at the same time".into()));
    }
    let rate = sty / stt;
    let ss_res = (syy - sty * sty / stt).max(0.0);
    let r2 = if syy > 0.0 {
        1.0 - ss_res / syy
    } else {
        // Perfectly flat data: the zero-rate fit is exact.
        1.0
    };
    Ok((rate, r2))
}

const MAGIC: &[u8; 16] = b"BENARD-DA-CKPT1\0";
const VERSION: u32 = 1;

/// CRC-64/XZ of a byte stream (reflected, poly 0x42F0E1EBA9EA3693).
fn crc64(data: &[u8]) -> u64 {
    const POLY: u64 = 0xC96C_5795_D787_0F42; // reflected
    let mut table = [0u64; 256];
    for (i, entry) in table.iter_mut().enumerate() {
        let mut crc = i as u64;
        for _ in 0..8 {
            crc = if crc & 1 == 1 {
                (crc >> 1) ^ POLY
            } else {
                crc >> 1
            };
        }
        *entry = crc;
    }
    let mut crc = !0u64;
    for &b in data {
        crc = table[((crc ^ b as u64) & 0xFF) as usize] ^ (crc >> 8);
    }
    !crc
}

/// Write a checkpoint: magic, then a little-endian payload of format version,
/// grid sizes, L, physical parameters, time and both collocation-value arrays
/// (row-major, x2 fastest), then a CRC-64 of the payload.
pub fn write_checkpoint(state: &State, pp: &PhysParams, path: &Path) -> Result<()> {
    let grid = state.grid();
    let mut payload =
        Vec::with_capacity(4 * 3 + 8 * 4 + 16 * grid.nx1 * grid.nx2);
    payload.extend_from_slice(&VERSION.to_le_bytes());
    payload.extend_from_slice(&(grid.nx1 as u32).to_le_bytes());
    payload.extend_from_slice(&(grid.nx2 as u32).to_le_bytes());
    payload.extend_from_slice(&grid.lx.to_le_bytes());
    payload.extend_from_slice(&pp.ra.to_le_bytes());
    payload.extend_from_slice(&pp.pr.to_le_bytes());
    payload.extend_from_slice(&state.t.to_le_bytes());
    for &v in state.omega.as_slice() {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    for &v in state.theta.as_slice() {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc64(&payload);

    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&payload)?;
    w.write_all(&crc.to_le_bytes())?;
    w.flush()?;
    Ok(())
}

/// Read a checkpoint back; magic, version and checksum are each validated with
/// a distinct error.
pub fn read_checkpoint(path: &Path) -> Result<(State, PhysParams)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 16 + 8 || &bytes[..16] != MAGIC {
        return Err(Error::CheckpointBadMagic);
    }
    let payload = &bytes[16..bytes.len() - 8];
    let stored_crc = u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().unwrap());
    if crc64(payload) != stored_crc {
        return Err(Error::CheckpointChecksum);
    }

    let mut off = 0usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        if off + n > payload.len() {
            return Err(Error::CheckpointTruncated(format!(
                "payload ends at byte {} of {}",
                payload.len(),
                off + n
            )));
        }
        let s = &payload[off..off + n];
        off += n;
        Ok(s)
    };
    let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
    if version != VERSION {
        return Err(Error::CheckpointVersion {
            found: version,
            expected: VERSION,
        });
    }
    let nx1 = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
    let nx2 = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
    let f64_at = |s: &[u8]| f64::from_le_bytes(s.try_into().unwrap());
    let lx = f64_at(take(8)?);
    let ra = f64_at(take(8)?);
    let pr = f64_at(take(8)?);
    let t = f64_at(take(8)?);

    let grid = Grid::new(nx1, nx2, lx)?;
    let pp = PhysParams::new(ra, pr, lx)?;
    let mut omega = PhysicalField::zeros(&grid);
    for v in omega.as_slice_mut() {
        *v = f64_at(take(8)?);
    }
    let mut theta = PhysicalField::zeros(&grid);
    for v in theta.as_slice_mut() {
        *v = f64_at(take(8)?);
    }
    if off != payload.len() {
        return Err(Error::CheckpointTruncated(format!(
            "{} trailing bytes",
            payload.len() - off
        )));
    }
    Ok((State { omega, theta, t }, pp))
}

const TS_HEADER: &str = "t,err_u,err_theta,err_omega,nu_ref,nu_da";

/// Write a twin time series as CSV with full double precision.
pub fn write_timeseries(records: &[TwinRecord], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{TS_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.t, r.err_u, r.err_theta, r.err_omega, r.nu_ref, r.nu_da
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Read a twin time series, validating the header and that t is strictly
/// increasing.
pub fn read_timeseries(path: &Path) -> Result<Vec<TwinRecord>> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut lines = reader.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim_end() == TS_HEADER => {}
        Some(Ok(h)) => {
            return Err(Error::TimeSeries(format!("unexpected header: {h:?}")));
        }
        _ => return Err(Error::TimeSeries("empty file".into())),
    }
    let mut out = Vec::new();
    let mut prev_t = f64::NEG_INFINITY;
    for (ln, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::TimeSeries(format!(
                "line {}: expected 6 fields, got {}",
                ln + 2,
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::TimeSeries(format!("line {}: {e}", ln + 2)))
        };
        let rec = TwinRecord {
            t: parse(fields[0])?,
            err_u: parse(fields[1])?,
            err_theta: parse(fields[2])?,
            err_omega: parse(fields[3])?,
            nu_ref: parse(fields[4])?,
            nu_da: parse(fields[5])?,
        };
        if rec.t <= prev_t {
            return Err(Error::TimeSeries(format!(
                "line {}: t = {} not strictly increasing",
                ln + 2,
                rec.t
            )));
        }
        prev_t = rec.t;
        out.push(rec);
    }
    Ok(out)
}
