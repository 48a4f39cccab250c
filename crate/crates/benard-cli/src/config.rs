//! Flat `key = value` run configuration. Unknown keys are rejected; values are
//! validated positive where physical. The format is line-oriented text so runs
//! are reproducible bit-for-bit from the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use benard::assimilation::InterpolantSpec;
use benard::benard::PhysParams;

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub ra: f64,
    pub pr: f64,
    pub aspect: f64,
    pub nx1: usize,
    pub nx2: usize,
    pub cfl: f64,
    pub mu: f64,
    pub interpolant: InterpolantSpec,
    pub t_final: f64,
    pub sample_dt: f64,
    pub seed: u64,
    pub amplitude: f64,
    pub out_dir: PathBuf,
    pub ref_checkpoint: Option<PathBuf>,
    pub spinup_t_max: f64,
    pub spinup_window: f64,
    pub spinup_tol: f64,
    pub stop_ratio: Option<f64>,
    pub sweep_pairs: Vec<(usize, usize)>,
}

impl RunConfig {
    pub fn params(&self) -> Result<PhysParams, String> {
        PhysParams::new(self.ra, self.pr, self.aspect).map_err(|e| e.to_string())
    }

    pub fn parse_file(path: &Path) -> Result<RunConfig, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        Self::parse_str(&text)
    }

    pub fn parse_str(text: &str) -> Result<RunConfig, String> {
        let mut kv = BTreeMap::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key = value, got {raw:?}", ln + 1))?;
            let key = k.trim().to_string();
            if kv.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(format!("line {}: duplicate key {key}", ln + 1));
            }
        }

        const KNOWN: &[&str] = &[
            "ra", "pr", "aspect", "nx1", "nx2", "cfl", "mu", "interpolant", "nf", "nc", "mx1",
            "mx2", "t_final", "sample_dt", "seed", "amplitude", "out_dir", "ref_checkpoint",
            "spinup_t_max", "spinup_window", "spinup_tol", "stop_ratio", "sweep_pairs",
        ];
        for k in kv.keys() {
            if !KNOWN.contains(&k.as_str()) {
                return Err(format!("unknown config key: {k}"));
            }
        }

        let get_f64 = |key: &str, default: Option<f64>| -> Result<f64, String> {
            match kv.get(key) {
                Some(v) => v.parse::<f64>().map_err(|e| format!("{key}: {e}")),
                None => default.ok_or_else(|| format!("missing required key: {key}")),
            }
        };
        let get_usize = |key: &str, default: Option<usize>| -> Result<usize, String> {
            match kv.get(key) {
                Some(v) => v.parse::<usize>().map_err(|e| format!("{key}: {e}")),
                None => default.ok_or_else(|| format!("missing required key: {key}")),
            }
        };

        let ra = get_f64("ra", None)?;
        let pr = get_f64("pr", Some(1.0))?;
        let aspect = get_f64("aspect", Some(2.0))?;
        let nx1 = get_usize("nx1", None)?;
        let nx2 = get_usize("nx2", None)?;
        let cfl = get_f64("cfl", Some(0.5))?;
        let mu = get_f64("mu", Some(1.0))?;
        let t_final = get_f64("t_final", Some(20.0))?;
        let sample_dt = get_f64("sample_dt", Some(0.05))?;
        let seed = kv
            .get("seed")
            .map(|v| v.parse::<u64>().map_err(|e| format!("seed: {e}")))
            .transpose()?
            .unwrap_or(7);
        let amplitude = get_f64("amplitude", Some(0.1))?;

        for (name, v) in [
            ("ra", ra),
            ("pr", pr),
            ("aspect", aspect),
            ("cfl", cfl),
            ("t_final", t_final),
            ("sample_dt", sample_dt),
            ("amplitude", amplitude),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(format!("mu must be non-negative, got {mu}"));
        }
        if !(cfl <= 1.0) {
            return Err(format!("cfl must be in (0, 1], got {cfl}"));
        }

        let interpolant = match kv.get("interpolant").map(String::as_str) {
            None | Some("spectral") => InterpolantSpec::SpectralProjection {
                nf: get_usize("nf", Some(8))?,
                nc: get_usize("nc", Some(8))?,
            },
            Some("local_average") => InterpolantSpec::LocalAverage {
                mx1: get_usize("mx1", Some(8))?,
                mx2: get_usize("mx2", Some(8))?,
            },
            Some(other) => {
                return Err(format!(
                    "interpolant must be 'spectral' or 'local_average', got {other:?}"
                ))
            }
        };

        let stop_ratio = kv
            .get("stop_ratio")
            .map(|v| v.parse::<f64>().map_err(|e| format!("stop_ratio: {e}")))
            .transpose()?;
        if let Some(r) = stop_ratio {
            if !(r > 0.0 && r < 1.0) {
                return Err(format!("stop_ratio must be in (0, 1), got {r}"));
            }
        }

        let sweep_pairs = match kv.get("sweep_pairs") {
            None => Vec::new(),
            Some(v) => parse_pairs(v)?,
        };

        Ok(RunConfig {
            ra,
            pr,
            aspect,
            nx1,
            nx2,
            cfl,
            mu,
            interpolant,
            t_final,
            sample_dt,
            seed,
            amplitude,
            out_dir: kv
                .get("out_dir")
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("out")),
            ref_checkpoint: kv.get("ref_checkpoint").map(PathBuf::from),
            spinup_t_max: get_f64("spinup_t_max", Some(200.0))?,
            spinup_window: get_f64("spinup_window", Some(5.0))?,
            spinup_tol: get_f64("spinup_tol", Some(0.01))?,
            stop_ratio,
            sweep_pairs,
        })
    }
}

/// Parse a sweep list like `6x8,24x7,8x8`.
pub fn parse_pairs(text: &str) -> Result<Vec<(usize, usize)>, String> {
    let mut out = Vec::new();
    for item in text.split(',') {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        let (a, b) = item
            .split_once('x')
            .ok_or_else(|| format!("sweep pair {item:?} must look like 6x8"))?;
        out.push((
            a.trim().parse::<usize>().map_err(|e| format!("{item}: {e}"))?,
            b.trim().parse::<usize>().map_err(|e| format!("{item}: {e}"))?,
        ));
    }
    if out.is_empty() {
        return Err("no sweep pairs given".into());
    }
    Ok(out)
}
