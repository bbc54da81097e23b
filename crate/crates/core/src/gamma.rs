//! Spectral progress `γ(f, t)` estimated from deterministic trajectories.
//!
//! For a trajectory `x_0 .. x_T` on the grid `t_k = k/T`, the finite-difference
//! velocity `v_k = (x_{k+1} - x_k)/Δt` gives the clean prediction
//! `xp_k = x_k + (1 - t_k)·v_k`, and the last row uses `x_T` itself. Per
//! Fourier coordinate
//!
//! ```text
//! γ = clamp(1 - |X_T - XP|² / max(|X_T|², ε), 0, 1),   ε = 1e-12 · mean |X_T|²
//! ```
//!
//! which is then averaged over channels, binned radially (equal weight per
//! coordinate) and averaged over trajectories. Bands without coordinates are
//! reported as 1.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CnsError, Result};
use crate::field::{Field, GridShape};
use crate::interpolant::{Convention, VelocityModel};
use crate::noise::{csv_err, white_noise};
use crate::rng::chain_rng;
use crate::solvers::{integrate_with_rng, time_grid, DiffusionSpec, Record, Scheme, SolverConfig};
use crate::spectral::{forward_with, BandMap};

pub const FORMAT_VERSION: u32 = 1;
const FLOOR_FACTOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaMeta {
    pub version: u32,
    pub shape: GridShape,
    pub band_count: usize,
    pub rows: usize,
    pub samples: usize,
    pub model: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaMatrix {
    /// `values[k][b]` is γ of band `b` at `times[k]`.
    pub values: Vec<Vec<f64>>,
    pub times: Vec<f64>,
    pub meta: GammaMeta,
}

impl GammaMatrix {
    pub fn new(values: Vec<Vec<f64>>, times: Vec<f64>, meta: GammaMeta) -> Result<Self> {
        let m = Self { values, times, meta };
        m.validate()?;
        Ok(m)
    }

    pub fn band_count(&self) -> usize {
        self.meta.band_count
    }

    pub fn rows(&self) -> usize {
        self.values.len()
    }

    pub fn validate(&self) -> Result<()> {
        let nb = self.meta.band_count;
        if self.values.len() < 2 || self.values.len() != self.times.len() {
            return Err(CnsError::ShapeMismatch {
                expected: format!("at least 2 rows with one time each ({} times)", self.times.len()),
                actual: format!("{} rows", self.values.len()),
            });
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0]))
            || self.times[0] < 0.0
            || *self.times.last().expect("non-empty") != 1.0
        {
            return Err(CnsError::InvariantViolation(
                "gamma times must increase strictly within [0,1] and end at 1".into(),
            ));
        }
        for (k, row) in self.values.iter().enumerate() {
            if row.len() != nb {
                return Err(CnsError::ShapeMismatch {
                    expected: format!("{nb} bands"),
                    actual: format!("{} values in row {k}", row.len()),
                });
            }
            if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(CnsError::InvariantViolation(format!(
                    "gamma value {v} in row {k} outside [0,1]"
                )));
            }
        }
        let last = self.values.last().expect("non-empty");
        if last.iter().any(|v| (v - 1.0).abs() > 1e-12) {
            return Err(CnsError::InvariantViolation(
                "gamma row at the final time must be all ones".into(),
            ));
        }
        Ok(())
    }

    /// Row at time `t`, linearly interpolated between grid rows.
    pub fn row_at(&self, t: f64) -> Vec<f64> {
        let times = &self.times;
        if t <= times[0] {
            return self.values[0].clone();
        }
        let i = times.partition_point(|&x| x <= t);
        if i >= times.len() {
            return self.values[times.len() - 1].clone();
        }
        let (t0, t1) = (times[i - 1], times[i]);
        let w = (t - t0) / (t1 - t0);
        self.values[i - 1]
            .iter()
            .zip(&self.values[i])
            .map(|(a, b)| a * (1.0 - w) + b * w)
            .collect()
    }

    /// Rows for the left endpoints of a `steps`-step solver grid.
    pub fn rows_for_steps(&self, steps: usize) -> Vec<Vec<f64>> {
        let grid = time_grid(steps);
        if self.rows() == steps + 1 {
            return self.values[..steps].to_vec();
        }
        grid[..steps].iter().map(|&t| self.row_at(t)).collect()
    }

    /// First grid time at which band `b` reaches `level`, if any.
    pub fn first_time_reaching(&self, band: usize, level: f64) -> Option<f64> {
        self.values
            .iter()
            .zip(&self.times)
            .find(|(row, _)| row[band] >= level)
            .map(|(_, &t)| t)
    }
}

/// Monte-Carlo estimate with per-entry standard errors.
#[derive(Debug, Clone)]
pub struct GammaEstimate {
    pub matrix: GammaMatrix,
    pub std_error: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaConfig {
    pub steps: usize,
    pub batches: usize,
    pub batch_size: usize,
    pub seed: u64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
}

fn default_scheme() -> Scheme {
    Scheme::OdeEuler
}

impl GammaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps < 2 {
            return Err(CnsError::invalid(format!(
                "gamma estimation needs at least 2 steps, got {}",
                self.steps
            )));
        }
        if self.batches == 0 || self.batch_size == 0 {
            return Err(CnsError::invalid("gamma estimation needs at least one sample"));
        }
        if self.scheme.is_stochastic() {
            return Err(CnsError::invalid("gamma is estimated from deterministic trajectories"));
        }
        Ok(())
    }

    pub fn samples(&self) -> usize {
        self.batches * self.batch_size
    }
}

/// Per-trajectory γ rows (before batch averaging): `states.len()` rows.
pub fn trajectory_gamma(states: &[Field], times: &[f64], map: &BandMap) -> Result<Vec<Vec<f64>>> {
    if states.len() < 2 || states.len() != times.len() {
        return Err(CnsError::invalid(format!(
            "trajectory needs at least 2 states with matching times, got {} states and {} times",
            states.len(),
            times.len()
        )));
    }
    let shape = map.shape();
    for s in states {
        shape.ensure_eq(&s.shape())?;
    }
    let n = shape.plane_len();
    let channels = shape.channels;
    let last = states.len() - 1;
    let final_spec = forward_with(map.fft(), &states[last]);
    let mut floors = Vec::with_capacity(channels);
    for c in 0..channels {
        let mean = final_spec.channel(c).iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
        floors.push(if mean > 0.0 { FLOOR_FACTOR * mean } else { f64::MIN_POSITIVE });
    }
    let mut rows = Vec::with_capacity(states.len());
    for k in 0..=last {
        let pred = if k == last {
            states[last].clone()
        } else {
            let dt = times[k + 1] - times[k];
            let mut v = Field::lincomb(1.0 / dt, &states[k + 1], -1.0 / dt, &states[k]);
            v.scale(1.0 - times[k]);
            v.axpy(1.0, &states[k]);
            v
        };
        let spec = forward_with(map.fft(), &pred);
        let mut plane = vec![0.0; n];
        for c in 0..channels {
            let target = final_spec.channel(c);
            for (i, (p, f)) in spec.channel(c).iter().zip(target).enumerate() {
                let g = 1.0 - (p - f).norm_sqr() / f.norm_sqr().max(floors[c]);
                plane[i] += g.clamp(0.0, 1.0) / channels as f64;
            }
        }
        let mut row = map.bin_radially(&plane);
        for (b, &count) in map.counts().iter().enumerate() {
            if count == 0 {
                row[b] = 1.0;
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    c: f64,
}

impl Compensated {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.c += (self.sum - t) + v;
        } else {
            self.c += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.c
    }
}

/// Average per-trajectory rows; accumulation runs in the given order with
/// compensated summation.
pub fn average_rows(
    per_sample: &[Vec<Vec<f64>>],
    times: Vec<f64>,
    meta: GammaMeta,
) -> Result<GammaEstimate> {
    let n = per_sample.len();
    if n == 0 {
        return Err(CnsError::invalid("no trajectories to average"));
    }
    let rows = per_sample[0].len();
    let nb = meta.band_count;
    let mut sums = vec![vec![Compensated::default(); nb]; rows];
    let mut sq = vec![vec![Compensated::default(); nb]; rows];
    for s in per_sample {
        for (k, row) in s.iter().enumerate() {
            for (b, &v) in row.iter().enumerate() {
                sums[k][b].add(v);
                sq[k][b].add(v * v);
            }
        }
    }
    let nf = n as f64;
    let mut values = vec![vec![0.0; nb]; rows];
    let mut std_error = vec![vec![0.0; nb]; rows];
    for k in 0..rows {
        for b in 0..nb {
            let mean = (sums[k][b].value() / nf).clamp(0.0, 1.0);
            values[k][b] = mean;
            if n > 1 {
                let var = ((sq[k][b].value() - nf * mean * mean) / (nf - 1.0)).max(0.0);
                std_error[k][b] = (var / nf).sqrt();
            }
        }
    }
    // the final prediction equals the final state, so the last row is exact
    values[rows - 1].iter_mut().for_each(|v| *v = 1.0);
    let matrix = GammaMatrix::new(values, times, GammaMeta { samples: n, ..meta })?;
    Ok(GammaEstimate { matrix, std_error })
}

/// Estimate γ from deterministic trajectories of `model` started from white
/// noise. Sample `i` uses chain stream `i` of `config.seed`.
pub fn compute_gamma<M: VelocityModel + ?Sized>(
    model: &M,
    config: &GammaConfig,
    map: &BandMap,
    model_name: &str,
) -> Result<GammaEstimate> {
    config.validate()?;
    model.shape().ensure_eq(&map.shape())?;
    let solver = SolverConfig::new(config.scheme, config.steps, config.seed).with_record(Record::Full);
    let shape = map.shape();
    let per_sample: Vec<Vec<Vec<f64>>> = (0..config.samples())
        .into_par_iter()
        .map(|i| {
            let mut rng = chain_rng(config.seed, i as u64);
            let init = white_noise(shape, &mut rng);
            let tr = integrate_with_rng(model, &DiffusionSpec::none(), &solver, &init, &mut rng)?;
            trajectory_gamma(&tr.states, &tr.times, map)
        })
        .collect::<Result<_>>()?;
    let meta = GammaMeta {
        version: FORMAT_VERSION,
        shape,
        band_count: map.band_count(),
        rows: config.steps + 1,
        samples: per_sample.len(),
        model: model_name.to_string(),
    };
    average_rows(&per_sample, time_grid(config.steps), meta)
}

/// Linear progress law of an unbiased interpolation: `t` in data-at-one
/// time, `1 - t` in data-at-zero time.
pub fn gamma_target(t: f64, convention: Convention) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(CnsError::invalid(format!("time {t} outside [0,1]")));
    }
    Ok(match convention {
        Convention::DataAtOne => t,
        Convention::DataAtZero => 1.0 - t,
    })
}

/// Sidecar path `<stem>.meta.json` next to a gamma CSV.
pub fn meta_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

pub fn save_gamma(matrix: &GammaMatrix, path: &Path) -> Result<()> {
    write_band_table(path, &matrix.times, &matrix.values)?;
    let meta = serde_json::to_string_pretty(&matrix.meta).expect("meta serializes");
    let mp = meta_path(path);
    std::fs::write(&mp, meta).map_err(|e| CnsError::io(mp, e))
}

pub fn load_gamma(path: &Path) -> Result<GammaMatrix> {
    let mp = meta_path(path);
    let text = std::fs::read_to_string(&mp).map_err(|e| CnsError::io(&mp, e))?;
    let meta: GammaMeta = serde_json::from_str(&text).map_err(|e| CnsError::corrupt(&mp, e.to_string()))?;
    if meta.version != FORMAT_VERSION {
        return Err(CnsError::VersionMismatch {
            found: meta.version,
            expected: FORMAT_VERSION,
        });
    }
    let (times, values) = read_band_table(path, meta.band_count)?;
    if values.len() != meta.rows {
        return Err(CnsError::corrupt(
            path,
            format!("expected {} rows, found {}", meta.rows, values.len()),
        ));
    }
    GammaMatrix::new(values, times, meta)
}

/// CSV with header `t,band_0,..` and one row per time.
pub fn write_band_table(path: &Path, times: &[f64], rows: &[Vec<f64>]) -> Result<()> {
    let nb = rows.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header = vec!["t".to_string()];
    header.extend((0..nb).map(|b| format!("band_{b}")));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (t, row) in times.iter().zip(rows) {
        let mut rec = vec![t.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CnsError::io(path, e))
}

pub fn read_band_table(path: &Path, band_count: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.len() != band_count + 1 || header.get(0) != Some("t") {
        return Err(CnsError::ShapeMismatch {
            expected: format!("t plus {band_count} band columns"),
            actual: format!("{} columns", header.len()),
        });
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CnsError::corrupt(path, format!("bad number {s:?}")))
        };
        times.push(parse(&rec[0])?);
        values.push(rec.iter().skip(1).map(parse).collect::<Result<Vec<_>>>()?);
    }
    Ok((times, values))
}
