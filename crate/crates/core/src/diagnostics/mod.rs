//! Spectral gap, noise persistence and energy-drift measurements.

pub mod svg;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CnsError, Result};
use crate::field::Field;
use crate::interpolant::{GaussianMixtureOracle, ScoreError, VelocityModel};
use crate::noise::{csv_err, white_noise};
use crate::rng::{chain_rng, SimRng};
use crate::solvers::{time_grid, DiffusionSpec, Trajectory};
use crate::spectral::{psd, BandMap, Spectrum};

/// Per-band comparison of generated and target PSDs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralGapReport {
    pub radii: Vec<f64>,
    pub s_generated: Vec<f64>,
    pub s_target: Vec<f64>,
    /// `log10(S_gen / S_target)`; `None` where either PSD is zero.
    pub signed_log_error: Vec<Option<f64>>,
    pub log_mae: f64,
    pub excluded: usize,
}

pub fn spectral_gap(generated: &[Field], target: &[Field], map: &BandMap) -> Result<SpectralGapReport> {
    if generated.is_empty() || target.is_empty() {
        return Err(CnsError::invalid("spectral gap needs non-empty sample sets"));
    }
    let s_generated = psd(generated, map)?;
    let s_target = psd(target, map)?;
    Ok(gap_from_psd(s_generated, s_target, map)?)
}

pub fn gap_from_psd(s_generated: Vec<f64>, s_target: Vec<f64>, map: &BandMap) -> Result<SpectralGapReport> {
    let signed_log_error: Vec<Option<f64>> = s_generated
        .iter()
        .zip(&s_target)
        .map(|(&g, &t)| (g > 0.0 && t > 0.0).then(|| (g / t).log10()))
        .collect();
    let kept: Vec<f64> = signed_log_error.iter().flatten().copied().collect();
    if kept.is_empty() {
        return Err(CnsError::Degenerate("every band was excluded from the spectral gap".into()));
    }
    let log_mae = kept.iter().map(|e| e.abs()).sum::<f64>() / kept.len() as f64;
    Ok(SpectralGapReport {
        radii: map.mean_radius().to_vec(),
        excluded: signed_log_error.len() - kept.len(),
        s_generated,
        s_target,
        signed_log_error,
        log_mae,
    })
}

impl SpectralGapReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        w.write_record(["band", "radius", "s_generated", "s_target", "signed_log_error", "log_mae"])
            .map_err(|e| csv_err(path, e))?;
        for b in 0..self.radii.len() {
            w.write_record([
                b.to_string(),
                self.radii[b].to_string(),
                self.s_generated[b].to_string(),
                self.s_target[b].to_string(),
                self.signed_log_error[b].map_or(String::new(), |e| e.to_string()),
                self.log_mae.to_string(),
            ])
            .map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| CnsError::io(path, e))
    }
}

/// Split of the per-band residual `Σ|X - P|² / Σ|X|²` between a reference
/// field `X` and a prediction `P` into a magnitude part `(|X| - |P|)²` and a
/// phase part `2|X||P|(1 - cos Δφ)`. The two parts add up to the total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSplit {
    pub amplitude: Vec<f64>,
    pub phase: Vec<f64>,
}

pub fn residual_split(reference: &Field, prediction: &Field, map: &BandMap) -> Result<ResidualSplit> {
    let x = map.forward(reference)?;
    let p = map.forward(prediction)?;
    let nb = map.band_count();
    let mut amp = vec![0.0; nb];
    let mut phase = vec![0.0; nb];
    let mut energy = vec![0.0; nb];
    for c in 0..x.shape().channels {
        for ((a, b), &band) in x.channel(c).iter().zip(p.channel(c)).zip(map.indices()) {
            let (ma, mb) = (a.norm(), b.norm());
            amp[band] += (ma - mb).powi(2);
            phase[band] += 2.0 * (ma * mb - (a * b.conj()).re);
            energy[band] += ma * ma;
        }
    }
    for b in 0..nb {
        let e = if energy[b] > 0.0 { energy[b] } else { 1.0 };
        amp[b] /= e;
        phase[b] /= e;
    }
    Ok(ResidualSplit { amplitude: amp, phase })
}

/// Band-wise mean cosines between projections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceReport {
    /// `cos(P_b[init], P_b[final])` averaged over trajectories.
    pub init_cosine: Vec<Option<f64>>,
    /// `cos(P_b[Σ injected], P_b[final])`, SDE trajectories only.
    pub injected_cosine: Option<Vec<Option<f64>>>,
    /// Number of (trajectory, band) pairs skipped for zero-norm projections.
    pub skipped: Vec<usize>,
    /// Cosines treat all channels as one joint vector.
    pub reduction: String,
}

fn band_inner(a: &Spectrum, b: &Spectrum, map: &BandMap) -> Vec<f64> {
    let norm = 1.0 / map.shape().plane_len() as f64;
    let mut out = vec![0.0; map.band_count()];
    for c in 0..a.shape().channels {
        for ((x, y), &band) in a.channel(c).iter().zip(b.channel(c)).zip(map.indices()) {
            out[band] += (x * y.conj()).re * norm;
        }
    }
    out
}

/// Per-band cosine of two fields; `None` where a projection vanishes.
pub fn band_cosines(a: &Field, b: &Field, map: &BandMap) -> Result<Vec<Option<f64>>> {
    let sa = map.forward(a)?;
    let sb = map.forward(b)?;
    let ab = band_inner(&sa, &sb, map);
    let aa = map.band_energies_of(&sa);
    let bb = map.band_energies_of(&sb);
    Ok((0..map.band_count())
        .map(|i| {
            let d = (aa[i] * bb[i]).sqrt();
            (d > 1e-300).then(|| ab[i] / d)
        })
        .collect())
}

fn mean_cosines(pairs: &[(Field, Field)], map: &BandMap, skipped: &mut [usize]) -> Result<Vec<Option<f64>>> {
    let nb = map.band_count();
    let mut sums = vec![0.0; nb];
    let mut counts = vec![0usize; nb];
    for (a, b) in pairs {
        for (i, c) in band_cosines(a, b, map)?.into_iter().enumerate() {
            match c {
                Some(v) => {
                    sums[i] += v;
                    counts[i] += 1;
                }
                None => skipped[i] += 1,
            }
        }
    }
    Ok(sums
        .iter()
        .zip(&counts)
        .map(|(s, &n)| (n > 0).then(|| s / n as f64))
        .collect())
}

pub fn noise_persistence(trajectories: &[Trajectory], map: &BandMap) -> Result<PersistenceReport> {
    if trajectories.is_empty() {
        return Err(CnsError::invalid("noise persistence needs at least one trajectory"));
    }
    let mut skipped = vec![0usize; map.band_count()];
    let init_pairs: Vec<(Field, Field)> = trajectories
        .iter()
        .map(|t| (t.initial().clone(), t.terminal().clone()))
        .collect();
    let init_cosine = mean_cosines(&init_pairs, map, &mut skipped)?;
    let injected_cosine = if trajectories.iter().all(|t| t.cumulative_noise.is_some()) {
        let pairs: Vec<(Field, Field)> = trajectories
            .iter()
            .map(|t| (t.cumulative_noise.clone().expect("checked"), t.terminal().clone()))
            .collect();
        Some(mean_cosines(&pairs, map, &mut skipped)?)
    } else {
        None
    };
    Ok(PersistenceReport {
        init_cosine,
        injected_cosine,
        skipped,
        reduction: "joint".into(),
    })
}

impl PersistenceReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        w.write_record(["band", "init_cosine", "injected_cosine", "skipped"])
            .map_err(|e| csv_err(path, e))?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        for b in 0..self.init_cosine.len() {
            let inj = self.injected_cosine.as_ref().and_then(|v| v[b]);
            w.write_record([b.to_string(), opt(self.init_cosine[b]), opt(inj), self.skipped[b].to_string()])
                .map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| CnsError::io(path, e))
    }
}

/// Mean and standard deviation of band-projected cosines between independent
/// white fields: the null distribution for persistence claims.
pub fn null_cosines(map: &BandMap, samples: usize, rng: &mut SimRng) -> Result<(Vec<f64>, Vec<f64>)> {
    let nb = map.band_count();
    let mut s = vec![0.0; nb];
    let mut s2 = vec![0.0; nb];
    let mut n = vec![0usize; nb];
    for _ in 0..samples {
        let a = white_noise(map.shape(), rng);
        let b = white_noise(map.shape(), rng);
        for (i, c) in band_cosines(&a, &b, map)?.into_iter().enumerate() {
            if let Some(v) = c {
                s[i] += v;
                s2[i] += v * v;
                n[i] += 1;
            }
        }
    }
    let mean: Vec<f64> = (0..nb).map(|i| s[i] / n[i].max(1) as f64).collect();
    let sd = (0..nb)
        .map(|i| {
            let m = mean[i];
            (s2[i] / n[i].max(1) as f64 - m * m).max(0.0).sqrt()
        })
        .collect();
    Ok((mean, sd))
}

/// Sign of the accumulated excess of one band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `Δ_f > 0`: the SDE injects more energy than the ODE transports.
    OverAllocation,
    /// `Δ_f < 0`.
    UnderAllocation,
    /// Not distinguishable from zero.
    Neutral,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyDriftRecord {
    pub times: Vec<f64>,
    /// Mean of `½‖x_t‖²` over chains on the grid, ODE and SDE.
    pub ode_energy: Vec<f64>,
    pub sde_energy: Vec<f64>,
    /// `Γ_f(t_k) = E⟨P_f x_k, e(x_k, t_k)⟩`, one row per step.
    pub correlation: Vec<Vec<f64>>,
    /// `Δ_f = Σ_k g²(t_k)·Γ_f(t_k)·Δt`, averaged over chains.
    pub excess: Vec<f64>,
    pub excess_se: Vec<f64>,
    pub z: Vec<f64>,
    pub regime: Vec<Regime>,
    /// Mean terminal energy difference SDE − ODE and its standard error.
    pub terminal_gap: f64,
    pub terminal_gap_se: f64,
    /// Mean terminal band energy difference `‖P_f x_T^SDE‖² − ‖P_f x_T^ODE‖²`.
    pub terminal_band_gap: Vec<f64>,
    pub chains: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftConfig {
    pub steps: usize,
    pub chains: usize,
    pub seed: u64,
    /// `|z|` above which a band is classified as over/under-allocating.
    #[serde(default = "default_z")]
    pub z_threshold: f64,
}

/// Relative resolution of `Δ_f` against `Σ_k g²‖P_f x_k‖²Δt`.
const RESOLUTION: f64 = 1e-12;

fn default_z() -> f64 {
    2.0
}

struct ChainDrift {
    ode_energy: Vec<f64>,
    sde_energy: Vec<f64>,
    correlation: Vec<Vec<f64>>,
    excess: Vec<f64>,
    throughput: Vec<f64>,
    terminal_band_gap: Vec<f64>,
}

fn drift_chain(
    oracle: &GaussianMixtureOracle,
    error: &dyn ScoreError,
    diffusion: &DiffusionSpec,
    map: &BandMap,
    cfg: &DriftConfig,
    chain: usize,
) -> Result<ChainDrift> {
    let path = oracle.path();
    let shape = map.shape();
    let mut rng = chain_rng(cfg.seed, chain as u64);
    let init = white_noise(shape, &mut rng);
    let h = 1.0 / cfg.steps as f64;
    let times = time_grid(cfg.steps);
    let mut xo = init.clone();
    let mut xs = init;
    let mut ode_energy = vec![0.5 * xo.norm_sq()];
    let mut sde_energy = vec![0.5 * xs.norm_sq()];
    let mut correlation = Vec::with_capacity(cfg.steps);
    let mut excess = vec![0.0; map.band_count()];
    let mut throughput = vec![0.0; map.band_count()];
    for k in 0..cfg.steps {
        let t = times[k];
        let v = oracle.velocity(&xo, t)?;
        xo.axpy(h, &v);

        let p = oracle.predict(&xs, t)?;
        let sigma = path.sigma(t);
        let exact_score = p.noise.scaled(-1.0 / sigma);
        let e = error.score_error(&xs, t, &exact_score)?;
        let xs_spec = map.forward(&xs)?;
        let gamma = band_inner(&xs_spec, &map.forward(&e)?, map);
        let g2 = diffusion.g2(t, &path);
        for (acc, g) in excess.iter_mut().zip(&gamma) {
            *acc += g2 * g * h;
        }
        for (acc, en) in throughput.iter_mut().zip(map.band_energies_of(&xs_spec)) {
            *acc += g2 * en * h;
        }
        correlation.push(gamma);
        let d = diffusion.d(t, &path);
        let mut drift = p.velocity;
        if d > 0.0 {
            drift.axpy(-diffusion.d_over_sigma(t, &path), &p.noise);
            drift.axpy(d, &e);
        }
        let xi = white_noise(shape, &mut rng);
        xs.axpy(h, &drift);
        if d > 0.0 {
            xs.axpy((2.0 * d * h).sqrt(), &xi);
        }
        if !xs.is_finite() || !xo.is_finite() {
            return Err(CnsError::Diverged { step: k, time: t });
        }
        ode_energy.push(0.5 * xo.norm_sq());
        sde_energy.push(0.5 * xs.norm_sq());
    }
    let eo = map.band_energies(&xo)?;
    let es = map.band_energies(&xs)?;
    Ok(ChainDrift {
        ode_energy,
        sde_energy,
        correlation,
        excess,
        throughput,
        terminal_band_gap: es.iter().zip(&eo).map(|(s, o)| s - o).collect(),
    })
}

fn mean_se(values: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = values.clone().sum::<f64>() / nf;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    (mean, (var / nf).sqrt())
}

/// Paired ODE/SDE runs from shared initial noise. The ODE follows the exact
/// oracle velocity; the SDE adds `D·e` to the exact score correction, and
/// `Γ_f` is measured along the SDE path.
pub fn energy_drift(
    oracle: &GaussianMixtureOracle,
    error: &dyn ScoreError,
    diffusion: &DiffusionSpec,
    map: &BandMap,
    cfg: &DriftConfig,
) -> Result<EnergyDriftRecord> {
    if cfg.steps == 0 || cfg.chains == 0 {
        return Err(CnsError::invalid("energy drift needs steps and chains"));
    }
    if error.band_count() != map.band_count() {
        return Err(CnsError::invalid("score error and band map disagree on the band count"));
    }
    oracle.shape().ensure_eq(&map.shape())?;
    diffusion.validate()?;
    let runs: Vec<ChainDrift> = (0..cfg.chains)
        .into_par_iter()
        .map(|i| drift_chain(oracle, error, diffusion, map, cfg, i))
        .collect::<Result<_>>()?;
    let n = runs.len();
    let nb = map.band_count();
    let rows = cfg.steps + 1;
    let avg = |f: &dyn Fn(&ChainDrift) -> f64| runs.iter().map(f).sum::<f64>() / n as f64;
    let ode_energy = (0..rows).map(|k| avg(&|r| r.ode_energy[k])).collect();
    let sde_energy = (0..rows).map(|k| avg(&|r| r.sde_energy[k])).collect();
    let correlation = (0..cfg.steps)
        .map(|k| (0..nb).map(|b| avg(&|r| r.correlation[k][b])).collect())
        .collect();
    let mut excess = Vec::with_capacity(nb);
    let mut excess_se = Vec::with_capacity(nb);
    let mut z = Vec::with_capacity(nb);
    let mut regime = Vec::with_capacity(nb);
    for b in 0..nb {
        let (m, se) = mean_se(runs.iter().map(|r| r.excess[b]), n);
        // excess below the rounding resolution of the band's energy throughput counts as zero
        let floor = RESOLUTION * runs.iter().map(|r| r.throughput[b]).sum::<f64>() / n as f64;
        let se_eff = se.max(floor);
        let zb = if se_eff > 0.0 { m / se_eff } else if m == 0.0 { 0.0 } else { m.signum() * f64::INFINITY };
        excess.push(m);
        excess_se.push(se);
        z.push(zb);
        regime.push(if zb > cfg.z_threshold {
            Regime::OverAllocation
        } else if zb < -cfg.z_threshold {
            Regime::UnderAllocation
        } else {
            Regime::Neutral
        });
    }
    let last = cfg.steps;
    let (terminal_gap, terminal_gap_se) =
        mean_se(runs.iter().map(|r| r.sde_energy[last] - r.ode_energy[last]), n);
    let terminal_band_gap = (0..nb).map(|b| avg(&|r| r.terminal_band_gap[b])).collect();
    Ok(EnergyDriftRecord {
        times: time_grid(cfg.steps),
        ode_energy,
        sde_energy,
        correlation,
        excess,
        excess_se,
        z,
        regime,
        terminal_gap,
        terminal_gap_se,
        terminal_band_gap,
        chains: n,
    })
}

impl EnergyDriftRecord {
    /// Per-band summary CSV.
    pub fn write_bands_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        w.write_record(["band", "excess", "excess_se", "z", "regime", "terminal_band_gap"])
            .map_err(|e| csv_err(path, e))?;
        for b in 0..self.excess.len() {
            let regime = match self.regime[b] {
                Regime::OverAllocation => "over",
                Regime::UnderAllocation => "under",
                Regime::Neutral => "neutral",
            };
            w.write_record([
                b.to_string(),
                self.excess[b].to_string(),
                self.excess_se[b].to_string(),
                self.z[b].to_string(),
                regime.to_string(),
                self.terminal_band_gap[b].to_string(),
            ])
            .map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| CnsError::io(path, e))
    }

    /// Per-step CSV: energies and `Γ_f` columns (empty at the final time).
    pub fn write_steps_csv(&self, path: &Path) -> Result<()> {
        let nb = self.excess.len();
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        let mut header = vec!["step".to_string(), "t".into(), "ode_energy".into(), "sde_energy".into()];
        header.extend((0..nb).map(|b| format!("corr_{b}")));
        w.write_record(&header).map_err(|e| csv_err(path, e))?;
        for k in 0..self.times.len() {
            let mut rec = vec![
                k.to_string(),
                self.times[k].to_string(),
                self.ode_energy[k].to_string(),
                self.sde_energy[k].to_string(),
            ];
            match self.correlation.get(k) {
                Some(row) => rec.extend(row.iter().map(|v| v.to_string())),
                None => rec.extend((0..nb).map(|_| String::new())),
            }
            w.write_record(&rec).map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| CnsError::io(path, e))
    }
}
