//! Variance-conserving colored-noise schedules and the sampling loop that
//! consumes them.
//!
//! A schedule assigns each solver step a per-band amplitude
//!
//! ```text
//! β(f, t) ∝ sqrt(1 - γ̃(f, t)) · ρ_f^{a(t)},      γ̃ = (γ / c)^p
//! ```
//!
//! normalized so that the mean of `β²` over all frequency coordinates is 1.
//! Bands that are still far from resolved receive more of the fixed noise
//! budget.

use std::path::Path;
use std::sync::Arc;

use rand::seq::index::sample as sample_indices;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CnsError, Result};
use crate::field::Field;
use crate::gamma::{read_band_table, write_band_table, GammaMatrix};
use crate::interpolant::VelocityModel;
use crate::noise::{band_radii, color_noise, BandScaleProfile, NormalizationMode};
use crate::solvers::{
    integrate, sample_chains, time_grid, DiffusionSpec, Inits, NoiseColoring, SolverConfig, Trajectory,
};
use crate::spectral::BandMap;

/// Rows whose unnormalized mean square falls below this are treated as
/// having no remaining deficit and fall back to white noise.
const ZERO_DEFICIT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum TiltInterpolation {
    Linear,
    /// `a(t) = start + (end - start)·(1 - e^{-rate·t})/(1 - e^{-rate})`.
    Exponential { rate: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tilt {
    pub start: f64,
    pub end: f64,
    pub interpolation: TiltInterpolation,
}

impl Tilt {
    pub fn exponent(&self, t: f64) -> f64 {
        let w = match self.interpolation {
            TiltInterpolation::Linear => t,
            TiltInterpolation::Exponential { rate } => {
                if rate == 0.0 {
                    t
                } else {
                    (-(rate * t)).exp_m1() / (-rate).exp_m1()
                }
            }
        };
        self.start + (self.end - self.start) * w
    }
}

fn default_one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelaxationConfig {
    #[serde(default = "default_one")]
    pub gamma_power: f64,
    #[serde(default = "default_one")]
    pub gamma_divider: f64,
    #[serde(default)]
    pub tilt: Option<Tilt>,
    /// Multiplier on the injected noise amplitude.
    #[serde(default = "default_one")]
    pub energy_scale: f64,
}

impl Default for RelaxationConfig {
    fn default() -> Self {
        Self {
            gamma_power: 1.0,
            gamma_divider: 1.0,
            tilt: None,
            energy_scale: 1.0,
        }
    }
}

impl RelaxationConfig {
    /// Baseline relaxations for an unguided latent transformer sampler.
    pub fn sit_unguided() -> Self {
        Self {
            gamma_power: 0.75,
            gamma_divider: 1.73,
            tilt: Some(Tilt {
                start: 0.15,
                end: -0.5,
                interpolation: TiltInterpolation::Exponential { rate: 0.75 },
            }),
            energy_scale: 0.98,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_power.is_finite() && self.gamma_power > 0.0) {
            return Err(CnsError::invalid(format!(
                "gamma_power must be positive, got {}",
                self.gamma_power
            )));
        }
        if !(self.gamma_divider.is_finite() && self.gamma_divider >= 1.0) {
            return Err(CnsError::invalid(format!(
                "gamma_divider must be at least 1, got {}",
                self.gamma_divider
            )));
        }
        if !(self.energy_scale > 0.0 && self.energy_scale <= 2.0) {
            return Err(CnsError::invalid(format!(
                "energy_scale must lie in (0, 2], got {}",
                self.energy_scale
            )));
        }
        if !(0.9..=1.01).contains(&self.energy_scale) {
            log::warn!(
                "energy_scale {} breaks the variance budget noticeably",
                self.energy_scale
            );
        }
        if let Some(t) = &self.tilt {
            let ok = t.start.is_finite()
                && t.end.is_finite()
                && match t.interpolation {
                    TiltInterpolation::Linear => true,
                    TiltInterpolation::Exponential { rate } => rate.is_finite(),
                };
            if !ok {
                return Err(CnsError::invalid("tilt parameters must be finite"));
            }
        }
        Ok(())
    }
}

/// Per-step band amplitudes, one row per solver step.
#[derive(Debug, Clone, PartialEq)]
pub struct CnsSchedule {
    pub beta: Vec<Vec<f64>>,
    /// Left-endpoint time of each row.
    pub times: Vec<f64>,
    pub energy_scale: f64,
    pub source: String,
}

impl CnsSchedule {
    pub fn steps(&self) -> usize {
        self.beta.len()
    }

    pub fn band_count(&self) -> usize {
        self.beta.first().map_or(0, Vec::len)
    }

    /// All-ones schedule (white noise).
    pub fn white(steps: usize, band_count: usize) -> Self {
        let times = time_grid(steps)[..steps].to_vec();
        Self {
            beta: vec![vec![1.0; band_count]; steps],
            times,
            energy_scale: 1.0,
            source: "white".into(),
        }
    }

    /// Coordinate-weighted RMS of each row.
    pub fn row_rms(&self, map: &BandMap) -> Vec<f64> {
        self.beta.iter().map(|r| weighted_rms(r, map)).collect()
    }

    pub fn validate(&self, map: &BandMap) -> Result<()> {
        if self.beta.is_empty() || self.beta.len() != self.times.len() {
            return Err(CnsError::invalid("schedule needs one time per row"));
        }
        for (k, row) in self.beta.iter().enumerate() {
            if row.len() != map.band_count() {
                return Err(CnsError::ShapeMismatch {
                    expected: format!("{} bands", map.band_count()),
                    actual: format!("{} values in row {k}", row.len()),
                });
            }
            if row.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
                return Err(CnsError::InvariantViolation(format!(
                    "schedule row {k} has a non-positive amplitude"
                )));
            }
            let rms = weighted_rms(row, map);
            if (rms - 1.0).abs() > 1e-10 {
                return Err(CnsError::InvariantViolation(format!(
                    "schedule row {k} has RMS {rms}"
                )));
            }
        }
        Ok(())
    }

    /// Schedule on a `steps`-step grid; rows are interpolated linearly in `t`
    /// and renormalized when the step counts differ.
    pub fn resample(&self, steps: usize, map: &BandMap) -> Result<Self> {
        if steps == self.steps() {
            return Ok(self.clone());
        }
        if steps == 0 {
            return Err(CnsError::invalid("schedule needs at least one step"));
        }
        let grid = time_grid(steps);
        let beta = grid[..steps]
            .iter()
            .map(|&t| normalize_row(interpolate_rows(&self.times, &self.beta, t), map))
            .collect();
        Ok(Self {
            beta,
            times: grid[..steps].to_vec(),
            energy_scale: self.energy_scale,
            source: self.source.clone(),
        })
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        write_band_table(path, &self.times, &self.beta)
    }

    pub fn load_csv(path: &Path, map: &BandMap) -> Result<Self> {
        let (times, beta) = read_band_table(path, map.band_count())?;
        let s = Self {
            beta,
            times,
            energy_scale: 1.0,
            source: path.display().to_string(),
        };
        s.validate(map)?;
        Ok(s)
    }
}

fn interpolate_rows(times: &[f64], rows: &[Vec<f64>], t: f64) -> Vec<f64> {
    if t <= times[0] {
        return rows[0].clone();
    }
    let i = times.partition_point(|&x| x <= t);
    if i >= times.len() {
        return rows[times.len() - 1].clone();
    }
    let w = (t - times[i - 1]) / (times[i] - times[i - 1]);
    rows[i - 1]
        .iter()
        .zip(&rows[i])
        .map(|(a, b)| a * (1.0 - w) + b * w)
        .collect()
}

fn weighted_rms(row: &[f64], map: &BandMap) -> f64 {
    let sq: Vec<f64> = row.iter().map(|b| b * b).collect();
    map.coordinate_mean(&sq).sqrt()
}

/// Scale a non-negative profile to unit coordinate RMS. Rows without
/// remaining deficit become white; empty bands are set to 1.
fn normalize_row(mut row: Vec<f64>, map: &BandMap) -> Vec<f64> {
    let sq: Vec<f64> = row.iter().map(|b| b * b).collect();
    let ms = map.coordinate_mean(&sq);
    if !(ms > ZERO_DEFICIT) || !ms.is_finite() {
        return vec![1.0; row.len()];
    }
    let rms = ms.sqrt();
    for (b, v) in row.iter_mut().enumerate() {
        *v = if map.counts()[b] == 0 { 1.0 } else { *v / rms };
    }
    row
}

/// Unnormalized profile `sqrt(1 - γ̃)`, optionally tilted.
fn raw_profile(gamma_row: &[f64], t: f64, relax: &RelaxationConfig, radii: &[f64]) -> Vec<f64> {
    gamma_row
        .iter()
        .enumerate()
        .map(|(b, &g)| {
            let gt = (g / relax.gamma_divider).powf(relax.gamma_power);
            let mut p = (1.0 - gt).max(0.0).sqrt();
            if let Some(tilt) = &relax.tilt {
                p *= radii[b].powf(tilt.exponent(t));
            }
            p
        })
        .collect()
}

/// Radii for the tilt; the DC band borrows band 1's radius.
fn tilt_radii(map: &BandMap) -> Vec<f64> {
    let mut r = band_radii(map);
    if r.len() > 1 {
        r[0] = r[1];
    } else {
        r[0] = 1.0;
    }
    r
}

/// Schedule from γ rows given at `times` (one row per solver step).
pub fn schedule_from_rows(
    rows: &[Vec<f64>],
    times: &[f64],
    map: &BandMap,
    relax: &RelaxationConfig,
) -> Result<CnsSchedule> {
    relax.validate()?;
    if rows.is_empty() || rows.len() != times.len() {
        return Err(CnsError::invalid("need one time per gamma row"));
    }
    let radii = tilt_radii(map);
    let mut beta = Vec::with_capacity(rows.len());
    for (row, &t) in rows.iter().zip(times) {
        if row.len() != map.band_count() {
            return Err(CnsError::ShapeMismatch {
                expected: format!("{} bands", map.band_count()),
                actual: format!("{} gamma values", row.len()),
            });
        }
        if row.iter().any(|g| !(0.0..=1.0).contains(g)) {
            return Err(CnsError::InvariantViolation("gamma outside [0,1]".into()));
        }
        beta.push(normalize_row(raw_profile(row, t, relax, &radii), map));
    }
    Ok(CnsSchedule {
        beta,
        times: times.to_vec(),
        energy_scale: relax.energy_scale,
        source: String::new(),
    })
}

/// Build the schedule for `steps` solver steps (defaults to the γ grid).
pub fn build_schedule(
    gamma: &GammaMatrix,
    map: &BandMap,
    relax: &RelaxationConfig,
    steps: Option<usize>,
) -> Result<CnsSchedule> {
    if gamma.band_count() != map.band_count() {
        return Err(CnsError::ShapeMismatch {
            expected: format!("{} bands", map.band_count()),
            actual: format!("gamma with {} bands", gamma.band_count()),
        });
    }
    let steps = steps.unwrap_or(gamma.rows() - 1);
    let rows = gamma.rows_for_steps(steps);
    let times = time_grid(steps)[..steps].to_vec();
    let mut s = schedule_from_rows(&rows, &times, map, relax)?;
    s.source = gamma.meta.model.clone();
    Ok(s)
}

/// Noise source drawing step `k`'s colored increment from schedule row `k`.
#[derive(Debug, Clone)]
pub struct ScheduledNoise {
    pub schedule: CnsSchedule,
    pub map: BandMap,
    /// Divide each colored sample by its empirical standard deviation.
    pub whiten: bool,
}

impl NoiseColoring for ScheduledNoise {
    fn color(&self, step: usize, _t: f64, white: Field) -> Result<Field> {
        let row = self.schedule.beta.get(step).ok_or_else(|| {
            CnsError::invalid(format!(
                "schedule has {} rows but step {step} was requested",
                self.schedule.steps()
            ))
        })?;
        if row.iter().all(|&b| b == 1.0) {
            return Ok(white);
        }
        let mode = if self.whiten {
            NormalizationMode::EmpiricalStd
        } else {
            NormalizationMode::AnalyticRms
        };
        let profile = BandScaleProfile {
            scales: row.clone(),
            mode,
        };
        color_noise(&white, &profile, &self.map)
    }

    fn name(&self) -> String {
        "cns".into()
    }
}

fn cns_config(
    schedule: &CnsSchedule,
    map: &BandMap,
    config: &SolverConfig,
    whiten: bool,
) -> Result<SolverConfig> {
    if !config.scheme.is_stochastic() {
        return Err(CnsError::invalid("colored noise sampling needs a stochastic scheme"));
    }
    let schedule = schedule.resample(config.steps, map)?;
    let scale = config.energy_scale * schedule.energy_scale;
    let noise = ScheduledNoise {
        schedule,
        map: map.clone(),
        whiten,
    };
    Ok(config
        .clone()
        .with_noise(Arc::new(noise))
        .with_energy_scale(scale))
}

/// One colored-noise run; `config.noise` is replaced by the schedule. The
/// effective amplitude multiplier is `config.energy_scale · schedule.energy_scale`.
pub fn cns_sample<M: VelocityModel + ?Sized>(
    model: &M,
    diffusion: &DiffusionSpec,
    schedule: &CnsSchedule,
    map: &BandMap,
    config: &SolverConfig,
    init: &Field,
    whiten: bool,
) -> Result<Trajectory> {
    let cfg = cns_config(schedule, map, config, whiten)?;
    integrate(model, diffusion, &cfg, init)
}

/// Parallel batch version of [`cns_sample`] with per-chain streams.
pub fn cns_sample_chains<M: VelocityModel + ?Sized>(
    model: &M,
    diffusion: &DiffusionSpec,
    schedule: &CnsSchedule,
    map: &BandMap,
    config: &SolverConfig,
    chains: usize,
    inits: Inits<'_>,
    whiten: bool,
) -> Result<Vec<Trajectory>> {
    let cfg = cns_config(schedule, map, config, whiten)?;
    sample_chains(model, diffusion, &cfg, chains, inits)
}

/// Multiply the injected amplitude by `factor` (variance by `factor²`).
pub fn scale_energy(config: &SolverConfig, factor: f64) -> Result<SolverConfig> {
    if !(factor.is_finite() && factor > 0.0) {
        return Err(CnsError::invalid(format!("energy factor must be positive, got {factor}")));
    }
    let scale = config.energy_scale * factor;
    Ok(config.clone().with_energy_scale(scale))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum AblationMode {
    /// Every row replaced by the temporal mean.
    Constant,
    /// Rows permuted at random.
    Shuffled,
    /// Rows in reverse time order.
    Inverted,
    /// `⌊fraction·T⌋` random rows replaced by white rows.
    WhiteCorruption { fraction: f64 },
    /// `⌊fraction·T⌋` random rows replaced by random unit-energy profiles.
    RandomCorruption { fraction: f64 },
    /// Every row replaced by a fresh random unit-energy profile.
    RandomUnitEnergy,
}

impl AblationMode {
    pub fn label(&self) -> String {
        match self {
            AblationMode::Constant => "constant".into(),
            AblationMode::Shuffled => "shuffled".into(),
            AblationMode::Inverted => "inverted".into(),
            AblationMode::WhiteCorruption { fraction } => format!("white_corruption_{fraction}"),
            AblationMode::RandomCorruption { fraction } => format!("random_corruption_{fraction}"),
            AblationMode::RandomUnitEnergy => "random_unit_energy".into(),
        }
    }
}

fn random_row<R: Rng + ?Sized>(map: &BandMap, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..map.band_count()).map(|_| rng.random_range(0.05..1.0)).collect();
    normalize_row(raw, map)
}

fn corrupted_rows<R: Rng + ?Sized>(steps: usize, fraction: f64, rng: &mut R) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(CnsError::invalid(format!("corruption fraction {fraction} outside [0,1]")));
    }
    let k = (fraction * steps as f64).floor() as usize;
    Ok(sample_indices(rng, steps, k).into_vec())
}

/// Apply one ablation transform. Every output row has unit coordinate RMS.
pub fn ablate_schedule<R: Rng + ?Sized>(
    schedule: &CnsSchedule,
    mode: AblationMode,
    map: &BandMap,
    rng: &mut R,
) -> Result<CnsSchedule> {
    let steps = schedule.steps();
    let nb = schedule.band_count();
    let mut beta = schedule.beta.clone();
    match mode {
        AblationMode::Constant => {
            let mut mean = vec![0.0; nb];
            for row in &beta {
                mean.iter_mut().zip(row).for_each(|(m, v)| *m += v / steps as f64);
            }
            let mean = normalize_row(mean, map);
            beta.iter_mut().for_each(|r| *r = mean.clone());
        }
        AblationMode::Shuffled => beta.shuffle(rng),
        AblationMode::Inverted => beta.reverse(),
        AblationMode::WhiteCorruption { fraction } => {
            for k in corrupted_rows(steps, fraction, rng)? {
                beta[k] = vec![1.0; nb];
            }
        }
        AblationMode::RandomCorruption { fraction } => {
            for k in corrupted_rows(steps, fraction, rng)? {
                beta[k] = random_row(map, rng);
            }
        }
        AblationMode::RandomUnitEnergy => {
            beta.iter_mut().for_each(|r| *r = random_row(map, rng));
        }
    }
    Ok(CnsSchedule {
        beta,
        times: schedule.times.clone(),
        energy_scale: schedule.energy_scale,
        source: format!("{}+{}", schedule.source, mode.label()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GridShape;
    use crate::rng::root_rng;
    use crate::spectral::build_band_map;

    #[test]
    fn two_band_worked_example() {
        // 1×2 grid: DC and one coordinate at ρ = 1, one coordinate per band
        let map = build_band_map(GridShape::new(1, 2, 1).unwrap(), 2).unwrap();
        assert_eq!(map.counts(), &[1, 1]);
        let s = schedule_from_rows(&[vec![0.0, 0.5]], &[0.3], &map, &RelaxationConfig::default()).unwrap();
        assert!((s.beta[0][0] - 1.1547005383792517).abs() < 1e-12);
        assert!((s.beta[0][1] - 0.816496580927726).abs() < 1e-12);
    }

    #[test]
    fn zero_gamma_is_white() {
        let map = build_band_map(GridShape::square(8), 5).unwrap();
        let s = schedule_from_rows(&[vec![0.0; 5]], &[0.0], &map, &RelaxationConfig::default()).unwrap();
        assert!(s.beta[0].iter().all(|&b| b == 1.0));
    }

    #[test]
    fn resolved_row_falls_back_to_white() {
        let map = build_band_map(GridShape::square(8), 5).unwrap();
        let s = schedule_from_rows(&[vec![1.0; 5]], &[0.9], &map, &RelaxationConfig::default()).unwrap();
        assert!(s.beta[0].iter().all(|&b| b == 1.0));
    }

    #[test]
    fn single_band_is_always_white() {
        let map = build_band_map(GridShape::square(8), 1).unwrap();
        for g in [0.0, 0.3, 0.99] {
            let s = schedule_from_rows(&[vec![g]], &[0.5], &map, &RelaxationConfig::sit_unguided()).unwrap();
            assert_eq!(s.beta[0], vec![1.0]);
        }
    }

    #[test]
    fn relaxation_validation() {
        let mut r = RelaxationConfig::sit_unguided();
        assert!(r.validate().is_ok());
        r.gamma_divider = 0.9;
        assert!(r.validate().is_err());
        r = RelaxationConfig { energy_scale: 2.5, ..Default::default() };
        assert!(r.validate().is_err());
        let json = r#"{"gamma_power":0.75,"gamma_divider":1.73,"energy_scale":0.98,
            "tilt":{"start":0.15,"end":-0.5,"interpolation":{"law":"exponential","rate":0.75}}}"#;
        let parsed: RelaxationConfig = serde_json::from_str(json).unwrap();
        assert_eq!(parsed, RelaxationConfig::sit_unguided());
        assert!(serde_json::from_str::<RelaxationConfig>(r#"{"gama_power":1}"#).is_err());
    }

    #[test]
    fn exponential_tilt_law() {
        let tilt = RelaxationConfig::sit_unguided().tilt.unwrap();
        assert!((tilt.exponent(0.0) - 0.15).abs() < 1e-15);
        assert!((tilt.exponent(1.0) + 0.5).abs() < 1e-15);
        let w: f64 = (1.0 - (-0.375f64).exp()) / (1.0 - (-0.75f64).exp());
        assert!((tilt.exponent(0.5) - (0.15 - 0.65 * w)).abs() < 1e-15);
        let lin = Tilt { start: 1.0, end: 3.0, interpolation: TiltInterpolation::Linear };
        assert_eq!(lin.exponent(0.5), 2.0);
    }

    fn sample_schedule(map: &BandMap, steps: usize) -> CnsSchedule {
        let times = time_grid(steps)[..steps].to_vec();
        let nb = map.band_count();
        let rows: Vec<Vec<f64>> = times
            .iter()
            .map(|&t| (0..nb).map(|b| (t * (1.0 + 0.2 * b as f64)).min(0.95)).collect())
            .collect();
        schedule_from_rows(&rows, &times, map, &RelaxationConfig::default()).unwrap()
    }

    #[test]
    fn ablations_keep_unit_rms() {
        let map = build_band_map(GridShape::square(16), 8).unwrap();
        let s = sample_schedule(&map, 20);
        s.validate(&map).unwrap();
        let modes = [
            AblationMode::Constant,
            AblationMode::Shuffled,
            AblationMode::Inverted,
            AblationMode::WhiteCorruption { fraction: 0.5 },
            AblationMode::RandomCorruption { fraction: 0.25 },
            AblationMode::RandomUnitEnergy,
        ];
        let mut rng = root_rng(0);
        for mode in modes {
            let a = ablate_schedule(&s, mode, &map, &mut rng).unwrap();
            a.validate(&map).unwrap();
        }
        let inv = ablate_schedule(&s, AblationMode::Inverted, &map, &mut rng).unwrap();
        let back = ablate_schedule(&inv, AblationMode::Inverted, &map, &mut rng).unwrap();
        assert_eq!(back.beta, s.beta);
        let c = ablate_schedule(&s, AblationMode::Constant, &map, &mut rng).unwrap();
        assert!(c.beta.windows(2).all(|w| w[0] == w[1]));
        assert!(ablate_schedule(&s, AblationMode::WhiteCorruption { fraction: 1.5 }, &map, &mut rng).is_err());
    }

    #[test]
    fn half_white_corruption_counts() {
        let map = build_band_map(GridShape::square(16), 8).unwrap();
        for steps in [7, 20, 33] {
            let s = sample_schedule(&map, steps);
            // the t = 0 row of the sample schedule is white already; drop it
            let s = CnsSchedule {
                beta: s.beta[1..].to_vec(),
                times: s.times[1..].to_vec(),
                ..s
            };
            let a = ablate_schedule(&s, AblationMode::WhiteCorruption { fraction: 0.5 }, &map, &mut root_rng(3))
                .unwrap();
            let ones = a.beta.iter().filter(|r| r.iter().all(|&b| b == 1.0)).count();
            assert_eq!(ones, s.steps() / 2);
        }
    }

    #[test]
    fn resample_and_csv_round_trip() {
        let map = build_band_map(GridShape::square(8), 4).unwrap();
        let s = sample_schedule(&map, 10);
        let r = s.resample(25, &map).unwrap();
        assert_eq!(r.steps(), 25);
        r.validate(&map).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("beta.csv");
        s.save_csv(&p).unwrap();
        let back = CnsSchedule::load_csv(&p, &map).unwrap();
        assert_eq!(back.beta, s.beta);
    }

    #[test]
    fn scale_energy_rules() {
        let cfg = SolverConfig::new(crate::solvers::Scheme::SdeEulerMaruyama, 4, 0);
        assert_eq!(scale_energy(&cfg, 1.0).unwrap().energy_scale, 1.0);
        assert_eq!(scale_energy(&cfg, 2.0).unwrap().energy_scale, 2.0);
        assert!(scale_energy(&cfg, 0.0).is_err());
    }
}
