//! White, power-law, per-band scaled and multifractional noise increments.

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{CnsError, Result};
use crate::field::{Field, GridShape};
use crate::spectral::{inverse_parts_with, BandMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMode {
    /// The profile has unit coordinate-weighted RMS; outputs are not rescaled.
    #[default]
    AnalyticRms,
    /// Each colored sample is divided by its own standard deviation.
    EmpiricalStd,
}

/// Per-band amplitude multipliers applied in the Fourier domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandScaleProfile {
    pub scales: Vec<f64>,
    pub mode: NormalizationMode,
}

impl BandScaleProfile {
    pub fn new(scales: Vec<f64>, mode: NormalizationMode) -> Result<Self> {
        if scales.is_empty() {
            return Err(CnsError::invalid("profile needs at least one band"));
        }
        if let Some(bad) = scales.iter().find(|s| !s.is_finite() || **s < 0.0) {
            return Err(CnsError::invalid(format!(
                "band scales must be finite and non-negative, found {bad}"
            )));
        }
        Ok(Self { scales, mode })
    }

    pub fn white(band_count: usize) -> Self {
        Self {
            scales: vec![1.0; band_count],
            mode: NormalizationMode::AnalyticRms,
        }
    }

    /// Rescale `raw` so that the coordinate-weighted mean of `scale²` is 1.
    pub fn rms_normalized(raw: Vec<f64>, map: &BandMap) -> Result<Self> {
        let mut p = Self::new(raw, NormalizationMode::AnalyticRms)?;
        check_len(&p, map)?;
        let rms = p.coordinate_rms(map);
        if rms == 0.0 {
            return Err(CnsError::Degenerate(
                "profile has zero energy and cannot be normalized".into(),
            ));
        }
        p.scales.iter_mut().for_each(|s| *s /= rms);
        Ok(p)
    }

    pub fn band_count(&self) -> usize {
        self.scales.len()
    }

    /// `sqrt((1/D) Σ_f scale(f)²)` over the plane coordinates.
    pub fn coordinate_rms(&self, map: &BandMap) -> f64 {
        let sq: Vec<f64> = self.scales.iter().map(|s| s * s).collect();
        map.coordinate_mean(&sq).sqrt()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        w.write_record(["band", "scale"]).map_err(|e| csv_err(path, e))?;
        for (b, s) in self.scales.iter().enumerate() {
            w.write_record([b.to_string(), s.to_string()])
                .map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| CnsError::io(path, e))
    }

    pub fn read_csv(path: &Path, mode: NormalizationMode) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
        let mut scales = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| csv_err(path, e))?;
            let band: usize = parse_field(path, &rec, 0)?;
            if band != i {
                return Err(CnsError::corrupt(path, format!("expected band {i}, found {band}")));
            }
            scales.push(parse_field(path, &rec, 1)?);
        }
        Self::new(scales, mode)
    }
}

pub(crate) fn csv_err(path: &Path, e: csv::Error) -> CnsError {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => CnsError::io(path, io),
            _ => unreachable!(),
        }
    } else {
        CnsError::corrupt(path, e.to_string())
    }
}

pub(crate) fn parse_field<T: std::str::FromStr>(
    path: &Path,
    rec: &csv::StringRecord,
    i: usize,
) -> Result<T> {
    rec.get(i)
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| CnsError::corrupt(path, format!("bad value in column {i}: {rec:?}")))
}

fn check_len(profile: &BandScaleProfile, map: &BandMap) -> Result<()> {
    if profile.scales.len() != map.band_count() {
        return Err(CnsError::invalid(format!(
            "profile has {} bands, band map has {}",
            profile.scales.len(),
            map.band_count()
        )));
    }
    Ok(())
}

/// I.i.d. standard normal field.
pub fn white_noise<R: Rng + ?Sized>(shape: GridShape, rng: &mut R) -> Field {
    let data = (0..shape.len()).map(|_| rng.sample(StandardNormal)).collect();
    Field::from_vec(shape, data).expect("length matches shape")
}

/// Scale each Fourier band of `w` by the profile and transform back.
pub fn color_noise(w: &Field, profile: &BandScaleProfile, map: &BandMap) -> Result<Field> {
    check_len(profile, map)?;
    let mut spec = map.forward(w)?;
    map.apply_gains(&mut spec, &profile.scales);
    let mut out = inverse_parts_with(map.fft(), &spec).0;
    if profile.mode == NormalizationMode::EmpiricalStd {
        let sd = out.std();
        if !(sd > 0.0) {
            return Err(CnsError::Degenerate(
                "colored sample has zero standard deviation".into(),
            ));
        }
        out.scale(1.0 / sd);
    }
    Ok(out)
}

/// Representative radius of each band: the mean coordinate radius, or the
/// nominal bin centre for empty bands.
pub(crate) fn band_radii(map: &BandMap) -> Vec<f64> {
    let n = map.band_count();
    map.mean_radius()
        .iter()
        .zip(map.counts())
        .enumerate()
        .map(|(b, (&r, &count))| {
            if count > 0 {
                r
            } else if n > 1 {
                b as f64 / (n - 1) as f64 * map.rho_max()
            } else {
                0.0
            }
        })
        .collect()
}

/// Amplitudes `ρ_b^exponent`; for negative exponents the DC band borrows the
/// value of band 1.
fn power_law_raw(map: &BandMap, exponent: f64) -> Vec<f64> {
    let radii = band_radii(map);
    let mut raw: Vec<f64> = radii.iter().map(|r| r.powf(exponent)).collect();
    if exponent < 0.0 && raw.len() > 1 {
        raw[0] = raw[1];
    } else if exponent < 0.0 {
        raw[0] = 1.0;
    }
    raw
}

/// RMS-normalized power-law profile; positive exponents are blue, negative red.
pub fn power_law_profile(map: &BandMap, exponent: f64) -> Result<BandScaleProfile> {
    if !exponent.is_finite() {
        return Err(CnsError::invalid("exponent must be finite"));
    }
    if exponent == 0.0 {
        return Ok(BandScaleProfile::white(map.band_count()));
    }
    BandScaleProfile::rms_normalized(power_law_raw(map, exponent), map)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HurstInterpolation {
    #[default]
    Linear,
}

/// Time-varying Hurst exponent for multifractional increments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HurstSchedule {
    pub h_start: f64,
    pub h_end: f64,
    #[serde(default)]
    pub interpolation: HurstInterpolation,
}

impl HurstSchedule {
    pub fn linear(h_start: f64, h_end: f64) -> Result<Self> {
        let s = Self {
            h_start,
            h_end,
            interpolation: HurstInterpolation::Linear,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for h in [self.h_start, self.h_end] {
            if !(h > 0.0 && h < 1.0) {
                return Err(CnsError::invalid(format!("Hurst exponent {h} outside (0,1)")));
            }
        }
        Ok(())
    }

    pub fn at(&self, t: f64) -> f64 {
        match self.interpolation {
            HurstInterpolation::Linear => self.h_start + (self.h_end - self.h_start) * t,
        }
    }
}

/// Per-step multifractional profile: amplitude `ρ^-(H(t)+1/2)`, then RMS-normalized.
pub fn mbm_profile(map: &BandMap, schedule: &HurstSchedule, t: f64) -> Result<BandScaleProfile> {
    if !(0.0..=1.0).contains(&t) {
        return Err(CnsError::invalid(format!("time {t} outside [0,1]")));
    }
    schedule.validate()?;
    let h = schedule.at(t);
    BandScaleProfile::rms_normalized(power_law_raw(map, -(h + 0.5)), map)
}
