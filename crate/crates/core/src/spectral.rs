//! Two-dimensional Fourier analysis on shifted frequency grids.
//!
//! DFT convention: the forward transform is unnormalized and the inverse
//! carries the `1/(H·W)` factor, so for a real field `x`
//!
//! ```text
//! Σ_f |X(f)|² = H·W · ‖x‖²
//! ```
//!
//! Power spectral densities are reported per coordinate as `|X(f)|² / (H·W)`,
//! which makes unit white noise flat at 1.
//!
//! Spectra are stored in the natural FFT order. Signed (shifted) frequency
//! coordinates run over `f_y ∈ [-⌊H/2⌋, ⌈H/2⌉-1]` and
//! `f_x ∈ [-⌊W/2⌋, ⌈W/2⌉-1]`; use [`Spectrum::at`] or [`Spectrum::shifted`] to
//! address them.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{CnsError, Result};
use crate::field::{Field, GridShape};

/// Signed frequency of FFT index `k` on an axis of length `n`.
pub fn signed_frequency(k: usize, n: usize) -> i64 {
    if k < n.div_ceil(2) {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// FFT index of signed frequency `f` on an axis of length `n`.
pub fn frequency_index(f: i64, n: usize) -> usize {
    f.rem_euclid(n as i64) as usize
}

/// Planned forward/inverse 2-D transforms for one plane size.
#[derive(Clone)]
pub struct Fft2 {
    height: usize,
    width: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fft2")
            .field("height", &self.height)
            .field("width", &self.width)
            .finish()
    }
}

impl Fft2 {
    pub fn new(height: usize, width: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            height,
            width,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    fn transform(&self, buf: &mut [Complex64], row: &Arc<dyn Fft<f64>>, col: &Arc<dyn Fft<f64>>) {
        let (h, w) = (self.height, self.width);
        debug_assert_eq!(buf.len(), h * w);
        if w > 1 {
            row.process(buf);
        }
        if h > 1 {
            let mut column = vec![Complex64::new(0.0, 0.0); h];
            for x in 0..w {
                for y in 0..h {
                    column[y] = buf[y * w + x];
                }
                col.process(&mut column);
                for y in 0..h {
                    buf[y * w + x] = column[y];
                }
            }
        }
    }

    /// Unnormalized forward transform of one real plane.
    pub fn forward_real(&self, plane: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = plane.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut buf, &self.row_fwd, &self.col_fwd);
        buf
    }

    /// Inverse transform in place, including the `1/(H·W)` factor.
    pub fn inverse_in_place(&self, buf: &mut [Complex64]) {
        self.transform(buf, &self.row_inv, &self.col_inv);
        let norm = 1.0 / (self.height * self.width) as f64;
        buf.iter_mut().for_each(|z| *z *= norm);
    }
}

/// Complex coefficients of a multi-channel field, natural FFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    shape: GridShape,
    data: Vec<Complex64>,
}

impl Spectrum {
    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn channel(&self, c: usize) -> &[Complex64] {
        let n = self.shape.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [Complex64] {
        let n = self.shape.plane_len();
        &mut self.data[c * n..(c + 1) * n]
    }

    /// Coefficient at signed frequency `(fy, fx)` of channel `c`.
    pub fn at(&self, c: usize, fy: i64, fx: i64) -> Complex64 {
        let h = frequency_index(fy, self.shape.height);
        let w = frequency_index(fx, self.shape.width);
        self.channel(c)[h * self.shape.width + w]
    }

    /// DC-centred copy of channel `c`: row `i` holds `f_y = i - ⌊H/2⌋`.
    pub fn shifted(&self, c: usize) -> Vec<Complex64> {
        let (h, w) = (self.shape.height, self.shape.width);
        let (oy, ox) = ((h / 2) as i64, (w / 2) as i64);
        let mut out = Vec::with_capacity(h * w);
        for i in 0..h as i64 {
            for j in 0..w as i64 {
                out.push(self.at(c, i - oy, j - ox));
            }
        }
        out
    }

    /// Largest Hermitian-symmetry defect `|X(f) - conj(X(-f))|`.
    pub fn hermitian_defect(&self) -> f64 {
        let (h, w) = (self.shape.height, self.shape.width);
        let mut worst: f64 = 0.0;
        for c in 0..self.shape.channels {
            let plane = self.channel(c);
            for y in 0..h {
                for x in 0..w {
                    let my = (h - y) % h;
                    let mx = (w - x) % w;
                    let d = (plane[y * w + x] - plane[my * w + mx].conj()).norm();
                    worst = worst.max(d);
                }
            }
        }
        worst
    }
}

fn check_shape(field: &Field, shape: GridShape) -> Result<()> {
    shape.ensure_eq(&field.shape())
}

/// Forward transform using a prepared plan.
pub fn forward_with(fft: &Fft2, field: &Field) -> Spectrum {
    let shape = field.shape();
    let mut data = Vec::with_capacity(shape.len());
    for c in 0..shape.channels {
        data.extend(fft.forward_real(field.channel(c)));
    }
    Spectrum { shape, data }
}

/// Inverse transform; returns (real part, imaginary part).
pub fn inverse_parts_with(fft: &Fft2, spectrum: &Spectrum) -> (Field, Field) {
    let shape = spectrum.shape;
    let mut re = Field::zeros(shape);
    let mut im = Field::zeros(shape);
    for c in 0..shape.channels {
        let mut buf = spectrum.channel(c).to_vec();
        fft.inverse_in_place(&mut buf);
        for (i, z) in buf.iter().enumerate() {
            re.channel_mut(c)[i] = z.re;
            im.channel_mut(c)[i] = z.im;
        }
    }
    (re, im)
}

pub fn forward_transform(field: &Field, shape: GridShape) -> Result<Spectrum> {
    check_shape(field, shape)?;
    Ok(forward_with(&Fft2::new(shape.height, shape.width), field))
}

/// Real part of the inverse transform.
pub fn inverse_transform(spectrum: &Spectrum) -> Field {
    let shape = spectrum.shape;
    inverse_parts_with(&Fft2::new(shape.height, shape.width), spectrum).0
}

/// Radial partition of the frequency grid into `band_count` isotropic bands.
#[derive(Clone)]
pub struct BandMap {
    shape: GridShape,
    band_count: usize,
    rho_max: f64,
    /// Band of each plane coordinate, natural FFT order.
    index: Vec<usize>,
    counts: Vec<usize>,
    mean_radius: Vec<f64>,
    fft: Fft2,
}

impl fmt::Debug for BandMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BandMap")
            .field("shape", &self.shape)
            .field("band_count", &self.band_count)
            .field("rho_max", &self.rho_max)
            .field("counts", &self.counts)
            .finish()
    }
}

/// Build the nearest-integer radial band map
/// `b = round(ρ/ρ_max · (N_b - 1))`, with halves rounded away from zero.
pub fn build_band_map(shape: GridShape, band_count: usize) -> Result<BandMap> {
    if band_count == 0 {
        return Err(CnsError::invalid("band_count must be at least 1"));
    }
    let (h, w) = (shape.height, shape.width);
    let rho_max = ((h as f64 / 2.0).powi(2) + (w as f64 / 2.0).powi(2)).sqrt();
    if band_count as f64 > rho_max.floor() + 1.0 {
        log::warn!(
            "{band_count} bands on a {h}x{w} grid exceeds floor(rho_max)+1 = {}; some bands may be empty",
            rho_max.floor() + 1.0
        );
    }
    let scale = if rho_max > 0.0 {
        (band_count - 1) as f64 / rho_max
    } else {
        0.0
    };
    let mut index = Vec::with_capacity(h * w);
    let mut counts = vec![0usize; band_count];
    let mut radius_sum = vec![0.0; band_count];
    for y in 0..h {
        let fy = signed_frequency(y, h) as f64;
        for x in 0..w {
            let fx = signed_frequency(x, w) as f64;
            let rho = (fy * fy + fx * fx).sqrt();
            let b = ((rho * scale).round() as usize).min(band_count - 1);
            index.push(b);
            counts[b] += 1;
            radius_sum[b] += rho;
        }
    }
    let mean_radius = radius_sum
        .iter()
        .zip(&counts)
        .map(|(s, &n)| if n > 0 { s / n as f64 } else { 0.0 })
        .collect();
    Ok(BandMap {
        shape,
        band_count,
        rho_max,
        index,
        counts,
        mean_radius,
        fft: Fft2::new(h, w),
    })
}

impl BandMap {
    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn band_count(&self) -> usize {
        self.band_count
    }

    pub fn rho_max(&self) -> f64 {
        self.rho_max
    }

    pub fn fft(&self) -> &Fft2 {
        &self.fft
    }

    /// Band indices of plane coordinates in natural FFT order.
    pub fn indices(&self) -> &[usize] {
        &self.index
    }

    /// Band of the signed frequency coordinate `(fy, fx)`.
    pub fn band_at(&self, fy: i64, fx: i64) -> usize {
        let y = frequency_index(fy, self.shape.height);
        let x = frequency_index(fx, self.shape.width);
        self.index[y * self.shape.width + x]
    }

    /// Number of plane coordinates per band.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Arithmetic mean of the coordinate radii inside each band.
    pub fn mean_radius(&self) -> &[f64] {
        &self.mean_radius
    }

    /// Coordinate-weighted mean of `per_band[b]` over the plane.
    pub fn coordinate_mean(&self, per_band: &[f64]) -> f64 {
        let total: f64 = per_band
            .iter()
            .zip(&self.counts)
            .map(|(v, &n)| v * n as f64)
            .sum();
        total / self.shape.plane_len() as f64
    }

    /// `(f_y, f_x, band)` for every coordinate in DC-centred order.
    pub fn shifted_coordinates(&self) -> Vec<(i64, i64, usize)> {
        let (h, w) = (self.shape.height, self.shape.width);
        let mut out = Vec::with_capacity(h * w);
        for fy in -((h / 2) as i64)..h.div_ceil(2) as i64 {
            for fx in -((w / 2) as i64)..w.div_ceil(2) as i64 {
                out.push((fy, fx, self.band_at(fy, fx)));
            }
        }
        out
    }

    pub fn forward(&self, field: &Field) -> Result<Spectrum> {
        check_shape(field, self.shape)?;
        Ok(forward_with(&self.fft, field))
    }

    /// Multiply each coefficient by `gains[band]` and return the real inverse.
    pub fn filter(&self, field: &Field, gains: &[f64]) -> Result<Field> {
        if gains.len() != self.band_count {
            return Err(CnsError::invalid(format!(
                "expected {} band gains, got {}",
                self.band_count,
                gains.len()
            )));
        }
        let mut spec = self.forward(field)?;
        self.apply_gains(&mut spec, gains);
        Ok(inverse_parts_with(&self.fft, &spec).0)
    }

    pub(crate) fn apply_gains(&self, spec: &mut Spectrum, gains: &[f64]) {
        for c in 0..spec.shape.channels {
            for (z, &b) in spec.channel_mut(c).iter_mut().zip(&self.index) {
                *z *= gains[b];
            }
        }
    }

    /// Spectrum restricted to one band.
    pub fn mask_spectrum(&self, spectrum: &Spectrum, band: usize) -> Result<Spectrum> {
        self.check_band(band)?;
        let mut out = spectrum.clone();
        for c in 0..out.shape.channels {
            for (z, &b) in out.channel_mut(c).iter_mut().zip(&self.index) {
                if b != band {
                    *z = Complex64::new(0.0, 0.0);
                }
            }
        }
        Ok(out)
    }

    fn check_band(&self, band: usize) -> Result<()> {
        if band >= self.band_count {
            return Err(CnsError::invalid(format!(
                "band {band} out of range for {} bands",
                self.band_count
            )));
        }
        Ok(())
    }

    /// Per-band energies `‖P_b x‖²` of one field.
    pub fn band_energies(&self, field: &Field) -> Result<Vec<f64>> {
        let spec = self.forward(field)?;
        Ok(self.band_energies_of(&spec))
    }

    pub(crate) fn band_energies_of(&self, spec: &Spectrum) -> Vec<f64> {
        let norm = 1.0 / self.shape.plane_len() as f64;
        let mut out = vec![0.0; self.band_count];
        for c in 0..spec.shape.channels {
            for (z, &b) in spec.channel(c).iter().zip(&self.index) {
                out[b] += z.norm_sqr() * norm;
            }
        }
        out
    }

    /// Per-band means of a per-coordinate plane quantity (natural order).
    pub fn bin_radially(&self, plane: &[f64]) -> Vec<f64> {
        let mut sums = vec![0.0; self.band_count];
        for (v, &b) in plane.iter().zip(&self.index) {
            sums[b] += v;
        }
        sums.iter()
            .zip(&self.counts)
            .map(|(s, &n)| if n > 0 { s / n as f64 } else { 0.0 })
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        writeln!(out, "f_y,f_x,band").expect("write to memory");
        for (fy, fx, b) in self.shifted_coordinates() {
            writeln!(out, "{fy},{fx},{b}").expect("write to memory");
        }
        std::fs::write(path, out).map_err(|e| CnsError::io(path, e))
    }
}

/// Multiply every coefficient by `gain(ρ)` where `ρ` is its radial frequency.
pub fn radial_filter(field: &Field, gain: impl Fn(f64) -> f64) -> Field {
    let shape = field.shape();
    let (h, w) = (shape.height, shape.width);
    let fft = Fft2::new(h, w);
    let mut spec = forward_with(&fft, field);
    let gains: Vec<f64> = (0..h)
        .flat_map(|y| {
            let fy = signed_frequency(y, h) as f64;
            (0..w).map(move |x| {
                let fx = signed_frequency(x, w) as f64;
                (fy * fy + fx * fx).sqrt()
            })
        })
        .map(&gain)
        .collect();
    for c in 0..shape.channels {
        for (z, g) in spec.channel_mut(c).iter_mut().zip(&gains) {
            *z *= *g;
        }
    }
    inverse_parts_with(&fft, &spec).0
}

/// Band-pass projection `P_b[x] = F⁻¹[1_{B_b} ⊙ F[x]]`.
pub fn project_band(field: &Field, band: usize, map: &BandMap) -> Result<Field> {
    map.check_band(band)?;
    let spec = map.forward(field)?;
    let masked = map.mask_spectrum(&spec, band)?;
    Ok(inverse_parts_with(&map.fft, &masked).0)
}

/// Radially averaged PSD: mean of `|X(f)|²/(H·W)` over samples, channels
/// and the coordinates of each band. Empty bands report 0.
pub fn psd(samples: &[Field], map: &BandMap) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(CnsError::invalid("psd requires at least one sample"));
    }
    let mut acc = vec![0.0; map.band_count];
    for s in samples {
        let e = map.band_energies(s)?;
        acc.iter_mut().zip(e).for_each(|(a, v)| *a += v);
    }
    let channels = map.shape.channels as f64;
    Ok(acc
        .iter()
        .zip(&map.counts)
        .map(|(a, &n)| {
            if n > 0 {
                a / (samples.len() as f64 * channels * n as f64)
            } else {
                0.0
            }
        })
        .collect())
}
