//! Interpolant paths, parameterization conversions and Gaussian-mixture oracles.
//!
//! Internally everything runs in the `data_at_one` convention: noise at
//! `t = 0`, data at `t = 1`, so the linear path is `x_t = t·x0 + (1-t)·ε`.
//! The `data_at_zero` convention is the time reversal `t ↦ 1 - t`.
//!
//! For a path with coefficients `(α, σ)` and derivatives `(α̇, σ̇)` the
//! velocity `v = α̇·x̂0 + σ̇·ε̂` and the state `x = α·x̂0 + σ·ε̂` determine the
//! clean and noise predictions through the 2×2 inverse with determinant
//! `α·σ̇ - σ·α̇`.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CnsError, Result};
use crate::field::{Field, GridShape};
use crate::noise::white_noise;
use crate::spectral::{radial_filter, BandMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    #[default]
    DataAtOne,
    DataAtZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    /// `α = t`, `σ = 1 - t` (data at one).
    #[default]
    Linear,
    /// Variance preserving: `α = sin(πt/2)`, `σ = cos(πt/2)` (data at one).
    Vp,
}

/// Path coefficients evaluated at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathCoeffs {
    pub alpha: f64,
    pub sigma: f64,
    pub alpha_dot: f64,
    pub sigma_dot: f64,
}

impl PathCoeffs {
    pub fn det(&self) -> f64 {
        self.alpha * self.sigma_dot - self.sigma * self.alpha_dot
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct PathSchedule {
    #[serde(default)]
    pub kind: PathKind,
    #[serde(default)]
    pub convention: Convention,
}

impl PathSchedule {
    pub fn linear() -> Self {
        Self::default()
    }

    pub fn vp() -> Self {
        Self {
            kind: PathKind::Vp,
            convention: Convention::DataAtOne,
        }
    }

    pub fn with_convention(self, convention: Convention) -> Self {
        Self { convention, ..self }
    }

    /// Same path expressed in the `data_at_one` convention.
    pub fn canonical(self) -> Self {
        self.with_convention(Convention::DataAtOne)
    }

    /// Convert a time in this path's convention to the other convention.
    /// The map is an involution.
    pub fn map_time(t: f64) -> f64 {
        1.0 - t
    }

    pub fn to_canonical_time(&self, t: f64) -> f64 {
        match self.convention {
            Convention::DataAtOne => t,
            Convention::DataAtZero => Self::map_time(t),
        }
    }

    pub fn coeffs(&self, t: f64) -> PathCoeffs {
        let (tc, sign) = match self.convention {
            Convention::DataAtOne => (t, 1.0),
            Convention::DataAtZero => (1.0 - t, -1.0),
        };
        let (alpha, sigma, alpha_dot, sigma_dot) = match self.kind {
            PathKind::Linear => (tc, 1.0 - tc, 1.0, -1.0),
            PathKind::Vp => {
                let a = FRAC_PI_2 * tc;
                (a.sin(), a.cos(), FRAC_PI_2 * a.cos(), -FRAC_PI_2 * a.sin())
            }
        };
        PathCoeffs {
            alpha,
            sigma,
            alpha_dot: sign * alpha_dot,
            sigma_dot: sign * sigma_dot,
        }
    }

    pub fn alpha(&self, t: f64) -> f64 {
        self.coeffs(t).alpha
    }

    pub fn sigma(&self, t: f64) -> f64 {
        self.coeffs(t).sigma
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(CnsError::invalid(format!("time {t} outside [0,1]")));
    }
    Ok(())
}

/// `α(t)·x0 + σ(t)·eps`.
pub fn interpolate(x0: &Field, eps: &Field, t: f64, path: &PathSchedule) -> Result<Field> {
    x0.shape().ensure_eq(&eps.shape())?;
    check_time(t)?;
    let c = path.coeffs(t);
    Ok(Field::lincomb(c.alpha, x0, c.sigma, eps))
}

/// Clean (data) prediction implied by a state/velocity pair.
pub fn clean_prediction(state: &Field, velocity: &Field, t: f64, path: &PathSchedule) -> Result<Field> {
    state.shape().ensure_eq(&velocity.shape())?;
    check_time(t)?;
    let c = path.coeffs(t);
    if c.alpha == 0.0 && path.convention == Convention::DataAtZero {
        return Err(CnsError::Degenerate(format!(
            "clean prediction undefined at t = {t}: the state carries no data component"
        )));
    }
    let det = c.det();
    if det == 0.0 {
        return Err(CnsError::Degenerate(format!("path is singular at t = {t}")));
    }
    Ok(Field::lincomb(c.sigma_dot / det, state, -c.sigma / det, velocity))
}

/// Noise prediction implied by a state/velocity pair.
pub fn noise_prediction(state: &Field, velocity: &Field, t: f64, path: &PathSchedule) -> Result<Field> {
    state.shape().ensure_eq(&velocity.shape())?;
    check_time(t)?;
    let c = path.coeffs(t);
    let det = c.det();
    if det == 0.0 {
        return Err(CnsError::Degenerate(format!("path is singular at t = {t}")));
    }
    Ok(Field::lincomb(-c.alpha_dot / det, state, c.alpha / det, velocity))
}

/// Score `-ε̂/σ(t)`; for the linear data-at-one path this is `(t·v - x)/(1-t)`.
pub fn score_from_velocity(state: &Field, velocity: &Field, t: f64, path: &PathSchedule) -> Result<Field> {
    let sigma = path.sigma(t);
    if sigma == 0.0 {
        return Err(CnsError::Degenerate(format!(
            "score undefined at the data endpoint t = {t}"
        )));
    }
    let mut eps = noise_prediction(state, velocity, t, path)?;
    eps.scale(-1.0 / sigma);
    Ok(eps)
}

/// `α̇·clean + σ̇·noise`.
pub fn velocity_from_predictions(clean: &Field, noise: &Field, t: f64, path: &PathSchedule) -> Result<Field> {
    clean.shape().ensure_eq(&noise.shape())?;
    let c = path.coeffs(t);
    Ok(Field::lincomb(c.alpha_dot, clean, c.sigma_dot, noise))
}

/// Velocity together with the implied clean and noise predictions.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub velocity: Field,
    pub clean: Field,
    pub noise: Field,
}

/// A generative velocity field in `data_at_one` time.
pub trait VelocityModel: Send + Sync {
    fn shape(&self) -> GridShape;

    fn path(&self) -> PathSchedule {
        PathSchedule::linear()
    }

    fn velocity(&self, state: &Field, t: f64) -> Result<Field>;

    /// Velocity plus predictions. Models that know their posterior should
    /// override this so that it stays finite at the data endpoint.
    fn predict(&self, state: &Field, t: f64) -> Result<Prediction> {
        let path = self.path();
        let velocity = self.velocity(state, t)?;
        let clean = clean_prediction(state, &velocity, t, &path)?;
        let noise = noise_prediction(state, &velocity, t, &path)?;
        Ok(Prediction {
            velocity,
            clean,
            noise,
        })
    }
}

impl<M: VelocityModel + ?Sized> VelocityModel for Arc<M> {
    fn shape(&self) -> GridShape {
        (**self).shape()
    }
    fn path(&self) -> PathSchedule {
        (**self).path()
    }
    fn velocity(&self, state: &Field, t: f64) -> Result<Field> {
        (**self).velocity(state, t)
    }
    fn predict(&self, state: &Field, t: f64) -> Result<Prediction> {
        (**self).predict(state, t)
    }
}

/// `v(x, t) = c` for a fixed field `c`.
#[derive(Debug, Clone)]
pub struct ConstantVelocity {
    pub value: Field,
}

impl VelocityModel for ConstantVelocity {
    fn shape(&self) -> GridShape {
        self.value.shape()
    }

    fn velocity(&self, state: &Field, _t: f64) -> Result<Field> {
        self.value.shape().ensure_eq(&state.shape())?;
        Ok(self.value.clone())
    }
}

/// Mixture of isotropic Gaussians `Σ w_i N(μ_i, var_i·I)` as the data law.
#[derive(Debug, Clone)]
pub struct GaussianMixtureOracle {
    shape: GridShape,
    weights: Vec<f64>,
    means: Vec<Field>,
    variances: Vec<f64>,
    path: PathSchedule,
}

/// Serialized form of a mixture; means are flattened channel-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpec {
    pub shape: GridShape,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<f64>,
    #[serde(default)]
    pub path: PathSchedule,
}

impl GaussianMixtureOracle {
    pub fn new(weights: Vec<f64>, means: Vec<Field>, variances: Vec<f64>) -> Result<Self> {
        let k = weights.len();
        if k == 0 {
            return Err(CnsError::invalid("mixture needs at least one component"));
        }
        if means.len() != k || variances.len() != k {
            return Err(CnsError::invalid(format!(
                "mixture has {k} weights, {} means and {} variances",
                means.len(),
                variances.len()
            )));
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(CnsError::invalid("mixture weights must be positive"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(CnsError::invalid(format!("mixture weights sum to {total}, not 1")));
        }
        if variances.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(CnsError::invalid("mixture variances must be positive"));
        }
        let shape = means[0].shape();
        for m in &means {
            shape.ensure_eq(&m.shape())?;
            if !m.is_finite() {
                return Err(CnsError::invalid("mixture means must be finite"));
            }
        }
        let weights = weights.iter().map(|w| w / total).collect();
        Ok(Self {
            shape,
            weights,
            means,
            variances,
            path: PathSchedule::linear(),
        })
    }

    /// Single isotropic Gaussian.
    pub fn gaussian(mean: Field, variance: f64) -> Result<Self> {
        Self::new(vec![1.0], vec![mean], vec![variance])
    }

    /// Standard normal data on the given grid.
    pub fn standard_normal(shape: GridShape) -> Self {
        Self::gaussian(Field::zeros(shape), 1.0).expect("valid standard normal")
    }

    /// Equal-weight mixture whose means are white noise shaped by the radial
    /// amplitude `max(ρ, 1)^exponent`, rescaled so that the average
    /// per-coordinate energy of the means is `mean_energy`. With exponent
    /// `-1` the means carry a `1/f²` power spectrum.
    pub fn radial_power_law<R: Rng + ?Sized>(
        shape: GridShape,
        components: usize,
        variance: f64,
        exponent: f64,
        mean_energy: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if components == 0 {
            return Err(CnsError::invalid("mixture needs at least one component"));
        }
        if !(mean_energy >= 0.0) {
            return Err(CnsError::invalid("mean energy must be non-negative"));
        }
        let mut means: Vec<Field> = (0..components)
            .map(|_| radial_filter(&white_noise(shape, rng), |rho| rho.max(1.0).powf(exponent)))
            .collect();
        let energy: f64 =
            means.iter().map(Field::norm_sq).sum::<f64>() / (components * shape.len()) as f64;
        if energy > 0.0 {
            let s = (mean_energy / energy).sqrt();
            means.iter_mut().for_each(|m| m.scale(s));
        }
        let w = 1.0 / components as f64;
        Self::new(vec![w; components], means, vec![variance; components])
    }

    pub fn with_path(mut self, path: PathSchedule) -> Self {
        self.path = path.canonical();
        self
    }

    pub fn from_spec(spec: MixtureSpec) -> Result<Self> {
        let means = spec
            .means
            .into_iter()
            .map(|m| Field::from_vec(spec.shape, m))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(spec.weights, means, spec.variances)?.with_path(spec.path))
    }

    pub fn to_spec(&self) -> MixtureSpec {
        MixtureSpec {
            shape: self.shape,
            weights: self.weights.clone(),
            means: self.means.iter().map(|m| m.as_slice().to_vec()).collect(),
            variances: self.variances.clone(),
            path: self.path,
        }
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CnsError::io(path, e))?;
        let spec: MixtureSpec =
            serde_json::from_str(&text).map_err(|e| CnsError::corrupt(path, e.to_string()))?;
        Self::from_spec(spec)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Field] {
        &self.means
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    /// Draw one data sample.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Field {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut idx = self.weights.len() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                idx = i;
                break;
            }
        }
        let mut x = white_noise(self.shape, rng);
        x.scale(self.variances[idx].sqrt());
        x.axpy(1.0, &self.means[idx]);
        x
    }

    /// Per-component marginal variances `α²·var_i + σ²`.
    fn marginal_vars(&self, c: &PathCoeffs, t: f64) -> Result<Vec<f64>> {
        self.variances
            .iter()
            .map(|v| {
                let s2 = c.alpha * c.alpha * v + c.sigma * c.sigma;
                if s2 > 0.0 {
                    Ok(s2)
                } else {
                    Err(CnsError::Degenerate(format!(
                        "mixture component has zero marginal variance at t = {t}"
                    )))
                }
            })
            .collect()
    }

    /// Posterior responsibilities and residuals `x - α μ_i`.
    fn posterior(&self, x: &Field, c: &PathCoeffs, s2: &[f64]) -> (Vec<f64>, Vec<Field>) {
        let d = self.shape.len() as f64;
        let residuals: Vec<Field> = self
            .means
            .iter()
            .map(|m| Field::lincomb(1.0, x, -c.alpha, m))
            .collect();
        let logits: Vec<f64> = residuals
            .iter()
            .zip(s2)
            .zip(&self.weights)
            .map(|((r, &s), &w)| w.ln() - 0.5 * d * s.ln() - 0.5 * r.norm_sq() / s)
            .collect();
        let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut resp: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
        let z: f64 = resp.iter().sum();
        resp.iter_mut().for_each(|r| *r /= z);
        (resp, residuals)
    }

    /// `E[x0 | x_t]` and `E[ε | x_t]` under `path`.
    pub fn posterior_means(&self, x: &Field, t: f64, path: &PathSchedule) -> Result<(Field, Field)> {
        self.shape.ensure_eq(&x.shape())?;
        check_time(t)?;
        let c = path.coeffs(t);
        let s2 = self.marginal_vars(&c, t)?;
        let (resp, residuals) = self.posterior(x, &c, &s2);
        let mut clean = Field::zeros(self.shape);
        let mut noise = Field::zeros(self.shape);
        for i in 0..resp.len() {
            let r = resp[i];
            if r == 0.0 {
                continue;
            }
            clean.axpy(r, &self.means[i]);
            clean.axpy(r * c.alpha * self.variances[i] / s2[i], &residuals[i]);
            noise.axpy(r * c.sigma / s2[i], &residuals[i]);
        }
        Ok((clean, noise))
    }

    /// `∇ log p_t(x)` of the mixture marginal.
    pub fn score(&self, x: &Field, t: f64, path: &PathSchedule) -> Result<Field> {
        self.shape.ensure_eq(&x.shape())?;
        check_time(t)?;
        let c = path.coeffs(t);
        let s2 = self.marginal_vars(&c, t)?;
        let (resp, residuals) = self.posterior(x, &c, &s2);
        let mut out = Field::zeros(self.shape);
        for i in 0..resp.len() {
            out.axpy(-resp[i] / s2[i], &residuals[i]);
        }
        Ok(out)
    }

    /// `log p_t(x)` of the mixture marginal.
    pub fn log_density(&self, x: &Field, t: f64, path: &PathSchedule) -> Result<f64> {
        self.shape.ensure_eq(&x.shape())?;
        check_time(t)?;
        let c = path.coeffs(t);
        let s2 = self.marginal_vars(&c, t)?;
        let d = self.shape.len() as f64;
        let logs: Vec<f64> = self
            .means
            .iter()
            .zip(&s2)
            .zip(&self.weights)
            .map(|((m, &s), &w)| {
                let r = Field::lincomb(1.0, x, -c.alpha, m);
                w.ln() - 0.5 * d * (2.0 * std::f64::consts::PI * s).ln() - 0.5 * r.norm_sq() / s
            })
            .collect();
        let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok(top + logs.iter().map(|l| (l - top).exp()).sum::<f64>().ln())
    }
}

/// Exact oracle velocity `α̇·E[x0|x] + σ̇·E[ε|x]` under `path`.
pub fn gmm_velocity(oracle: &GaussianMixtureOracle, state: &Field, t: f64, path: &PathSchedule) -> Result<Field> {
    let (clean, noise) = oracle.posterior_means(state, t, path)?;
    velocity_from_predictions(&clean, &noise, t, path)
}

impl VelocityModel for GaussianMixtureOracle {
    fn shape(&self) -> GridShape {
        self.shape
    }

    fn path(&self) -> PathSchedule {
        self.path
    }

    fn velocity(&self, state: &Field, t: f64) -> Result<Field> {
        gmm_velocity(self, state, t, &self.path)
    }

    fn predict(&self, state: &Field, t: f64) -> Result<Prediction> {
        let (clean, noise) = self.posterior_means(state, t, &self.path)?;
        let velocity = velocity_from_predictions(&clean, &noise, t, &self.path)?;
        Ok(Prediction {
            velocity,
            clean,
            noise,
        })
    }
}

/// Per-band attenuation of a model's clean prediction:
/// `x̂_θ = x̂ - Σ_b α_b P_b[x̂]`, with the noise prediction and velocity
/// re-derived from the state. At the data endpoint the inner noise
/// prediction is kept.
#[derive(Debug, Clone)]
pub struct CleanShrink<M> {
    pub inner: M,
    pub map: BandMap,
    pub alphas: Vec<f64>,
}

impl<M: VelocityModel> CleanShrink<M> {
    pub fn new(inner: M, map: BandMap, alphas: Vec<f64>) -> Result<Self> {
        check_alphas(&alphas, &map)?;
        inner.shape().ensure_eq(&map.shape())?;
        Ok(Self { inner, map, alphas })
    }
}

fn check_alphas(alphas: &[f64], map: &BandMap) -> Result<()> {
    if alphas.len() != map.band_count() {
        return Err(CnsError::invalid(format!(
            "expected {} band coefficients, got {}",
            map.band_count(),
            alphas.len()
        )));
    }
    if alphas.iter().any(|a| !a.is_finite()) {
        return Err(CnsError::invalid("band coefficients must be finite"));
    }
    Ok(())
}

impl<M: VelocityModel> VelocityModel for CleanShrink<M> {
    fn shape(&self) -> GridShape {
        self.inner.shape()
    }

    fn path(&self) -> PathSchedule {
        self.inner.path()
    }

    fn velocity(&self, state: &Field, t: f64) -> Result<Field> {
        Ok(self.predict(state, t)?.velocity)
    }

    fn predict(&self, state: &Field, t: f64) -> Result<Prediction> {
        let exact = self.inner.predict(state, t)?;
        let gains: Vec<f64> = self.alphas.iter().map(|a| 1.0 - a).collect();
        let clean = self.map.filter(&exact.clean, &gains)?;
        let path = self.path();
        let c = path.coeffs(t);
        let noise = if c.sigma > 0.0 {
            Field::lincomb(1.0 / c.sigma, state, -c.alpha / c.sigma, &clean)
        } else {
            exact.noise
        };
        let velocity = velocity_from_predictions(&clean, &noise, t, &path)?;
        Ok(Prediction {
            velocity,
            clean,
            noise,
        })
    }
}

/// Synthetic score error `e(x, t) = s_θ(x, t) - s*(x, t)` injected on top of
/// an exact oracle score.
pub trait ScoreError: Send + Sync {
    fn band_count(&self) -> usize;

    /// `exact_score` is `s*(x, t)`, supplied by the caller.
    fn score_error(&self, state: &Field, t: f64, exact_score: &Field) -> Result<Field>;
}

/// Per-band multiplicative underestimation `s_θ = (1 - α_f)·s*`.
#[derive(Debug, Clone)]
pub struct ScoreShrink {
    pub map: BandMap,
    pub alphas: Vec<f64>,
}

impl ScoreShrink {
    pub fn new(map: BandMap, alphas: Vec<f64>) -> Result<Self> {
        check_alphas(&alphas, &map)?;
        Ok(Self { map, alphas })
    }
}

impl ScoreError for ScoreShrink {
    fn band_count(&self) -> usize {
        self.map.band_count()
    }

    fn score_error(&self, _state: &Field, _t: f64, exact_score: &Field) -> Result<Field> {
        let gains: Vec<f64> = self.alphas.iter().map(|a| -a).collect();
        self.map.filter(exact_score, &gains)
    }
}

/// Radial restoring error `e = -Σ_f α_f κ_f P_f[x]` with
/// `κ_f = (R_f - N_f)/(R_f + N_f)`, where `R_f` is the data PSD of band `f`
/// and `N_f` the noise PSD. Bands whose data carry less energy than the noise
/// get a pull away from the origin, bands with more energy get a pull toward
/// it, and balanced bands are untouched.
#[derive(Debug, Clone)]
pub struct RadialPull {
    pub map: BandMap,
    pub alphas: Vec<f64>,
    pub kappas: Vec<f64>,
}

impl RadialPull {
    pub fn new(map: BandMap, alphas: Vec<f64>, data_psd: &[f64], noise_psd: &[f64]) -> Result<Self> {
        check_alphas(&alphas, &map)?;
        if data_psd.len() != alphas.len() || noise_psd.len() != alphas.len() {
            return Err(CnsError::invalid("PSD length must match the band count"));
        }
        let kappas = data_psd
            .iter()
            .zip(noise_psd)
            .map(|(&r, &n)| if r + n > 0.0 { (r - n) / (r + n) } else { 0.0 })
            .collect();
        Ok(Self {
            map,
            alphas,
            kappas,
        })
    }
}

impl ScoreError for RadialPull {
    fn band_count(&self) -> usize {
        self.map.band_count()
    }

    fn score_error(&self, state: &Field, _t: f64, _exact_score: &Field) -> Result<Field> {
        let gains: Vec<f64> = self
            .alphas
            .iter()
            .zip(&self.kappas)
            .map(|(a, k)| -a * k)
            .collect();
        self.map.filter(state, &gains)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::root_rng;
    use crate::spectral::build_band_map;

    fn scalar(v: f64) -> Field {
        Field::filled(GridShape::square(1), v)
    }

    #[test]
    fn linear_boundaries_and_midpoint() {
        let p = PathSchedule::linear();
        let x0 = scalar(3.0);
        let e = scalar(-1.0);
        assert_eq!(interpolate(&x0, &e, 1.0, &p).unwrap(), x0);
        assert_eq!(interpolate(&x0, &e, 0.0, &p).unwrap(), e);
        assert_eq!(interpolate(&x0, &e, 0.5, &p).unwrap().get(0, 0, 0), 1.0);
        let z = PathSchedule::linear().with_convention(Convention::DataAtZero);
        assert_eq!(interpolate(&x0, &e, 0.0, &z).unwrap(), x0);
        assert!(interpolate(&x0, &e, 1.5, &p).is_err());
    }

    #[test]
    fn conventions_are_time_reversals() {
        for kind in [PathKind::Linear, PathKind::Vp] {
            let one = PathSchedule { kind, convention: Convention::DataAtOne };
            let zero = one.with_convention(Convention::DataAtZero);
            for &t in &[0.0, 0.2, 0.7, 1.0] {
                let a = one.coeffs(t);
                let b = zero.coeffs(PathSchedule::map_time(t));
                assert!((a.alpha - b.alpha).abs() < 1e-15);
                assert!((a.sigma - b.sigma).abs() < 1e-15);
                assert!((a.alpha_dot + b.alpha_dot).abs() < 1e-15);
                assert!((PathSchedule::map_time(PathSchedule::map_time(t)) - t).abs() < 1e-15);
            }
            let c0 = one.coeffs(0.0);
            let c1 = one.coeffs(1.0);
            assert!(c0.alpha.abs() < 1e-15 && (c0.sigma - 1.0).abs() < 1e-15);
            assert!((c1.alpha - 1.0).abs() < 1e-15 && c1.sigma.abs() < 1e-15);
        }
    }

    #[test]
    fn vp_derivatives_match_finite_differences() {
        let p = PathSchedule::vp();
        let h = 1e-6;
        for &t in &[0.1, 0.5, 0.9] {
            let c = p.coeffs(t);
            let da = (p.alpha(t + h) - p.alpha(t - h)) / (2.0 * h);
            let ds = (p.sigma(t + h) - p.sigma(t - h)) / (2.0 * h);
            assert!((c.alpha_dot - da).abs() < 1e-8);
            assert!((c.sigma_dot - ds).abs() < 1e-8);
        }
    }

    #[test]
    fn clean_prediction_cases() {
        let p = PathSchedule::linear();
        let x = scalar(1.0);
        assert_eq!(clean_prediction(&x, &scalar(0.0), 0.5, &p).unwrap(), x);
        // x = eps at t = 0 with v = x0 - eps
        let (x0, eps) = (scalar(2.0), scalar(-0.5));
        let v = Field::lincomb(1.0, &x0, -1.0, &eps);
        let got = clean_prediction(&eps, &v, 0.0, &p).unwrap();
        assert!((got.get(0, 0, 0) - 2.0).abs() < 1e-15);
        // data-at-zero linear form x - t v
        let z = p.with_convention(Convention::DataAtZero);
        let got = clean_prediction(&scalar(1.0), &scalar(2.0), 0.25, &z).unwrap();
        assert!((got.get(0, 0, 0) - 0.5).abs() < 1e-15);
        assert!(clean_prediction(&x, &x, 1.0, &z).is_err());
    }

    #[test]
    fn score_of_standard_normal() {
        let p = PathSchedule::linear();
        let o = GaussianMixtureOracle::standard_normal(GridShape::square(1));
        let x = scalar(1.0);
        let v = gmm_velocity(&o, &x, 0.5, &p).unwrap();
        assert!(v.get(0, 0, 0).abs() < 1e-15);
        let s = score_from_velocity(&x, &v, 0.5, &p).unwrap();
        assert!((s.get(0, 0, 0) + 2.0).abs() < 1e-14);
        let v = gmm_velocity(&o, &x, 0.75, &p).unwrap();
        assert!((v.get(0, 0, 0) - 0.8).abs() < 1e-14);
        assert!(score_from_velocity(&x, &v, 1.0, &p).is_err());
    }

    #[test]
    fn zero_noise_prediction_gives_zero_score() {
        let p = PathSchedule::linear();
        let x = scalar(0.7);
        let t = 0.4;
        // ε̂ = x - t v = 0  ⇒  v = x / t
        let v = scalar(0.7 / t);
        assert!(score_from_velocity(&x, &v, t, &p).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn exact_velocity_recovers_noise() {
        let shape = GridShape::new(3, 2, 1).unwrap();
        let mut rng = root_rng(4);
        let x0 = white_noise(shape, &mut rng);
        let eps = white_noise(shape, &mut rng);
        for path in [PathSchedule::linear(), PathSchedule::vp()] {
            let t = 0.3;
            let x = interpolate(&x0, &eps, t, &path).unwrap();
            let c = path.coeffs(t);
            let v = Field::lincomb(c.alpha_dot, &x0, c.sigma_dot, &eps);
            let s = score_from_velocity(&x, &v, t, &path).unwrap();
            let expect = eps.scaled(-1.0 / c.sigma);
            assert!(s.max_abs_diff(&expect) < 1e-12);
        }
    }

    #[test]
    fn symmetric_mixture_at_origin() {
        let shape = GridShape::new(2, 2, 1).unwrap();
        let mu = Field::from_vec(shape, vec![1.0, -2.0, 0.5, 3.0]).unwrap();
        let o = GaussianMixtureOracle::new(vec![0.5, 0.5], vec![mu.clone(), mu.scaled(-1.0)], vec![0.2, 0.2])
            .unwrap();
        let v = gmm_velocity(&o, &Field::zeros(shape), 0.6, &PathSchedule::linear()).unwrap();
        assert!(v.dot(&mu).abs() < 1e-14);
    }

    #[test]
    fn mixture_validation() {
        let f = Field::zeros(GridShape::square(2));
        assert!(GaussianMixtureOracle::new(vec![], vec![], vec![]).is_err());
        assert!(GaussianMixtureOracle::new(vec![0.5], vec![f.clone()], vec![1.0]).is_err());
        assert!(GaussianMixtureOracle::new(vec![1.0], vec![f.clone()], vec![0.0]).is_err());
        assert!(GaussianMixtureOracle::new(vec![1.0], vec![f], vec![1.0]).is_ok());
    }

    #[test]
    fn spec_round_trip() {
        let shape = GridShape::square(4);
        let o = GaussianMixtureOracle::radial_power_law(shape, 3, 0.1, -1.0, 2.0, &mut root_rng(1)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("gmm.json");
        std::fs::write(&p, serde_json::to_string(&o.to_spec()).unwrap()).unwrap();
        let back = GaussianMixtureOracle::load_json(&p).unwrap();
        assert_eq!(back.means(), o.means());
        let e: f64 = o.means().iter().map(Field::norm_sq).sum::<f64>() / 48.0;
        assert!((e - 2.0).abs() < 1e-12);
    }

    #[test]
    fn clean_shrink_zero_is_identity() {
        let map = build_band_map(GridShape::square(4), 3).unwrap();
        let o = GaussianMixtureOracle::radial_power_law(map.shape(), 2, 0.1, -1.0, 1.0, &mut root_rng(2)).unwrap();
        let m = CleanShrink::new(o.clone(), map, vec![0.0; 3]).unwrap();
        let x = white_noise(m.shape(), &mut root_rng(3));
        for t in [0.0, 0.4, 1.0] {
            let a = m.predict(&x, t).unwrap();
            let b = o.predict(&x, t).unwrap();
            assert!(a.velocity.max_abs_diff(&b.velocity) < 1e-12);
        }
    }

    #[test]
    fn radial_pull_vanishes_on_balanced_band() {
        let map = build_band_map(GridShape::square(4), 3).unwrap();
        let pull = RadialPull::new(map.clone(), vec![0.3; 3], &[4.0, 1.0, 0.25], &[1.0; 3]).unwrap();
        assert_eq!(pull.kappas[1], 0.0);
        assert!(pull.kappas[0] > 0.0 && pull.kappas[2] < 0.0);
        let x = white_noise(map.shape(), &mut root_rng(5));
        let e = pull.score_error(&x, 0.5, &x).unwrap();
        let p1 = crate::spectral::project_band(&e, 1, &map).unwrap();
        assert!(p1.max_abs() < 1e-12);
    }
}
