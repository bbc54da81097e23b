//! ODE and SDE integrators for generative velocity fields.
//!
//! Time runs on the uniform grid `t_k = k/T`, `k = 0..=T`, from noise
//! (`t = 0`) to data (`t = 1`). The generative SDE is
//!
//! ```text
//! dx = (v + D·s) dt + sqrt(2D) dW,      D·s = -(D/σ)·ε̂
//! ```
//!
//! Writing the score correction through the noise prediction keeps the drift
//! finite at `t = 1` for the σ-proportional diffusion family. At stage times
//! where `D/σ` is not finite, the stage uses the velocity alone and injects no
//! noise.
//!
//! All stochastic schemes treat the noise as additive: within one step the
//! (possibly colored) noise direction is fixed and only its scalar amplitude
//! `b(t) = scale·sqrt(2D(t))` varies between stages.

mod diffusion;
mod scheme;
pub mod store;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use diffusion::{energy_budget, DiffusionSpec, EnergyBudget};
pub use scheme::{step, AdditiveSystem, Scheme, StepOutput};

use crate::error::{CnsError, Result};
use crate::field::{Field, GridShape};
use crate::interpolant::VelocityModel;
use crate::noise::{color_noise, mbm_profile, white_noise, BandScaleProfile, HurstSchedule};
use crate::rng::{chain_rng, root_rng, SimRng};
use crate::spectral::BandMap;

/// Maps a white standard-normal field to the noise direction used at one step.
pub trait NoiseColoring: Send + Sync {
    fn color(&self, step: usize, t: f64, white: Field) -> Result<Field>;

    /// Expected per-coordinate mean square of the colored field.
    fn mean_square(&self, _step: usize, _t: f64) -> f64 {
        1.0
    }

    fn name(&self) -> String;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct WhiteNoise;

impl NoiseColoring for WhiteNoise {
    fn color(&self, _step: usize, _t: f64, white: Field) -> Result<Field> {
        Ok(white)
    }

    fn name(&self) -> String {
        "white".into()
    }
}

/// Time-invariant band profile.
#[derive(Debug, Clone)]
pub struct StaticColor {
    pub profile: BandScaleProfile,
    pub map: BandMap,
}

impl NoiseColoring for StaticColor {
    fn color(&self, _step: usize, _t: f64, white: Field) -> Result<Field> {
        color_noise(&white, &self.profile, &self.map)
    }

    fn mean_square(&self, _step: usize, _t: f64) -> f64 {
        let rms = self.profile.coordinate_rms(&self.map);
        match self.profile.mode {
            crate::noise::NormalizationMode::AnalyticRms => rms * rms,
            crate::noise::NormalizationMode::EmpiricalStd => 1.0,
        }
    }

    fn name(&self) -> String {
        "colored".into()
    }
}

/// Independent per-step increments with the multifractional spectrum of
/// `H(t)`.
#[derive(Debug, Clone)]
pub struct MbmNoise {
    pub schedule: HurstSchedule,
    pub map: BandMap,
}

impl NoiseColoring for MbmNoise {
    fn color(&self, _step: usize, t: f64, white: Field) -> Result<Field> {
        let profile = mbm_profile(&self.map, &self.schedule, t)?;
        color_noise(&white, &profile, &self.map)
    }

    fn name(&self) -> String {
        "mbm".into()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Record {
    /// Every state and every injected increment.
    Full,
    /// Only the initial and final states.
    #[default]
    Endpoints,
}

#[derive(Clone)]
pub struct SolverConfig {
    pub scheme: Scheme,
    pub steps: usize,
    pub seed: u64,
    pub noise: Arc<dyn NoiseColoring>,
    /// Multiplier on the injected noise amplitude.
    pub energy_scale: f64,
    pub record: Record,
}

impl std::fmt::Debug for SolverConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SolverConfig")
            .field("scheme", &self.scheme)
            .field("steps", &self.steps)
            .field("seed", &self.seed)
            .field("noise", &self.noise.name())
            .field("energy_scale", &self.energy_scale)
            .field("record", &self.record)
            .finish()
    }
}

impl SolverConfig {
    pub fn new(scheme: Scheme, steps: usize, seed: u64) -> Self {
        Self {
            scheme,
            steps,
            seed,
            noise: Arc::new(WhiteNoise),
            energy_scale: 1.0,
            record: Record::Endpoints,
        }
    }

    pub fn with_noise(mut self, noise: Arc<dyn NoiseColoring>) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_record(mut self, record: Record) -> Self {
        self.record = record;
        self
    }

    pub fn with_energy_scale(mut self, scale: f64) -> Self {
        self.energy_scale = scale;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(CnsError::invalid("solver needs at least one step"));
        }
        if !(self.energy_scale.is_finite() && self.energy_scale > 0.0) {
            return Err(CnsError::invalid(format!(
                "energy scale must be positive, got {}",
                self.energy_scale
            )));
        }
        Ok(())
    }
}

/// Recorded output of one sampling run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// All `T + 1` states under [`Record::Full`], otherwise `[initial, final]`.
    pub states: Vec<Field>,
    /// Injected noise `η_k` per step (SDE schemes, [`Record::Full`] only).
    pub increments: Vec<Field>,
    /// `Σ_k η_k`; `None` for ODE schemes.
    pub cumulative_noise: Option<Field>,
    /// Expected injected energy per coordinate, `scale²·g²(t_k)·Δt·E[w²]`.
    pub per_step_energy: Vec<f64>,
}

impl Trajectory {
    pub fn initial(&self) -> &Field {
        &self.states[0]
    }

    pub fn terminal(&self) -> &Field {
        self.states.last().expect("trajectory has states")
    }

    pub fn total_energy(&self) -> f64 {
        self.per_step_energy.iter().sum()
    }
}

/// Uniform time grid `k/T` for `k = 0..=T`.
pub fn time_grid(steps: usize) -> Vec<f64> {
    (0..=steps).map(|k| k as f64 / steps as f64).collect()
}

/// Adapter exposing a velocity model as an additive SDE (or ODE) system.
struct ModelSystem<'a, M: ?Sized> {
    model: &'a M,
    diffusion: &'a DiffusionSpec,
    stochastic: bool,
    scale: f64,
}

impl<M: VelocityModel + ?Sized> ModelSystem<'_, M> {
    fn score_factor(&self, t: f64) -> Option<f64> {
        if !self.stochastic {
            return None;
        }
        let path = self.model.path();
        if self.diffusion.d(t, &path) == 0.0 {
            return None;
        }
        let r = self.diffusion.d_over_sigma(t, &path);
        r.is_finite().then_some(r)
    }
}

impl<M: VelocityModel + ?Sized> AdditiveSystem for ModelSystem<'_, M> {
    fn drift(&self, x: &Field, t: f64) -> Result<Field> {
        match self.score_factor(t) {
            None => self.model.velocity(x, t),
            Some(r) => {
                let p = self.model.predict(x, t)?;
                let mut out = p.velocity;
                out.axpy(-r, &p.noise);
                Ok(out)
            }
        }
    }

    fn amplitude(&self, t: f64) -> f64 {
        match self.score_factor(t) {
            None => 0.0,
            Some(_) => self.scale * self.diffusion.g2(t, &self.model.path()).sqrt(),
        }
    }
}

/// Integrate a system over `[0, 1]` with `steps` uniform steps.
pub fn integrate_system(
    sys: &dyn AdditiveSystem,
    scheme: Scheme,
    steps: usize,
    init: &Field,
    noise: &dyn NoiseColoring,
    record: Record,
    rng: &mut SimRng,
) -> Result<Trajectory> {
    if steps == 0 {
        return Err(CnsError::invalid("solver needs at least one step"));
    }
    let shape = init.shape();
    let times = time_grid(steps);
    let h = 1.0 / steps as f64;
    let mut x = init.clone();
    let mut states = vec![init.clone()];
    let mut increments = Vec::new();
    let mut cumulative = scheme.is_stochastic().then(|| Field::zeros(shape));
    let mut per_step_energy = Vec::with_capacity(steps);
    for k in 0..steps {
        let t = times[k];
        let (xi1, xi2) = if scheme.is_stochastic() {
            let w1 = noise.color(k, t, white_noise(shape, rng))?;
            let w2 = if scheme.uses_second_normal() {
                Some(noise.color(k, t, white_noise(shape, rng))?)
            } else {
                None
            };
            (Some(w1), w2)
        } else {
            (None, None)
        };
        let out = step(scheme, sys, &x, t, h, xi1.as_ref(), xi2.as_ref())?;
        if !out.state.is_finite() {
            return Err(CnsError::Diverged { step: k, time: t });
        }
        x = out.state;
        let amp = sys.amplitude(t);
        per_step_energy.push(if scheme.is_stochastic() {
            amp * amp * h * noise.mean_square(k, t)
        } else {
            0.0
        });
        if let (Some(c), Some(eta)) = (cumulative.as_mut(), out.injected.as_ref()) {
            c.axpy(1.0, eta);
        }
        if record == Record::Full {
            states.push(x.clone());
            if let Some(eta) = out.injected {
                increments.push(eta);
            }
        }
    }
    if record == Record::Endpoints {
        states.push(x);
    }
    Ok(Trajectory {
        times,
        states,
        increments,
        cumulative_noise: cumulative,
        per_step_energy,
    })
}

pub fn integrate_with_rng<M: VelocityModel + ?Sized>(
    model: &M,
    diffusion: &DiffusionSpec,
    config: &SolverConfig,
    init: &Field,
    rng: &mut SimRng,
) -> Result<Trajectory> {
    config.validate()?;
    diffusion.validate()?;
    model.shape().ensure_eq(&init.shape())?;
    let sys = ModelSystem {
        model,
        diffusion,
        stochastic: config.scheme.is_stochastic(),
        scale: config.energy_scale,
    };
    integrate_system(
        &sys,
        config.scheme,
        config.steps,
        init,
        config.noise.as_ref(),
        config.record,
        rng,
    )
}

/// Single run driven by the root stream of `config.seed`.
pub fn integrate<M: VelocityModel + ?Sized>(
    model: &M,
    diffusion: &DiffusionSpec,
    config: &SolverConfig,
    init: &Field,
) -> Result<Trajectory> {
    integrate_with_rng(model, diffusion, config, init, &mut root_rng(config.seed))
}

/// Initial states for a batch of chains.
#[derive(Debug, Clone, Copy)]
pub enum Inits<'a> {
    /// Each chain draws its own standard-normal start from its stream.
    White,
    Given(&'a [Field]),
}

/// Run `chains` independent chains in parallel. Chain `i` uses
/// [`chain_rng`]`(config.seed, i)`, first for its initial state (when drawn)
/// and then for its noise, so results do not depend on scheduling.
pub fn sample_chains<M: VelocityModel + ?Sized>(
    model: &M,
    diffusion: &DiffusionSpec,
    config: &SolverConfig,
    chains: usize,
    inits: Inits<'_>,
) -> Result<Vec<Trajectory>> {
    if let Inits::Given(v) = inits {
        if v.len() != chains {
            return Err(CnsError::invalid(format!(
                "{chains} chains requested but {} initial states given",
                v.len()
            )));
        }
    }
    let shape: GridShape = model.shape();
    (0..chains)
        .into_par_iter()
        .map(|i| {
            let mut rng = chain_rng(config.seed, i as u64);
            let init = match inits {
                Inits::White => white_noise(shape, &mut rng),
                Inits::Given(v) => v[i].clone(),
            };
            integrate_with_rng(model, diffusion, config, &init, &mut rng).map_err(|e| CnsError::InChain {
                chain: i,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Terminal states of a batch.
pub fn terminals(trajectories: &[Trajectory]) -> Vec<Field> {
    trajectories.iter().map(|t| t.terminal().clone()).collect()
}
