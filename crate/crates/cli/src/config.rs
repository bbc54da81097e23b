//! Versioned JSON run configuration. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use cns_core::cns::{AblationMode, RelaxationConfig};
use cns_core::diagnostics::DriftConfig;
use cns_core::gamma::GammaConfig;
use cns_core::rng::root_rng;
use cns_core::solvers::{DiffusionSpec, Scheme};
use cns_core::{GaussianMixtureOracle, GridShape, HurstSchedule, PathSchedule};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub version: u32,
    pub seed: u64,
    pub oracle: OracleConfig,
    #[serde(default = "default_bands")]
    pub bands: usize,
    #[serde(default)]
    pub path: PathSchedule,
    #[serde(default)]
    pub gamma: Option<GammaSection>,
    #[serde(default)]
    pub sample: Option<SampleSection>,
    #[serde(default)]
    pub analyze: Option<AnalyzeSection>,
    #[serde(default)]
    pub ablate: Option<AblateSection>,
}

fn default_bands() -> usize {
    8
}

fn default_true() -> bool {
    true
}

fn default_one() -> f64 {
    1.0
}

fn default_channels() -> usize {
    1
}

/// The data distribution. Its `seed` belongs to the model definition and is
/// independent of the run seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleConfig {
    RadialPowerLaw {
        height: usize,
        width: usize,
        #[serde(default = "default_channels")]
        channels: usize,
        components: usize,
        variance: f64,
        /// Radial amplitude exponent of the means; `-1` gives a `1/f²` spectrum.
        exponent: f64,
        mean_energy: f64,
        #[serde(default)]
        seed: u64,
    },
    Gaussian {
        height: usize,
        width: usize,
        #[serde(default = "default_channels")]
        channels: usize,
        #[serde(default)]
        mean: f64,
        variance: f64,
    },
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaSection {
    pub steps: usize,
    pub batches: usize,
    pub batch_size: usize,
    #[serde(default = "default_ode")]
    pub scheme: Scheme,
}

fn default_ode() -> Scheme {
    Scheme::OdeEuler
}

fn default_sde() -> Scheme {
    Scheme::SdeEulerMaruyama
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ode,
    Sde,
    Cns,
    Mbm,
}

/// Per-band attenuation of the oracle's clean prediction, standing in for an
/// imperfect learned model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub alphas: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSection {
    pub method: Method,
    /// Integrator; defaults to `ode_euler` for `ode` and `sde_euler_maruyama` otherwise.
    #[serde(default)]
    pub solver: Option<Scheme>,
    pub steps: usize,
    pub chains: usize,
    #[serde(default)]
    pub diffusion: DiffusionSpec,
    #[serde(default = "default_one")]
    pub energy_scale: f64,
    #[serde(default)]
    pub init_file: Option<PathBuf>,
    /// γ matrix for `cns`; the schedule is built with `relaxation`.
    #[serde(default)]
    pub gamma_file: Option<PathBuf>,
    /// Ready-made β schedule for `cns`, used instead of `gamma_file`.
    #[serde(default)]
    pub beta_file: Option<PathBuf>,
    #[serde(default)]
    pub relaxation: RelaxationConfig,
    #[serde(default = "default_true")]
    pub whiten: bool,
    #[serde(default)]
    pub hurst: Option<HurstSchedule>,
    #[serde(default)]
    pub perturbation: Option<Perturbation>,
    /// Number of leading chains whose full trajectories are written.
    #[serde(default)]
    pub record_chains: usize,
}

impl SampleSection {
    pub fn scheme(&self) -> Scheme {
        self.solver.unwrap_or(match self.method {
            Method::Ode => default_ode(),
            _ => default_sde(),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum ErrorModel {
    /// `e = -Σ α_f P_f s*`.
    ScoreShrink { alphas: Vec<f64> },
    /// `e = -Σ α_f κ_f P_f x` with `κ_f = (R_f - N_f)/(R_f + N_f)` from the
    /// target PSD `R` and unit white noise `N`.
    RadialPull { alphas: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSection {
    pub steps: usize,
    pub chains: usize,
    pub error: ErrorModel,
    #[serde(default)]
    pub diffusion: DiffusionSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeSection {
    pub samples: PathBuf,
    /// Reference set; drawn from the oracle when absent.
    #[serde(default)]
    pub target: Option<PathBuf>,
    #[serde(default = "default_target_samples")]
    pub target_samples: usize,
    #[serde(default)]
    pub inits: Option<PathBuf>,
    #[serde(default)]
    pub injected: Option<PathBuf>,
    #[serde(default = "default_null_samples")]
    pub null_samples: usize,
    #[serde(default)]
    pub drift: Option<DriftSection>,
    #[serde(default = "default_true")]
    pub svg: bool,
}

fn default_target_samples() -> usize {
    1000
}

fn default_null_samples() -> usize {
    500
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblateSection {
    pub gamma_file: PathBuf,
    pub modes: Vec<AblationMode>,
    pub steps: usize,
    pub chains: usize,
    #[serde(default = "default_sde")]
    pub solver: Scheme,
    #[serde(default)]
    pub diffusion: DiffusionSpec,
    #[serde(default)]
    pub relaxation: RelaxationConfig,
    #[serde(default = "default_true")]
    pub whiten: bool,
    #[serde(default)]
    pub perturbation: Option<Perturbation>,
    #[serde(default)]
    pub target: Option<PathBuf>,
    #[serde(default = "default_target_samples")]
    pub target_samples: usize,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: Config = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if cfg.version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "{}: schema version {} is not supported (expected {SCHEMA_VERSION})",
                path.display(),
                cfg.version
            )));
        }
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        Ok(cfg)
    }

    /// Make every relative file path relative to `base`.
    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let OracleConfig::File { path } = &mut self.oracle {
            fix(path);
        }
        if let Some(s) = &mut self.sample {
            for p in [&mut s.init_file, &mut s.gamma_file, &mut s.beta_file].into_iter().flatten() {
                fix(p);
            }
        }
        if let Some(a) = &mut self.analyze {
            fix(&mut a.samples);
            for p in [&mut a.target, &mut a.inits, &mut a.injected].into_iter().flatten() {
                fix(p);
            }
        }
        if let Some(a) = &mut self.ablate {
            fix(&mut a.gamma_file);
            if let Some(p) = &mut a.target {
                fix(p);
            }
        }
    }

    pub fn oracle(&self) -> Result<GaussianMixtureOracle, CliError> {
        let oracle = match &self.oracle {
            OracleConfig::RadialPowerLaw {
                height,
                width,
                channels,
                components,
                variance,
                exponent,
                mean_energy,
                seed,
            } => {
                let shape = GridShape::new(*height, *width, *channels)?;
                GaussianMixtureOracle::radial_power_law(
                    shape,
                    *components,
                    *variance,
                    *exponent,
                    *mean_energy,
                    &mut root_rng(*seed),
                )?
            }
            OracleConfig::Gaussian {
                height,
                width,
                channels,
                mean,
                variance,
            } => {
                let shape = GridShape::new(*height, *width, *channels)?;
                GaussianMixtureOracle::gaussian(cns_core::Field::filled(shape, *mean), *variance)?
            }
            OracleConfig::File { path } => GaussianMixtureOracle::load_json(path)?,
        };
        Ok(oracle.with_path(self.path))
    }

    pub fn gamma_config(&self) -> Result<GammaConfig, CliError> {
        let g = self.gamma.as_ref().ok_or_else(|| CliError::Config("missing `gamma` section".into()))?;
        let cfg = GammaConfig {
            steps: g.steps,
            batches: g.batches,
            batch_size: g.batch_size,
            seed: self.seed,
            scheme: g.scheme,
        };
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn sample_section(&self) -> Result<&SampleSection, CliError> {
        let s = self.sample.as_ref().ok_or_else(|| CliError::Config("missing `sample` section".into()))?;
        if s.steps == 0 || s.chains == 0 {
            return Err(CliError::Config("sample needs positive `steps` and `chains`".into()));
        }
        let scheme = s.scheme();
        match s.method {
            Method::Ode if scheme.is_stochastic() => {
                return Err(CliError::Config(format!("method `ode` needs a deterministic solver, got {scheme:?}")));
            }
            Method::Sde | Method::Cns | Method::Mbm if !scheme.is_stochastic() => {
                return Err(CliError::Config(format!("a stochastic solver is required, got {scheme:?}")));
            }
            Method::Cns if s.gamma_file.is_none() && s.beta_file.is_none() => {
                return Err(CliError::Config("method `cns` needs `gamma_file` or `beta_file`".into()));
            }
            Method::Mbm if s.hurst.is_none() => {
                return Err(CliError::Config("method `mbm` needs a `hurst` schedule".into()));
            }
            _ => {}
        }
        Ok(s)
    }

    pub fn analyze_section(&self) -> Result<&AnalyzeSection, CliError> {
        self.analyze.as_ref().ok_or_else(|| CliError::Config("missing `analyze` section".into()))
    }

    pub fn ablate_section(&self) -> Result<&AblateSection, CliError> {
        let a = self.ablate.as_ref().ok_or_else(|| CliError::Config("missing `ablate` section".into()))?;
        if a.modes.is_empty() {
            return Err(CliError::Config("ablate needs at least one mode".into()));
        }
        if a.steps == 0 || a.chains == 0 {
            return Err(CliError::Config("ablate needs positive `steps` and `chains`".into()));
        }
        if !a.solver.is_stochastic() {
            return Err(CliError::Config("ablate needs a stochastic solver".into()));
        }
        Ok(a)
    }
}

impl DriftSection {
    pub fn drift_config(&self, seed: u64) -> DriftConfig {
        DriftConfig {
            steps: self.steps,
            chains: self.chains,
            seed,
            z_threshold: 2.0,
        }
    }
}
