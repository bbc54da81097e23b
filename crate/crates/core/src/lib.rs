//! Colored noise sampling for diffusion and flow-matching generative processes.
//!
//! The crate is organised bottom-up:
//!
//! * [`spectral`]: 2-D DFT helpers, radial band maps, band projections, PSD.
//! * [`noise`]: white, power-law, per-band scaled and multifractional increments.
//! * [`interpolant`]: path schedules, velocity/score conversions and the
//!   Gaussian-mixture reference oracle.
//! * [`solvers`]: ODE/SDE integrators with pluggable noise sources.
//! * [`gamma`]: spectral progress estimation from recorded trajectories.
//! * [`cns`]: the variance-conserving colored-noise schedule and ablations.
//! * [`diagnostics`]: energy budgets, spectral gaps and error metrics.

pub mod cns;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod gamma;
pub mod interpolant;
pub mod noise;
pub mod rng;
pub mod solvers;
pub mod spectral;

pub use error::{CnsError, Result};
pub use field::{Field, GridShape};
pub use noise::{BandScaleProfile, HurstSchedule, NormalizationMode};
pub use spectral::{BandMap, Spectrum};
pub use interpolant::{GaussianMixtureOracle, PathSchedule, Prediction, VelocityModel};
