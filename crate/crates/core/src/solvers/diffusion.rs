//! Diffusion coefficients `D(t)` with `g² = 2D` and the injected-energy budget.

use serde::{Deserialize, Serialize};

use crate::error::{CnsError, Result};
use crate::interpolant::{PathKind, PathSchedule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiffusionSpec {
    /// `D(t) = magnitude`.
    Constant { magnitude: f64 },
    /// `D(t) = magnitude · σ(t)`; vanishes at the data endpoint.
    SigmaLinear { magnitude: f64 },
    /// Piecewise-linear `D` through `(times[i], values[i])`, held constant
    /// outside the table.
    CustomTable { times: Vec<f64>, values: Vec<f64> },
}

impl Default for DiffusionSpec {
    fn default() -> Self {
        DiffusionSpec::SigmaLinear { magnitude: 1.0 }
    }
}

impl DiffusionSpec {
    pub fn none() -> Self {
        DiffusionSpec::Constant { magnitude: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DiffusionSpec::Constant { magnitude } | DiffusionSpec::SigmaLinear { magnitude } => {
                if !(magnitude.is_finite() && *magnitude >= 0.0) {
                    return Err(CnsError::invalid(format!(
                        "diffusion magnitude must be finite and non-negative, got {magnitude}"
                    )));
                }
            }
            DiffusionSpec::CustomTable { times, values } => {
                if times.is_empty() || times.len() != values.len() {
                    return Err(CnsError::invalid(
                        "diffusion table needs matching, non-empty times and values",
                    ));
                }
                if times.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(CnsError::invalid("diffusion table times must increase strictly"));
                }
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(CnsError::invalid("diffusion table values must be non-negative"));
                }
            }
        }
        Ok(())
    }

    /// `D(t)` under `path` (data-at-one time).
    pub fn d(&self, t: f64, path: &PathSchedule) -> f64 {
        match self {
            DiffusionSpec::Constant { magnitude } => *magnitude,
            DiffusionSpec::SigmaLinear { magnitude } => magnitude * path.sigma(t),
            DiffusionSpec::CustomTable { times, values } => table_lookup(times, values, t),
        }
    }

    pub fn g2(&self, t: f64, path: &PathSchedule) -> f64 {
        2.0 * self.d(t, path)
    }

    /// `D(t)/σ(t)`, the factor turning a noise prediction into the score
    /// correction `D·s = -(D/σ)·ε̂`. Exact for the σ-proportional family even
    /// at the data endpoint; may be infinite otherwise.
    pub fn d_over_sigma(&self, t: f64, path: &PathSchedule) -> f64 {
        match self {
            DiffusionSpec::SigmaLinear { magnitude } => *magnitude,
            _ => {
                let d = self.d(t, path);
                if d == 0.0 {
                    0.0
                } else {
                    d / path.sigma(t)
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            DiffusionSpec::Constant { magnitude } | DiffusionSpec::SigmaLinear { magnitude } => {
                *magnitude == 0.0
            }
            DiffusionSpec::CustomTable { values, .. } => values.iter().all(|v| *v == 0.0),
        }
    }

    /// `∫₀¹ g²(t) dt` in closed form.
    pub fn exact_energy(&self, path: &PathSchedule) -> f64 {
        match self {
            DiffusionSpec::Constant { magnitude } => 2.0 * magnitude,
            DiffusionSpec::SigmaLinear { magnitude } => {
                let sigma_integral = match path.kind {
                    PathKind::Linear => 0.5,
                    PathKind::Vp => 2.0 / std::f64::consts::PI,
                };
                2.0 * magnitude * sigma_integral
            }
            DiffusionSpec::CustomTable { times, values } => {
                let (t0, t1) = (times[0], times[times.len() - 1]);
                let mut e = values[0] * t0.clamp(0.0, 1.0);
                for i in 1..times.len() {
                    let a = times[i - 1].clamp(0.0, 1.0);
                    let b = times[i].clamp(0.0, 1.0);
                    if b > a {
                        let va = table_lookup(times, values, a);
                        let vb = table_lookup(times, values, b);
                        e += 0.5 * (va + vb) * (b - a);
                    }
                }
                e += values[values.len() - 1] * (1.0 - t1.clamp(0.0, 1.0));
                2.0 * e
            }
        }
    }

    /// `max |d(g²)/dt|` on `[0, 1]`.
    pub fn max_g2_slope(&self, path: &PathSchedule) -> f64 {
        match self {
            DiffusionSpec::Constant { .. } => 0.0,
            DiffusionSpec::SigmaLinear { magnitude } => {
                let sigma_slope = match path.kind {
                    PathKind::Linear => 1.0,
                    PathKind::Vp => std::f64::consts::FRAC_PI_2,
                };
                2.0 * magnitude * sigma_slope
            }
            DiffusionSpec::CustomTable { times, values } => times
                .windows(2)
                .zip(values.windows(2))
                .map(|(t, v)| 2.0 * ((v[1] - v[0]) / (t[1] - t[0])).abs())
                .fold(0.0, f64::max),
        }
    }
}

fn table_lookup(times: &[f64], values: &[f64], t: f64) -> f64 {
    if t <= times[0] {
        return values[0];
    }
    let last = times.len() - 1;
    if t >= times[last] {
        return values[last];
    }
    let i = times.partition_point(|&x| x <= t);
    let (t0, t1) = (times[i - 1], times[i]);
    let w = (t - t0) / (t1 - t0);
    values[i - 1] * (1.0 - w) + values[i] * w
}

/// Left Riemann sum of `g²` on `steps` uniform cells, the exact integral,
/// and the first-order error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBudget {
    pub discrete: f64,
    pub exact: f64,
    pub bound: f64,
}

pub fn energy_budget(diffusion: &DiffusionSpec, path: &PathSchedule, steps: usize) -> Result<EnergyBudget> {
    if steps == 0 {
        return Err(CnsError::invalid("energy budget needs at least one step"));
    }
    diffusion.validate()?;
    let dt = 1.0 / steps as f64;
    let discrete = (0..steps)
        .map(|k| diffusion.g2(k as f64 * dt, path) * dt)
        .sum();
    Ok(EnergyBudget {
        discrete,
        exact: diffusion.exact_energy(path),
        bound: diffusion.max_g2_slope(path) / (2.0 * steps as f64),
    })
}
