//! Single-step updates for additive-noise systems `dx = a(x,t) dt + b(t) dW`.
//!
//! The stochastic Runge–Kutta schemes are Rößler's additive-noise SRA
//! methods: `Srk2` is SRA1 (two drift evaluations) and `Srk2s` is SRA3
//! (three drift evaluations). With `ΔW = √h·ξ₁` and `ΔZ = √h·ξ₂` the
//! iterated integral is approximated by `I₁₀ = h/2·(ΔW + ΔZ/√3)`, so
//! `E[I₁₀²] = h³/3` and `E[ΔW·I₁₀] = h²/2`.

use serde::{Deserialize, Serialize};

use crate::error::{CnsError, Result};
use crate::field::Field;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    OdeEuler,
    OdeHeun,
    SdeEulerMaruyama,
    SdeHeun,
    Srk2,
    Srk2s,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::OdeEuler,
        Scheme::OdeHeun,
        Scheme::SdeEulerMaruyama,
        Scheme::SdeHeun,
        Scheme::Srk2,
        Scheme::Srk2s,
    ];

    pub fn is_stochastic(self) -> bool {
        !matches!(self, Scheme::OdeEuler | Scheme::OdeHeun)
    }

    /// Whether each step consumes a second normal field for `ΔZ`.
    pub fn uses_second_normal(self) -> bool {
        matches!(self, Scheme::Srk2 | Scheme::Srk2s)
    }

    /// Drift evaluations per step.
    pub fn evaluations(self) -> usize {
        match self {
            Scheme::OdeEuler | Scheme::SdeEulerMaruyama => 1,
            Scheme::OdeHeun | Scheme::SdeHeun | Scheme::Srk2 => 2,
            Scheme::Srk2s => 3,
        }
    }
}

/// Drift and scalar noise amplitude of an additive SDE.
pub trait AdditiveSystem: Sync {
    fn drift(&self, x: &Field, t: f64) -> Result<Field>;
    fn amplitude(&self, t: f64) -> f64;
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    pub state: Field,
    /// Noise added during the step; `None` for ODE schemes.
    pub injected: Option<Field>,
}

struct Tableau {
    c0: &'static [f64],
    c1: &'static [f64],
    a0: &'static [&'static [f64]],
    b0: &'static [&'static [f64]],
    alpha: &'static [f64],
    beta1: &'static [f64],
    beta2: &'static [f64],
}

const SRA1: Tableau = Tableau {
    c0: &[0.0, 0.75],
    c1: &[1.0, 0.0],
    a0: &[&[], &[0.75]],
    b0: &[&[], &[1.5]],
    alpha: &[1.0 / 3.0, 2.0 / 3.0],
    beta1: &[1.0, 0.0],
    beta2: &[-1.0, 1.0],
};

const SRA3: Tableau = Tableau {
    c0: &[0.0, 1.0, 0.5],
    c1: &[1.0, 0.0, 0.0],
    a0: &[&[], &[1.0], &[0.25, 0.25]],
    b0: &[&[], &[0.0], &[1.0, 0.5]],
    alpha: &[1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
    beta1: &[1.0, 0.0, 0.0],
    beta2: &[-1.0, 1.0, 0.0],
};

fn need<'a>(xi: Option<&'a Field>, which: &str) -> Result<&'a Field> {
    xi.ok_or_else(|| CnsError::invalid(format!("stochastic step requires the {which} normal field")))
}

/// Advance `x` from `t` to `t + h`. `xi1`/`xi2` are unit-variance noise
/// directions; they are ignored by ODE schemes.
pub fn step(
    scheme: Scheme,
    sys: &dyn AdditiveSystem,
    x: &Field,
    t: f64,
    h: f64,
    xi1: Option<&Field>,
    xi2: Option<&Field>,
) -> Result<StepOutput> {
    match scheme {
        Scheme::OdeEuler => {
            let mut next = x.clone();
            next.axpy(h, &sys.drift(x, t)?);
            Ok(StepOutput {
                state: next,
                injected: None,
            })
        }
        Scheme::OdeHeun => {
            let k1 = sys.drift(x, t)?;
            let mut pred = x.clone();
            pred.axpy(h, &k1);
            let k2 = sys.drift(&pred, t + h)?;
            let mut next = x.clone();
            next.axpy(0.5 * h, &k1);
            next.axpy(0.5 * h, &k2);
            Ok(StepOutput {
                state: next,
                injected: None,
            })
        }
        Scheme::SdeEulerMaruyama => {
            let xi = need(xi1, "first")?;
            let mut next = x.clone();
            next.axpy(h, &sys.drift(x, t)?);
            let b = sys.amplitude(t);
            let injected = if b != 0.0 {
                let eta = xi.scaled(b * h.sqrt());
                next.axpy(1.0, &eta);
                eta
            } else {
                Field::zeros(x.shape())
            };
            Ok(StepOutput {
                state: next,
                injected: Some(injected),
            })
        }
        Scheme::SdeHeun => {
            let xi = need(xi1, "first")?;
            let dw = xi.scaled(h.sqrt());
            let (b0, b1) = (sys.amplitude(t), sys.amplitude(t + h));
            let k1 = sys.drift(x, t)?;
            let mut pred = x.clone();
            pred.axpy(h, &k1);
            if b0 != 0.0 {
                pred.axpy(b0, &dw);
            }
            let k2 = sys.drift(&pred, t + h)?;
            let mut next = x.clone();
            next.axpy(0.5 * h, &k1);
            next.axpy(0.5 * h, &k2);
            let eta = dw.scaled(0.5 * (b0 + b1));
            if b0 != 0.0 || b1 != 0.0 {
                next.axpy(1.0, &eta);
            }
            Ok(StepOutput {
                state: next,
                injected: Some(eta),
            })
        }
        Scheme::Srk2 => sra_step(&SRA1, sys, x, t, h, need(xi1, "first")?, need(xi2, "second")?),
        Scheme::Srk2s => sra_step(&SRA3, sys, x, t, h, need(xi1, "first")?, need(xi2, "second")?),
    }
}

fn sra_step(
    tab: &Tableau,
    sys: &dyn AdditiveSystem,
    x: &Field,
    t: f64,
    h: f64,
    xi1: &Field,
    xi2: &Field,
) -> Result<StepOutput> {
    let sqrt_h = h.sqrt();
    let dw = xi1.scaled(sqrt_h);
    // I₁₀ / h
    let i10h = Field::lincomb(0.5 * sqrt_h, xi1, 0.5 * sqrt_h / 3f64.sqrt(), xi2);
    let b: Vec<f64> = tab.c1.iter().map(|c| sys.amplitude(t + c * h)).collect();
    let stages = tab.c0.len();
    let mut drifts: Vec<Field> = Vec::with_capacity(stages);
    for i in 0..stages {
        let mut hi = x.clone();
        for (j, a) in tab.a0[i].iter().enumerate() {
            if *a != 0.0 {
                hi.axpy(a * h, &drifts[j]);
            }
        }
        let noise_coef: f64 = tab.b0[i].iter().zip(&b).map(|(bij, bj)| bij * bj).sum();
        if noise_coef != 0.0 {
            hi.axpy(noise_coef, &i10h);
        }
        drifts.push(sys.drift(&hi, t + tab.c0[i] * h)?);
    }
    let mut next = x.clone();
    for (a, k) in tab.alpha.iter().zip(&drifts) {
        next.axpy(a * h, k);
    }
    let coef_w: f64 = tab.beta1.iter().zip(&b).map(|(c, bi)| c * bi).sum();
    let coef_z: f64 = tab.beta2.iter().zip(&b).map(|(c, bi)| c * bi).sum();
    let eta = Field::lincomb(coef_w, &dw, coef_z, &i10h);
    if coef_w != 0.0 || coef_z != 0.0 {
        next.axpy(1.0, &eta);
    }
    Ok(StepOutput {
        state: next,
        injected: Some(eta),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GridShape;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Linear {
        rate: f64,
        amp: f64,
        calls: AtomicUsize,
    }

    impl AdditiveSystem for Linear {
        fn drift(&self, x: &Field, _t: f64) -> Result<Field> {
            self.calls.fetch_add(1, Ordering::Relaxed);
            Ok(x.scaled(-self.rate))
        }
        fn amplitude(&self, _t: f64) -> f64 {
            self.amp
        }
    }

    fn scalar(v: f64) -> Field {
        Field::filled(GridShape::square(1), v)
    }

    #[test]
    fn heun_reduces_to_rk2() {
        let sys = Linear { rate: 1.0, amp: 0.0, calls: AtomicUsize::new(0) };
        let h = 0.1;
        let z = scalar(0.0);
        for scheme in [Scheme::OdeHeun, Scheme::SdeHeun] {
            let out = step(scheme, &sys, &scalar(2.0), 0.0, h, Some(&z), Some(&z)).unwrap();
            assert!((out.state.get(0, 0, 0) - 2.0 * (1.0 - h + h * h / 2.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn evaluation_counts() {
        for scheme in Scheme::ALL {
            let sys = Linear { rate: 1.0, amp: 1.0, calls: AtomicUsize::new(0) };
            let xi = scalar(0.3);
            step(scheme, &sys, &scalar(1.0), 0.0, 0.1, Some(&xi), Some(&xi)).unwrap();
            assert_eq!(sys.calls.load(Ordering::Relaxed), scheme.evaluations(), "{scheme:?}");
        }
    }

    #[test]
    fn constant_amplitude_injects_plain_increment() {
        let sys = Linear { rate: 0.0, amp: 2.0, calls: AtomicUsize::new(0) };
        let (xi1, xi2) = (scalar(0.7), scalar(-1.3));
        for scheme in [Scheme::SdeEulerMaruyama, Scheme::SdeHeun, Scheme::Srk2, Scheme::Srk2s] {
            let out = step(scheme, &sys, &scalar(0.0), 0.0, 0.25, Some(&xi1), Some(&xi2)).unwrap();
            assert!((out.state.get(0, 0, 0) - 2.0 * 0.5 * 0.7).abs() < 1e-15, "{scheme:?}");
        }
    }

    #[test]
    fn missing_noise_is_rejected() {
        let sys = Linear { rate: 1.0, amp: 1.0, calls: AtomicUsize::new(0) };
        assert!(step(Scheme::Srk2, &sys, &scalar(1.0), 0.0, 0.1, Some(&scalar(0.0)), None).is_err());
    }
}
