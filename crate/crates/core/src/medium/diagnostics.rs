use num_complex::Complex64;
use serde::Serialize;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitRegime {
    /// ε = −2ε₀ + κ(a/d)³ with σ = 0.
    StaticEps,
    /// ε(ω) → −2ε₀ with iσ/ω → κ₁(a/d)³.
    Dispersive,
    /// Fixed material: the limit is zero.
    Vanishing,
    /// ε′ = −2ε₀ exactly while κ ≠ 0: the finite-(a/d) ratio blows up.
    Resonant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitDiagnostics {
    /// lim (a/d)³(ε′ − ε₀)/(ε′ + 2ε₀) as a/d → 0.
    pub w: [f64; 2],
    /// (a/d)³(ε′ − ε₀)/(ε′ + 2ε₀) at the supplied a/d; `None` at resonance.
    pub finite_value: Option<[f64; 2]>,
    pub kappa: Option<[f64; 2]>,
    /// κ₁ with iσ/ω = κ₁(a/d)³, for the dispersive regime.
    pub kappa1: Option<[f64; 2]>,
    pub regime: LimitRegime,
}

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

/// Relative tolerance for recognising ε′ + 2ε₀ = κ(a/d)³.
const TUNING_TOL: f64 = 1e-9;

/// Classifies the limit of (a/d)³(ε′ − ε₀)/(ε′ + 2ε₀), ε′ = ε + iσ/ω, for the tuning constant κ.
pub fn limit_diagnostics(eps: Complex64, eps0: f64, sigma: f64, omega: f64, a_over_d: f64, kappa: Option<Complex64>) -> Result<LimitDiagnostics> {
    if !(a_over_d > 0.0 && a_over_d < 1.0) {
        return Err(Error::InvalidArgument(format!("a/d must lie in (0, 1), got {a_over_d}")));
    }
    if !(eps0 > 0.0 && sigma >= 0.0 && sigma.is_finite() && omega > 0.0) {
        return Err(Error::InvalidArgument("need ε₀ > 0, finite σ ≥ 0 and ω > 0".into()));
    }
    let eps_prime = eps + Complex64::new(0.0, sigma / omega);
    let ratio3 = a_over_d.powi(3);
    let denom = eps_prime + 2.0 * eps0;
    let kappa = kappa.filter(|k| k.norm() > 0.0);
    let finite_value = (denom.norm() > 0.0).then(|| pair((eps_prime - eps0) / denom * ratio3));
    let make = |w: Complex64, regime, kappa1| LimitDiagnostics { w: pair(w), finite_value, kappa: kappa.map(pair), kappa1, regime };
    if denom.norm() == 0.0 {
        return match kappa {
            None => Err(Error::SingularConfiguration(format!("ε′ = −2ε₀ = {} with κ = 0", -2.0 * eps0))),
            Some(_) => Ok(make(Complex64::new(f64::INFINITY, 0.0), LimitRegime::Resonant, None)),
        };
    }
    if let Some(k) = kappa {
        let tuned = k * ratio3;
        if (denom - tuned).norm() <= TUNING_TOL * (denom.norm() + tuned.norm()) {
            // Under ε′ = −2ε₀ + κ(a/d)³ the ratio equals (ε′ − ε₀)/κ identically.
            let w = (eps_prime - eps0) / k;
            return Ok(if sigma > 0.0 {
                let kappa1 = Complex64::new(0.0, sigma / omega) / ratio3;
                make(w, LimitRegime::Dispersive, Some(pair(kappa1)))
            } else {
                make(w, LimitRegime::StaticEps, None)
            });
        }
    }
    Ok(make(Complex64::new(0.0, 0.0), LimitRegime::Vanishing, None))
}
