//! Free-space Green's function, far-zone bounds and single-particle scattering operators.

mod frame;
mod operator;

pub use frame::ScatterFrame;
pub use operator::{h_from_e, s_matrix_e, s_operator, write_s_matrix_csv, SMatrix2, SOperator6};

use num_complex::Complex64;
use serde::Serialize;

use crate::{Background, Error, Point, Result};

/// Wavenumber and background of a time-harmonic problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveContext {
    pub k: f64,
    pub background: Background,
    pub omega: Option<f64>,
}

impl WaveContext {
    pub fn new(k: f64, background: Background) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidArgument(format!("wavenumber must be positive, got {k}")));
        }
        Ok(Self { k, background, omega: None })
    }

    /// Attaches ω, which must satisfy k = ω√(ε₀μ₀).
    pub fn with_omega(mut self, omega: f64) -> Result<Self> {
        let expected = omega * (self.background.eps0 * self.background.mu0).sqrt();
        if !(omega > 0.0) || (expected - self.k).abs() > 1e-9 * self.k {
            return Err(Error::InvalidArgument(format!(
                "k = {} is inconsistent with ω√(ε₀μ₀) = {expected}",
                self.k
            )));
        }
        self.omega = Some(omega);
        Ok(self)
    }

    pub fn wavelength(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.k
    }

    /// k³V/(4π), the prefactor of every single-particle scattering amplitude.
    pub fn prefactor(&self, volume: f64) -> f64 {
        self.k.powi(3) * volume / (4.0 * std::f64::consts::PI)
    }
}

/// g(x, y) = e^{ik|x−y|}/(k|x−y|).
pub fn green(x: &Point, y: &Point, k: f64) -> Result<Complex64> {
    let r = (x - y).norm();
    if r == 0.0 {
        return Err(Error::SingularEvaluation("Green's function evaluated at coincident points".into()));
    }
    let kr = k * r;
    Ok(Complex64::new(0.0, kr).exp() / kr)
}

/// Thresholds on ka and kd that define the far-zone regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(default)]
pub struct FarZoneMargins {
    pub max_ka: f64,
    pub min_kd: f64,
}

impl Default for FarZoneMargins {
    fn default() -> Self {
        Self { max_ka: 0.2, min_kd: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FarZoneReport {
    pub regime_ok: bool,
    /// Relative error of g ≈ e^{ik|x|}e^{−ik(x⁰,y)}/(k|x|): a/d + k a²/d.
    pub g_error: f64,
    /// Relative size of the dropped 1/r term against ik in ∇g: 1/(kd).
    pub grad_error: f64,
    pub violations: Vec<String>,
}

/// Error bounds of the far-zone approximations for particle size a and separation d.
pub fn farzone_error_report(a: f64, d: f64, k: f64, margins: &FarZoneMargins) -> FarZoneReport {
    let mut violations = Vec::new();
    if !(a > 0.0 && d > 0.0 && k > 0.0) {
        violations.push(format!("a, d, k must be positive (a={a}, d={d}, k={k})"));
    }
    let (ka, kd) = (k * a, k * d);
    if !(ka <= margins.max_ka) {
        violations.push(format!("ka = {ka:.4} exceeds {} (particle not small against the wavelength)", margins.max_ka));
    }
    if !(kd >= margins.min_kd) {
        violations.push(format!("kd = {kd:.4} below {} (particles not in each other's far zone)", margins.min_kd));
    }
    FarZoneReport {
        regime_ok: violations.is_empty(),
        g_error: a / d + k * a * a / d,
        grad_error: 1.0 / kd,
        violations,
    }
}
