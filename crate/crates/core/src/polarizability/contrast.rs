use num_complex::Complex64;

use crate::{Background, Error, Result};

/// A particle is in the skin regime when δ/a does not exceed this ratio.
pub const SKIN_DEPTH_RATIO: f64 = 0.1;

/// Material constants of a particle relative to the background.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialContrast {
    pub eps: Complex64,
    pub mu: Complex64,
    /// Conductivity in units of ω·ε₀; `f64::INFINITY` is a perfect conductor.
    pub sigma: f64,
    pub omega: f64,
    pub background: Background,
}

impl MaterialContrast {
    pub fn new(eps: Complex64, mu: Complex64, sigma: f64, omega: f64, background: Background) -> Result<Self> {
        if !(sigma >= 0.0) {
            return Err(Error::InvalidArgument(format!("conductivity must be non-negative, got {sigma}")));
        }
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::InvalidArgument(format!("angular frequency must be positive, got {omega}")));
        }
        if !(eps.re.is_finite() && eps.im.is_finite() && mu.re.is_finite() && mu.im.is_finite()) {
            return Err(Error::InvalidArgument("material constants must be finite".into()));
        }
        if mu.norm() == 0.0 {
            return Err(Error::InvalidArgument("permeability must be nonzero".into()));
        }
        Ok(Self { eps, mu, sigma, omega, background })
    }

    /// Lossless, non-magnetic dielectric in the default background.
    pub fn dielectric(eps: f64) -> Self {
        Self {
            eps: Complex64::new(eps, 0.0),
            mu: Complex64::new(1.0, 0.0),
            sigma: 0.0,
            omega: 1.0,
            background: Background::default(),
        }
    }

    /// Perfect electric conductor in the default background.
    pub fn perfect_conductor(omega: f64) -> Self {
        Self {
            eps: Complex64::new(1.0, 0.0),
            mu: Complex64::new(1.0, 0.0),
            sigma: f64::INFINITY,
            omega,
            background: Background::default(),
        }
    }

    /// ε′ = ε + iσ/ω (infinite for a perfect conductor).
    pub fn eps_prime(&self) -> Complex64 {
        if self.sigma.is_infinite() {
            return Complex64::new(f64::INFINITY, f64::INFINITY);
        }
        self.eps + Complex64::new(0.0, self.sigma / self.omega)
    }

    /// γ_ε = (ε′ − ε₀)/(ε′ + ε₀); equal to 1 for a perfect conductor.
    pub fn gamma_eps(&self) -> Result<Complex64> {
        if self.sigma.is_infinite() {
            return Ok(Complex64::new(1.0, 0.0));
        }
        let ep = self.eps_prime();
        let eps0 = self.background.eps0;
        let den = ep + eps0;
        if den.norm() == 0.0 {
            return Err(Error::SingularConfiguration(format!("ε′ = −ε₀ = {}", -eps0)));
        }
        let g = (ep - eps0) / den;
        if ep.re >= 0.0 && g.norm() > 1.0 + 1e-12 {
            return Err(Error::Contract(format!("|γ_ε| = {} exceeds 1 with Re ε′ ≥ 0", g.norm())));
        }
        Ok(g)
    }

    /// γ_μ = (μ − μ₀)/(μ + μ₀), exactly zero when μ = μ₀.
    pub fn gamma_mu(&self) -> Result<Complex64> {
        let mu0 = self.background.mu0;
        if self.mu == Complex64::new(mu0, 0.0) {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let den = self.mu + mu0;
        if den.norm() == 0.0 {
            return Err(Error::SingularConfiguration(format!("μ = −μ₀ = {}", -mu0)));
        }
        Ok((self.mu - mu0) / den)
    }

    /// δ = √(2/(ωσμ)) with μ the absolute permeability |μ|·μ₀. `None` for σ = 0.
    pub fn skin_depth(&self) -> Option<f64> {
        if self.sigma == 0.0 {
            return None;
        }
        if self.sigma.is_infinite() {
            return Some(0.0);
        }
        let sigma_abs = self.sigma * self.background.eps0;
        Some((2.0 / (self.omega * sigma_abs * self.mu.norm() * self.background.mu0)).sqrt())
    }

    /// δ ≪ a, read as δ/a ≤ [`SKIN_DEPTH_RATIO`].
    pub fn skin_regime(&self, a: f64) -> bool {
        self.skin_depth().is_some_and(|d| d <= SKIN_DEPTH_RATIO * a)
    }
}
