use num_complex::Complex64;

use crate::geometry::{QuadratureSpec, Shape, SurfaceMesh};
use crate::polarizability::{BChain, MaterialContrast};
use crate::{CTensor, Error, Point, Result};

/// One small particle reduced to its reference point and polarizability tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleInstance {
    pub position: Point,
    pub shape: Option<Shape>,
    pub alpha: CTensor,
    pub beta: CTensor,
    pub volume: f64,
    /// Characteristic size a.
    pub size: f64,
}

/// Ball polarizability in terms of γ: 6γ/(3 − γ), i.e. 3(ε − ε₀)/(ε + 2ε₀).
pub fn ball_alpha(gamma: Complex64) -> Complex64 {
    gamma * 6.0 / (3.0 - gamma)
}

impl ParticleInstance {
    pub fn from_tensors(position: Point, alpha: CTensor, beta: CTensor, volume: f64, size: f64) -> Result<Self> {
        if !(volume > 0.0 && size > 0.0) {
            return Err(Error::InvalidArgument(format!("particle volume and size must be positive, got V={volume}, a={size}")));
        }
        if !position.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidArgument("particle position must be finite".into()));
        }
        Ok(Self { position, shape: None, alpha, beta, volume, size })
    }

    /// Tensors from the boundary-integral series of order `order` on `mesh`.
    pub fn from_mesh(position: Point, mesh: &SurfaceMesh, contrast: &MaterialContrast, spec: &QuadratureSpec, order: usize) -> Result<Self> {
        let chain = BChain::compute(mesh, order, spec)?;
        let size = mesh.characteristic_dimension();
        let gamma = contrast.gamma_eps()?;
        let alpha = if gamma.norm() == 0.0 { CTensor::zeros() } else { chain.alpha(gamma, order)?.tensor };
        let beta = chain.beta(contrast, size, order)?.tensor;
        Self::from_tensors(position, alpha, beta, chain.volume(), size)
    }

    /// Closed-form tensors of a ball.
    pub fn ball(position: Point, radius: f64, contrast: &MaterialContrast) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidArgument(format!("ball radius must be positive, got {radius}")));
        }
        let alpha = ball_alpha(contrast.gamma_eps()?);
        let mut beta = Complex64::new(0.0, 0.0);
        if contrast.skin_regime(radius) {
            beta += ball_alpha(Complex64::new(-1.0, 0.0));
        }
        beta += ball_alpha(contrast.gamma_mu()?);
        let volume = 4.0 / 3.0 * std::f64::consts::PI * radius.powi(3);
        let mut p = Self::from_tensors(position, CTensor::identity() * alpha, CTensor::identity() * beta, volume, radius)?;
        p.shape = Some(Shape::Sphere { radius });
        Ok(p)
    }

    pub fn translated_to(&self, position: Point) -> Self {
        Self { position, ..self.clone() }
    }
}
