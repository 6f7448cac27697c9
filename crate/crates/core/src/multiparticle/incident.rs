use std::fmt;
use std::sync::Arc;

use nalgebra::Vector3;
use num_complex::Complex64;

use crate::scattering::WaveContext;
use crate::{c64, join_field, real_to_complex, CVec3, Error, Field6, Point, Result};

type Sampler = Arc<dyn Fn(&Point) -> Field6 + Send + Sync>;

/// The field 𝒰₀ = (E₀, H₀) illuminating the scene.
#[derive(Clone)]
pub enum IncidentField {
    /// E₀ e^{ik k̂·x} with H₀ = √(ε₀/μ₀) k̂ × E₀.
    PlaneWave { direction: Vector3<f64>, polarization: CVec3 },
    Sampled(Sampler),
}

impl fmt::Debug for IncidentField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PlaneWave { direction, polarization } => f
                .debug_struct("PlaneWave")
                .field("direction", direction)
                .field("polarization", polarization)
                .finish(),
            Self::Sampled(_) => f.write_str("Sampled(..)"),
        }
    }
}

impl IncidentField {
    /// Plane wave along `direction` with E₀ = `polarization`, which must be transverse.
    pub fn plane_wave(direction: Vector3<f64>, polarization: CVec3) -> Result<Self> {
        let norm = direction.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidArgument("incident direction must be nonzero".into()));
        }
        let direction = direction / norm;
        let radial = real_to_complex(&direction).dot(&polarization).norm();
        if radial > 1e-12 * polarization.norm().max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidArgument(format!("incident polarization is not transverse (|k̂·E₀| = {radial:.3e})")));
        }
        Ok(Self::PlaneWave { direction, polarization })
    }

    pub fn sampled<F>(f: F) -> Self
    where
        F: Fn(&Point) -> Field6 + Send + Sync + 'static,
    {
        Self::Sampled(Arc::new(f))
    }

    pub fn evaluate(&self, x: &Point, ctx: &WaveContext) -> Field6 {
        match self {
            Self::PlaneWave { direction, polarization } => {
                let phase = Complex64::new(0.0, ctx.k * direction.dot(x)).exp();
                let e = polarization * phase;
                let h = real_to_complex(direction).cross(&e) * c64(ctx.background.admittance(), 0.0);
                join_field(&e, &h)
            }
            Self::Sampled(f) => f(x),
        }
    }

    /// The same field multiplied by a complex constant.
    pub fn scaled(&self, c: Complex64) -> Self {
        match self {
            Self::PlaneWave { direction, polarization } => Self::PlaneWave { direction: *direction, polarization: polarization * c },
            Self::Sampled(f) => {
                let f = f.clone();
                Self::sampled(move |x| f(x) * c)
            }
        }
    }
}
