//! Electromagnetic scattering by many small particles.
//!
//! Particles are reduced to electric and magnetic polarizability tensors computed from
//! boundary-integral series on triangulated surfaces. Each particle then acts as a
//! direction-dependent 6×6 scattering operator on the local (E, H) field, and the
//! multiple-scattering problem becomes a dense 6N-unknown linear system.
//!
//! Conventions: time factor e^{-iωt}; relative material constants with the background
//! ε₀ = μ₀ = 1 by default; the Green's function is g(x, y) = e^{ik|x-y|}/(k|x-y|).

pub mod cli;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod medium;
pub mod multiparticle;
pub mod nearfield;
pub mod polarizability;
pub mod scattering;

pub use error::{Error, Result};

use nalgebra::{Matrix3, Vector3, Vector6};
use num_complex::Complex64;

pub type Point = Vector3<f64>;
pub type CVec3 = Vector3<Complex64>;
pub type CTensor = Matrix3<Complex64>;
/// Stacked (E, H) field.
pub type Field6 = Vector6<Complex64>;

/// Background permittivity and permeability.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Background {
    pub eps0: f64,
    pub mu0: f64,
}

impl Default for Background {
    fn default() -> Self {
        Self { eps0: 1.0, mu0: 1.0 }
    }
}

impl Background {
    pub fn new(eps0: f64, mu0: f64) -> Result<Self> {
        if !(eps0 > 0.0 && mu0 > 0.0 && eps0.is_finite() && mu0.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "background constants must be positive, got eps0={eps0}, mu0={mu0}"
            )));
        }
        Ok(Self { eps0, mu0 })
    }

    /// √(ε₀/μ₀), the ratio |H|/|E| of a plane wave.
    pub fn admittance(&self) -> f64 {
        (self.eps0 / self.mu0).sqrt()
    }
}

pub(crate) fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub(crate) fn real_to_complex(v: &Vector3<f64>) -> CVec3 {
    v.map(|x| c64(x, 0.0))
}

pub(crate) fn split_field(u: &Field6) -> (CVec3, CVec3) {
    (
        CVec3::new(u[0], u[1], u[2]),
        CVec3::new(u[3], u[4], u[5]),
    )
}

pub(crate) fn join_field(e: &CVec3, h: &CVec3) -> Field6 {
    Field6::new(e[0], e[1], e[2], h[0], h[1], h[2])
}

/// Max-norm over the components of a 6-vector.
pub fn field_norm(u: &Field6) -> f64 {
    u.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
