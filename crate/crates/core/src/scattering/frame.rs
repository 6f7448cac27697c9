use nalgebra::{Matrix3, Vector3};

use crate::{CTensor, Error, Result};

/// Below this |k̂ × β| the scattering plane is taken as degenerate.
const DEGENERATE_SIN: f64 = 1e-12;

/// The incident (x, y, z) and scattered (x′, y′, z′) frames for one direction pair.
///
/// z is along the incident direction, z′ along the scattering direction, x′ = x is normal to
/// the scattering plane and y′ is y rotated by θ within that plane. When θ ∈ {0, π} the plane
/// is the one spanned by the incident direction and the global x-axis (y-axis if parallel).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterFrame {
    pub incident: Vector3<f64>,
    pub scattered: Vector3<f64>,
    pub theta: f64,
    /// Columns x, y, z in global coordinates.
    pub incident_axes: Matrix3<f64>,
    /// Columns x′, y′, z′ in global coordinates.
    pub scattered_axes: Matrix3<f64>,
}

impl ScatterFrame {
    pub fn new(incident: &Vector3<f64>, scattered: &Vector3<f64>) -> Result<Self> {
        let (ni, ns) = (incident.norm(), scattered.norm());
        if !(ni > 0.0 && ns > 0.0 && ni.is_finite() && ns.is_finite()) {
            return Err(Error::InvalidArgument("frame directions must be finite and nonzero".into()));
        }
        let z = incident / ni;
        let n = scattered / ns;
        let cos = z.dot(&n).clamp(-1.0, 1.0);
        let sin = z.cross(&n).norm();
        let theta = sin.atan2(cos);
        let in_plane = n - z * cos;
        let y = if in_plane.norm() > DEGENERATE_SIN {
            in_plane.normalize()
        } else {
            let reference = if z.x.abs() < 1.0 - 1e-12 { Vector3::x() } else { Vector3::y() };
            (reference - z * reference.dot(&z)).normalize()
        };
        let x = y.cross(&z);
        let (c, s) = (theta.cos(), theta.sin());
        let y_prime = y * c - z * s;
        let z_prime = x.cross(&y_prime);
        Ok(Self {
            incident: z,
            scattered: n,
            theta,
            incident_axes: Matrix3::from_columns(&[x, y, z]),
            scattered_axes: Matrix3::from_columns(&[x, y_prime, z_prime]),
        })
    }

    /// Components of a global tensor in the incident frame, RᵀTR.
    pub fn to_local(&self, tensor: &CTensor) -> CTensor {
        let r = self.incident_axes.map(|v| crate::c64(v, 0.0));
        r.transpose() * tensor * r
    }
}
