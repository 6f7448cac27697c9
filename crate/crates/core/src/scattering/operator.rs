use std::io::Write;

use nalgebra::{Matrix2, Matrix3, Matrix6, Vector3};
use num_complex::Complex64;

use super::{green, ScatterFrame, WaveContext};
use crate::polarizability::write_complex_rows;
use crate::{c64, join_field, split_field, CTensor, CVec3, Error, Field6, Point, Result};

pub type SMatrix2 = Matrix2<Complex64>;

/// Relative tolerance on β·E′ accepted as transverse.
const TRANSVERSE_TOL: f64 = 1e-9;

/// The 2×2 far-field matrix acting as S_E (E₂, E₁)ᵀ = (E′₂, E′₁)ᵀ.
///
/// `alpha` and `beta` are given in the incident frame axes (see [`ScatterFrame::to_local`]).
pub fn s_matrix_e(alpha: &CTensor, beta: &CTensor, frame: &ScatterFrame, ctx: &WaveContext, volume: f64) -> SMatrix2 {
    let (c, s) = (frame.theta.cos(), frame.theta.sin());
    let mu0 = ctx.background.mu0;
    let a = |i: usize, j: usize| alpha[(i - 1, j - 1)];
    let b = |i: usize, j: usize| beta[(i - 1, j - 1)] * mu0;
    let m = SMatrix2::new(
        b(1, 1) + a(2, 2) * c - a(3, 2) * s,
        a(2, 1) * c - a(3, 1) * s - b(1, 2),
        a(1, 2) - b(2, 1) * c + b(3, 1) * s,
        a(1, 1) + b(2, 2) * c - b(3, 2) * s,
    );
    m * c64(ctx.prefactor(volume), 0.0)
}

/// Writes a 2×2 S_E matrix as two rows of re,im pairs.
pub fn write_s_matrix_csv<W: Write>(mut w: W, m: &SMatrix2, theta: f64) -> Result<()> {
    writeln!(w, "# theta={theta:.17e}")?;
    write_complex_rows(&mut w, m.as_slice(), 2, 2)
}

/// Far-zone magnetic amplitude H′ = √(ε₀/μ₀) β × E′.
pub fn h_from_e(e: &CVec3, frame: &ScatterFrame, ctx: &WaveContext) -> Result<CVec3> {
    let n = crate::real_to_complex(&frame.scattered);
    let radial = n.dot(e).norm();
    if radial > TRANSVERSE_TOL * e.norm().max(f64::MIN_POSITIVE) {
        return Err(Error::Contract(format!(
            "far-field amplitude is not transverse to the scattering direction (|β·E′| = {radial:.3e})"
        )));
    }
    Ok(n.cross(e) * c64(ctx.background.admittance(), 0.0))
}

/// Single-particle operator 𝒰 ↦ 𝒰′ for one scattering direction: the scattered far field is
/// e^{ikr}/(kr) times `apply(𝒰)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SOperator6 {
    pub matrix: Matrix6<Complex64>,
    pub alpha: CTensor,
    pub beta: CTensor,
    pub direction: Vector3<f64>,
    pub prefactor: f64,
}

impl SOperator6 {
    /// Radiation of the induced dipoles P = ε₀VαE and M = μ₀VβH toward `direction`:
    /// E′ = (k³V/4π)[Π αE − √(μ₀/ε₀) β̂×βH], H′ = √(ε₀/μ₀) β̂×E′.
    pub fn for_direction(alpha: &CTensor, beta: &CTensor, direction: &Vector3<f64>, ctx: &WaveContext, volume: f64) -> Result<Self> {
        let norm = direction.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidArgument("scattering direction must be nonzero".into()));
        }
        let n = direction / norm;
        let prefactor = ctx.prefactor(volume);
        let to_c = |m: Matrix3<f64>| m.map(|v| c64(v, 0.0));
        let projector = to_c(Matrix3::identity() - n * n.transpose());
        let cross = to_c(n.cross_matrix());
        let impedance = c64(1.0 / ctx.background.admittance(), 0.0);
        let e_from_e = projector * alpha * c64(prefactor, 0.0);
        let e_from_h = -cross * beta * impedance * c64(prefactor, 0.0);
        let admittance = c64(ctx.background.admittance(), 0.0);
        let h_from_e = cross * e_from_e * admittance;
        let h_from_h = cross * e_from_h * admittance;
        let mut matrix = Matrix6::zeros();
        matrix.fixed_view_mut::<3, 3>(0, 0).copy_from(&e_from_e);
        matrix.fixed_view_mut::<3, 3>(0, 3).copy_from(&e_from_h);
        matrix.fixed_view_mut::<3, 3>(3, 0).copy_from(&h_from_e);
        matrix.fixed_view_mut::<3, 3>(3, 3).copy_from(&h_from_h);
        Ok(Self { matrix, alpha: *alpha, beta: *beta, direction: n, prefactor })
    }

    pub fn apply(&self, u: &Field6) -> Field6 {
        self.matrix * u
    }

    /// Far-zone scattered field at `x` of a particle at `center` driven by the local field `u`.
    pub fn far_field(&self, u: &Field6, x: &Point, center: &Point, ctx: &WaveContext) -> Result<Field6> {
        Ok(self.apply(u) * green(x, center, ctx.k)?)
    }

    /// The (E′₂, E′₁) components of the output for a transverse incident E, in the frame's axes.
    pub fn transverse_components(&self, e: &CVec3, h: &CVec3, frame: &ScatterFrame) -> (Complex64, Complex64) {
        let (e_out, _) = split_field(&self.apply(&join_field(e, h)));
        let axis = |j: usize| crate::real_to_complex(&frame.scattered_axes.column(j).into_owned());
        (axis(1).dot(&e_out), axis(0).dot(&e_out))
    }
}

/// Dipole-route operator for the frame's scattering direction. Coincides with
/// [`s_matrix_e`] on plane waves travelling along the frame's incident direction when ε₀ = μ₀ = 1.
pub fn s_operator(alpha: &CTensor, beta: &CTensor, frame: &ScatterFrame, ctx: &WaveContext, volume: f64) -> SOperator6 {
    SOperator6::for_direction(alpha, beta, &frame.scattered, ctx, volume).expect("frame directions are unit vectors")
}
