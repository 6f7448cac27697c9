use nalgebra::{DMatrix, DVector, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;

use super::kernel::dg_regular;
use crate::geometry::{panel_potential, Panel, QuadratureSpec, SurfaceMesh, TriangleRule};
use crate::scattering::WaveContext;
use crate::{c64, real_to_complex, CVec3, Error, Point, Result};

/// Dense matrices are refused above this many panels; the operator itself works matrix-free.
pub const DENSE_PANEL_CAP: usize = 1500;

// Pairs farther apart than this many panel diameters use the centroid rule.
const FAR_FACTOR: f64 = 6.0;

/// The boundary operator A j = ∫ 𝒩(s) × (∇ₛ G(s, t) × j(t)) dt with G = e^{ik|s−t|}/(2πk|s−t|),
/// discretized with piecewise-constant tangential j and panel-averaged testing.
///
/// Stored as the panel-pair integrals Γ_pq = (1/|p|)∫_p ∫_q ∇ₛ G dt ds, so that
/// (A j)_p = Σ_q Γ_pq (𝒩_p·j_q) − j_q (𝒩_p·Γ_pq), projected on the tangent plane of p.
#[derive(Debug, Clone)]
pub struct BoundaryOperatorA {
    mesh: SurfaceMesh,
    k: f64,
    spec: QuadratureSpec,
    tangents: Vec<(Vector3<f64>, Vector3<f64>)>,
    // Row-major: gradients[p * n + q] = Γ_pq.
    gradients: Vec<CVec3>,
}

impl BoundaryOperatorA {
    pub fn assemble(mesh: &SurfaceMesh, ctx: &WaveContext, spec: &QuadratureSpec) -> Result<Self> {
        spec.validate()?;
        let k = ctx.k;
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidArgument(format!("wavenumber must be positive, got {k}")));
        }
        let n = mesh.num_panels();
        let mut gradients = vec![CVec3::zeros(); n * n];
        gradients
            .par_chunks_mut(n)
            .enumerate()
            .try_for_each(|(p, row)| assemble_row(mesh, k, spec, p, row))?;
        let tangents = mesh.panels().iter().map(Panel::tangent_basis).collect();
        Ok(Self { mesh: mesh.clone(), k, spec: *spec, tangents, gradients })
    }

    pub fn mesh(&self) -> &SurfaceMesh {
        &self.mesh
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn spec(&self) -> &QuadratureSpec {
        &self.spec
    }

    pub fn num_panels(&self) -> usize {
        self.mesh.num_panels()
    }

    /// Number of complex unknowns, two per panel.
    pub fn dim(&self) -> usize {
        2 * self.num_panels()
    }

    pub fn tangent_basis(&self, p: usize) -> (Vector3<f64>, Vector3<f64>) {
        self.tangents[p]
    }

    /// Γ_pq, the panel-averaged integral of ∇ₛ G over source panel q seen from target panel p.
    pub fn gradient_integral(&self, p: usize, q: usize) -> CVec3 {
        self.gradients[p * self.num_panels() + q]
    }

    /// Per-panel tangential vectors to tangent-basis coordinates (t₁ and t₂ of each panel).
    pub fn to_coordinates(&self, field: &[CVec3]) -> DVector<Complex64> {
        let mut out = DVector::zeros(self.dim());
        for (p, (v, (t1, t2))) in field.iter().zip(&self.tangents).enumerate() {
            out[2 * p] = real_to_complex(t1).dot(v);
            out[2 * p + 1] = real_to_complex(t2).dot(v);
        }
        out
    }

    pub fn from_coordinates(&self, x: &DVector<Complex64>) -> Vec<CVec3> {
        self.tangents
            .iter()
            .enumerate()
            .map(|(p, (t1, t2))| real_to_complex(t1) * x[2 * p] + real_to_complex(t2) * x[2 * p + 1])
            .collect()
    }

    /// A applied in tangent-basis coordinates.
    pub fn apply(&self, x: &DVector<Complex64>) -> DVector<Complex64> {
        let j = self.from_coordinates(x);
        self.to_coordinates(&self.apply_raw(&j))
    }

    /// A applied to per-panel vectors; the input is projected on the tangent planes first and
    /// the output is tangential.
    pub fn apply_vectors(&self, field: &[CVec3]) -> Vec<CVec3> {
        self.from_coordinates(&self.apply(&self.to_coordinates(field)))
    }

    fn apply_raw(&self, j: &[CVec3]) -> Vec<CVec3> {
        let n = self.num_panels();
        let panels = self.mesh.panels();
        self.gradients
            .par_chunks(n)
            .enumerate()
            .map(|(p, row)| {
                let normal = real_to_complex(&panels[p].normal);
                let mut acc = CVec3::zeros();
                for (gamma, jq) in row.iter().zip(j) {
                    acc += gamma * normal.dot(jq) - jq * normal.dot(gamma);
                }
                acc
            })
            .collect()
    }

    /// The dense 2P × 2P matrix of A in tangent-basis coordinates.
    pub fn to_dense(&self) -> Result<DMatrix<Complex64>> {
        let n = self.num_panels();
        if n > DENSE_PANEL_CAP {
            return Err(Error::Budget(format!("{n} panels exceed the dense boundary-operator cap of {DENSE_PANEL_CAP}")));
        }
        let panels = self.mesh.panels();
        let mut a = DMatrix::zeros(2 * n, 2 * n);
        for p in 0..n {
            let normal = panels[p].normal;
            let (s1, s2) = self.tangents[p];
            for q in 0..n {
                let gamma = self.gradient_integral(p, q);
                let n_gamma = real_to_complex(&normal).dot(&gamma);
                let (t1, t2) = self.tangents[q];
                for (a_idx, sa) in [s1, s2].iter().enumerate() {
                    let sa_gamma = real_to_complex(sa).dot(&gamma);
                    for (b_idx, tb) in [t1, t2].iter().enumerate() {
                        a[(2 * p + a_idx, 2 * q + b_idx)] = sa_gamma * normal.dot(tb) - n_gamma * sa.dot(tb);
                    }
                }
            }
        }
        Ok(a)
    }
}

fn assemble_row(mesh: &SurfaceMesh, k: f64, spec: &QuadratureSpec, p: usize, row: &mut [CVec3]) -> Result<()> {
    let panels = mesh.panels();
    let tgt = &panels[p];
    let rule = TriangleRule::of_order(spec.rule_order);
    let mid_rule = TriangleRule::of_order(2);
    // G = g/(2π) with g = e^{ikr}/(kr).
    let scale = 1.0 / (2.0 * std::f64::consts::PI);
    for (q, src) in panels.iter().enumerate() {
        if q == p {
            // Odd kernel over a single flat panel: the average vanishes.
            continue;
        }
        let d = (tgt.centroid - src.centroid).norm();
        let h = tgt.diameter().max(src.diameter());
        let gamma = if d < spec.near_factor * h {
            near_pair(tgt, src, k, spec, &rule)
        } else if d < FAR_FACTOR * h {
            product_rule(tgt, src, k, &mid_rule)
        } else {
            let diff = tgt.centroid - src.centroid;
            real_to_complex(&(diff / d)) * (super::kernel::dg(d, k) * src.area)
        };
        if !gamma.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::Quadrature { target: p, source_panel: q });
        }
        row[q] = gamma * c64(scale, 0.0);
    }
    Ok(())
}

// (1/|p|)∫_p ∫_q ∇ₛ g dt ds by a product rule with the full kernel.
fn product_rule(tgt: &Panel, src: &Panel, k: f64, rule: &TriangleRule) -> CVec3 {
    let src_nodes: Vec<(Point, f64)> = rule.map(&src.vertices, src.area).collect();
    let mut acc = CVec3::zeros();
    for (s, ws) in rule.map(&tgt.vertices, 1.0) {
        for (t, wt) in &src_nodes {
            let diff = s - t;
            let r = diff.norm();
            acc += real_to_complex(&(diff / r)) * (super::kernel::dg(r, k) * (ws * wt));
        }
    }
    acc
}

// Static part ∇ₛ(1/(kr)) integrated in closed form over q and averaged over p with adaptive
// refinement toward q; the bounded remainder by a product rule.
fn near_pair(tgt: &Panel, src: &Panel, k: f64, spec: &QuadratureSpec, rule: &TriangleRule) -> CVec3 {
    let mut f = |x: &Point| panel_potential(&src.vertices, &src.normal, x).gradient();
    let static_part: Vector3<f64> =
        crate::geometry::quadrature::adaptive_near(&tgt.vertices, &src.vertices, rule, 1.0, spec.refinement, &mut f);
    let mut acc = real_to_complex(&(static_part / (k * tgt.area)));
    let src_nodes: Vec<(Point, f64)> = rule.map(&src.vertices, src.area).collect();
    for (s, ws) in rule.map(&tgt.vertices, 1.0) {
        for (t, wt) in &src_nodes {
            let diff = s - t;
            let r = diff.norm();
            if r > 0.0 {
                acc += real_to_complex(&(diff / r)) * (dg_regular(r, k) * (ws * wt));
            }
        }
    }
    acc
}
