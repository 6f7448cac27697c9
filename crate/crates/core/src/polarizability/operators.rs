use nalgebra::{DMatrix, Vector2, Vector3};
use rayon::prelude::*;

use crate::geometry::panel::panel_potential;
use crate::geometry::quadrature::{adaptive_near, duffy_nodes, subdivided_nodes};
use crate::geometry::{QuadratureSpec, SingularStrategy, SurfaceMesh, TriangleRule};
use crate::{Error, Point, Result};

/// Dense operators are refused above this many panels unless a budget is given explicitly.
pub const DEFAULT_PANEL_BUDGET: usize = 20_000;

/// ψ(t, s) = ∂/∂𝒩ₜ (1/|t − s|) = −((t − s)·𝒩ₜ)/|t − s|³.
pub fn psi_kernel(t: &Point, s: &Point, normal_t: &Vector3<f64>) -> Result<f64> {
    let d = t - s;
    let r = d.norm();
    if r == 0.0 {
        return Err(Error::SingularEvaluation("ψ(t, s) is singular at s = t".into()));
    }
    Ok(-d.dot(normal_t) / (r * r * r))
}

/// Panel-to-panel discretizations of the single-layer operator (kernel 1/r) and of ψ,
/// both tested by panel averages: entry (p, q) is (1/|p|)∫_p ∫_q K(x, y) dy dx.
#[derive(Debug, Clone)]
pub struct PanelOperators {
    /// Absent when assembled with [`PanelOperators::assemble_psi_only`].
    pub single_layer: Option<DMatrix<f64>>,
    pub psi: DMatrix<f64>,
    pub spec: QuadratureSpec,
}

impl PanelOperators {
    pub fn assemble(mesh: &SurfaceMesh, spec: &QuadratureSpec) -> Result<Self> {
        Self::assemble_with_budget(mesh, spec, DEFAULT_PANEL_BUDGET)
    }

    /// Only ψ, for chains closed through the Green identity.
    pub fn assemble_psi_only(mesh: &SurfaceMesh, spec: &QuadratureSpec) -> Result<Self> {
        let mut ops = Self::assemble_with_budget(mesh, spec, DEFAULT_PANEL_BUDGET)?;
        ops.single_layer = None;
        Ok(ops)
    }

    pub fn assemble_with_budget(mesh: &SurfaceMesh, spec: &QuadratureSpec, budget: usize) -> Result<Self> {
        spec.validate()?;
        let n = mesh.num_panels();
        if n > budget {
            return Err(Error::Budget(format!(
                "{n} panels exceed the dense-operator budget of {budget} (about {:.1} GB per matrix)",
                (n * n * 8) as f64 / 1e9
            )));
        }
        let mut single = vec![0.0; n * n];
        let mut psi = vec![0.0; n * n];
        // Column-major storage: each chunk is one source panel q.
        let columns = match spec.strategy {
            SingularStrategy::AnalyticPanel => single
                .par_chunks_mut(n)
                .zip(psi.par_chunks_mut(n))
                .enumerate()
                .try_for_each(|(q, (s_col, p_col))| analytic_column(mesh, spec, q, s_col, p_col)),
            SingularStrategy::DuffySubdivision => {
                let neighbors = mesh.vertex_neighbors();
                single
                    .par_chunks_mut(n)
                    .zip(psi.par_chunks_mut(n))
                    .enumerate()
                    .try_for_each(|(q, (s_col, p_col))| numeric_column(mesh, spec, &neighbors[q], q, s_col, p_col))
            }
        };
        columns?;
        Ok(Self {
            single_layer: Some(DMatrix::from_vec(n, n, single)),
            psi: DMatrix::from_vec(n, n, psi),
            spec: *spec,
        })
    }
}

fn analytic_column(mesh: &SurfaceMesh, spec: &QuadratureSpec, q: usize, s_col: &mut [f64], p_col: &mut [f64]) -> Result<()> {
    let panels = mesh.panels();
    let src = &panels[q];
    let rule = TriangleRule::of_order(spec.rule_order);
    let h_src = src.diameter();
    for (p, tgt) in panels.iter().enumerate() {
        let d = (tgt.centroid - src.centroid).norm();
        let (s, ps) = if p == q {
            // ψ vanishes on a flat panel; the self potential is smooth enough inside the panel
            // for a fixed subdivision.
            let f = |x: &Point| panel_potential(&src.vertices, &src.normal, x).value;
            let v: f64 = subdivided_nodes(&tgt.vertices, &rule, spec.refinement.min(2))
                .into_iter()
                .map(|(x, w)| w * f(&x))
                .sum();
            (v / tgt.area, 0.0)
        } else if d < spec.near_factor * h_src.max(tgt.diameter()) {
            let mut f = |x: &Point| {
                let pp = panel_potential(&src.vertices, &src.normal, x);
                Vector2::new(pp.value, tgt.normal.dot(&pp.gradient()))
            };
            let v = adaptive_near(&tgt.vertices, &src.vertices, &rule, 1.0, spec.refinement, &mut f);
            (v[0] / tgt.area, v[1] / tgt.area)
        } else {
            let diff = tgt.centroid - src.centroid;
            (src.area / d, -src.area * diff.dot(&tgt.normal) / (d * d * d))
        };
        if !(s.is_finite() && ps.is_finite()) {
            return Err(Error::Quadrature { target: p, source_panel: q });
        }
        s_col[p] = s;
        p_col[p] = ps;
    }
    Ok(())
}

/// Fully numerical route: outer rule on the target panel; the inner integral uses a polar
/// rule on the coincident panel and subdivision on touching or near panels.
fn numeric_column(
    mesh: &SurfaceMesh,
    spec: &QuadratureSpec,
    touching: &[usize],
    q: usize,
    s_col: &mut [f64],
    p_col: &mut [f64],
) -> Result<()> {
    let panels = mesh.panels();
    let src = &panels[q];
    let rule = TriangleRule::of_order(spec.rule_order);
    let regular: Vec<(Point, f64)> = rule.map(&src.vertices, src.area).collect();
    let touching_nodes = subdivided_nodes(&src.vertices, &rule, spec.refinement.max(1));
    let near_nodes = subdivided_nodes(&src.vertices, &rule, 1);
    let duffy_n = (spec.rule_order.div_ceil(2) + 3).max(4);
    for (p, tgt) in panels.iter().enumerate() {
        let d = (tgt.centroid - src.centroid).norm();
        let mut s = 0.0;
        let mut ps = 0.0;
        for (x, wx) in rule.map(&tgt.vertices, tgt.area) {
            let owned;
            let nodes: &[(Point, f64)] = if p == q {
                owned = duffy_nodes(&src.vertices, &x, duffy_n);
                &owned
            } else if touching.contains(&p) {
                &touching_nodes
            } else if d < spec.near_factor * src.diameter().max(tgt.diameter()) {
                &near_nodes
            } else {
                &regular
            };
            for (y, wy) in nodes {
                let diff = x - y;
                let r = diff.norm();
                s += wx * wy / r;
                if p != q {
                    ps -= wx * wy * diff.dot(&tgt.normal) / (r * r * r);
                }
            }
        }
        if !(s.is_finite() && ps.is_finite()) {
            return Err(Error::Quadrature { target: p, source_panel: q });
        }
        s_col[p] = s / tgt.area;
        p_col[p] = ps / tgt.area;
    }
    Ok(())
}
