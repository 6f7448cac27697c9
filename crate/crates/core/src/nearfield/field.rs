use rayon::prelude::*;

use super::kernel::{d2g, dg, dg_regular, g};
use super::SurfaceCurrent;
use crate::geometry::{panel_potential, point_triangle_distance, Panel, TriangleRule};
use crate::multiparticle::IncidentField;
use crate::scattering::WaveContext;
use crate::{c64, join_field, real_to_complex, CVec3, Error, Field6, Point, Result};

// Panels closer than this many diameters to x get the refined treatment.
const NEAR_FACTOR: f64 = 3.0;
const MAX_LEVEL: u32 = 7;

/// Scattered pair (∇×∫ g j, (1/iωμ₀)∇×∇×∫ g j) at a point off the surface.
pub fn scattered_field(x: &Point, current: &SurfaceCurrent, ctx: &WaveContext) -> Result<Field6> {
    let k = current.k;
    if (ctx.k - k).abs() > 1e-12 * k {
        return Err(Error::InvalidArgument(format!("current computed for k = {k}, context has k = {}", ctx.k)));
    }
    let panels = current.mesh().panels();
    let rule = TriangleRule::of_order(4);
    let mut curl = CVec3::zeros();
    let mut curl_curl = CVec3::zeros();
    for (q, (panel, j)) in panels.iter().zip(current.values()).enumerate() {
        let dist = point_triangle_distance(&panel.vertices, x);
        let h = panel.diameter();
        if dist <= 1e-10 * h {
            return Err(Error::SingularEvaluation(format!("point lies on panel {q}; evaluate at an offset point")));
        }
        if dist < NEAR_FACTOR * h {
            // ∫ ∇g = ∇∫ 1/(kr) in closed form plus the bounded remainder (g′ + 1/(kr²)) r̂.
            let grad = panel_potential(&panel.vertices, &panel.normal, x).gradient() / k;
            let mut regular = CVec3::zeros();
            refine_toward(panel, x, &rule, &mut |t, w| {
                let diff = x - t;
                let r = diff.norm();
                let rhat = real_to_complex(&(diff / r));
                regular += rhat * (dg_regular(r, k) * w);
                curl_curl += double_curl(&rhat, j, r, k) * c64(w, 0.0);
            });
            curl += (real_to_complex(&grad) + regular).cross(j);
        } else {
            for (t, w) in rule.map(&panel.vertices, panel.area) {
                let diff = x - t;
                let r = diff.norm();
                let rhat = real_to_complex(&(diff / r));
                curl += rhat.cross(j) * (dg(r, k) * w);
                curl_curl += double_curl(&rhat, j, r, k) * c64(w, 0.0);
            }
        }
    }
    let h = curl_curl * (c64(ctx.background.admittance(), 0.0) / c64(0.0, k));
    Ok(join_field(&curl, &h))
}

/// E(x) = E_exc(x) + ∇×∫ g j.
pub fn near_field_e(x: &Point, current: &SurfaceCurrent, exciting: &IncidentField, ctx: &WaveContext) -> Result<CVec3> {
    let u = near_field(x, current, exciting, ctx)?;
    Ok(CVec3::new(u[0], u[1], u[2]))
}

/// The (E, H) pair: exciting field plus the scattered field of the current.
pub fn near_field(x: &Point, current: &SurfaceCurrent, exciting: &IncidentField, ctx: &WaveContext) -> Result<Field6> {
    Ok(exciting.evaluate(x, ctx) + scattered_field(x, current, ctx)?)
}

/// [`near_field`] at many points in parallel.
pub fn near_field_at(points: &[Point], current: &SurfaceCurrent, exciting: &IncidentField, ctx: &WaveContext) -> Result<Vec<Field6>> {
    points.par_iter().map(|x| near_field(x, current, exciting, ctx)).collect()
}

// (∇∇g) j + k² g j for x − t = r r̂.
fn double_curl(rhat: &CVec3, j: &CVec3, r: f64, k: f64) -> CVec3 {
    let radial = rhat.dot(j);
    let d1 = dg(r, k) / r;
    rhat * (d2g(r, k) * radial) + (j - rhat * radial) * d1 + j * (g(r, k) * (k * k))
}

// Subdivides the panel toward x and applies `f(t, weight)` at the nodes.
fn refine_toward(panel: &Panel, x: &Point, rule: &TriangleRule, f: &mut impl FnMut(&Point, f64)) {
    refine_sub(panel.vertices, x, rule, 0, f);
}

fn refine_sub(v: [Point; 3], x: &Point, rule: &TriangleRule, level: u32, f: &mut impl FnMut(&Point, f64)) {
    let diam = (v[0] - v[1]).norm().max((v[1] - v[2]).norm()).max((v[2] - v[0]).norm());
    let centroid = (v[0] + v[1] + v[2]) / 3.0;
    if level < MAX_LEVEL && (x - centroid).norm() < 2.0 * diam {
        let [a, b, c] = v;
        let (ab, bc, ca) = ((a + b) / 2.0, (b + c) / 2.0, (c + a) / 2.0);
        for child in [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]] {
            refine_sub(child, x, rule, level + 1, f);
        }
        return;
    }
    let area = 0.5 * (v[1] - v[0]).cross(&(v[2] - v[0])).norm();
    for (t, w) in rule.map(&v, area) {
        f(&t, w);
    }
}
