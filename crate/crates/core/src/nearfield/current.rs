use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::BoundaryOperatorA;
use crate::geometry::{SurfaceMesh, TriangleRule};
use crate::linalg::{gmres, DenseLu};
use crate::multiparticle::{csv_error, IncidentField};
use crate::scattering::WaveContext;
use crate::{c64, real_to_complex, split_field, CVec3, Error, Result};

/// Condition estimates of I + kA above this signal an interior eigenvalue nearby.
pub const NEAR_EIGENVALUE_CONDITION: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurrentOptions {
    /// Relative residual target of the iterative route.
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
    /// Meshes with at most this many panels are solved by dense LU.
    pub dense_cap: usize,
    pub condition_limit: f64,
}

impl Default for CurrentOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 400, restart: 80, dense_cap: 500, condition_limit: NEAR_EIGENVALUE_CONDITION }
    }
}

/// Tangential surface current, constant on each panel.
#[derive(Debug, Clone)]
pub struct SurfaceCurrent {
    mesh: SurfaceMesh,
    values: Vec<CVec3>,
    pub k: f64,
    /// ‖(I + kA)j − b‖/‖b‖ of the discrete system (zero for a zero right side).
    pub residual: f64,
    pub condition: f64,
    pub iterations: usize,
}

impl SurfaceCurrent {
    /// Builds a current from per-panel vectors, which must be tangential to 1e-10.
    pub fn new(mesh: &SurfaceMesh, values: Vec<CVec3>, k: f64) -> Result<Self> {
        if values.len() != mesh.num_panels() {
            return Err(Error::InvalidArgument(format!(
                "{} current values for {} panels",
                values.len(),
                mesh.num_panels()
            )));
        }
        for (p, (v, panel)) in values.iter().zip(mesh.panels()).enumerate() {
            let normal = real_to_complex(&panel.normal).dot(v).norm();
            if normal > 1e-10 * v.norm().max(f64::MIN_POSITIVE) {
                return Err(Error::Contract(format!("current on panel {p} has normal part {normal:.3e}")));
            }
        }
        Ok(Self { mesh: mesh.clone(), values, k, residual: 0.0, condition: 1.0, iterations: 0 })
    }

    pub fn zero(mesh: &SurfaceMesh, k: f64) -> Self {
        let n = mesh.num_panels();
        Self {
            mesh: mesh.clone(),
            values: vec![CVec3::zeros(); n],
            k,
            residual: 0.0,
            condition: 1.0,
            iterations: 0,
        }
    }

    pub fn mesh(&self) -> &SurfaceMesh {
        &self.mesh
    }

    /// Per-panel values j_p.
    pub fn values(&self) -> &[CVec3] {
        &self.values
    }

    /// `panel_id,cx,cy,cz,Re j1,Im j1,Re j2,Im j2,Re j3,Im j3` with Cartesian components.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["panel_id", "cx", "cy", "cz", "Re j1", "Im j1", "Re j2", "Im j2", "Re j3", "Im j3"])
            .map_err(csv_error)?;
        for (p, (panel, j)) in self.mesh.panels().iter().zip(&self.values).enumerate() {
            let c = panel.centroid;
            let mut row = vec![p.to_string(), c.x.to_string(), c.y.to_string(), c.z.to_string()];
            for z in j.iter() {
                row.push(z.re.to_string());
                row.push(z.im.to_string());
            }
            out.write_record(&row).map_err(csv_error)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Panel averages of −(k/2π) 𝒩 × E_exc in tangent coordinates: the right side of
/// (I + kA) j = −(k/2π)[𝒩, E_exc].
pub fn current_rhs(op: &BoundaryOperatorA, exciting: &IncidentField, ctx: &WaveContext) -> DVector<Complex64> {
    let rule = TriangleRule::of_order(op.spec().rule_order);
    let scale = c64(-ctx.k / (2.0 * std::f64::consts::PI), 0.0);
    let tangential: Vec<CVec3> = op
        .mesh()
        .panels()
        .iter()
        .map(|panel| {
            let normal = real_to_complex(&panel.normal);
            let mut acc = CVec3::zeros();
            for (x, w) in rule.map(&panel.vertices, 1.0) {
                let (e, _) = split_field(&exciting.evaluate(&x, ctx));
                acc += normal.cross(&e) * c64(w, 0.0);
            }
            acc * scale
        })
        .collect();
    op.to_coordinates(&tangential)
}

/// Solves (I + kA) j = −(k/2π)[𝒩, E_exc] for the current induced on a perfect conductor.
pub fn solve_current(
    op: &BoundaryOperatorA,
    exciting: &IncidentField,
    ctx: &WaveContext,
    options: &CurrentOptions,
) -> Result<SurfaceCurrent> {
    if (ctx.k - op.k()).abs() > 1e-12 * op.k() {
        return Err(Error::InvalidArgument(format!("operator assembled for k = {}, context has k = {}", op.k(), ctx.k)));
    }
    let k = c64(op.k(), 0.0);
    let b = current_rhs(op, exciting, ctx);
    let (x, condition, iterations) = if op.num_panels() <= options.dense_cap {
        let m = DMatrix::identity(op.dim(), op.dim()) + op.to_dense()? * k;
        let lu = DenseLu::new(m)?;
        let condition = lu.condition_estimate();
        check_condition(condition, options)?;
        (lu.solve(&b), condition, 1)
    } else {
        let outcome = gmres(|v| v + op.apply(v) * k, &b, options.restart, options.tol, options.max_iter)?;
        check_condition(outcome.condition_estimate, options)?;
        (outcome.x, outcome.condition_estimate, outcome.iterations)
    };
    let bnorm = b.norm();
    let residual = if bnorm > 0.0 { (&x + op.apply(&x) * k - &b).norm() / bnorm } else { 0.0 };
    let mut current = SurfaceCurrent::new(op.mesh(), op.from_coordinates(&x), op.k())?;
    current.residual = residual;
    current.condition = condition;
    current.iterations = iterations;
    Ok(current)
}

fn check_condition(condition: f64, options: &CurrentOptions) -> Result<()> {
    if condition > options.condition_limit || !condition.is_finite() {
        log::warn!("boundary system condition estimate {condition:.3e} exceeds {:.1e}", options.condition_limit);
        return Err(Error::NearEigenvalue { condition });
    }
    Ok(())
}
