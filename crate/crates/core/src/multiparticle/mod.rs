//! The N-body system 𝒱(x_j) = 𝒰₀(x_j) + Σ_{i≠j} g(x_j, x_i) 𝒮_i 𝒱(x_i) and the field it defines.

mod grid;
mod incident;
mod particle;
mod placement;

pub use grid::{FieldGrid, Region};
pub(crate) use grid::csv_error;
pub use incident::IncidentField;
pub use particle::{ball_alpha, ParticleInstance};
pub use placement::{lattice_positions, random_positions};

use log::warn;
use nalgebra::{DMatrix, DVector, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::solve_dense;
use crate::scattering::{farzone_error_report, green, FarZoneMargins, FarZoneReport, SOperator6, WaveContext};
use crate::{c64, field_norm, join_field, split_field, CVec3, Error, Field6, Point, Result};

/// Default cap on N for the dense solver.
pub const DEFAULT_DENSE_CAP: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverRoute {
    FixedPoint,
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Stop when the sweep update falls below tol·‖𝒰₀‖.
    pub tol: f64,
    pub max_iter: usize,
    /// Error instead of rerouting to the direct solver when the system is not dominant.
    pub strict_dominance: bool,
    pub dense_cap: usize,
    /// Guard radius in units of the minimum pairwise distance.
    pub guard_margin: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 500, strict_dominance: false, dense_cap: DEFAULT_DENSE_CAP, guard_margin: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DominanceBound {
    /// max_j max_m Σ_{i≠j} Σ_ℓ |g(x_j, x_i)(𝒮_i)_{mℓ}|, the max-norm of the interaction operator.
    pub bound: f64,
    pub dominant: bool,
}

/// Solution of the N-body system.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalFields {
    pub values: Vec<Field6>,
    pub iterations: usize,
    /// Max-norm residual of the system, absolute.
    pub residual: f64,
    pub route: SolverRoute,
    /// Max-norm of successive updates (fixed point only).
    pub history: Vec<f64>,
    /// Largest ratio of successive updates above round-off (fixed point only).
    pub rate: Option<f64>,
    pub condition: Option<f64>,
}

/// Particles in a background, lit by an incident field.
#[derive(Debug, Clone)]
pub struct Scene {
    pub particles: Vec<ParticleInstance>,
    pub incident: IncidentField,
    pub ctx: WaveContext,
}

// Per-particle source terms of the dipole route: C·αV_E and C·√(μ₀/ε₀)·βV_H.
#[derive(Clone, Copy)]
struct Sources {
    electric: CVec3,
    magnetic: CVec3,
}

impl Scene {
    pub fn new(particles: Vec<ParticleInstance>, incident: IncidentField, ctx: WaveContext) -> Result<Self> {
        let scene = Self { particles, incident, ctx };
        scene.min_distance()?;
        Ok(scene)
    }

    /// d = min_{i≠j} |x_i − x_j|; infinite for fewer than two particles.
    pub fn min_distance(&self) -> Result<f64> {
        let mut d = f64::INFINITY;
        for (i, p) in self.particles.iter().enumerate() {
            for (j, q) in self.particles.iter().enumerate().skip(i + 1) {
                let r = (p.position - q.position).norm();
                if r == 0.0 {
                    return Err(Error::InvalidConfiguration(format!("particles {i} and {j} share the center {:?}", p.position.as_slice())));
                }
                d = d.min(r);
            }
        }
        Ok(d)
    }

    /// Far-zone report per particle, with d its nearest-neighbour distance.
    pub fn regime_reports(&self, margins: &FarZoneMargins) -> Vec<FarZoneReport> {
        self.particles
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let d = self
                    .particles
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, q)| (p.position - q.position).norm())
                    .fold(f64::INFINITY, f64::min);
                let mut r = farzone_error_report(p.size, d, self.ctx.k, margins);
                if d.is_infinite() {
                    // A lone particle has no neighbour to be in the far zone of.
                    r.violations.retain(|v| !v.starts_with("kd"));
                    r.grad_error = 0.0;
                    r.g_error = 0.0;
                    r.regime_ok = r.violations.is_empty();
                }
                r
            })
            .collect()
    }

    fn operator(&self, i: usize, direction: &Vector3<f64>) -> SOperator6 {
        let p = &self.particles[i];
        SOperator6::for_direction(&p.alpha, &p.beta, direction, &self.ctx, p.volume).expect("distinct centers give a unit direction")
    }

    pub fn dominance_bound(&self) -> Result<DominanceBound> {
        self.min_distance()?;
        let n = self.particles.len();
        let bound = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut rows = [0.0f64; 6];
                for i in (0..n).filter(|&i| i != j) {
                    let diff = self.particles[j].position - self.particles[i].position;
                    let g = green(&self.particles[j].position, &self.particles[i].position, self.ctx.k).expect("distinct centers");
                    let s = self.operator(i, &diff);
                    for (m, row) in rows.iter_mut().enumerate() {
                        *row += (0..6).map(|l| (s.matrix[(m, l)] * g).norm()).sum::<f64>();
                    }
                }
                rows.into_iter().fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max);
        Ok(DominanceBound { bound, dominant: bound < 1.0 })
    }

    pub fn incident_at_particles(&self) -> Vec<Field6> {
        self.particles.iter().map(|p| self.incident.evaluate(&p.position, &self.ctx)).collect()
    }

    fn sources(&self, values: &[Field6]) -> Vec<Sources> {
        let impedance = 1.0 / self.ctx.background.admittance();
        self.particles
            .iter()
            .zip(values)
            .map(|(p, v)| {
                let (e, h) = split_field(v);
                let c = c64(self.ctx.prefactor(p.volume), 0.0);
                Sources { electric: p.alpha * e * c, magnetic: p.beta * h * (c * impedance) }
            })
            .collect()
    }

    // g(x, x_i) 𝒮_i(β) 𝒱_i for β = (x − x_i)/|x − x_i|, from the precomputed sources.
    fn radiated(&self, x: &Point, i: usize, src: &Sources) -> Field6 {
        let diff = x - self.particles[i].position;
        let r = diff.norm();
        let n = crate::real_to_complex(&(diff / r));
        let kr = self.ctx.k * r;
        let g = Complex64::new(0.0, kr).exp() / kr;
        let e = (src.electric - n * n.dot(&src.electric) - n.cross(&src.magnetic)) * g;
        let h = n.cross(&e) * c64(self.ctx.background.admittance(), 0.0);
        join_field(&e, &h)
    }

    // (T V)_j = Σ_{i≠j} g_ji 𝒮_i V_i.
    fn interaction(&self, values: &[Field6]) -> Vec<Field6> {
        let src = self.sources(values);
        let n = self.particles.len();
        (0..n)
            .into_par_iter()
            .map(|j| {
                let x = self.particles[j].position;
                (0..n).filter(|&i| i != j).map(|i| self.radiated(&x, i, &src[i])).sum()
            })
            .collect()
    }

    fn residual(&self, values: &[Field6], u0: &[Field6]) -> f64 {
        let t = self.interaction(values);
        values
            .iter()
            .zip(u0)
            .zip(&t)
            .map(|((v, u), tv)| field_norm(&(v - u - tv)))
            .fold(0.0, f64::max)
    }

    /// Iterates 𝒱^(n+1) = 𝒰₀ + T𝒱^(n) from 𝒱^(0) = 𝒰₀.
    pub fn solve_fixed_point(&self, tol: f64, max_iter: usize) -> Result<LocalFields> {
        self.min_distance()?;
        let u0 = self.incident_at_particles();
        let scale = u0.iter().map(field_norm).fold(0.0, f64::max);
        let mut values = u0.clone();
        let mut history = Vec::new();
        if scale == 0.0 {
            return Ok(LocalFields { values, iterations: 0, residual: 0.0, route: SolverRoute::FixedPoint, history, rate: Some(0.0), condition: None });
        }
        for it in 1..=max_iter {
            let t = self.interaction(&values);
            let next: Vec<Field6> = u0.iter().zip(&t).map(|(u, tv)| u + tv).collect();
            let change = next.iter().zip(&values).map(|(a, b)| field_norm(&(a - b))).fold(0.0, f64::max);
            values = next;
            history.push(change);
            if change <= tol * scale {
                let floor = 1e3 * f64::EPSILON * scale;
                let rate = history
                    .windows(2)
                    .filter(|w| w[1] > floor)
                    .map(|w| w[1] / w[0])
                    .fold(0.0, f64::max);
                let residual = self.residual(&values, &u0);
                return Ok(LocalFields { values, iterations: it, residual, route: SolverRoute::FixedPoint, history, rate: Some(rate), condition: None });
            }
        }
        let residual = self.residual(&values, &u0);
        Err(Error::NonConvergence { iterations: max_iter, residual, history })
    }

    /// Dense 6N×6N system I − T.
    pub fn system_matrix(&self) -> Result<DMatrix<Complex64>> {
        self.min_distance()?;
        let n = self.particles.len();
        let dim = 6 * n;
        let columns: Vec<Vec<Complex64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut block = vec![Complex64::new(0.0, 0.0); dim * 6];
                for j in (0..n).filter(|&j| j != i) {
                    let xj = self.particles[j].position;
                    let diff = xj - self.particles[i].position;
                    let g = green(&xj, &self.particles[i].position, self.ctx.k).expect("distinct centers");
                    let s = self.operator(i, &diff);
                    for l in 0..6 {
                        for m in 0..6 {
                            block[l * dim + 6 * j + m] = -s.matrix[(m, l)] * g;
                        }
                    }
                }
                for l in 0..6 {
                    block[l * dim + 6 * i + l] += 1.0;
                }
                block
            })
            .collect();
        Ok(DMatrix::from_iterator(dim, dim, columns.into_iter().flatten()))
    }

    pub fn solve_direct(&self, dense_cap: usize) -> Result<LocalFields> {
        let n = self.particles.len();
        if n > dense_cap {
            return Err(Error::Budget(format!("{n} particles exceed the dense solver cap {dense_cap}")));
        }
        let u0 = self.incident_at_particles();
        let rhs = DVector::from_iterator(6 * n, u0.iter().flat_map(|u| u.iter().copied()));
        let (x, condition) = solve_dense(self.system_matrix()?, &rhs)?;
        let values: Vec<Field6> = (0..n).map(|j| Field6::from_fn(|m, _| x[6 * j + m])).collect();
        let residual = self.residual(&values, &u0);
        Ok(LocalFields { values, iterations: 1, residual, route: SolverRoute::Direct, history: Vec::new(), rate: None, condition: Some(condition) })
    }

    /// Fixed point when dominant; otherwise the direct solver, or an error in strict mode.
    pub fn solve(&self, options: &SolverOptions) -> Result<(LocalFields, DominanceBound)> {
        let bound = self.dominance_bound()?;
        if bound.dominant {
            return Ok((self.solve_fixed_point(options.tol, options.max_iter)?, bound));
        }
        if options.strict_dominance {
            return Err(Error::Regime(format!("system is not diagonally dominant (bound {:.4})", bound.bound)));
        }
        warn!("dominance bound {:.4} >= 1, switching to the direct solver", bound.bound);
        Ok((self.solve_direct(options.dense_cap)?, bound))
    }

    /// Radius of the exclusion ball around each particle.
    pub fn guard_radius(&self, margin: f64) -> Result<f64> {
        let d = self.min_distance()?;
        Ok(if d.is_finite() {
            margin * d
        } else {
            margin * 10.0 * self.particles.first().map_or(0.0, |p| p.size)
        })
    }

    /// 𝒰(x) = 𝒰₀(x) + Σ g(x, x_i) 𝒮_i 𝒱(x_i), valid outside the guard balls.
    pub fn evaluate_field(&self, x: &Point, fields: &LocalFields, margin: f64) -> Result<Field6> {
        let guard = self.guard_radius(margin)?;
        self.evaluate_with_guard(x, fields, guard)
    }

    fn evaluate_with_guard(&self, x: &Point, fields: &LocalFields, guard: f64) -> Result<Field6> {
        if fields.values.len() != self.particles.len() {
            return Err(Error::InvalidArgument("local fields do not match the scene".into()));
        }
        for (i, p) in self.particles.iter().enumerate() {
            let distance = (x - p.position).norm();
            if distance < guard {
                return Err(Error::OutOfRegion { particle: i, distance, guard });
            }
        }
        let src = self.sources(&fields.values);
        let scattered: Field6 = src.iter().enumerate().map(|(i, s)| self.radiated(x, i, s)).sum();
        Ok(self.incident.evaluate(x, &self.ctx) + scattered)
    }

    /// Field exciting particle `j`: 𝒰₀ plus the dipole-route fields of all other particles.
    pub fn exciting_field(&self, j: usize, fields: &LocalFields) -> Result<IncidentField> {
        if j >= self.particles.len() || fields.values.len() != self.particles.len() {
            return Err(Error::InvalidArgument(format!("no particle {j} in a scene of {}", self.particles.len())));
        }
        let src = self.sources(&fields.values);
        let scene = self.clone();
        Ok(IncidentField::sampled(move |x| {
            let others: Field6 = src
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != j)
                .map(|(i, s)| scene.radiated(x, i, s))
                .sum();
            scene.incident.evaluate(x, &scene.ctx) + others
        }))
    }

    /// Samples the total field on a regular grid, masking points inside guard balls.
    pub fn field_grid(&self, region: &Region, resolution: usize, fields: &LocalFields, margin: f64) -> Result<FieldGrid> {
        let guard = self.guard_radius(margin)?;
        let points = region.points(resolution)?;
        let values = points
            .par_iter()
            .map(|x| match self.evaluate_with_guard(x, fields, guard) {
                Ok(u) => Ok(Some(u)),
                Err(Error::OutOfRegion { .. }) => Ok(None),
                Err(e) => Err(e),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FieldGrid { resolution, points, values })
    }
}
