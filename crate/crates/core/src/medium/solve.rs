use std::io::Write;

use log::warn;
use nalgebra::{DMatrix, DVector, Matrix6, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DirectionLookup, GridMeta, PotentialQ};
use crate::geometry::icosphere_directions;
use crate::linalg::solve_dense;
use crate::multiparticle::IncidentField;
use crate::scattering::green;
use crate::{c64, field_norm, join_field, real_to_complex, split_field, CVec3, Error, Field6, Point, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EffectiveRoute {
    /// Neumann iteration, falling back to the direct solver on divergence for small grids.
    Auto,
    Neumann,
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EffectiveOptions {
    /// Stop when the sweep update falls below tol·‖𝒰₀‖.
    pub tol: f64,
    pub max_iter: usize,
    pub route: EffectiveRoute,
    /// Largest number of occupied voxels for the dense solver.
    pub direct_cap: usize,
}

impl Default for EffectiveOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 200, route: EffectiveRoute::Auto, direct_cap: 400 }
    }
}

/// Solution of the effective-field equation at the voxel centres.
#[derive(Debug, Clone)]
pub struct EffectiveField {
    pub q: PotentialQ,
    pub incident: IncidentField,
    pub values: Vec<Field6>,
    pub iterations: usize,
    /// Ratio of the last two Neumann updates (0 for the direct route).
    pub norm_estimate: f64,
    pub route: EffectiveRoute,
    /// Max-norm residual of the discrete equation over occupied voxels.
    pub residual: f64,
}

/// ∫_{|y|<R} e^{ik|y|}/(k|y|) dy = (4π/k)[e^{ikR}(1/k² − iR/k) − 1/k²].
pub fn ball_green_integral(radius: f64, k: f64) -> Complex64 {
    let phase = Complex64::new(0.0, k * radius).exp();
    (phase * Complex64::new(1.0 / (k * k), -radius / k) - 1.0 / (k * k)) * (4.0 * std::f64::consts::PI / k)
}

// Green's function and unit direction for every voxel offset, target minus source.
struct OffsetTable {
    dims: [usize; 3],
    g: Vec<Complex64>,
    dir: Vec<Vector3<f64>>,
}

impl OffsetTable {
    fn new(q: &PotentialQ) -> Self {
        let grid = q.grid();
        let dims = grid.dims;
        let ext = dims.map(|n| 2 * n - 1);
        let mut g = Vec::with_capacity(ext.iter().product());
        let mut dir = Vec::with_capacity(g.capacity());
        for dk in 0..ext[2] {
            for dj in 0..ext[1] {
                for di in 0..ext[0] {
                    let off = Vector3::new(
                        di as f64 - (dims[0] - 1) as f64,
                        dj as f64 - (dims[1] - 1) as f64,
                        dk as f64 - (dims[2] - 1) as f64,
                    ) * grid.spacing;
                    let r = off.norm();
                    if r == 0.0 {
                        g.push(Complex64::new(0.0, 0.0));
                        dir.push(Vector3::zeros());
                    } else {
                        let kr = q.ctx.k * r;
                        g.push(Complex64::new(0.0, kr).exp() / kr);
                        dir.push(off / r);
                    }
                }
            }
        }
        Self { dims, g, dir }
    }

    fn index(&self, target: [usize; 3], source: [usize; 3]) -> usize {
        let d = |a: usize| target[a] + self.dims[a] - 1 - source[a];
        d(0) + (2 * self.dims[0] - 1) * (d(1) + (2 * self.dims[1] - 1) * d(2))
    }
}

struct Kernel<'a> {
    q: &'a PotentialQ,
    offsets: OffsetTable,
    occupied: Vec<usize>,
    /// Direction-averaged q times the ball-equivalent integral of g, per occupied voxel.
    self_terms: Vec<Matrix6<Complex64>>,
    /// Nearest table node per offset (table lookup only).
    nodes: Vec<usize>,
}

impl<'a> Kernel<'a> {
    fn new(q: &'a PotentialQ) -> Self {
        let grid = q.grid();
        let occupied: Vec<usize> = (0..grid.len()).filter(|&v| q.density.density[v] > 0.0 && q.density.template[v].is_some()).collect();
        let radius = (3.0 * grid.voxel_volume() / (4.0 * std::f64::consts::PI)).cbrt();
        let ball = ball_green_integral(radius, q.ctx.k);
        // The icosahedral node set averages polynomials of degree ≤ 2 exactly, and 𝒮(β) is one.
        let dirs = icosphere_directions(1);
        let self_terms = occupied
            .iter()
            .map(|&v| {
                let mean: Matrix6<Complex64> = dirs.iter().map(|b| q.operator(v, b)).sum::<Matrix6<Complex64>>() / c64(dirs.len() as f64, 0.0);
                mean * ball
            })
            .collect();
        let offsets = OffsetTable::new(q);
        let nodes = match q.lookup {
            DirectionLookup::Exact => Vec::new(),
            DirectionLookup::NearestNode { .. } => offsets.dir.iter().map(|d| if d.norm() > 0.0 { q.nearest_node(d) } else { 0 }).collect(),
        };
        Self { q, offsets, occupied, self_terms, nodes }
    }

    // Σ_{n≠m} g h³ q(y_n, β_mn) U_n + self term, at every voxel.
    fn apply(&self, values: &[Field6]) -> Vec<Field6> {
        let grid = self.q.grid();
        let h3 = grid.voxel_volume();
        let coords: Vec<[usize; 3]> = self.occupied.iter().map(|&v| grid.coords(v)).collect();
        let mut is_occupied = vec![None; grid.len()];
        for (s, &v) in self.occupied.iter().enumerate() {
            is_occupied[v] = Some(s);
        }
        match self.q.lookup {
            DirectionLookup::Exact => {
                let impedance = 1.0 / self.q.ctx.background.admittance();
                let admittance = c64(self.q.ctx.background.admittance(), 0.0);
                let sources: Vec<(CVec3, CVec3)> = self
                    .occupied
                    .iter()
                    .map(|&v| {
                        let t = &self.q.density.templates[self.q.density.template[v].expect("occupied")];
                        let scale = c64(self.q.density.density[v] * h3 * self.q.ctx.prefactor(t.volume), 0.0);
                        let (e, h) = split_field(&values[v]);
                        (t.alpha * e * scale, t.beta * h * (scale * impedance))
                    })
                    .collect();
                (0..grid.len())
                    .into_par_iter()
                    .map(|m| {
                        let cm = grid.coords(m);
                        let mut e_acc = CVec3::zeros();
                        let mut h_acc = CVec3::zeros();
                        for (s, (a, b)) in sources.iter().enumerate() {
                            if self.occupied[s] == m {
                                continue;
                            }
                            let o = self.offsets.index(cm, coords[s]);
                            let n = real_to_complex(&self.offsets.dir[o]);
                            let e = (a - n * n.dot(a) - n.cross(b)) * self.offsets.g[o];
                            h_acc += n.cross(&e);
                            e_acc += e;
                        }
                        h_acc *= admittance;
                        let mut out = join_field(&e_acc, &h_acc);
                        if let Some(s) = is_occupied[m] {
                            out += self.self_terms[s] * values[m];
                        }
                        out
                    })
                    .collect()
            }
            DirectionLookup::NearestNode { .. } => (0..grid.len())
                .into_par_iter()
                .map(|m| {
                    let cm = grid.coords(m);
                    let mut out = Field6::zeros();
                    for (s, &v) in self.occupied.iter().enumerate() {
                        if v == m {
                            out += self.self_terms[s] * values[m];
                            continue;
                        }
                        let o = self.offsets.index(cm, coords[s]);
                        let t = self.q.density.template[v].expect("occupied");
                        let w = self.offsets.g[o] * (self.q.density.density[v] * h3);
                        out += self.q.tables_entry(t, self.nodes[o]) * values[v] * w;
                    }
                    out
                })
                .collect(),
        }
    }
}

/// Solves 𝒰(x) = 𝒰₀(x) + ∫_D g(x, y) q(y, x) 𝒰(y) dy by midpoint collocation at the voxel centres.
pub fn solve_effective_field(q: &PotentialQ, incident: &IncidentField, options: &EffectiveOptions) -> Result<EffectiveField> {
    let grid = q.grid();
    let u0: Vec<Field6> = (0..grid.len()).map(|v| incident.evaluate(&grid.center(v), &q.ctx)).collect();
    let kernel = Kernel::new(q);
    let finish = |values: Vec<Field6>, iterations, norm_estimate, route| {
        let kv = kernel.apply(&values);
        let residual = kernel
            .occupied
            .iter()
            .map(|&v| field_norm(&(values[v] - u0[v] - kv[v])))
            .fold(0.0, f64::max);
        EffectiveField { q: q.clone(), incident: incident.clone(), values, iterations, norm_estimate, route, residual }
    };
    if kernel.occupied.is_empty() {
        return Ok(finish(u0.clone(), 0, 0.0, EffectiveRoute::Neumann));
    }
    let direct = |kernel: &Kernel| -> Result<EffectiveField> {
        if kernel.occupied.len() > options.direct_cap {
            return Err(Error::Budget(format!("{} occupied voxels exceed the direct cap {}", kernel.occupied.len(), options.direct_cap)));
        }
        let values = direct_solve(kernel, &u0)?;
        Ok(finish(values, 1, 0.0, EffectiveRoute::Direct))
    };
    match options.route {
        EffectiveRoute::Direct => direct(&kernel),
        EffectiveRoute::Neumann => neumann(&kernel, &u0, options).map(|(v, it, est)| finish(v, it, est, EffectiveRoute::Neumann)),
        EffectiveRoute::Auto => match neumann(&kernel, &u0, options) {
            Ok((v, it, est)) => Ok(finish(v, it, est, EffectiveRoute::Neumann)),
            Err(Error::NeumannDivergence { norm_estimate }) if kernel.occupied.len() <= options.direct_cap => {
                warn!("Neumann iteration diverges (norm estimate {norm_estimate:.3}), using the direct solver");
                direct(&kernel)
            }
            Err(e) => Err(e),
        },
    }
}

fn neumann(kernel: &Kernel, u0: &[Field6], options: &EffectiveOptions) -> Result<(Vec<Field6>, usize, f64)> {
    let scale = kernel.occupied.iter().map(|&v| field_norm(&u0[v])).fold(0.0, f64::max);
    let mut values = u0.to_vec();
    if scale == 0.0 {
        return Ok((values, 0, 0.0));
    }
    let mut history: Vec<f64> = Vec::new();
    for it in 1..=options.max_iter {
        let kv = kernel.apply(&values);
        let next: Vec<Field6> = u0.iter().zip(&kv).map(|(a, b)| a + b).collect();
        let change = kernel.occupied.iter().map(|&v| field_norm(&(next[v] - values[v]))).fold(0.0, f64::max);
        values = next;
        let estimate = history.last().map_or(0.0, |&prev| if prev > 0.0 { change / prev } else { 0.0 });
        history.push(change);
        if !change.is_finite() {
            return Err(Error::NeumannDivergence { norm_estimate: f64::INFINITY });
        }
        if change <= options.tol * scale {
            return Ok((values, it, estimate));
        }
        let n = history.len();
        if n >= 4 && history[n - 1] > history[n - 2] && history[n - 2] > history[n - 3] && history[n - 3] > history[n - 4] {
            return Err(Error::NeumannDivergence { norm_estimate: estimate });
        }
    }
    let residual = history.last().copied().unwrap_or(0.0);
    Err(Error::NonConvergence { iterations: options.max_iter, residual, history })
}

fn direct_solve(kernel: &Kernel, u0: &[Field6]) -> Result<Vec<Field6>> {
    let q = kernel.q;
    let grid = q.grid();
    let h3 = grid.voxel_volume();
    let s = kernel.occupied.len();
    let dim = 6 * s;
    let columns: Vec<Vec<Complex64>> = (0..s)
        .into_par_iter()
        .map(|col| {
            let v = kernel.occupied[col];
            let yv = grid.center(v);
            let mut block = vec![Complex64::new(0.0, 0.0); dim * 6];
            for (row, &m) in kernel.occupied.iter().enumerate() {
                let op = if m == v {
                    kernel.self_terms[col]
                } else {
                    let xm = grid.center(m);
                    let g = green(&xm, &yv, q.ctx.k).expect("distinct voxel centres") * h3;
                    q.operator(v, &(xm - yv)) * g
                };
                for l in 0..6 {
                    for r in 0..6 {
                        block[l * dim + 6 * row + r] = -op[(r, l)];
                    }
                }
            }
            for l in 0..6 {
                block[l * dim + 6 * col + l] += 1.0;
            }
            block
        })
        .collect();
    let a = DMatrix::from_iterator(dim, dim, columns.into_iter().flatten());
    let rhs = DVector::from_iterator(dim, kernel.occupied.iter().flat_map(|&v| u0[v].iter().copied()));
    let (x, _) = solve_dense(a, &rhs)?;
    let mut values = u0.to_vec();
    for (s, &v) in kernel.occupied.iter().enumerate() {
        values[v] = Field6::from_fn(|r, _| x[6 * s + r]);
    }
    // Unoccupied voxels take one application of the kernel.
    let kv = kernel.apply(&values);
    let occupied: std::collections::HashSet<usize> = kernel.occupied.iter().copied().collect();
    for v in 0..grid.len() {
        if !occupied.contains(&v) {
            values[v] = u0[v] + kv[v];
        }
    }
    Ok(values)
}

impl EffectiveField {
    /// Field at a point off the voxel centres by the same midpoint rule.
    pub fn evaluate(&self, x: &Point) -> Result<Field6> {
        let grid = self.q.grid();
        let h3 = grid.voxel_volume();
        let mut out = self.incident.evaluate(x, &self.q.ctx);
        for v in 0..grid.len() {
            if self.q.density.density[v] == 0.0 {
                continue;
            }
            let y = grid.center(v);
            let g = green(x, &y, self.q.ctx.k)? * h3;
            out += self.q.operator(v, &(x - y)) * self.values[v] * g;
        }
        Ok(out)
    }

    pub fn meta(&self) -> GridMeta {
        GridMeta { grid: *self.q.grid(), k: Some(self.q.ctx.k) }
    }

    /// CSV with columns ix,iy,iz,Re E1,Im E1,…,Re H3,Im H3.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["ix".to_string(), "iy".into(), "iz".into()];
        for f in ["E", "H"] {
            for c in 1..=3 {
                header.push(format!("Re {f}{c}"));
                header.push(format!("Im {f}{c}"));
            }
        }
        out.write_record(&header).map_err(crate::multiparticle::csv_error)?;
        for (v, u) in self.values.iter().enumerate() {
            let c = self.q.grid().coords(v);
            let mut row: Vec<String> = c.iter().map(|i| i.to_string()).collect();
            for z in u.iter() {
                row.push(format!("{:.17e}", z.re));
                row.push(format!("{:.17e}", z.im));
            }
            out.write_record(&row).map_err(crate::multiparticle::csv_error)?;
        }
        out.flush()?;
        Ok(())
    }
}
