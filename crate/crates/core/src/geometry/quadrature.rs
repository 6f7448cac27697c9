use std::ops::{AddAssign, Mul};

use gauss_quad::GaussLegendre;
use nalgebra::{Matrix3, Vector2, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::panel::point_triangle_distance;
use super::SurfaceMesh;
use crate::{Error, Point, Result};

/// How panel pairs whose kernels are singular or nearly singular are integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingularStrategy {
    /// Polar (Duffy) split of the containing panel around the singular point, and
    /// uniform subdivision of the panels that touch it. Works for any integrand.
    DuffySubdivision,
    /// Closed-form integrals of the 1/r and ∇(1/r) kernels over the source panel, with
    /// panel-averaged (Galerkin) testing refined adaptively near the source. Only
    /// available where the kernel is known, i.e. for the boundary operators.
    AnalyticPanel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureSpec {
    /// Polynomial degree integrated exactly by the per-triangle rule (≥ 1).
    pub rule_order: usize,
    pub strategy: SingularStrategy,
    /// Subdivision depth for panels near a singularity.
    pub refinement: u32,
    /// Panel pairs closer than `near_factor` panel diameters get near-field treatment.
    pub near_factor: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rule_order: 4,
            strategy: SingularStrategy::AnalyticPanel,
            refinement: 3,
            near_factor: 3.0,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rule_order < 1 {
            return Err(Error::InvalidArgument("quadrature rule order must be at least 1".into()));
        }
        if !(self.near_factor >= 0.0) {
            return Err(Error::InvalidArgument("near_factor must be non-negative".into()));
        }
        Ok(())
    }

    pub fn with_strategy(mut self, strategy: SingularStrategy) -> Self {
        self.strategy = strategy;
        self
    }
}

/// Quadrature rule on a triangle: barycentric nodes with weights summing to one.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    nodes: Vec<([f64; 3], f64)>,
}

impl TriangleRule {
    pub fn centroid() -> Self {
        Self {
            nodes: vec![([1.0 / 3.0; 3], 1.0)],
        }
    }

    /// Smallest built-in rule that is exact for polynomials of degree `order`.
    pub fn of_order(order: usize) -> Self {
        match order {
            0 | 1 => Self::centroid(),
            2 => Self {
                nodes: vec![
                    ([2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0], 1.0 / 3.0),
                    ([1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0], 1.0 / 3.0),
                    ([1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0], 1.0 / 3.0),
                ],
            },
            3..=5 => Self::seven_point(),
            _ => Self::collapsed_gauss(order.div_ceil(2) + 1),
        }
    }

    /// Degree-5 symmetric seven-point rule.
    pub fn seven_point() -> Self {
        let (a1, b1, w1) = (0.059_715_871_789_770, 0.470_142_064_105_115, 0.132_394_152_788_506);
        let (a2, b2, w2) = (0.797_426_985_353_087, 0.101_286_507_323_456, 0.125_939_180_544_827);
        Self {
            nodes: vec![
                ([1.0 / 3.0; 3], 0.225),
                ([a1, b1, b1], w1),
                ([b1, a1, b1], w1),
                ([b1, b1, a1], w1),
                ([a2, b2, b2], w2),
                ([b2, a2, b2], w2),
                ([b2, b2, a2], w2),
            ],
        }
    }

    /// Tensor Gauss-Legendre rule on the square collapsed onto the triangle; `n` points per
    /// direction, exact to degree 2n − 1.
    pub fn collapsed_gauss(n: usize) -> Self {
        let gl = unit_gauss_legendre(n);
        let mut nodes = Vec::with_capacity(n * n);
        for &(u, wu) in &gl {
            for &(v, wv) in &gl {
                let l1 = u;
                let l2 = v * (1.0 - u);
                nodes.push(([1.0 - l1 - l2, l1, l2], 2.0 * wu * wv * (1.0 - u)));
            }
        }
        Self { nodes }
    }

    pub fn nodes(&self) -> &[([f64; 3], f64)] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Physical nodes and absolute weights on a triangle.
    pub fn map(&self, v: &[Point; 3], area: f64) -> impl Iterator<Item = (Point, f64)> + '_ {
        let v = *v;
        self.nodes
            .iter()
            .map(move |(b, w)| (v[0] * b[0] + v[1] * b[1] + v[2] * b[2], w * area))
    }
}

/// Gauss-Legendre nodes and weights on [0, 1].
pub(crate) fn unit_gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    if n <= 1 {
        return vec![(0.5, 1.0)];
    }
    let rule = GaussLegendre::new(n).expect("Gauss-Legendre degree >= 2");
    rule.as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect()
}

/// Nodes of a polar (Duffy) rule on triangle `v` for an integrand singular like 1/r at `x`,
/// which must lie in the closed triangle. The triangle is split into the three triangles
/// (x, vᵢ, vᵢ₊₁); in each, the radial coordinate's Jacobian cancels the singularity.
pub(crate) fn duffy_nodes(v: &[Point; 3], x: &Point, n: usize) -> Vec<(Point, f64)> {
    let gl = unit_gauss_legendre(n);
    let mut out = Vec::with_capacity(3 * n * n);
    for e in 0..3 {
        let a = v[e];
        let b = v[(e + 1) % 3];
        let twice_area = (a - x).cross(&(b - x)).norm();
        if twice_area <= 1e-300 {
            continue;
        }
        for &(u, wu) in &gl {
            for &(s, ws) in &gl {
                let y = x + ((a - x) + (b - a) * s) * u;
                out.push((y, wu * ws * twice_area * u));
            }
        }
    }
    out
}

/// Nodes of `rule` applied on the 4^levels congruent subtriangles of `v`.
pub(crate) fn subdivided_nodes(v: &[Point; 3], rule: &TriangleRule, levels: u32) -> Vec<(Point, f64)> {
    let mut tris = vec![*v];
    for _ in 0..levels {
        tris = tris.iter().flat_map(split4).collect();
    }
    let mut out = Vec::with_capacity(tris.len() * rule.len());
    for t in &tris {
        let area = 0.5 * (t[1] - t[0]).cross(&(t[2] - t[0])).norm();
        out.extend(rule.map(t, area));
    }
    out
}

pub(crate) fn split4(t: &[Point; 3]) -> [[Point; 3]; 4] {
    let ab = (t[0] + t[1]) / 2.0;
    let bc = (t[1] + t[2]) / 2.0;
    let ca = (t[2] + t[0]) / 2.0;
    [[t[0], ab, ca], [ab, t[1], bc], [ca, bc, t[2]], [ab, bc, ca]]
}

/// Values that can be accumulated by quadrature.
pub trait QuadValue: Copy + AddAssign + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn is_finite_value(&self) -> bool;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn is_finite_value(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

impl QuadValue for Vector3<f64> {
    fn zero() -> Self {
        Vector3::zeros()
    }
    fn is_finite_value(&self) -> bool {
        self.iter().all(|x| x.is_finite())
    }
}

impl QuadValue for Vector2<f64> {
    fn zero() -> Self {
        Vector2::zeros()
    }
    fn is_finite_value(&self) -> bool {
        self.iter().all(|x| x.is_finite())
    }
}

impl QuadValue for Matrix3<f64> {
    fn zero() -> Self {
        Matrix3::zeros()
    }
    fn is_finite_value(&self) -> bool {
        self.iter().all(|x| x.is_finite())
    }
}

/// A point where the integrand may be singular, optionally with the panel that contains it.
#[derive(Debug, Clone, Copy)]
pub struct SingularPoint {
    pub point: Point,
    pub panel: Option<usize>,
}

impl SingularPoint {
    pub fn new(point: Point) -> Self {
        Self { point, panel: None }
    }

    pub fn on_panel(point: Point, panel: usize) -> Self {
        Self { point, panel: Some(panel) }
    }
}

fn locate(mesh: &SurfaceMesh, x: &Point) -> Option<usize> {
    let tol = 1e-9 * mesh.characteristic_dimension();
    mesh.panels()
        .iter()
        .enumerate()
        .map(|(p, panel)| (p, point_triangle_distance(&panel.vertices, x)))
        .filter(|&(_, d)| d <= tol)
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(p, _)| p)
}

/// ∮ f(s, 𝒩(s)) dS over the mesh.
///
/// With `singular_at` on the surface, the containing panel is integrated with a polar rule
/// around the point and the panels touching it are subdivided `spec.refinement` times (at
/// least once). The analytic strategy has no meaning for a black-box integrand and falls
/// back to the same treatment.
pub fn surface_integral<T, F>(
    mesh: &SurfaceMesh,
    integrand: F,
    spec: &QuadratureSpec,
    singular_at: Option<SingularPoint>,
) -> Result<T>
where
    T: QuadValue,
    F: Fn(&Point, &Vector3<f64>) -> T,
{
    spec.validate()?;
    let rule = TriangleRule::of_order(spec.rule_order);
    let singular = singular_at.and_then(|s| s.panel.or_else(|| locate(mesh, &s.point)).map(|p| (p, s.point)));
    let touching: Vec<usize> = match singular {
        Some((p, _)) => {
            let tri = mesh.triangles()[p];
            mesh.triangles()
                .iter()
                .enumerate()
                .filter(|(q, t)| *q != p && t.iter().any(|v| tri.contains(v)))
                .map(|(q, _)| q)
                .collect()
        }
        None => Vec::new(),
    };
    let duffy_points = (spec.rule_order.div_ceil(2) + 3).max(4);

    let mut total = T::zero();
    for (p, panel) in mesh.panels().iter().enumerate() {
        let mut acc = T::zero();
        let mut add = |nodes: &mut dyn Iterator<Item = (Point, f64)>| {
            for (y, w) in nodes {
                acc += integrand(&y, &panel.normal) * w;
            }
        };
        match singular {
            Some((sp, x)) if sp == p => add(&mut duffy_nodes(&panel.vertices, &x, duffy_points).into_iter()),
            Some(_) if touching.contains(&p) => {
                add(&mut subdivided_nodes(&panel.vertices, &rule, spec.refinement.max(1)).into_iter())
            }
            _ => add(&mut rule.map(&panel.vertices, panel.area)),
        }
        if !acc.is_finite_value() {
            return Err(Error::Evaluation { panel: p });
        }
        total += acc;
    }
    Ok(total)
}

/// Adaptive integration of `f` over triangle `t`: subtriangles closer to `source` than
/// `eta` times their diameter are split, down to `max_level` levels.
pub(crate) fn adaptive_near<T: QuadValue>(
    t: &[Point; 3],
    source: &[Point; 3],
    rule: &TriangleRule,
    eta: f64,
    max_level: u32,
    f: &mut impl FnMut(&Point) -> T,
) -> T {
    let diam = (t[0] - t[1]).norm().max((t[1] - t[2]).norm()).max((t[2] - t[0]).norm());
    let centroid = (t[0] + t[1] + t[2]) / 3.0;
    if max_level > 0 && point_triangle_distance(source, &centroid) < eta * diam {
        let mut acc = T::zero();
        for child in split4(t) {
            acc += adaptive_near(&child, source, rule, eta, max_level - 1, f);
        }
        return acc;
    }
    let area = 0.5 * (t[1] - t[0]).cross(&(t[2] - t[0])).norm();
    let mut acc = T::zero();
    for (y, w) in rule.map(t, area) {
        acc += f(&y) * w;
    }
    acc
}
