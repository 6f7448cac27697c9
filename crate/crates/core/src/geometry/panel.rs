//! Closed-form integrals of 1/|x−y| and its gradient over a flat triangle.

use nalgebra::Vector3;

use crate::Point;

/// Potential of a unit-density triangle at an observation point x.
#[derive(Debug, Clone, Copy)]
pub struct PanelPotential {
    /// ∫_T dy / |x − y|
    pub value: f64,
    /// Component of ∇ₓ value lying in the panel plane.
    pub tangential_gradient: Vector3<f64>,
    /// Solid angle subtended by the panel at x (in [0, 2π]).
    pub solid_angle: f64,
    /// Signed distance of x from the panel plane along the normal.
    pub height: f64,
    pub normal: Vector3<f64>,
}

impl PanelPotential {
    /// ∇ₓ ∫_T dy/|x−y|. On the panel plane this is the direct (principal) value, i.e. the
    /// mean of the two one-sided limits.
    pub fn gradient(&self) -> Vector3<f64> {
        self.tangential_gradient - self.height.signum_or_zero() * self.solid_angle * self.normal
    }

    /// One-sided limit of the gradient on the panel plane: `side > 0` is the side the
    /// normal points to. Off the plane this equals [`Self::gradient`].
    pub fn gradient_on_side(&self, side: f64) -> Vector3<f64> {
        let s = if self.height != 0.0 { self.height.signum() } else { side.signum() };
        self.tangential_gradient - s * self.solid_angle * self.normal
    }
}

trait SignumOrZero {
    fn signum_or_zero(self) -> f64;
}

impl SignumOrZero for f64 {
    fn signum_or_zero(self) -> f64 {
        if self == 0.0 {
            0.0
        } else {
            self.signum()
        }
    }
}

/// Exact potential and gradient of the uniform unit density on triangle `v` (counterclockwise
/// around `normal`) at `x`.
pub fn panel_potential(v: &[Point; 3], normal: &Vector3<f64>, x: &Point) -> PanelPotential {
    let scale = (v[1] - v[0]).norm().max((v[2] - v[1]).norm()).max((v[0] - v[2]).norm());
    let tiny = 1e-12 * scale;
    let mut h = normal.dot(&(x - v[0]));
    if h.abs() < tiny {
        h = 0.0;
    }
    let rho = x - h * normal;
    let ha = h.abs();

    let mut value = 0.0;
    let mut grad = Vector3::zeros();
    let mut solid = 0.0;
    for e in 0..3 {
        let a = v[e];
        let b = v[(e + 1) % 3];
        let edge = b - a;
        let lhat = edge / edge.norm();
        let u = lhat.cross(normal);
        let s_minus = (a - rho).dot(&lhat);
        let s_plus = (b - rho).dot(&lhat);
        let t0 = (a - rho).dot(&u);
        let r_minus = (x - a).norm();
        let r_plus = (x - b).norm();
        let r0_sq = t0 * t0 + h * h;

        let on_edge_line = t0.abs() + ha < tiny;
        let f = if on_edge_line && s_minus < 0.0 && s_plus > 0.0 {
            // x sits on the edge itself: the tangential gradient is log-singular there
            // and the edge contributes nothing to the value.
            0.0
        } else if s_plus + s_minus >= 0.0 {
            ((r_plus + s_plus) / (r_minus + s_minus)).ln()
        } else {
            ((r_minus - s_minus) / (r_plus - s_plus)).ln()
        };
        let beta = (t0 * s_plus).atan2(r0_sq + ha * r_plus) - (t0 * s_minus).atan2(r0_sq + ha * r_minus);
        value += t0 * f;
        grad -= u * f;
        solid += beta;
    }
    value -= ha * solid;
    PanelPotential {
        value,
        tangential_gradient: grad,
        solid_angle: solid,
        height: h,
        normal: *normal,
    }
}

/// Euclidean distance from `x` to the closed triangle `v`.
pub fn point_triangle_distance(v: &[Point; 3], x: &Point) -> f64 {
    (x - closest_point_on_triangle(v, x)).norm()
}

fn closest_point_on_triangle(v: &[Point; 3], p: &Point) -> Point {
    let (a, b, c) = (v[0], v[1], v[2]);
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}
