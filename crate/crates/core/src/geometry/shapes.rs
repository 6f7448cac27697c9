use std::collections::HashMap;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::SurfaceMesh;
use crate::{Error, Point, Result};

/// Canonical particle shapes, centered at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    Sphere { radius: f64 },
    Ellipsoid { semiaxes: [f64; 3] },
    /// Full edge lengths along x, y, z.
    Box { extents: [f64; 3] },
}

impl Shape {
    fn dimensions(&self) -> Vec<f64> {
        match *self {
            Shape::Sphere { radius } => vec![radius],
            Shape::Ellipsoid { semiaxes } => semiaxes.to_vec(),
            Shape::Box { extents } => extents.to_vec(),
        }
    }
}

/// Sphere and ellipsoid meshes come from a subdivided icosahedron (20·4^r triangles);
/// box faces are split into 2^r × 2^r squares of two triangles each.
pub fn make_canonical_mesh(shape: &Shape, refinement: u32) -> Result<SurfaceMesh> {
    if let Some(d) = shape.dimensions().into_iter().find(|d| !(*d > 0.0 && d.is_finite())) {
        return Err(Error::InvalidArgument(format!("shape dimensions must be positive, got {d}")));
    }
    if refinement > 8 {
        return Err(Error::Budget(format!("refinement {refinement} exceeds the supported maximum of 8")));
    }
    match *shape {
        Shape::Sphere { radius } => {
            let (v, t) = icosphere(refinement);
            SurfaceMesh::new(v.into_iter().map(|p| p * radius).collect(), t)
        }
        Shape::Ellipsoid { semiaxes: [a, b, c] } => {
            let (v, t) = icosphere(refinement);
            SurfaceMesh::new(
                v.into_iter().map(|p| Vector3::new(a * p.x, b * p.y, c * p.z)).collect(),
                t,
            )
        }
        Shape::Box { extents } => {
            let (v, t) = box_surface(extents, 1 << refinement);
            SurfaceMesh::new(v, t)
        }
    }
}

/// Unit vectors of the subdivided icosahedron: 12, 42, 162, ... nodes for levels 0, 1, 2.
pub fn icosphere_directions(level: u32) -> Vec<Vector3<f64>> {
    icosphere(level).0
}

fn icosphere(refinement: u32) -> (Vec<Point>, Vec<[usize; 3]>) {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ];
    let mut vertices: Vec<Point> = raw.iter().map(|r| Vector3::from(*r).normalize()).collect();
    let mut triangles: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..refinement {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Point>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                vertices.push(((vertices[a] + vertices[b]) / 2.0).normalize());
                vertices.len() - 1
            })
        };
        let mut next = Vec::with_capacity(4 * triangles.len());
        for &[a, b, c] in &triangles {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        triangles = next;
    }
    (vertices, triangles)
}

fn box_surface(extents: [f64; 3], n: usize) -> (Vec<Point>, Vec<[usize; 3]>) {
    let mut index: HashMap<[usize; 3], usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut vertex = |ijk: [usize; 3], vertices: &mut Vec<Point>| -> usize {
        *index.entry(ijk).or_insert_with(|| {
            vertices.push(Vector3::from_fn(|d, _| extents[d] * (ijk[d] as f64 / n as f64 - 0.5)));
            vertices.len() - 1
        })
    };
    let mut triangles = Vec::new();
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in [0, n] {
            let outward = if side == 0 { -1.0 } else { 1.0 };
            for i in 0..n {
                for j in 0..n {
                    let corner = |di: usize, dj: usize| {
                        let mut ijk = [0; 3];
                        ijk[axis] = side;
                        ijk[u] = i + di;
                        ijk[v] = j + dj;
                        ijk
                    };
                    let q = [
                        vertex(corner(0, 0), &mut vertices),
                        vertex(corner(1, 0), &mut vertices),
                        vertex(corner(1, 1), &mut vertices),
                        vertex(corner(0, 1), &mut vertices),
                    ];
                    // Diagonals point towards the face center so the triangulation keeps
                    // the mirror symmetries of the box (for n ≥ 2).
                    let lower_i = 2 * i < n;
                    let lower_j = 2 * j < n;
                    let pair = if lower_i == lower_j {
                        [[q[0], q[1], q[2]], [q[0], q[2], q[3]]]
                    } else {
                        [[q[0], q[1], q[3]], [q[1], q[2], q[3]]]
                    };
                    // (u, v, axis) is a right-handed cycle, so q is counterclockwise seen
                    // from +axis.
                    for t in pair {
                        triangles.push(if outward > 0.0 { t } else { [t[0], t[2], t[1]] });
                    }
                }
            }
        }
    }
    (vertices, triangles)
}
