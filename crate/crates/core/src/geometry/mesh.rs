use std::collections::HashMap;

use nalgebra::{Matrix3, Vector3};

use crate::{Error, Point, Result};

/// One flat triangle of a mesh with its cached geometry.
#[derive(Debug, Clone, Copy)]
pub struct Panel {
    pub vertices: [Point; 3],
    pub normal: Vector3<f64>,
    pub area: f64,
    pub centroid: Point,
}

impl Panel {
    pub fn from_vertices(vertices: [Point; 3]) -> Self {
        let cross = (vertices[1] - vertices[0]).cross(&(vertices[2] - vertices[0]));
        let norm = cross.norm();
        let normal = if norm > 0.0 { cross / norm } else { Vector3::zeros() };
        Self {
            vertices,
            normal,
            area: 0.5 * norm,
            centroid: (vertices[0] + vertices[1] + vertices[2]) / 3.0,
        }
    }

    /// Longest edge length.
    pub fn diameter(&self) -> f64 {
        let [a, b, c] = self.vertices;
        (a - b).norm().max((b - c).norm()).max((c - a).norm())
    }

    pub fn point(&self, bary: &[f64; 3]) -> Point {
        self.vertices[0] * bary[0] + self.vertices[1] * bary[1] + self.vertices[2] * bary[2]
    }

    /// Orthonormal tangent pair (t1, t2) with t1 × t2 = n.
    pub fn tangent_basis(&self) -> (Vector3<f64>, Vector3<f64>) {
        let t1 = (self.vertices[1] - self.vertices[0]).normalize();
        let t2 = self.normal.cross(&t1);
        (t1, t2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshMeasures {
    pub area: f64,
    pub volume: f64,
    pub centroid: Point,
}

/// Closed, outward-oriented triangulated surface. Immutable after construction.
#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    panels: Vec<Panel>,
    characteristic_dimension: f64,
}

impl SurfaceMesh {
    /// Builds a mesh and checks that it is closed, consistently oriented with outward
    /// normals, and free of degenerate triangles.
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if triangles.len() < 4 {
            return Err(Error::Topology(format!(
                "a closed surface needs at least 4 triangles, got {}",
                triangles.len()
            )));
        }
        if let Some(v) = vertices.iter().find(|v| !v.iter().all(|x| x.is_finite())) {
            return Err(Error::InvalidArgument(format!("non-finite vertex {v:?}")));
        }
        let mut directed: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            for &i in tri {
                if i >= vertices.len() {
                    return Err(Error::Topology(format!(
                        "triangle {t} references vertex {i} but only {} exist",
                        vertices.len()
                    )));
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::Topology(format!("triangle {t} repeats a vertex")));
            }
            for e in 0..3 {
                let key = (tri[e], tri[(e + 1) % 3]);
                if directed.insert(key, t).is_some() {
                    return Err(Error::Topology(format!(
                        "edge {}-{} is used twice with the same orientation (triangle {t})",
                        key.0, key.1
                    )));
                }
            }
        }
        for &(a, b) in directed.keys() {
            if !directed.contains_key(&(b, a)) {
                return Err(Error::Topology(format!(
                    "edge {a}-{b} belongs to a single triangle; the surface is open"
                )));
            }
        }

        let panels: Vec<Panel> = triangles
            .iter()
            .map(|t| Panel::from_vertices([vertices[t[0]], vertices[t[1]], vertices[t[2]]]))
            .collect();
        let scale = bounding_diameter(&vertices);
        if let Some(p) = panels.iter().position(|p| p.area <= 1e-14 * scale * scale) {
            return Err(Error::Topology(format!("triangle {p} is degenerate")));
        }

        let mut mesh = Self {
            vertices,
            triangles,
            panels,
            characteristic_dimension: 0.0,
        };
        let volume = mesh.measures().volume;
        if volume <= 0.0 {
            return Err(Error::Topology(format!(
                "enclosed volume {volume:.6e} is not positive; normals point inward"
            )));
        }
        mesh.characteristic_dimension = 0.5 * max_pairwise_distance(&mesh.vertices);
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn panels(&self) -> &[Panel] {
        &self.panels
    }

    pub fn panel(&self, p: usize) -> &Panel {
        &self.panels[p]
    }

    pub fn num_panels(&self) -> usize {
        self.panels.len()
    }

    /// Half the largest vertex-to-vertex distance.
    pub fn characteristic_dimension(&self) -> f64 {
        self.characteristic_dimension
    }

    /// Largest panel diameter.
    pub fn max_panel_size(&self) -> f64 {
        self.panels.iter().map(Panel::diameter).fold(0.0, f64::max)
    }

    /// Area, divergence-theorem volume, and volume centroid.
    pub fn measures(&self) -> MeshMeasures {
        let mut area = 0.0;
        let mut six_volume = 0.0;
        let mut moment = Vector3::zeros();
        // Tetrahedra spanned by a fixed interior-ish origin keep round-off small for
        // translated meshes.
        let origin = self.vertices[0];
        for p in &self.panels {
            area += p.area;
            let [a, b, c] = p.vertices.map(|v| v - origin);
            let det = a.dot(&b.cross(&c));
            six_volume += det;
            moment += det * (a + b + c) / 4.0;
        }
        let volume = six_volume / 6.0;
        let centroid = origin + moment / six_volume;
        MeshMeasures { area, volume, centroid }
    }

    /// Indices of panels sharing at least one vertex with each panel (excluding itself).
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let incident = self.vertex_panels();
        self.triangles
            .iter()
            .enumerate()
            .map(|(p, tri)| {
                let mut out: Vec<usize> = tri
                    .iter()
                    .flat_map(|&v| incident[v].iter().copied())
                    .filter(|&q| q != p)
                    .collect();
                out.sort_unstable();
                out.dedup();
                out
            })
            .collect()
    }

    /// Panels incident to each vertex.
    pub fn vertex_panels(&self) -> Vec<Vec<usize>> {
        let mut incident = vec![Vec::new(); self.vertices.len()];
        for (p, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                incident[v].push(p);
            }
        }
        incident
    }

    pub fn translated(&self, offset: &Vector3<f64>) -> Self {
        self.mapped(|v| v + offset)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) {
            return Err(Error::InvalidArgument(format!("scale factor must be positive, got {factor}")));
        }
        Ok(self.mapped(|v| v * factor))
    }

    /// Applies a proper rotation (orthogonal, det = +1).
    pub fn rotated(&self, rotation: &Matrix3<f64>) -> Result<Self> {
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).norm();
        if ortho > 1e-10 || rotation.determinant() < 0.0 {
            return Err(Error::InvalidArgument("matrix is not a proper rotation".into()));
        }
        Ok(self.mapped(|v| rotation * v))
    }

    fn mapped(&self, f: impl Fn(&Point) -> Point) -> Self {
        let vertices: Vec<Point> = self.vertices.iter().map(f).collect();
        let panels = self
            .triangles
            .iter()
            .map(|t| Panel::from_vertices([vertices[t[0]], vertices[t[1]], vertices[t[2]]]))
            .collect();
        let characteristic_dimension = 0.5 * max_pairwise_distance(&vertices);
        Self {
            vertices,
            triangles: self.triangles.clone(),
            panels,
            characteristic_dimension,
        }
    }
}

fn bounding_diameter(vertices: &[Point]) -> f64 {
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for v in vertices {
        lo = lo.inf(v);
        hi = hi.sup(v);
    }
    (hi - lo).norm()
}

fn max_pairwise_distance(vertices: &[Point]) -> f64 {
    let mut best = 0.0f64;
    for (i, a) in vertices.iter().enumerate() {
        for b in &vertices[i + 1..] {
            best = best.max((a - b).norm_squared());
        }
    }
    best.sqrt()
}
