//! Triangulated closed surfaces, canonical shapes, and surface quadrature.

mod io;
mod mesh;
pub mod panel;
pub mod quadrature;
mod shapes;

pub use io::{read_mesh_file, read_stl, read_triangle_soup, write_triangle_soup};
pub use mesh::{MeshMeasures, Panel, SurfaceMesh};
pub use panel::{panel_potential, point_triangle_distance, PanelPotential};
pub use quadrature::{
    surface_integral, QuadValue, QuadratureSpec, SingularPoint, SingularStrategy, TriangleRule,
};
pub use shapes::{icosphere_directions, make_canonical_mesh, Shape};
