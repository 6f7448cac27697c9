use std::f64::consts::PI;
use std::io::Cursor;

use nalgebra::{Rotation3, Vector3};
use proptest::prelude::*;
use smallscat::geometry::*;
use smallscat::{Error, Point};

fn sphere(r: u32) -> SurfaceMesh {
    make_canonical_mesh(&Shape::Sphere { radius: 1.0 }, r).unwrap()
}

fn duffy_spec() -> QuadratureSpec {
    QuadratureSpec::default().with_strategy(SingularStrategy::DuffySubdivision)
}

#[test]
fn sphere_area_close_to_analytic() {
    let m = make_canonical_mesh(&Shape::Sphere { radius: 1.0 }, 3).unwrap();
    let area = m.measures().area;
    assert!((area - 4.0 * PI).abs() / (4.0 * PI) < 0.01, "area {area}");
    assert_eq!(m.num_panels(), 1280);
    assert_eq!(sphere(4).num_panels(), 5120);
}

#[test]
fn unit_box_volume_is_exact() {
    let m = make_canonical_mesh(&Shape::Box { extents: [1.0, 1.0, 1.0] }, 0).unwrap();
    assert_eq!(m.num_panels(), 12);
    assert!((m.measures().volume - 1.0).abs() < 1e-15);
    let m = make_canonical_mesh(&Shape::Box { extents: [2.0, 1.0, 1.0] }, 2).unwrap();
    assert!((m.measures().volume - 2.0).abs() < 1e-14);
    assert!((m.measures().area - 10.0).abs() < 1e-13);
}

#[test]
fn degenerate_ellipsoid_matches_sphere() {
    let s = sphere(3);
    let e = make_canonical_mesh(&Shape::Ellipsoid { semiaxes: [1.0, 1.0, 1.0] }, 3).unwrap();
    assert_eq!(s.vertices(), e.vertices());
    assert_eq!(s.triangles(), e.triangles());
}

#[test]
fn sphere_volume_at_refinement_four() {
    let v = sphere(4).measures().volume;
    let exact = 4.0 * PI / 3.0;
    assert!((v - exact).abs() / exact < 0.005, "volume {v}");
}

#[test]
fn translated_sphere_centroid() {
    let m = sphere(2).translated(&Vector3::new(5.0, 0.0, 0.0));
    let c = m.measures().centroid;
    assert!((c - Vector3::new(5.0, 0.0, 0.0)).norm() < 1e-12, "{c}");
}

#[test]
fn characteristic_dimension_is_half_diameter() {
    let m = make_canonical_mesh(&Shape::Box { extents: [2.0, 1.0, 1.0] }, 1).unwrap();
    assert!((m.characteristic_dimension() - 0.5 * 6f64.sqrt()).abs() < 1e-14);
    assert!((sphere(2).characteristic_dimension() - 1.0).abs() < 1e-12);
}

#[test]
fn non_positive_dimensions_rejected() {
    for shape in [
        Shape::Sphere { radius: 0.0 },
        Shape::Sphere { radius: -1.0 },
        Shape::Ellipsoid { semiaxes: [1.0, 0.0, 1.0] },
        Shape::Box { extents: [1.0, 1.0, -2.0] },
    ] {
        assert!(matches!(make_canonical_mesh(&shape, 1), Err(Error::InvalidArgument(_))));
    }
}

#[test]
fn open_and_inverted_meshes_rejected() {
    let m = sphere(1);
    let mut tris = m.triangles().to_vec();
    tris.pop();
    assert!(matches!(SurfaceMesh::new(m.vertices().to_vec(), tris), Err(Error::Topology(_))));

    let flipped: Vec<[usize; 3]> = m.triangles().iter().map(|t| [t[0], t[2], t[1]]).collect();
    let err = SurfaceMesh::new(m.vertices().to_vec(), flipped).unwrap_err();
    assert!(matches!(err, Error::Topology(ref s) if s.contains("inward")), "{err}");
}

#[test]
fn ascii_mesh_round_trip() {
    let m = make_canonical_mesh(&Shape::Ellipsoid { semiaxes: [1.0, 0.5, 0.7] }, 2).unwrap();
    let mut buf = Vec::new();
    write_triangle_soup(&m, &mut buf).unwrap();
    let back = read_triangle_soup(Cursor::new(buf)).unwrap();
    assert_eq!(back.triangles(), m.triangles());
    assert!((back.measures().volume - m.measures().volume).abs() < 1e-14);

    let bad = "4 4\n0 0 0\n1 0 0\n0 1 x\n0 0 1\n0 2 1\n0 1 3\n1 2 3\n0 3 2\n";
    let err = read_triangle_soup(Cursor::new(bad)).unwrap_err();
    assert!(matches!(err, Error::Parse(ref s) if s.contains("line 4")), "{err}");

    let tet = "# tetrahedron\n4 4\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n0 2 1\n0 1 3\n1 2 3\n0 3 2\n";
    let t = read_triangle_soup(Cursor::new(tet)).unwrap();
    assert!((t.measures().volume - 1.0 / 6.0).abs() < 1e-15);
}

#[test]
fn stl_round_trip_welds_vertices() {
    let m = sphere(2);
    let triangles: Vec<stl_io::Triangle> = m
        .panels()
        .iter()
        .map(|p| stl_io::Triangle {
            // Deliberately wrong normals: they must be ignored.
            normal: stl_io::Normal::new([0.0, 0.0, 1.0]),
            vertices: p.vertices.map(|v| stl_io::Vertex::new([v.x as f32, v.y as f32, v.z as f32])),
        })
        .collect();
    let mut buf = Vec::new();
    stl_io::write_stl(&mut buf, triangles.iter()).unwrap();
    let back = read_stl(&mut Cursor::new(buf)).unwrap();
    assert_eq!(back.vertices().len(), m.vertices().len());
    assert_eq!(back.num_panels(), m.num_panels());
    assert!((back.measures().volume - m.measures().volume).abs() < 1e-5);
}

#[test]
fn constant_integrand_gives_area_and_converges() {
    let spec = QuadratureSpec::default();
    let errs: Vec<f64> = (1..=4)
        .map(|r| {
            let v: f64 = surface_integral(&sphere(r), |_, _| 1.0, &spec, None).unwrap();
            (v - 4.0 * PI).abs()
        })
        .collect();
    assert!(errs[2] / (4.0 * PI) < 0.01);
    for w in errs.windows(2) {
        assert!(w[1] < 0.5 * w[0], "{errs:?}");
    }
}

#[test]
fn normal_integrates_to_zero() {
    let spec = QuadratureSpec::default();
    for mesh in [
        sphere(3),
        make_canonical_mesh(&Shape::Box { extents: [1.0, 2.0, 3.0] }, 1).unwrap(),
    ] {
        let v: Vector3<f64> = surface_integral(&mesh, |_, n| *n, &spec, None).unwrap();
        assert!(v.norm() < 1e-12 * mesh.measures().area, "{v}");
    }
}

#[test]
fn nan_integrand_reports_panel() {
    let m = sphere(1);
    let target = m.panel(17).centroid;
    let err = surface_integral(
        &m,
        |x: &Point, _| if (x - target).norm() < 1e-12 { f64::NAN } else { 1.0 },
        &QuadratureSpec::default(),
        None,
    )
    .unwrap_err();
    assert!(matches!(err, Error::Evaluation { panel: 17 }), "{err}");
}

// ∫∫ 𝒩_z(t) 𝒩_z(s)/|s−t| over the unit sphere. The degree-1 density cos θ has single-layer
// potential (4π/3) cos θ on the sphere, so the value is (4π/3)·(4π/3) = 16π²/9.
fn double_layer_pair(mesh: &SurfaceMesh, spec: &QuadratureSpec) -> f64 {
    let outer = TriangleRule::of_order(2);
    let mut total = 0.0;
    for (p, panel) in mesh.panels().iter().enumerate() {
        for (x, w) in outer.map(&panel.vertices, panel.area) {
            let inner: f64 = surface_integral(
                mesh,
                |y: &Point, n: &Vector3<f64>| n.z / (x - y).norm(),
                spec,
                Some(SingularPoint::on_panel(x, p)),
            )
            .unwrap();
            total += w * panel.normal.z * inner;
        }
    }
    total
}

#[test]
fn weighted_normal_pair_integral_matches_harmonic_oracle() {
    let exact = 16.0 * PI * PI / 9.0;
    let spec = QuadratureSpec { rule_order: 2, refinement: 1, ..duffy_spec() };
    let errs: Vec<f64> = (1..=3)
        .map(|r| (double_layer_pair(&sphere(r), &spec) - exact).abs() / exact)
        .collect();
    assert!(errs[2] < 0.02, "{errs:?}");
    for w in errs.windows(2) {
        assert!(w[1] < 0.5 * w[0], "{errs:?}");
    }
}

// Brute-force oracle for the panel potential: polar integration around the projection of x.
fn brute_potential(v: &[Point; 3], x: &Point) -> (f64, Vector3<f64>) {
    let n = (v[1] - v[0]).cross(&(v[2] - v[0])).normalize();
    let h = n.dot(&(x - v[0]));
    let rho = x - h * n;
    // Radial Gauss panels graded towards the projection point resolve the near-singular
    // profile when x is close to the plane.
    let base = gauss_legendre(40);
    let breaks = [0.0, 1e-4, 1e-3, 1e-2, 3e-2, 0.1, 0.3, 1.0];
    let radial: Vec<(f64, f64)> = breaks
        .windows(2)
        .flat_map(|w| base.iter().map(move |&(t, wt)| (w[0] + (w[1] - w[0]) * t, (w[1] - w[0]) * wt)))
        .collect();
    let gl = gauss_legendre(60);
    let mut val = 0.0;
    let mut grad = Vector3::zeros();
    for e in 0..3 {
        let (a, b) = (v[e], v[(e + 1) % 3]);
        // Signed area handles projections outside the triangle.
        let signed = n.dot(&(a - rho).cross(&(b - rho)));
        for &(u, wu) in &radial {
            for &(s, ws) in &gl {
                let y = rho + ((a - rho) + (b - a) * s) * u;
                let w = wu * ws * signed * u;
                let r = (x - y).norm();
                val += w / r;
                grad -= w * (x - y) / (r * r * r);
            }
        }
    }
    (val, grad)
}

fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    // Golub-Welsch-free Newton iteration on Legendre polynomials, mapped to [0, 1].
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (x + 1.0), 0.5 * w));
    }
    out
}

#[test]
fn panel_potential_matches_polar_quadrature() {
    let v = [
        Vector3::new(0.1, -0.2, 0.05),
        Vector3::new(1.1, 0.1, -0.1),
        Vector3::new(0.3, 0.9, 0.2),
    ];
    let n = (v[1] - v[0]).cross(&(v[2] - v[0])).normalize();
    let c = (v[0] + v[1] + v[2]) / 3.0;
    let probes = [
        c + 0.3 * n,
        c - 0.01 * n,
        v[0] + 0.5 * n + Vector3::new(0.7, -0.4, 0.1),
        Vector3::new(2.0, 1.5, -1.0),
        v[1] + 1e-3 * n,
    ];
    for x in probes {
        let pp = panel_potential(&v, &n, &x);
        let (val, grad) = brute_potential(&v, &x);
        assert!((pp.value - val).abs() < 1e-9 * val.abs().max(1.0), "{} vs {val}", pp.value);
        assert!((pp.gradient() - grad).norm() < 1e-7 * grad.norm().max(1.0), "{} vs {grad}", pp.gradient());
    }
    // In the panel plane: value from polar quadrature, gradient tangential plus the jump.
    let x = c + 0.2 * (v[1] - c);
    let pp = panel_potential(&v, &n, &x);
    let (val, _) = brute_potential(&v, &x);
    assert!((pp.value - val).abs() < 1e-9 * val);
    assert!(pp.gradient().dot(&n).abs() < 1e-12);
    assert!((pp.solid_angle - 2.0 * PI).abs() < 1e-9);
    let above = panel_potential(&v, &n, &(x + 1e-9 * n)).gradient();
    assert!((above - pp.gradient_on_side(1.0)).norm() < 1e-6);
}

#[test]
fn panel_gradient_matches_finite_differences() {
    let v = [Vector3::new(0.0, 0.0, 0.0), Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.2, 0.8, 0.0)];
    let n = Vector3::z();
    for x in [Vector3::new(0.3, 0.2, 0.1), Vector3::new(-0.5, 1.2, -0.3), Vector3::new(1.5, 0.4, 0.0)] {
        let g = panel_potential(&v, &n, &x).gradient();
        let eps = 1e-6;
        for d in 0..3 {
            let mut e = Vector3::zeros();
            e[d] = eps;
            let fd = (panel_potential(&v, &n, &(x + e)).value - panel_potential(&v, &n, &(x - e)).value) / (2.0 * eps);
            assert!((fd - g[d]).abs() < 1e-6, "axis {d}: {fd} vs {}", g[d]);
        }
    }
}

#[test]
fn point_triangle_distance_cases() {
    let v = [Vector3::new(0.0, 0.0, 0.0), Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.0, 1.0, 0.0)];
    assert!((point_triangle_distance(&v, &Vector3::new(0.2, 0.2, 0.5)) - 0.5).abs() < 1e-15);
    assert!((point_triangle_distance(&v, &Vector3::new(-1.0, -1.0, 0.0)) - 2f64.sqrt()).abs() < 1e-15);
    assert!((point_triangle_distance(&v, &Vector3::new(1.0, 1.0, 0.0)) - 0.5f64.sqrt()).abs() < 1e-15);
    assert!((point_triangle_distance(&v, &Vector3::new(0.5, -2.0, 0.0)) - 2.0).abs() < 1e-15);
}

#[test]
fn icosahedral_direction_counts() {
    assert_eq!(icosphere_directions(0).len(), 12);
    assert_eq!(icosphere_directions(1).len(), 42);
    assert_eq!(icosphere_directions(2).len(), 162);
}

fn arb_mesh() -> impl Strategy<Value = SurfaceMesh> {
    (0usize..3, 0.3f64..2.0, 0.3f64..2.0, 0.3f64..2.0, 0u32..3).prop_map(|(kind, a, b, c, r)| {
        let shape = match kind {
            0 => Shape::Sphere { radius: a },
            1 => Shape::Ellipsoid { semiaxes: [a, b, c] },
            _ => Shape::Box { extents: [a, b, c] },
        };
        make_canonical_mesh(&shape, r).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn closed_surface_flux_vanishes(mesh in arb_mesh(), c in prop::array::uniform3(-5.0f64..5.0)) {
        let c = Vector3::from(c);
        let v: f64 = surface_integral(&mesh, |_, n| c.dot(n), &QuadratureSpec::default(), None).unwrap();
        prop_assert!(v.abs() <= 1e-6 * mesh.measures().area);
    }

    #[test]
    fn volume_is_rotation_invariant(mesh in arb_mesh(), axis in prop::array::uniform3(-1.0f64..1.0), angle in 0.0f64..6.3) {
        let axis = Vector3::from(axis);
        prop_assume!(axis.norm() > 1e-3);
        let rot = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
        let rotated = mesh.rotated(rot.matrix()).unwrap();
        let (v0, v1) = (mesh.measures().volume, rotated.measures().volume);
        prop_assert!((v0 - v1).abs() <= 1e-12 * v0);
    }
}
