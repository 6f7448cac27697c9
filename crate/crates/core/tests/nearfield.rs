use std::f64::consts::PI;

use nalgebra::{DMatrix, Rotation3, Unit, Vector3};
use num_complex::Complex64;
use proptest::prelude::*;
use smallscat::geometry::{make_canonical_mesh, QuadratureSpec, Shape, SurfaceMesh, TriangleRule};
use smallscat::multiparticle::{IncidentField, ParticleInstance, Scene, SolverOptions};
use smallscat::nearfield::*;
use smallscat::polarizability::MaterialContrast;
use smallscat::scattering::WaveContext;
use smallscat::{Background, CVec3, Error, Field6, Point};

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn cvec(v: &Vector3<f64>) -> CVec3 {
    v.map(c)
}

fn ctx(k: f64) -> WaveContext {
    WaveContext::new(k, Background::default()).unwrap()
}

fn sphere(radius: f64, refinement: u32) -> SurfaceMesh {
    make_canonical_mesh(&Shape::Sphere { radius }, refinement).unwrap()
}

fn x_polarized() -> IncidentField {
    IncidentField::plane_wave(Vector3::z(), CVec3::new(c(1.0), c(0.0), c(0.0))).unwrap()
}

fn e_part(u: &Field6) -> CVec3 {
    CVec3::new(u[0], u[1], u[2])
}

fn h_part(u: &Field6) -> CVec3 {
    CVec3::new(u[3], u[4], u[5])
}

fn max_norm(v: &[CVec3]) -> f64 {
    v.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

// Largest |𝒩 × E| over the nodes of the degree-2 rule on every panel, just outside the surface.
fn boundary_residual(current: &SurfaceCurrent, exciting: &IncidentField, ctx: &WaveContext, offset: f64) -> f64 {
    let rule = TriangleRule::of_order(2);
    let mut points = Vec::new();
    let mut normals = Vec::new();
    for panel in current.mesh().panels() {
        for (bary, _) in rule.nodes() {
            points.push(panel.point(bary) + panel.normal * offset);
            normals.push(panel.normal);
        }
    }
    let fields = near_field_at(&points, current, exciting, ctx).unwrap();
    fields.iter().zip(&normals).map(|(u, n)| cvec(n).cross(&e_part(u)).norm()).fold(0.0, f64::max)
}

fn pec_current(radius: f64, refinement: u32, k: f64) -> (SurfaceCurrent, IncidentField, WaveContext) {
    let ctx = ctx(k);
    let op = BoundaryOperatorA::assemble(&sphere(radius, refinement), &ctx, &QuadratureSpec::default()).unwrap();
    let inc = x_polarized();
    let current = solve_current(&op, &inc, &ctx, &CurrentOptions::default()).unwrap();
    (current, inc, ctx)
}

#[test]
fn static_limit_reduces_to_normal_derivative_kernel() {
    // As k → 0, 2πk 𝒩_p·Γ_pq → (1/|p|)∫_p∫_q ∂/∂𝒩ₛ (1/|s − t|), and on the unit sphere
    // ∂/∂𝒩ₛ (1/|s − t|) = −1/(2|s − t|).
    let k = 1e-4;
    let mesh = sphere(1.0, 2);
    let op = BoundaryOperatorA::assemble(&mesh, &ctx(k), &QuadratureSpec::default()).unwrap();
    let rule = TriangleRule::collapsed_gauss(6);
    let panels = mesh.panels();
    let (mut worst_flat, mut worst_sphere) = (0.0f64, 0.0f64);
    for p in (0..panels.len()).step_by(23) {
        for q in (0..panels.len()).step_by(7) {
            let (tp, tq) = (&panels[p], &panels[q]);
            if (tp.centroid - tq.centroid).norm() < 4.0 * tp.diameter() {
                continue;
            }
            let got = 2.0 * PI * k * cvec(&tp.normal).dot(&op.gradient_integral(p, q)).re;
            let (mut flat, mut on_sphere) = (0.0, 0.0);
            for (s, ws) in rule.map(&tp.vertices, 1.0) {
                for (t, wt) in rule.map(&tq.vertices, tq.area) {
                    let d = s - t;
                    let r = d.norm();
                    flat -= ws * wt * d.dot(&tp.normal) / (r * r * r);
                    on_sphere -= ws * wt * 0.5 / r;
                }
            }
            worst_flat = worst_flat.max((got - flat).abs() / flat.abs());
            worst_sphere = worst_sphere.max((got - on_sphere).abs() / on_sphere.abs());
        }
    }
    // Pairs this far apart use one- and three-point rules.
    assert!(worst_flat < 1e-2, "flat-panel kernel mismatch {worst_flat:.3e}");
    // Flat panels inscribed in the sphere.
    assert!(worst_sphere < 5e-2, "sphere identity mismatch {worst_sphere:.3e}");
}

#[test]
fn normal_field_maps_to_zero_and_output_is_tangential() {
    let mesh = sphere(0.5, 1);
    let op = BoundaryOperatorA::assemble(&mesh, &ctx(2.0), &QuadratureSpec::default()).unwrap();
    let normals: Vec<CVec3> = mesh.panels().iter().map(|p| cvec(&p.normal) * Complex64::new(0.3, -1.2)).collect();
    assert!(max_norm(&op.apply_vectors(&normals)) < 1e-15 * max_norm(&normals));
    let field: Vec<CVec3> = mesh.panels().iter().map(|p| cvec(&(p.centroid.cross(&Vector3::z()) + p.normal))).collect();
    let out = op.apply_vectors(&field);
    let scale = max_norm(&out);
    assert!(scale > 0.0);
    for (v, p) in out.iter().zip(mesh.panels()) {
        assert!(cvec(&p.normal).dot(v).norm() < 1e-14 * scale);
    }
}

#[test]
fn dense_matrix_matches_matrix_free_apply() {
    let mesh = sphere(1.0, 1);
    let op = BoundaryOperatorA::assemble(&mesh, &ctx(1.3), &QuadratureSpec::default()).unwrap();
    let a = op.to_dense().unwrap();
    let x = nalgebra::DVector::from_fn(op.dim(), |i, _| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()));
    let diff = (&a * &x - op.apply(&x)).norm() / (&a * &x).norm();
    assert!(diff < 1e-13, "{diff:.3e}");
    assert!(a.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
}

#[test]
fn rotation_conjugates_the_operator() {
    let mesh = make_canonical_mesh(&Shape::Ellipsoid { semiaxes: [1.0, 0.7, 0.5] }, 1).unwrap();
    let rot = Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::new(0.2, -0.7, 0.4)), 0.9);
    let turned = mesh.rotated(rot.matrix()).unwrap();
    let ctx = ctx(1.7);
    let spec = QuadratureSpec::default();
    let op = BoundaryOperatorA::assemble(&mesh, &ctx, &spec).unwrap();
    let op_r = BoundaryOperatorA::assemble(&turned, &ctx, &spec).unwrap();
    let field: Vec<CVec3> = mesh
        .panels()
        .iter()
        .map(|p| {
            let v = p.centroid.cross(&Vector3::new(0.3, 1.0, -0.2));
            cvec(&v) * Complex64::new(1.0, 0.5) + cvec(&p.centroid.cross(&Vector3::x())) * Complex64::new(0.0, 1.0)
        })
        .collect();
    let rc = rot.matrix().map(c);
    let turned_field: Vec<CVec3> = field.iter().map(|v| rc * v).collect();
    let lhs = op_r.apply_vectors(&turned_field);
    let rhs: Vec<CVec3> = op.apply_vectors(&field).iter().map(|v| rc * v).collect();
    let err = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(err < 1e-10 * max_norm(&rhs), "{err:.3e}");
}

#[test]
fn gradient_integrals_are_antisymmetric() {
    // ∇ₛG(s, t) = −∇ₜG(t, s), so |p|Γ_pq = −|q|Γ_qp.
    let mesh = make_canonical_mesh(&Shape::Ellipsoid { semiaxes: [1.0, 0.8, 0.6] }, 2).unwrap();
    let op = BoundaryOperatorA::assemble(&mesh, &ctx(1.0), &QuadratureSpec::default()).unwrap();
    let panels = mesh.panels();
    let n = panels.len();
    let (mut near, mut far) = (0.0f64, 0.0f64);
    let mut scale = 0.0f64;
    for p in 0..n {
        for q in 0..n {
            let a = op.gradient_integral(p, q) * c(panels[p].area);
            let b = op.gradient_integral(q, p) * c(panels[q].area);
            scale = scale.max(a.norm());
            let err = (a + b).norm();
            if (panels[p].centroid - panels[q].centroid).norm() < 3.0 * panels[p].diameter() {
                near = near.max(err);
            } else {
                far = far.max(err);
            }
        }
    }
    assert!(op.gradient_integral(5, 5).norm() == 0.0);
    assert!(near < 5e-3 * scale, "near pairs {:.3e}", near / scale);
    assert!(far < 1e-2 * scale, "far pairs {:.3e}", far / scale);
}

#[test]
fn zero_excitation_gives_zero_current_and_linearity_holds() {
    let mesh = sphere(0.3, 1);
    let ctx = ctx(1.0);
    let op = BoundaryOperatorA::assemble(&mesh, &ctx, &QuadratureSpec::default()).unwrap();
    let zero = IncidentField::sampled(|_| Field6::zeros());
    let j0 = solve_current(&op, &zero, &ctx, &CurrentOptions::default()).unwrap();
    assert!(max_norm(j0.values()) == 0.0);
    let inc = x_polarized();
    let scale = Complex64::new(-2.5, 0.75);
    let j1 = solve_current(&op, &inc, &ctx, &CurrentOptions::default()).unwrap();
    let j2 = solve_current(&op, &inc.scaled(scale), &ctx, &CurrentOptions::default()).unwrap();
    let err = j1.values().iter().zip(j2.values()).map(|(a, b)| (a * scale - b).norm()).fold(0.0, f64::max);
    assert!(err < 1e-12 * max_norm(j2.values()));
    assert!(j1.residual < 1e-12);
}

#[test]
fn iterative_and_dense_routes_agree() {
    let mesh = sphere(0.2, 2);
    let ctx = ctx(1.0);
    let op = BoundaryOperatorA::assemble(&mesh, &ctx, &QuadratureSpec::default()).unwrap();
    let inc = IncidentField::plane_wave(Vector3::new(1.0, 1.0, 0.0), CVec3::new(c(0.0), c(0.0), Complex64::new(0.0, 1.0))).unwrap();
    let dense = solve_current(&op, &inc, &ctx, &CurrentOptions::default()).unwrap();
    let iterative = solve_current(&op, &inc, &ctx, &CurrentOptions { dense_cap: 0, ..Default::default() }).unwrap();
    let err = dense.values().iter().zip(iterative.values()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(err < 1e-8 * max_norm(dense.values()), "{err:.3e}");
    assert!(iterative.iterations > 1 && iterative.residual < 1e-9);
    assert!(dense.condition > 1.0 && dense.condition < 100.0);
}

#[test]
fn currents_are_tangential() {
    let (current, _, _) = pec_current(0.1, 2, 1.0);
    for (j, p) in current.values().iter().zip(current.mesh().panels()) {
        assert!(cvec(&p.normal).dot(j).norm() <= 1e-10 * j.norm().max(1e-300));
    }
    let mesh = sphere(1.0, 0);
    let mut values = vec![CVec3::zeros(); mesh.num_panels()];
    values[3] = cvec(&mesh.panel(3).normal);
    assert!(matches!(SurfaceCurrent::new(&mesh, values, 1.0), Err(Error::Contract(_))));
}

#[test]
fn jump_across_the_surface_is_the_current() {
    // 𝒩 × (E₊ − E₋) = (4π/k) j for E = ∇×∫ g j.
    let (current, _, ctx) = pec_current(0.1, 2, 1.0);
    let mesh = current.mesh();
    for p in [0, 57, 211, 318] {
        let panel = mesh.panel(p);
        let s = panel.point(&[0.5, 0.3, 0.2]);
        let delta = 1e-7;
        let up = scattered_field(&(s + panel.normal * delta), &current, &ctx).unwrap();
        let down = scattered_field(&(s - panel.normal * delta), &current, &ctx).unwrap();
        let jump = cvec(&panel.normal).cross(&(e_part(&up) - e_part(&down)));
        let expected = current.values()[p] * c(4.0 * PI / ctx.k);
        assert!((jump - expected).norm() < 1e-4 * expected.norm(), "panel {p}");
    }
}

#[test]
fn evaluation_on_a_panel_is_rejected() {
    let (current, inc, ctx) = pec_current(0.1, 1, 1.0);
    let x = current.mesh().panel(4).point(&[0.2, 0.3, 0.5]);
    assert!(matches!(near_field(&x, &current, &inc, &ctx), Err(Error::SingularEvaluation(_))));
}

#[test]
fn zero_current_returns_the_exciting_field() {
    let mesh = sphere(0.1, 1);
    let ctx = ctx(1.0);
    let inc = x_polarized();
    let current = SurfaceCurrent::zero(&mesh, 1.0);
    for x in [Point::new(0.3, 0.0, 0.1), Point::new(-0.05, 0.12, 0.0)] {
        assert_eq!(near_field(&x, &current, &inc, &ctx).unwrap(), inc.evaluate(&x, &ctx));
    }
}

#[test]
fn magnetic_field_matches_curl_of_electric_field() {
    // H = (1/iωμ₀)∇×E, checked by central differences of the electric field.
    let (current, _, ctx) = pec_current(0.1, 2, 1.0);
    let x = Point::new(0.08, -0.06, 0.11);
    let u = scattered_field(&x, &current, &ctx).unwrap();
    let h = 1e-5;
    let e = |dx: Vector3<f64>| e_part(&scattered_field(&(x + dx), &current, &ctx).unwrap());
    let d = |i: usize, j: usize| {
        let mut step = Vector3::zeros();
        step[j] = h;
        (e(step)[i] - e(-step)[i]) / (2.0 * h)
    };
    let curl = CVec3::new(d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1));
    let expected = curl / Complex64::new(0.0, ctx.k);
    let err = (h_part(&u) - expected).norm() / expected.norm();
    assert!(err < 5e-4, "{err:.3e}");
}

#[test]
fn far_field_matches_dipole_route() {
    let (a, k) = (0.1, 1.0);
    let (current, inc, ctx) = pec_current(a, 3, k);
    let ball = ParticleInstance::ball(Point::zeros(), a, &MaterialContrast::perfect_conductor(1.0)).unwrap();
    let scene = Scene::new(vec![ball], inc.clone(), ctx).unwrap();
    let (fields, _) = scene.solve(&SolverOptions::default()).unwrap();
    let (mut err, mut peak) = (0.0f64, 0.0f64);
    for dir in smallscat::geometry::icosphere_directions(1) {
        let x = dir * (50.0 / k);
        let near = near_field(&x, &current, &inc, &ctx).unwrap();
        let dipole = scene.evaluate_field(&x, &fields, 1.0).unwrap();
        let incident = inc.evaluate(&x, &ctx);
        err = err.max((near - dipole).iter().map(|z| z.norm()).fold(0.0, f64::max));
        peak = peak.max((dipole - incident).iter().map(|z| z.norm()).fold(0.0, f64::max));
        let (e, h) = (e_part(&(near - incident)), h_part(&(near - incident)));
        assert!((h - cvec(&dir).cross(&e)).norm() < 0.05 * e.norm().max(1e-3 * peak));
    }
    assert!(err < 0.05 * peak, "relative far-field mismatch {:.3e}", err / peak);
}

#[test]
fn boundary_residual_decreases_with_refinement() {
    let a = 0.1;
    let residuals: Vec<f64> = (1..=3)
        .map(|r| {
            let (current, inc, ctx) = pec_current(a, r, 1.0);
            boundary_residual(&current, &inc, &ctx, 1e-6 * a)
        })
        .collect();
    for w in residuals.windows(2) {
        assert!(w[1] < 0.7 * w[0], "{residuals:?}");
    }
}

#[test]
fn exciting_field_adds_the_other_particles() {
    let ctx = ctx(1.0);
    let pec = MaterialContrast::perfect_conductor(1.0);
    let particles = vec![
        ParticleInstance::ball(Point::zeros(), 0.1, &pec).unwrap(),
        ParticleInstance::ball(Point::new(3.0, 0.0, 1.0), 0.1, &pec).unwrap(),
    ];
    let inc = x_polarized();
    let scene = Scene::new(particles, inc.clone(), ctx).unwrap();
    let (fields, _) = scene.solve(&SolverOptions::default()).unwrap();
    let x = Point::new(1.0, 2.0, -1.0);
    let e0 = scene.exciting_field(0, &fields).unwrap().evaluate(&x, &ctx);
    let e1 = scene.exciting_field(1, &fields).unwrap().evaluate(&x, &ctx);
    let total = scene.evaluate_field(&x, &fields, 0.5).unwrap();
    let err = (e0 + e1 - inc.evaluate(&x, &ctx) - total).iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(err < 1e-14);
    assert!(scene.exciting_field(2, &fields).is_err());
}

#[test]
fn interior_resonance_is_reported() {
    // The unit sphere has an interior resonance near k = 2.744; locate the discrete one by
    // minimizing the smallest singular value of I + kA. On a coarse mesh the discrete
    // eigenvalue stays off the real axis, so the condition number peaks at a few hundred.
    let mesh = sphere(1.0, 1);
    let spec = QuadratureSpec::default();
    let smin = |k: f64| {
        let op = BoundaryOperatorA::assemble(&mesh, &ctx(k), &spec).unwrap();
        let m = DMatrix::identity(op.dim(), op.dim()) + op.to_dense().unwrap() * c(k);
        m.singular_values().min()
    };
    let (mut lo, mut hi) = (2.5, 3.3);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..40 {
        let (m1, m2) = (hi - g * (hi - lo), lo + g * (hi - lo));
        if smin(m1) < smin(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let k_star = 0.5 * (lo + hi);
    assert!((k_star - 2.744).abs() < 0.1 * 2.744, "resonance at {k_star}");
    let strict = CurrentOptions { condition_limit: 1e2, ..Default::default() };
    let solve_at = |k: f64, options: &CurrentOptions| {
        let ctx = ctx(k);
        let op = BoundaryOperatorA::assemble(&mesh, &ctx, &spec).unwrap();
        solve_current(&op, &x_polarized(), &ctx, options)
    };
    let off = solve_at(2.0, &strict).unwrap();
    let on = solve_at(k_star, &CurrentOptions::default()).unwrap();
    assert!(on.condition > 10.0 * off.condition, "{} vs {}", on.condition, off.condition);
    assert!(matches!(solve_at(k_star, &strict), Err(Error::NearEigenvalue { .. })));
}

#[test]
fn currents_csv_has_one_row_per_panel() {
    let (current, _, _) = pec_current(0.1, 0, 1.0);
    let mut buf = Vec::new();
    current.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "panel_id,cx,cy,cz,Re j1,Im j1,Re j2,Im j2,Re j3,Im j3");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), current.mesh().num_panels());
    let first: Vec<f64> = rows[0].split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!(first.len(), 10);
    assert_eq!(first[4], current.values()[0][0].re);
}

#[test]
fn mismatched_wavenumber_is_rejected() {
    let mesh = sphere(0.1, 0);
    let op = BoundaryOperatorA::assemble(&mesh, &ctx(1.0), &QuadratureSpec::default()).unwrap();
    assert!(solve_current(&op, &x_polarized(), &ctx(2.0), &CurrentOptions::default()).is_err());
    assert!(BoundaryOperatorA::assemble(&mesh, &WaveContext { k: -1.0, ..ctx(1.0) }, &QuadratureSpec::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn currents_stay_tangential_for_any_plane_wave(theta in 0.0..PI, phi in 0.0..2.0 * PI, psi in 0.0..2.0 * PI) {
        let mesh = sphere(0.2, 1);
        let ctx = ctx(1.0);
        let op = BoundaryOperatorA::assemble(&mesh, &ctx, &QuadratureSpec::default()).unwrap();
        let dir = Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
        let e1 = dir.cross(&Vector3::new(0.3, -0.4, 0.8)).normalize();
        let e2 = dir.cross(&e1);
        let pol = cvec(&e1) * c(psi.cos()) + cvec(&e2) * Complex64::new(0.0, psi.sin());
        let inc = IncidentField::plane_wave(dir, pol).unwrap();
        let j = solve_current(&op, &inc, &ctx, &CurrentOptions::default()).unwrap();
        prop_assert!(j.residual < 1e-12);
        for (v, p) in j.values().iter().zip(mesh.panels()) {
            prop_assert!(cvec(&p.normal).dot(v).norm() <= 1e-10 * v.norm().max(1e-300));
        }
    }

    #[test]
    fn solution_is_linear_in_the_excitation(re in -3.0..3.0f64, im in -3.0..3.0f64) {
        let mesh = sphere(0.2, 0);
        let ctx = ctx(1.0);
        let op = BoundaryOperatorA::assemble(&mesh, &ctx, &QuadratureSpec::default()).unwrap();
        let a = x_polarized();
        let b = IncidentField::plane_wave(Vector3::x(), CVec3::new(c(0.0), c(1.0), c(0.0))).unwrap();
        let s = Complex64::new(re, im);
        let (a2, b2) = (a.clone(), b.clone());
        let sum = IncidentField::sampled(move |x| a2.evaluate(x, &ctx) * s + b2.evaluate(x, &ctx));
        let ja = solve_current(&op, &a, &ctx, &CurrentOptions::default()).unwrap();
        let jb = solve_current(&op, &b, &ctx, &CurrentOptions::default()).unwrap();
        let js = solve_current(&op, &sum, &ctx, &CurrentOptions::default()).unwrap();
        for ((x, y), z) in ja.values().iter().zip(jb.values()).zip(js.values()) {
            prop_assert!((x * s + y - z).norm() <= 1e-12 * (1.0 + z.norm()));
        }
    }
}
