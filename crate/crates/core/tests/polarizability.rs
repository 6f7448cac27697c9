use std::f64::consts::PI;

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use num_complex::Complex64;
use proptest::prelude::*;
use smallscat::geometry::*;
use smallscat::polarizability::*;
use smallscat::{Background, CVec3, Error};

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn sphere(radius: f64, r: u32) -> SurfaceMesh {
    make_canonical_mesh(&Shape::Sphere { radius }, r).unwrap()
}

fn max_offdiag(t: &smallscat::CTensor) -> f64 {
    let mut m = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                m = m.max(t[(i, j)].norm());
            }
        }
    }
    m
}

// Depolarization factors of a prolate spheroid with semi-axes (a, b, b), a > b.
fn prolate_factors(a: f64, b: f64) -> [f64; 3] {
    let e = (1.0 - (b / a).powi(2)).sqrt();
    let lx = (1.0 - e * e) / e.powi(3) * (e.atanh() - e);
    let lt = 0.5 * (1.0 - lx);
    [lx, lt, lt]
}

#[test]
fn psi_kernel_examples() {
    let t = Vector3::new(1.0, 0.0, 0.0);
    let s = Vector3::new(-1.0, 0.0, 0.0);
    assert!((psi_kernel(&t, &s, &t).unwrap() + 0.25).abs() < 1e-15);

    let a = 2.5;
    let t = Vector3::new(0.3, -0.4, 0.2).normalize() * a;
    let s = Vector3::new(-0.1, 0.9, 0.5).normalize() * a;
    let expected = -1.0 / (2.0 * a * (s - t).norm());
    assert!((psi_kernel(&t, &s, &(t / a)).unwrap() - expected).abs() < 1e-14);

    let n = Vector3::z();
    assert_eq!(psi_kernel(&Vector3::new(1.0, 2.0, 0.0), &Vector3::zeros(), &n).unwrap(), 0.0);
    assert!(matches!(psi_kernel(&t, &t, &n), Err(Error::SingularEvaluation(_))));
}

#[test]
fn single_layer_tensor_matches_harmonic_oracle() {
    let exact = 16.0 * PI * PI / 9.0;
    let spec = QuadratureSpec::default();
    let errs: Vec<f64> = (2..=4)
        .map(|r| {
            let b = compute_b_tensor(&sphere(1.0, r), 1, &spec).unwrap().tensor;
            assert!((b[(0, 0)] - b[(2, 2)]).abs() < 1e-9 * exact);
            (b[(2, 2)] - exact).abs() / exact
        })
        .collect();
    assert!(errs[2] < 0.02, "{errs:?}");
    assert!(errs[1] < errs[0] && errs[2] < errs[1], "{errs:?}");
}

#[test]
fn sphere_chain_collapses_to_single_layer_eigenvalue() {
    // On a sphere of radius a, ψ = −1/(2a r): each extra ψ factor acts as −S/(2a), whose
    // eigenvalue on degree-1 densities is −(1/2a)(4πa/3) = −2π/3.
    for radius in [1.0, 2.0] {
        let mesh = sphere(radius, 3);
        let spec = QuadratureSpec::default();
        let ops = PanelOperators::assemble(&mesh, &spec).unwrap();
        let single = ops.single_layer.as_ref().unwrap();
        // Far entries: the identity holds up to the distance of panel centroids from the sphere.
        let (p, q) = (0, mesh.num_panels() / 2);
        assert!((ops.psi[(p, q)] + single[(p, q)] / (2.0 * radius)).abs() < 1e-2 * single[(p, q)].abs());

        let chain = BChain::from_operators(&mesh, &ops, 4, OuterWeight::InverseDistance).unwrap();
        for m in 1..4 {
            let ratio = chain.tensors()[m + 1][(2, 2)] / chain.tensors()[m][(2, 2)];
            assert!((ratio + 2.0 * PI / 3.0).abs() < 0.015 * 2.0 * PI / 3.0, "radius {radius}, m {m}: {ratio}");
        }
    }
}

#[test]
fn unit_outer_weight_gives_zero() {
    for mesh in [
        sphere(1.0, 2),
        make_canonical_mesh(&Shape::Box { extents: [1.0, 2.0, 0.5] }, 1).unwrap(),
    ] {
        let ops = PanelOperators::assemble(&mesh, &QuadratureSpec::default()).unwrap();
        let chain = BChain::from_operators(&mesh, &ops, 3, OuterWeight::Unit).unwrap();
        let scale = mesh.measures().area.powi(2);
        for b in chain.tensors() {
            assert!(b.norm() < 1e-12 * scale, "{b}");
        }
    }
}

#[test]
fn green_identity_closure_agrees_with_direct_single_layer() {
    let spec = QuadratureSpec::default();
    let mut diffs = Vec::new();
    for r in [2, 3] {
        let mesh = make_canonical_mesh(&Shape::Ellipsoid { semiaxes: [1.0, 0.7, 0.5] }, r).unwrap();
        let ops = PanelOperators::assemble(&mesh, &spec).unwrap();
        let direct = BChain::from_operators(&mesh, &ops, 4, OuterWeight::InverseDistance).unwrap();
        let green = BChain::from_operators(&mesh, &ops, 4, OuterWeight::GreenIdentity).unwrap();
        let d = (1..=4)
            .map(|m| (direct.tensors()[m] - green.tensors()[m]).norm() / direct.tensors()[m].norm())
            .fold(0.0, f64::max);
        diffs.push(d);
    }
    assert!(diffs[1] < 0.01, "{diffs:?}");
    assert!(diffs[1] < 0.5 * diffs[0], "{diffs:?}");
}

#[test]
fn numerical_and_analytic_quadrature_routes_agree() {
    let mesh = make_canonical_mesh(&Shape::Ellipsoid { semiaxes: [1.0, 0.8, 0.6] }, 2).unwrap();
    let analytic = QuadratureSpec::default();
    let numeric = QuadratureSpec { rule_order: 4, refinement: 2, ..analytic }.with_strategy(SingularStrategy::DuffySubdivision);
    let b_a = compute_b_tensor(&mesh, 1, &analytic).unwrap().tensor;
    let b_n = compute_b_tensor(&mesh, 1, &numeric).unwrap().tensor;
    assert!((b_a - b_n).norm() < 5e-3 * b_a.norm(), "{b_a} vs {b_n}");

    let a_a = alpha_approx(&mesh, c(0.5), 6, &analytic).unwrap().tensor;
    let a_n = alpha_approx(&mesh, c(0.5), 6, &numeric).unwrap().tensor;
    assert!((a_a - a_n).norm() < 1e-2 * a_a.norm());
}

// The (A.6) sum written out independently, for a given list of tensors b⁽⁰⁾, b⁽¹⁾, ...
fn series_oracle(b: &[Matrix3<f64>], volume: f64, gamma: f64, n: usize) -> Matrix3<f64> {
    let mut acc = Matrix3::zeros();
    for (m, bm) in b.iter().enumerate().take(n + 1) {
        let factor: f64 = (m + 1..=n + 1).map(|l| gamma.powi(l as i32)).sum();
        acc += bm * ((-1.0 / (2.0 * PI)).powi(m as i32) * factor);
    }
    acc * (2.0 / volume)
}

#[test]
fn index_convention_calibrated_on_ball() {
    let mesh = sphere(1.0, 3);
    let chain = BChain::compute(&mesh, 10, &QuadratureSpec::default()).unwrap();
    let v = chain.volume();
    let ours = series_oracle(chain.tensors(), v, 0.5, 10);
    let lib = chain.alpha(c(0.5), 10).unwrap().tensor;
    assert!((lib.map(|z| z.re) - ours).norm() < 1e-12);
    assert!((ours[(2, 2)] - 1.2).abs() < 0.01 * 1.2);

    // Shifted convention: the 1/r-weighted tensor taken as the m = 0 term.
    let shifted = series_oracle(&chain.tensors()[1..], v, 0.5, 9);
    assert!((shifted[(2, 2)] - 1.2).abs() > 0.5, "{}", shifted[(2, 2)]);
    // The bare double integral ∮∮𝒩ᵢ𝒩ⱼ vanishes, so it cannot serve as m = 0 either.
    let mut bare = vec![Matrix3::zeros()];
    bare.extend_from_slice(&chain.tensors()[1..]);
    let bare = series_oracle(&bare, v, 0.5, 10);
    assert!((bare[(2, 2)] - 1.2).abs() > 0.5, "{}", bare[(2, 2)]);
}

#[test]
fn ball_values_for_dielectric_conductor_and_zero_contrast() {
    let mesh = sphere(1.0, 3);
    let spec = QuadratureSpec::default();
    let chain = BChain::compute(&mesh, 10, &spec).unwrap();
    let eps = 3.0;
    let gamma = (eps - 1.0) / (eps + 1.0);
    let expected = 3.0 * (eps - 1.0) / (eps + 2.0);
    let a = chain.alpha(c(gamma), 10).unwrap();
    for i in 0..3 {
        assert!((a.tensor[(i, i)].re - expected).abs() < 0.02 * expected);
    }
    assert!(max_offdiag(&a.tensor) <= 1e-2 * a.tensor[(0, 0)].norm());

    let pec = chain.alpha(c(1.0), 10).unwrap();
    assert!((pec.tensor[(1, 1)].re - 3.0).abs() < 0.06);
    assert!(pec.q_hat < 1.0);

    let zero = alpha_approx(&mesh, c(0.0), 4, &spec).unwrap();
    assert_eq!(zero.tensor, smallscat::CTensor::zeros());
}

#[test]
fn alpha_is_continuous_through_gamma_one() {
    let mesh = sphere(1.0, 2);
    let chain = BChain::compute(&mesh, 8, &QuadratureSpec::default()).unwrap();
    let at = chain.alpha(c(1.0), 8).unwrap().tensor;
    let near = chain.alpha(c(1.0 - 1e-9), 8).unwrap().tensor;
    let below = chain.alpha(c(1.0 - 1e-6), 8).unwrap().tensor;
    assert!((at - near).norm() < 1e-7);
    assert!((at - below).norm() < 1e-4);
}

#[test]
fn ellipsoid_matches_depolarization_factors() {
    let mesh = make_canonical_mesh(&Shape::Ellipsoid { semiaxes: [2.0, 1.0, 1.0] }, 3).unwrap();
    let chain = BChain::compute(&mesh, 12, &QuadratureSpec::default()).unwrap();
    let l = prolate_factors(2.0, 1.0);
    for eps in [3.0, 10.0] {
        let gamma = (eps - 1.0) / (eps + 1.0);
        let a = chain.alpha(c(gamma), 12).unwrap();
        for i in 0..3 {
            let expected = (eps - 1.0) / (1.0 + l[i] * (eps - 1.0));
            assert!((a.tensor[(i, i)].re - expected).abs() < 0.01 * expected, "eps {eps}, axis {i}: {} vs {expected}", a.tensor[(i, i)]);
        }
        assert!(max_offdiag(&a.tensor) < 1e-10);
    }
}

#[test]
fn successive_correction_ratios_are_stable() {
    for shape in [Shape::Sphere { radius: 1.0 }, Shape::Ellipsoid { semiaxes: [2.0, 1.0, 1.0] }] {
        let mesh = make_canonical_mesh(&shape, 3).unwrap();
        let chain = BChain::compute(&mesh, 6, &QuadratureSpec::default()).unwrap();
        for g in [0.5, -0.5, 0.9, -0.99] {
            let a = chain.alpha(c(g), 6).unwrap();
            let ratios = a.correction_ratios();
            let (lo, hi) = ratios.iter().fold((f64::MAX, 0.0f64), |(l, h), &r| (l.min(r), h.max(r)));
            assert!(hi < 1.0, "{shape:?} γ={g}: {ratios:?}");
            assert!(hi - lo < 0.05 * hi, "{shape:?} γ={g}: {ratios:?}");
            assert!(a.q_hat <= hi + 1e-15);
        }
    }
}

#[test]
fn rotation_equivariance() {
    let mesh = make_canonical_mesh(&Shape::Ellipsoid { semiaxes: [1.0, 0.6, 0.4] }, 2).unwrap();
    let rot = Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::new(0.3, -0.5, 0.8)), 1.1);
    let spec = QuadratureSpec::default();
    let a = alpha_approx(&mesh, c(0.6), 8, &spec).unwrap().tensor;
    let ar = alpha_approx(&mesh.rotated(rot.matrix()).unwrap(), c(0.6), 8, &spec).unwrap().tensor;
    let r = rot.matrix().map(|x| Complex64::new(x, 0.0));
    let expected = r * a * r.transpose();
    assert!((ar - expected).norm() < 1e-3 * a.norm(), "{ar} vs {expected}");
}

#[test]
fn scale_law() {
    let mesh = make_canonical_mesh(&Shape::Ellipsoid { semiaxes: [1.0, 0.6, 0.4] }, 2).unwrap();
    let big = mesh.scaled(3.0).unwrap();
    let spec = QuadratureSpec::default();
    let a = BChain::compute(&mesh, 5, &spec).unwrap();
    let b = BChain::compute(&big, 5, &spec).unwrap();
    for m in 0..=5 {
        let expected = a.tensors()[m] * 27.0;
        assert!((b.tensors()[m] - expected).norm() < 1e-10 * expected.norm());
    }
    let (x, y) = (a.alpha(c(0.4), 5).unwrap().tensor, b.alpha(c(0.4), 5).unwrap().tensor);
    assert!((x - y).norm() < 1e-10 * x.norm());
}

#[test]
fn mirror_symmetric_box_is_diagonal() {
    let mesh = make_canonical_mesh(&Shape::Box { extents: [1.0, 0.7, 0.5] }, 2).unwrap();
    let a = alpha_approx(&mesh, c(0.7), 8, &QuadratureSpec::default()).unwrap().tensor;
    assert!(max_offdiag(&a) < 1e-6 * a[(0, 0)].norm(), "{a}");
    // The longest axis polarizes most easily.
    assert!(a[(0, 0)].re > a[(1, 1)].re && a[(1, 1)].re > a[(2, 2)].re);
}

#[test]
fn beta_regimes() {
    let mesh = sphere(1.0, 3);
    let spec = QuadratureSpec::default();
    let pec = MaterialContrast::perfect_conductor(1.0);
    assert!(pec.skin_regime(1.0));
    let b = beta_tensor(&mesh, &pec, &spec, 10).unwrap();
    for i in 0..3 {
        assert!((b.tensor[(i, i)].re + 1.5).abs() < 0.02 * 1.5);
    }

    let plain = MaterialContrast::dielectric(3.0);
    assert!(!plain.skin_regime(1.0));
    assert_eq!(beta_tensor(&mesh, &plain, &spec, 10).unwrap().tensor, smallscat::CTensor::zeros());

    let magnetic = MaterialContrast::new(c(1.0), c(3.0), 0.0, 1.0, Background::default()).unwrap();
    let b = beta_tensor(&mesh, &magnetic, &spec, 10).unwrap();
    for i in 0..3 {
        assert!((b.tensor[(i, i)].re - 1.2).abs() < 0.02 * 1.2);
    }

    // Good conductor with δ = 0.05 a: skin regime, plus the magnetic term.
    let metal = MaterialContrast::new(c(1.0), c(3.0), 2.0 / (0.05f64.powi(2) * 3.0), 1.0, Background::default()).unwrap();
    assert!((metal.skin_depth().unwrap() - 0.05).abs() < 1e-12);
    let b = beta_tensor(&mesh, &metal, &spec, 10).unwrap();
    assert!((b.tensor[(0, 0)].re - (-1.5 + 1.2)).abs() < 0.04);
}

#[test]
fn contrast_parameters() {
    let d = MaterialContrast::dielectric(3.0);
    assert_eq!(d.gamma_eps().unwrap(), c(0.5));
    assert_eq!(d.gamma_mu().unwrap(), c(0.0));
    assert_eq!(d.skin_depth(), None);
    assert_eq!(MaterialContrast::perfect_conductor(2.0).gamma_eps().unwrap(), c(1.0));

    let lossy = MaterialContrast::new(c(2.0), c(1.0), 4.0, 2.0, Background::default()).unwrap();
    assert_eq!(lossy.eps_prime(), Complex64::new(2.0, 2.0));
    assert!((lossy.gamma_eps().unwrap() - Complex64::new(1.0, 2.0) / Complex64::new(3.0, 2.0)).norm() < 1e-15);

    let resonant = MaterialContrast::new(c(-1.0), c(1.0), 0.0, 1.0, Background::default()).unwrap();
    assert!(matches!(resonant.gamma_eps(), Err(Error::SingularConfiguration(_))));
    assert!(MaterialContrast::new(c(1.0), c(1.0), -1.0, 1.0, Background::default()).is_err());
    assert!(MaterialContrast::new(c(1.0), c(1.0), 0.0, 0.0, Background::default()).is_err());
}

#[test]
fn induced_moment_examples() {
    let bg = Background::default();
    let alpha = smallscat::CTensor::identity() * c(1.2);
    let e = CVec3::new(c(1.0), c(0.0), c(0.0));
    let (p, m) = induced_moments(&alpha, &smallscat::CTensor::zeros(), 4.0 * PI / 3.0, &e, &CVec3::zeros(), &bg);
    assert!((p[0] - c(1.6 * PI)).norm() < 1e-14 && p[1] == c(0.0) && p[2] == c(0.0));
    assert_eq!(m, CVec3::zeros());

    let (p, m) = induced_moments(&alpha, &alpha, 2.0, &CVec3::zeros(), &CVec3::zeros(), &bg);
    assert_eq!((p, m), (CVec3::zeros(), CVec3::zeros()));

    let diag = smallscat::CTensor::from_diagonal(&CVec3::new(c(1.0), c(2.0), c(3.0)));
    let bg2 = Background::new(2.0, 0.5).unwrap();
    let (p, m) = induced_moments(&diag, &diag, 1.5, &CVec3::new(c(0.0), c(1.0), c(0.0)), &CVec3::new(c(0.0), c(0.0), c(1.0)), &bg2);
    assert_eq!(p, CVec3::new(c(0.0), c(2.0 * 1.5 * 2.0), c(0.0)));
    assert_eq!(m, CVec3::new(c(0.0), c(0.0), c(3.0 * 1.5 * 0.5)));
}

#[test]
fn tensor_csv_has_metadata_and_round_trips() {
    let t = PolarizabilityTensor {
        tensor: smallscat::CTensor::from_fn(|i, j| Complex64::new(i as f64 + 0.5, j as f64 - 1.25)),
        order: 7,
        q_hat: 0.33,
        error_estimate: 1e-5,
        corrections: vec![],
    };
    let mut buf = Vec::new();
    t.write_csv(&mut buf, Some(4)).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.contains("# n=7") && text.contains("# refinement=4") && text.contains("q_hat="));
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    for i in 0..3 {
        for j in 0..3 {
            assert_eq!(Complex64::new(rows[i][2 * j], rows[i][2 * j + 1]), t.tensor[(i, j)]);
        }
    }
}

#[test]
fn panel_budget_is_enforced() {
    let mesh = sphere(1.0, 2);
    let err = PanelOperators::assemble_with_budget(&mesh, &QuadratureSpec::default(), 100).unwrap_err();
    assert!(matches!(err, Error::Budget(_)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gamma_eps_stays_in_unit_disk(re in 0.0f64..50.0, im in 0.0f64..50.0, sigma in 0.0f64..10.0, omega in 0.1f64..10.0) {
        let m = MaterialContrast::new(Complex64::new(re, im), c(1.0), sigma, omega, Background::default()).unwrap();
        prop_assert!(m.gamma_eps().unwrap().norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn corrections_contract_for_subunit_gamma(g_re in -0.95f64..0.95, g_im in -0.3f64..0.3) {
        let gamma = Complex64::new(g_re, g_im);
        prop_assume!(gamma.norm() < 1.0 && gamma.norm() > 0.05);
        let mesh = make_canonical_mesh(&Shape::Ellipsoid { semiaxes: [2.0, 1.0, 1.0] }, 1).unwrap();
        let chain = BChain::compute(&mesh, 6, &QuadratureSpec::default()).unwrap();
        let a = chain.alpha(gamma, 6).unwrap();
        prop_assert!(a.q_hat < 1.0);
        for r in a.correction_ratios() {
            prop_assert!(r < 1.0);
        }
    }
}
