use std::f64::consts::PI;

use proptest::prelude::*;

use super::*;
use crate::jets::{jet_forward, Mlp};
use crate::oracles::{
    burgers_front_jet, convection_jet, eikonal_jet, helmholtz_jet, logistic_jet, ExactModel,
};

fn convection(beta: f64) -> BvpSpec {
    BvpSpec::convection(CoefficientBox::fixed(&[beta])).unwrap()
}

fn helmholtz() -> BvpSpec {
    BvpSpec::helmholtz(CoefficientBox::range(&[1.0, 1.0], &[3.0, 3.0]), 1.0).unwrap()
}

fn grid32(lo: [f64; 2], hi: [f64; 2]) -> impl Iterator<Item = [f64; 2]> {
    let xs = linspace(lo[0], hi[0], 32);
    let ys = linspace(lo[1], hi[1], 32);
    xs.into_iter().flat_map(move |x| ys.clone().into_iter().map(move |y| [x, y]))
}

#[test]
fn convection_residual_examples() {
    let spec = convection(30.0);
    let p = [1.3, 0.4];
    let r = pde_residual(&spec, &convection_jet(p[0], p[1], 30.0), &[30.0], &p).unwrap();
    assert!(r.abs() < 1e-12, "{r}");
    for beta in [0.0, 1.0, 30.0] {
        let jet = Jet { value: 0.7, grad: vec![0.0, 1.0], diag2: vec![] };
        assert_eq!(pde_residual(&convection(beta), &jet, &[beta], &p).unwrap(), 1.0);
    }
}

#[test]
fn helmholtz_residual_cancels() {
    let spec = helmholtz();
    let (a1, a2) = (1.0, 1.0);
    let p = [0.3, 0.8];
    let r = pde_residual(&spec, &helmholtz_jet(p[0], p[1], a1, a2), &[a1, a2], &p).unwrap();
    assert!(r.abs() < 1e-12, "{r}");
}

#[test]
fn forcing_examples() {
    let spec = helmholtz();
    let f = forcing(&spec, &[0.5, 0.5], &[1.0, 1.0]);
    assert!((f - (1.0 - 2.0 * PI * PI)).abs() < 1e-12);
    assert_eq!(forcing(&spec, &[0.0, 0.37], &[1.3, 2.1]), 0.0);
    assert_eq!(forcing(&convection(30.0), &[1.0, 0.5], &[30.0]), 0.0);
}

#[test]
fn residual_rejects_wrong_coefficients_and_shallow_jets() {
    let spec = convection(30.0);
    let jet = convection_jet(0.1, 0.1, 30.0);
    assert!(matches!(
        pde_residual(&spec, &jet, &[1.0, 2.0], &[0.1, 0.1]),
        Err(BvpError::CoefficientMismatch { expected: 1, got: 2, .. })
    ));
    let rd = BvpSpec::reaction_diffusion(CoefficientBox::fixed(&[3.0, 3.0])).unwrap();
    let first_only = Jet { value: 0.0, grad: vec![0.0, 0.0], diag2: vec![] };
    assert!(matches!(pde_residual(&rd, &first_only, &[3.0, 3.0], &[1.0, 0.5]), Err(BvpError::JetTooShallow { .. })));
}

#[test]
fn boundary_residual_examples() {
    let spec = convection(30.0);
    let r = boundary_residual(&spec, 1.0, &[PI / 2.0, 0.0], &[30.0]).unwrap();
    assert!(r.abs() < 1e-15);
    let rd = BvpSpec::reaction_diffusion(CoefficientBox::fixed(&[3.0, 3.0])).unwrap();
    assert_eq!(boundary_residual(&rd, 0.0, &[PI, 0.0], &[3.0, 3.0]).unwrap(), -1.0);
    assert_eq!(periodic_residual(0.25, 0.25), 0.0);
    let err = boundary_residual(&spec, 0.0, &[1.0, 0.5], &[30.0]).unwrap_err();
    assert!(matches!(err, BvpError::NotOnBoundary { .. }));
}

#[test]
fn helmholtz_boundary_data_on_faces() {
    let spec = helmholtz();
    let pi = [1.5, 2.5];
    for p in box_perimeter(&[0.0, 0.0], &[1.0, 1.0], 16) {
        let h = boundary_data(&spec, &p, &pi);
        let r = boundary_residual(&spec, h, &p, &pi).unwrap();
        assert_eq!(r, 0.0);
    }
    assert!(boundary_residual(&spec, 0.0, &[0.5, 0.5], &pi).is_err());
}

#[test]
fn structural_hinge_examples() {
    assert_eq!(structural_hinge(0.3), 0.0);
    assert_eq!(structural_hinge(-0.2), 0.2);
    assert_eq!(structural_hinge(0.0), 0.0);
}

#[test]
fn invariance_of_constant_and_exact_fields() {
    let spec = convection(30.0).with_invariance(Invariance::ConvectionPeriod).unwrap();
    let constant = Mlp::from_layers(&[2, 1], &[(vec![0.0, 0.0], vec![0.7])]).unwrap();
    let exact = ExactModel::new(spec.clone()).unwrap();
    for p in grid32([0.0, 0.0], [2.0 * PI, 1.0]) {
        assert_eq!(invariance_residual(&spec, &constant, &[30.0], &p, 0).unwrap(), 0.0);
        let r = invariance_residual(&spec, &exact, &[30.0], &p, 0).unwrap();
        assert!(r.abs() < 1e-12, "{r} at {p:?}");
    }
    assert!(matches!(
        invariance_residual(&spec, &constant, &[30.0], &[0.1, 0.1], 1),
        Err(BvpError::NoSuchTransform { index: 1, count: 1 })
    ));
}

#[test]
fn invariance_matches_two_forward_passes() {
    let spec = convection(30.0).with_invariance(Invariance::ConvectionPeriod).unwrap();
    let model = Mlp::glorot(&[2, 12, 12, 1], 5).unwrap();
    let p = [2.1, 0.93];
    let image = apply_invariance(&spec, 0, &p, &[30.0]).unwrap();
    assert!(image[1] > 0.0 && image[1] <= 1.0);
    let direct = jet_forward(&model, &p, JetOrder::Value).unwrap().value
        - jet_forward(&model, &image, JetOrder::Value).unwrap().value;
    assert_eq!(invariance_residual(&spec, &model, &[30.0], &p, 0).unwrap(), direct);
}

#[test]
fn invariance_wraps_into_the_time_window() {
    let spec = convection(30.0).with_invariance(Invariance::ConvectionPeriod).unwrap();
    let period = 2.0 * PI / 30.0;
    for t in linspace(0.0, 1.0, 101) {
        let [_, s] = apply_invariance(&spec, 0, &[0.0, t], &[30.0]).unwrap();
        assert!(s > 0.0 && s <= 1.0 + 1e-12, "{t} -> {s}");
        let k = (s - t) / period;
        assert!((k - k.round()).abs() < 1e-9, "shift is not a whole number of periods");
    }
    let slow = convection(1.0);
    assert!(slow.clone().with_invariance(Invariance::ConvectionPeriod).is_err());
}

#[test]
fn validation_errors() {
    assert!(matches!(
        BvpSpec::convection(CoefficientBox::fixed(&[1.0, 2.0])),
        Err(BvpError::CoefficientMismatch { expected: 1, got: 2, .. })
    ));
    assert!(BvpSpec::helmholtz(CoefficientBox::fixed(&[1.0, 1.0]), 0.0).is_err());
    assert!(BvpSpec::reaction_diffusion(CoefficientBox::range(&[3.0, 3.0], &[1.0, 5.0])).is_err());
    let mut spec = convection(30.0);
    spec.domain.time_hi = 0.0;
    assert!(spec.validate().is_err());
}

#[test]
fn model_inputs_and_input_map() {
    let fixed = convection(30.0);
    assert_eq!(fixed.model_input_width(), 2);
    let param = BvpSpec::convection(CoefficientBox::range(&[1.0], &[30.0])).unwrap();
    assert_eq!(param.model_input_width(), 3);
    let mut v = Vec::new();
    param.push_model_input(&[1.0, 0.5], &[7.0], &mut v);
    assert_eq!(v, [1.0, 0.5, 7.0]);
    let (shift, scale) = param.input_map();
    assert_eq!(shift, [PI, 0.5, 15.5]);
    assert_eq!(scale[1], 2.0);
    let rd = BvpSpec::reaction_diffusion(CoefficientBox::range(&[0.0, 2.0], &[5.0, 2.0])).unwrap();
    assert_eq!(rd.input_map().1[3], 1.0);
}

#[test]
fn boundary_point_sets() {
    let spec = convection(30.0);
    let pts = boundary_points(&spec, &BoundaryCounts::default());
    assert_eq!(pts.len(), 356);
    let periodic: Vec<_> = pts.iter().filter(|p| matches!(p, BoundaryPoint::Periodic { .. })).collect();
    assert_eq!(periodic.len(), 100);
    assert_eq!(periodic[99], &BoundaryPoint::Periodic { lo: [0.0, 1.0], hi: [2.0 * PI, 1.0] });
    for p in &pts {
        if let BoundaryPoint::Dirichlet(z) = p {
            assert!(on_boundary(&spec, z));
        }
    }
    let h = boundary_points(&helmholtz(), &BoundaryCounts::default());
    assert_eq!(h.len(), 1024);
    let eik = BvpSpec::eikonal(Shape::Circle { center: [0.0, 0.0], radius: 0.5 }).unwrap();
    for p in boundary_points(&eik, &BoundaryCounts { shape: 64, ..Default::default() }) {
        let BoundaryPoint::Dirichlet(z) = p else { panic!("eikonal has no periodic pairs") };
        assert!(on_boundary(&eik, &z));
    }
}

#[test]
fn point_cloud_parsing() {
    let shape = parse_point_cloud("# gears\n0.1 0.2\n\n  -0.3   0.4 \n").unwrap();
    assert_eq!(shape, Shape::PointCloud { points: vec![[0.1, 0.2], [-0.3, 0.4]] });
    assert!(shape.signed_distance(&[0.0, 0.0]).is_none());
    assert_eq!(shape.distance_to_boundary(&[0.1, 0.2]), 0.0);
    let err = parse_point_cloud("0.1 0.2\n0.3\n").unwrap_err();
    assert!(err.to_string().contains("line 2"));
    assert!(parse_point_cloud("# nothing\n").is_err());
}

#[test]
fn analytic_shape_boundaries_have_zero_distance() {
    let shapes = [
        Shape::Circle { center: [0.1, -0.2], radius: 0.4 },
        Shape::TwoCircles { centers: [[-0.5, 0.0], [0.5, 0.1]], radii: [0.3, 0.2] },
        Shape::Square { center: [0.0, 0.0], half_side: 0.5 },
    ];
    for s in &shapes {
        for p in s.boundary_points(97) {
            assert!(s.signed_distance(&p).unwrap().abs() < 1e-12, "{s:?} {p:?}");
        }
    }
    let bad = Shape::TwoCircles { centers: [[0.0, 0.0], [0.1, 0.0]], radii: [0.3, 0.3] };
    assert!(bad.validate().is_err());
}

/// Every catalog entry annihilated by a known exact solution.
#[test]
fn residual_consistency_over_grids() {
    let check = |spec: &BvpSpec, pi: &[f64], lo: [f64; 2], hi: [f64; 2], jet: &dyn Fn([f64; 2]) -> Jet| {
        for p in grid32(lo, hi) {
            let r = pde_residual(spec, &jet(p), pi, &p).unwrap();
            assert!(r.abs() < 1e-10, "{} residual {r} at {p:?}", spec.kind);
        }
    };
    let tx = ([0.0, 0.0], [2.0 * PI, 1.0]);
    check(&convection(30.0), &[30.0], tx.0, tx.1, &|p| convection_jet(p[0], p[1], 30.0));
    let rd = BvpSpec::reaction_diffusion(CoefficientBox::fixed(&[0.0, 5.0])).unwrap();
    check(&rd, &[0.0, 5.0], tx.0, tx.1, &|p| logistic_jet(p[0], p[1], 5.0));
    let h = helmholtz();
    check(&h, &[1.7, 2.3], [0.0, 0.0], [1.0, 1.0], &|p| helmholtz_jet(p[0], p[1], 1.7, 2.3));
    for shape in [
        Shape::Circle { center: [0.0, 0.0], radius: 0.5 },
        Shape::TwoCircles { centers: [[-0.5, 0.0], [0.5, 0.1]], radii: [0.3, 0.2] },
        Shape::Square { center: [0.0, 0.0], half_side: 0.5 },
    ] {
        let eik = BvpSpec::eikonal(shape.clone()).unwrap();
        check(&eik, &[], [-1.0, -1.0], [1.0, 1.0], &|p| eikonal_jet(&p, &shape).unwrap());
    }
    let b = BvpSpec::burgers(CoefficientBox::fixed(&[0.05])).unwrap();
    check(&b, &[0.05], [0.0, 0.0], [1.0, 1.0], &|p| burgers_front_jet(p[0], p[1], 0.05, 0.4, 0.3));
}

/// Partials reported by `residual_terms` agree with central differences.
#[test]
fn residual_partials_match_differences() {
    let specs = [
        (convection(30.0), vec![30.0]),
        (BvpSpec::reaction_diffusion(CoefficientBox::fixed(&[3.0, 5.0])).unwrap(), vec![3.0, 5.0]),
        (BvpSpec::eikonal(Shape::Circle { center: [0.0, 0.0], radius: 0.5 }).unwrap(), vec![]),
        (helmholtz(), vec![1.2, 2.2]),
        (BvpSpec::burgers(CoefficientBox::fixed(&[0.1])).unwrap(), vec![0.1]),
    ];
    let (u, g, h, p) = (0.37, [0.8, -0.6], [1.1, -0.4], [0.3, 0.7]);
    let eps = 1e-6;
    for (spec, pi) in &specs {
        let t = residual_terms(spec, u, g, h, pi, &p).unwrap();
        let f = |u: f64, g: [f64; 2], h: [f64; 2]| residual_terms(spec, u, g, h, pi, &p).unwrap().value;
        let fd_u = (f(u + eps, g, h) - f(u - eps, g, h)) / (2.0 * eps);
        assert!((fd_u - t.du).abs() < 1e-6, "{} du", spec.kind);
        for a in 0..2 {
            let (mut gp, mut gm, mut hp, mut hm) = (g, g, h, h);
            gp[a] += eps;
            gm[a] -= eps;
            hp[a] += eps;
            hm[a] -= eps;
            assert!(((f(u, gp, h) - f(u, gm, h)) / (2.0 * eps) - t.dgrad[a]).abs() < 1e-6, "{} dgrad", spec.kind);
            assert!(((f(u, g, hp) - f(u, g, hm)) / (2.0 * eps) - t.ddiag2[a]).abs() < 1e-6, "{} ddiag2", spec.kind);
        }
    }
}

proptest! {
    #[test]
    fn forcing_vanishes_off_helmholtz(x in 0.0..6.3f64, y in 0.0..1.0f64, a in 1.0..3.0f64, b in 1.0..3.0f64) {
        let specs = [
            (convection(a), vec![a]),
            (BvpSpec::reaction_diffusion(CoefficientBox::fixed(&[a, b])).unwrap(), vec![a, b]),
            (BvpSpec::burgers(CoefficientBox::fixed(&[a])).unwrap(), vec![a]),
            (BvpSpec::eikonal(Shape::Circle { center: [0.0, 0.0], radius: 0.5 }).unwrap(), vec![]),
        ];
        for (spec, pi) in &specs {
            prop_assert_eq!(forcing(spec, &[x, y], pi), 0.0);
        }
        let expected = (1.0 - PI * PI * (a * a + b * b)) * (PI * a * x).sin() * (PI * b * y).sin();
        prop_assert!((forcing(&helmholtz(), &[x, y], &[a, b]) - expected).abs() < 1e-9);
    }

    #[test]
    fn hinge_is_nonnegative_convex_and_zero_on_nonnegatives(u in -10.0..10.0f64, v in -10.0..10.0f64) {
        prop_assert!(structural_hinge(u) >= 0.0);
        prop_assert_eq!(structural_hinge(u) == 0.0, u >= 0.0);
        let mid = structural_hinge(0.5 * (u + v));
        prop_assert!(mid <= 0.5 * (structural_hinge(u) + structural_hinge(v)) + 1e-15);
    }

    #[test]
    fn invariance_is_antisymmetric_under_an_involution(x in 0.0..6.28f64, t in 0.001..1.0f64, seed in 0u64..1000) {
        // beta = 4 pi gives period T/2, so the wrapped shift is its own inverse.
        let beta = 4.0 * PI;
        let spec = convection(beta).with_invariance(Invariance::ConvectionPeriod).unwrap();
        let model = Mlp::glorot(&[2, 8, 8, 1], seed).unwrap();
        let image = apply_invariance(&spec, 0, &[x, t], &[beta]).unwrap();
        let back = apply_invariance(&spec, 0, &image, &[beta]).unwrap();
        prop_assert!((back[1] - t).abs() < 1e-12);
        let r = invariance_residual(&spec, &model, &[beta], &[x, t], 0).unwrap();
        let s = invariance_residual(&spec, &model, &[beta], &image, 0).unwrap();
        prop_assert!((r + s).abs() < 1e-12, "{} vs {}", r, s);
    }
}
