use std::f64::consts::PI;

use proptest::prelude::*;

use super::*;
use crate::bvp::{BoundaryCounts, CoefficientBox, Invariance, Shape};
use crate::oracles::{synthesize_observations, ExactModel, GridAxis};

fn convection(beta: f64) -> BvpSpec {
    BvpSpec::convection(CoefficientBox::fixed(&[beta])).unwrap()
}

fn small_model(bvp: &BvpSpec, seed: u64) -> Mlp {
    let w = bvp.model_input_width();
    let (s, c) = bvp.input_map();
    let mut m = Mlp::glorot(&[w, 12, 12, 1], seed).unwrap();
    m.set_input_map(s, c).unwrap();
    m
}

fn zero_model(width: usize) -> Mlp {
    let mut m = Mlp::glorot(&[width, 8, 1], 0).unwrap();
    m.params_mut().iter_mut().for_each(|p| *p = 0.0);
    m
}

fn ic_only() -> BoundaryCounts {
    BoundaryCounts { initial: 256, periodic: 0, ..BoundaryCounts::default() }
}

fn bc(sampling: SamplingPolicy) -> ConstraintSpec {
    ConstraintSpec::new("bc", ConstraintKind::Boundary, Role::Objective, 0.0, sampling)
}

fn pde(eps: f64, sampling: SamplingPolicy) -> ConstraintSpec {
    ConstraintSpec::new("pde", ConstraintKind::Pde, Role::Constraint, eps, sampling)
}

fn mh(variances: Vec<f64>, steps: usize, keep: usize, replicas: usize) -> SamplingPolicy {
    SamplingPolicy::Mh { proposal: ProposalSpec::new(variances, steps, keep).with_replicas(replicas) }
}

fn no_data() -> TrainData {
    TrainData::default()
}

#[test]
fn adam_first_step_is_sign_of_gradient() {
    for g in [0.3, -2.5, 1e-3] {
        let mut adam = Adam::new(1, AdamParams::default());
        let mut theta = [0.7];
        adam.step(&mut theta, &[g], 1e-3);
        // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
        let expected = 0.7 - 1e-3 * g / (g.abs() + 1e-8);
        assert!((theta[0] - expected).abs() < 1e-15, "{g}: {} vs {expected}", theta[0]);
        assert!(((0.7 - theta[0]).abs() - 1e-3).abs() < 1e-3 * 1e-5);
    }
}

#[test]
fn adam_zero_gradient_leaves_parameters() {
    let mut adam = Adam::new(3, AdamParams::default());
    let mut theta = [1.0, -2.0, 3.0];
    for _ in 0..10 {
        adam.step(&mut theta, &[0.0; 3], 1e-3);
    }
    assert_eq!(theta, [1.0, -2.0, 3.0]);
    assert_eq!(adam.steps(), 10);
}

#[test]
fn decay_schedule() {
    let cfg = TrainConfig::new(1, 1e-3, 1e-4, 0).with_decay(0.9, 5000);
    assert_eq!(cfg.learning_rates(0), (1e-3, 1e-4));
    assert_eq!(cfg.learning_rates(4999), (1e-3, 1e-4));
    let (p, d) = cfg.learning_rates(5000);
    assert!((p - 0.9e-3).abs() < 1e-18 && (d - 0.9e-4).abs() < 1e-19);
    assert!((cfg.learning_rates(10_000).0 - 0.81e-3).abs() < 1e-18);
    assert_eq!(TrainConfig::new(1, 1e-3, 1e-4, 0).learning_rates(1_000_000).0, 1e-3);
}

#[test]
fn dual_step_examples() {
    let specs = vec![
        bc(SamplingPolicy::Equispaced),
        pde(0.0, SamplingPolicy::Uniform { count: 1 }),
        pde(0.0, SamplingPolicy::Uniform { count: 1 }),
        pde(0.0, SamplingPolicy::Uniform { count: 1 }),
    ];
    let mut d = DualState::new(&specs);
    d.lambdas = vec![0.0, 0.0, 0.5, 0.01];
    dual_step(&mut d, &[5.0, 0.2, 0.1, 0.0], &[0.0, 0.2, 0.0, 1000.0], 1e-4);
    assert_eq!(d.lambdas[0], 0.0, "the objective carries no multiplier");
    assert_eq!(d.lambdas[1], 0.0);
    assert!((d.lambdas[2] - 0.50001).abs() < 1e-15);
    assert_eq!(d.lambdas[3], 0.0);
}

proptest! {
    #[test]
    fn multipliers_stay_nonnegative_and_shrink_when_satisfied(
        steps in proptest::collection::vec((0.0f64..2.0, 0.0f64..2.0), 1..200),
        eta in 1e-5f64..1.0,
    ) {
        let specs = vec![pde(0.0, SamplingPolicy::Uniform { count: 1 })];
        let mut d = DualState::new(&specs);
        for (loss, eps) in steps {
            let before = d.lambdas[0];
            dual_step(&mut d, &[loss], &[eps], eta);
            prop_assert!(d.lambdas[0] >= 0.0);
            if loss < eps {
                prop_assert!(d.lambdas[0] <= before);
            }
        }
    }
}

#[test]
fn zero_epoch_run_returns_the_initial_model() {
    let bvp = convection(30.0);
    let model = small_model(&bvp, 1);
    let specs = vec![bc(SamplingPolicy::Equispaced), pde(1e-3, mh(vec![0.25, 0.01], 10, 5, 4))];
    let rep = train(model.clone(), &bvp, &specs, &no_data(), &TrainConfig::new(0, 1e-3, 1e-4, 0)).unwrap();
    assert_eq!(rep.model, model);
    assert!(rep.dual.trajectory.is_empty());
    assert_eq!(rep.operator_evaluations, 0);
    assert_eq!(rep.evaluations_per_epoch, 40);
}

#[test]
fn operator_counter_is_exact() {
    let bvp = convection(10.0).with_invariance(Invariance::ConvectionPeriod).unwrap();
    for (epochs, replicas, steps, keep, uniform) in [(3, 2, 5, 2, 7), (4, 1, 9, 9, 1), (2, 5, 3, 1, 11)] {
        let specs = vec![
            bc(SamplingPolicy::Equispaced),
            pde(1e-3, mh(vec![0.25, 0.01], steps, keep, replicas)),
            pde(1e-3, SamplingPolicy::Uniform { count: uniform }),
            ConstraintSpec::new(
                "inv",
                ConstraintKind::Invariance { transform: 0 },
                Role::Constraint,
                1e-3,
                mh(vec![0.5, 0.1], 6, 3, 2),
            ),
        ];
        let cfg = TrainConfig::new(epochs, 1e-3, 1e-4, 3);
        let rep = train(small_model(&bvp, 0), &bvp, &specs, &no_data(), &cfg).unwrap();
        let predicted = epochs as u64 * (replicas * steps + uniform) as u64;
        assert_eq!(rep.operator_evaluations, predicted);
        assert_eq!(rep.evaluations_per_epoch * epochs as u64, predicted);
    }
}

#[test]
fn exact_model_has_negligible_losses() {
    let bvp = convection(30.0);
    let exact = ExactModel::new(bvp.clone()).unwrap();
    let specs = vec![
        bc(SamplingPolicy::Equispaced),
        pde(1e-3, SamplingPolicy::Uniform { count: 500 }),
        pde(1e-3, mh(vec![0.25, 0.01], 20, 10, 5)),
    ];
    let batches = draw_batches(&exact, &bvp, &specs, &no_data(), 0, 4).unwrap();
    for (l, s) in empirical_losses(&exact, &bvp, &batches).unwrap().iter().zip(&specs) {
        assert!(*l < 1e-10, "{}: {l}", s.name);
    }
}

#[test]
fn zero_model_initial_loss_is_mean_sine_squared() {
    let bvp = convection(30.0);
    let specs = vec![bc(SamplingPolicy::Equispaced).with_boundary(ic_only())];
    let model = zero_model(2);
    let batches = draw_batches(&model, &bvp, &specs, &no_data(), 0, 0).unwrap();
    let l = empirical_losses(&model, &bvp, &batches).unwrap()[0];
    // 256 equispaced nodes with both endpoints: sum of sin^2 is 255 / 2.
    assert!((l - 127.5 / 256.0).abs() < 1e-12, "{l}");
    assert!((l - 0.5).abs() < 5e-3);
}

struct Capture {
    model: Option<Mlp>,
    samples: Vec<f64>,
    losses: Vec<f64>,
}

impl TrainObserver for Capture {
    fn on_epoch(&mut self, epoch: usize, model: &Mlp, batches: &[EpochBatch], losses: &[f64]) {
        if epoch == 2 {
            self.model = Some(model.clone());
            self.samples = batches[1].samples.clone();
            self.losses = losses.to_vec();
        }
    }
}

#[test]
fn logged_loss_replays_from_dumped_samples() {
    let bvp = convection(30.0);
    let specs = vec![bc(SamplingPolicy::Equispaced), pde(1e-3, mh(vec![0.25, 0.01], 30, 10, 8))];
    let mut cap = Capture { model: None, samples: Vec::new(), losses: Vec::new() };
    let cfg = TrainConfig::new(4, 1e-2, 1e-1, 9);
    let rep = train_observed(small_model(&bvp, 2), &bvp, &specs, &no_data(), &cfg, &mut cap).unwrap();
    assert_eq!(rep.dual.trajectory[2].losses, cap.losses);

    // Dump as text (shortest round-trip representation), then reload.
    let dump: String = cap.samples.chunks(2).map(|p| format!("{},{}\n", p[0], p[1])).collect();
    let reloaded: Vec<f64> = dump.lines().flat_map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap())).collect();
    assert_eq!(reloaded, cap.samples);
    let batch = EpochBatch::from_samples(&bvp, ConstraintKind::Pde, &reloaded).unwrap();
    let replayed = empirical_losses(cap.model.as_ref().unwrap(), &bvp, &[batch]).unwrap()[0];
    assert_eq!(replayed.to_bits(), cap.losses[1].to_bits());
}

#[test]
fn identical_seeds_give_identical_reports() {
    let bvp = convection(5.0);
    let specs = vec![bc(SamplingPolicy::Equispaced), pde(1e-3, mh(vec![0.25, 0.01], 20, 5, 10))];
    let cfg = TrainConfig::new(15, 1e-3, 1e-2, 5);
    let run = || {
        let mut r = train(small_model(&bvp, 5), &bvp, &specs, &no_data(), &cfg).unwrap();
        r.wall_time_secs = 0.0;
        r
    };
    assert_eq!(run(), run());
    let mut other = cfg.clone();
    other.seed = 6;
    let r = train(small_model(&bvp, 5), &bvp, &specs, &no_data(), &other).unwrap();
    assert_ne!(r.final_losses, run().final_losses);
}

/// Central differences of the Lagrangian along a few parameters.
fn check_gradient(bvp: &BvpSpec, specs: &[ConstraintSpec], data: &TrainData, coefs: &[f64], seed: u64) {
    let model = small_model(bvp, seed);
    let batches = draw_batches(&model, bvp, specs, data, 0, seed).unwrap();
    let (_, grad) = lagrangian_gradient(&model, bvp, specs, &batches, coefs, 0).unwrap();
    let lagrangian = |m: &Mlp| -> f64 {
        empirical_losses(m, bvp, &batches).unwrap().iter().zip(coefs).map(|(l, c)| l * c).sum()
    };
    let n = model.params().len();
    for k in (0..n).step_by(n / 17 + 1) {
        let h = 1e-5;
        let mut plus = model.clone();
        plus.params_mut()[k] += h;
        let mut minus = model.clone();
        minus.params_mut()[k] -= h;
        let fd = (lagrangian(&plus) - lagrangian(&minus)) / (2.0 * h);
        let g = grad.as_slice()[k];
        assert!((fd - g).abs() <= 1e-4 * g.abs().max(1e-3), "{:?} param {k}: fd {fd} vs {g}", bvp.kind);
    }
}

#[test]
fn lagrangian_gradient_matches_finite_differences() {
    let rd = BvpSpec::reaction_diffusion(CoefficientBox::fixed(&[3.0, 5.0])).unwrap();
    let specs = vec![bc(SamplingPolicy::Equispaced), pde(1e-3, SamplingPolicy::Uniform { count: 40 })];
    check_gradient(&rd, &specs, &no_data(), &[1.0, 2.5], 1);

    let burgers = BvpSpec::burgers(CoefficientBox::fixed(&[0.05])).unwrap();
    check_gradient(&burgers, &specs, &no_data(), &[0.5, 1.5], 2);

    let helm = BvpSpec::helmholtz(CoefficientBox::range(&[1.0, 1.0], &[2.0, 2.0]), 1.0).unwrap();
    let specs_p = vec![
        bc(SamplingPolicy::Equispaced).with_boundary(BoundaryCounts { per_face: 8, ..BoundaryCounts::default() }),
        pde(1e-3, SamplingPolicy::Uniform { count: 30 }),
    ];
    check_gradient(&helm, &specs_p, &no_data(), &[1.0, 0.7], 3);

    let conv = convection(8.0).with_invariance(Invariance::ConvectionPeriod).unwrap();
    let specs_i = vec![
        bc(SamplingPolicy::Equispaced),
        ConstraintSpec::new(
            "inv",
            ConstraintKind::Invariance { transform: 0 },
            Role::Constraint,
            0.0,
            SamplingPolicy::Uniform { count: 25 },
        ),
    ];
    check_gradient(&conv, &specs_i, &no_data(), &[1.0, 3.0], 4);

    let eik = BvpSpec::eikonal(Shape::Circle { center: [0.0, 0.0], radius: 0.5 }).unwrap();
    let specs_e = vec![
        bc(SamplingPolicy::Equispaced).with_boundary(BoundaryCounts { shape: 32, ..BoundaryCounts::default() }),
        pde(0.5, SamplingPolicy::Uniform { count: 30 }),
        ConstraintSpec::new("s", ConstraintKind::Structural, Role::Constraint, 1e-3, SamplingPolicy::Equispaced)
            .with_boundary(BoundaryCounts { per_face: 10, ..BoundaryCounts::default() }),
    ];
    check_gradient(&eik, &specs_e, &no_data(), &[1.0, 0.3, 2.0], 5);
}

#[test]
fn grid_policy_sums_per_coefficient_means() {
    // u = a t has convection residual a for every beta.
    let bvp = BvpSpec::convection(CoefficientBox::range(&[1.0], &[30.0])).unwrap();
    let a = 0.7;
    let model = Mlp::from_layers(&[3, 1], &[(vec![0.0, a, 0.0], vec![0.0])]).unwrap();
    let coefficients = vec![vec![1.0], vec![10.0], vec![30.0]];
    let spec = pde(1e-3, SamplingPolicy::Grid { coefficients, per_coefficient: 4 });
    let batches = draw_batches(&model, &bvp, std::slice::from_ref(&spec), &no_data(), 0, 0).unwrap();
    assert_eq!(batches[0].rows(), 12);
    assert_eq!(batches[0].pde_evaluations, 12);
    let l = empirical_losses(&model, &bvp, &batches).unwrap()[0];
    assert!((l - 3.0 * a * a).abs() < 1e-12, "{l}");
}

#[test]
fn structural_and_observation_losses() {
    let eik = BvpSpec::eikonal(Shape::Circle { center: [0.0, 0.0], radius: 0.5 }).unwrap();
    let mut model = zero_model(2);
    let n = model.params().len();
    model.params_mut()[n - 1] = -0.25; // output bias: u = -0.25 everywhere
    let s = ConstraintSpec::new("s", ConstraintKind::Structural, Role::Constraint, 1e-3, SamplingPolicy::Equispaced)
        .with_boundary(BoundaryCounts { per_face: 10, ..BoundaryCounts::default() });
    let b = draw_batches(&model, &eik, std::slice::from_ref(&s), &no_data(), 0, 0).unwrap();
    assert_eq!(b[0].rows(), 40);
    assert!((empirical_losses(&model, &eik, &b).unwrap()[0] - 0.25).abs() < 1e-15);

    let conv = BvpSpec::convection(CoefficientBox::range(&[1.0], &[30.0])).unwrap();
    let grid = EvalGrid::new(vec![GridAxis::periodic("x", 0.0, 2.0 * PI, 16), GridAxis::closed("t", 0.0, 1.0, 5)])
        .unwrap();
    let obs = synthesize_observations(&conv, &[vec![3.0], vec![20.0]], &grid, 0.0, 0).unwrap();
    let expected: Vec<f64> = obs.iter().map(|o| o.field.iter().map(|v| v * v).sum::<f64>() / 80.0).collect();
    let data = TrainData { grid: Some(grid), observations: obs };
    let specs: Vec<ConstraintSpec> = (0..2)
        .map(|j| {
            ConstraintSpec::new(
                &format!("o{j}"),
                ConstraintKind::Observation { dataset: j },
                Role::Constraint,
                1e-3,
                SamplingPolicy::Equispaced,
            )
        })
        .collect();
    let zero = zero_model(3);
    let b = draw_batches(&zero, &conv, &specs, &data, 0, 0).unwrap();
    let l = empirical_losses(&zero, &conv, &b).unwrap();
    for (a, e) in l.iter().zip(&expected) {
        assert!((a - e).abs() < 1e-14, "{a} vs {e}");
    }
    let exact = ExactModel::new(conv.clone()).unwrap();
    let b = draw_batches(&exact, &conv, &specs, &data, 0, 0).unwrap();
    assert!(empirical_losses(&exact, &conv, &b).unwrap().iter().all(|l| *l < 1e-20));
}

#[test]
fn parametric_boundary_chains_pair_every_point_with_coefficients() {
    let bvp = BvpSpec::convection(CoefficientBox::range(&[1.0], &[30.0])).unwrap();
    let counts = BoundaryCounts { initial: 16, periodic: 6, ..BoundaryCounts::default() };
    let spec = bc(mh(vec![9.0], 12, 3, 1)).with_boundary(counts);
    let model = small_model(&bvp, 3);
    let b = draw_batches(&model, &bvp, std::slice::from_ref(&spec), &no_data(), 0, 1).unwrap();
    assert_eq!(b[0].terms.len(), 22 * 3);
    assert_eq!(b[0].rows(), 16 * 3 + 6 * 3 * 2);
    assert!(b[0].acceptance.is_some());
    for row in b[0].inputs.chunks(3) {
        assert!((1.0..=30.0).contains(&row[2]));
    }
    // Equispaced coefficients are drawn once and reused every epoch.
    let eq = bc(SamplingPolicy::Equispaced).with_boundary(counts);
    let a = draw_batches(&model, &bvp, std::slice::from_ref(&eq), &no_data(), 0, 1).unwrap();
    let c = draw_batches(&model, &bvp, std::slice::from_ref(&eq), &no_data(), 7, 1).unwrap();
    assert_eq!(a, c);
}

#[test]
fn weighted_sum_with_zero_pde_weight_fits_boundary_data() {
    let bvp = convection(30.0);
    let specs = vec![
        ConstraintSpec::new("bc", ConstraintKind::Boundary, Role::Constraint, 0.0, SamplingPolicy::Equispaced)
            .with_boundary(ic_only()),
        pde(0.0, SamplingPolicy::Uniform { count: 50 }).with_weight(0.0),
    ];
    let mut cfg = TrainConfig::new(1000, 3e-3, 1e-4, 0);
    cfg.mode = TrainMode::Pinn;
    let rep = pinn_baseline(small_model(&bvp, 7), &bvp, &specs, &no_data(), &cfg).unwrap();
    let bc_losses: Vec<f64> = rep.dual.trajectory.iter().map(|r| r.losses[0]).collect();
    let windows: Vec<f64> = bc_losses.chunks(100).map(|w| w.iter().sum::<f64>() / w.len() as f64).collect();
    for w in windows.windows(2) {
        assert!(w[1] < w[0], "{windows:?}");
    }
    assert!(rep.dual.lambdas.iter().all(|&l| l == 0.0));
}

#[test]
fn feasibility_mode_first_step_is_a_no_op() {
    let bvp = convection(5.0);
    let specs = vec![pde(1e-3, SamplingPolicy::Uniform { count: 20 }), {
        let mut b = bc(SamplingPolicy::Equispaced);
        b.role = Role::Constraint;
        b.tolerance = 1e-3;
        b
    }];
    let model = small_model(&bvp, 8);
    let rep = train(model.clone(), &bvp, &specs, &no_data(), &TrainConfig::new(1, 1e-3, 1e-4, 0)).unwrap();
    assert_eq!(rep.model, model);
    assert!(rep.dual.lambdas.iter().all(|&l| l > 0.0));
    let rep = train(model.clone(), &bvp, &specs, &no_data(), &TrainConfig::new(2, 1e-3, 1e-4, 0)).unwrap();
    assert_ne!(rep.model, model);
}

#[test]
fn divergence_guard_aborts() {
    let conv = BvpSpec::convection(CoefficientBox::range(&[1.0], &[30.0])).unwrap();
    let grid = EvalGrid::new(vec![GridAxis::periodic("x", 0.0, 1.0, 4), GridAxis::closed("t", 0.0, 1.0, 2)]).unwrap();
    let data = TrainData {
        grid: Some(grid),
        observations: vec![Observation { coefficients: vec![2.0], field: vec![1e5; 8] }],
    };
    let specs = vec![ConstraintSpec::new(
        "o0",
        ConstraintKind::Observation { dataset: 0 },
        Role::Constraint,
        0.0,
        SamplingPolicy::Equispaced,
    )];
    let err = train(small_model(&conv, 0), &conv, &specs, &data, &TrainConfig::new(3, 1e-3, 1e-4, 0)).unwrap_err();
    assert!(matches!(err, TrainError::Diverged { epoch: 0, ref constraint, .. } if constraint == "o0"), "{err}");
}

#[test]
fn invalid_setups_are_rejected() {
    let bvp = convection(30.0);
    let ok_pde = pde(1e-3, SamplingPolicy::Uniform { count: 10 });
    let cases: Vec<(Vec<ConstraintSpec>, TrainMode)> = vec![
        (vec![], TrainMode::Scl),
        (vec![bc(SamplingPolicy::Equispaced), bc(SamplingPolicy::Equispaced)], TrainMode::Scl),
        (vec![pde(-1.0, SamplingPolicy::Uniform { count: 10 })], TrainMode::Scl),
        (vec![pde(1e-3, SamplingPolicy::Uniform { count: 0 })], TrainMode::Scl),
        (vec![pde(1e-3, SamplingPolicy::Equispaced)], TrainMode::Scl),
        (vec![pde(1e-3, mh(vec![0.25], 10, 5, 1))], TrainMode::Scl),
        (vec![pde(1e-3, mh(vec![0.25, 0.01], 10, 5, 1))], TrainMode::Pinn),
        (vec![pde(1e-3, SamplingPolicy::Grid { coefficients: vec![vec![1.0]], per_coefficient: 3 })], TrainMode::Scl),
        (vec![bc(mh(vec![1.0], 10, 5, 1))], TrainMode::Scl),
        (vec![ok_pde.clone().with_weight(-1.0)], TrainMode::Pinn),
        (
            vec![ConstraintSpec::new(
                "inv",
                ConstraintKind::Invariance { transform: 0 },
                Role::Constraint,
                0.0,
                SamplingPolicy::Uniform { count: 3 },
            )],
            TrainMode::Scl,
        ),
        (
            vec![ConstraintSpec::new(
                "o",
                ConstraintKind::Observation { dataset: 0 },
                Role::Constraint,
                0.0,
                SamplingPolicy::Equispaced,
            )],
            TrainMode::Scl,
        ),
    ];
    for (specs, mode) in cases {
        assert!(validate_constraints(&bvp, &specs, &no_data(), mode).is_err(), "{specs:?}");
    }
    assert!(validate_constraints(&bvp, &[ok_pde.clone()], &no_data(), TrainMode::Pinn).is_ok());

    let wrong_width = Mlp::glorot(&[3, 4, 1], 0).unwrap();
    let cfg = TrainConfig::new(1, 1e-3, 1e-4, 0);
    assert!(matches!(train(wrong_width, &bvp, &[ok_pde.clone()], &no_data(), &cfg), Err(TrainError::InvalidConfig(_))));
    for bad in [
        TrainConfig::new(1, 0.0, 1e-4, 0),
        TrainConfig::new(1, 1e-3, -1.0, 0),
        TrainConfig::new(1, 1e-3, 1e-4, 0).with_decay(1.5, 10),
    ] {
        assert!(bad.validate().is_err());
    }
}

#[test]
fn lambda_csv_lists_every_constraint() {
    let bvp = convection(5.0);
    let specs = vec![bc(SamplingPolicy::Equispaced), pde(1e-3, SamplingPolicy::Uniform { count: 10 })];
    let mut cfg = TrainConfig::new(5, 1e-3, 1e-4, 0);
    cfg.log_every = 2;
    let rep = train(small_model(&bvp, 0), &bvp, &specs, &no_data(), &cfg).unwrap();
    let epochs: Vec<usize> = rep.dual.trajectory.iter().map(|r| r.epoch).collect();
    assert_eq!(epochs, [0, 2, 4]);
    let mut out = Vec::new();
    rep.write_lambda_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 * 2);
    assert!(text.starts_with("epoch,constraint,lambda,loss\n0,bc,"));
}

#[test]
fn constraint_specs_round_trip_through_json() {
    let specs = vec![
        bc(SamplingPolicy::Equispaced),
        pde(1e-3, mh(vec![0.25, 0.01], 100, 20, 50)),
        pde(1e-3, SamplingPolicy::Grid { coefficients: vec![vec![1.0], vec![2.0]], per_coefficient: 5 }),
        ConstraintSpec::new(
            "inv",
            ConstraintKind::Invariance { transform: 0 },
            Role::Constraint,
            1e-3,
            SamplingPolicy::Fixed { count: 100 },
        ),
    ];
    let text = serde_json::to_string(&specs).unwrap();
    let back: Vec<ConstraintSpec> = serde_json::from_str(&text).unwrap();
    assert_eq!(back, specs);
}
