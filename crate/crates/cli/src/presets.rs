//! Shipped experiment presets.
//!
//! Every preset exists at full scale and at desk scale (`_desk` suffix).
//! Desk presets keep the problem, tolerances and learning rates and shrink
//! the epoch budget; MH chains run as 50 short replicas with the same total
//! number of loss evaluations per epoch.

use scl_core::bvp::{linspace, BoundaryCounts, Invariance};
use scl_core::oracles::{EvalGrid, GridAxis};
use scl_core::{
    ConstraintKind, ConstraintSpec, ProblemKind, ProposalSpec, Role, SamplingPolicy, Shape, TrainConfig, TrainMode,
};

use crate::config::{
    EvaluationConfig, ExperimentConfig, ModelConfig, ObservationConfig, OutputConfig, ProblemConfig, CONFIG_VERSION,
};

/// Full-scale MH chain length.
const CHAIN_STEPS: usize = 5000;
/// Desk-scale replica layout: 50 chains of 100 states.
const DESK_REPLICAS: usize = 50;
const DESK_STEPS: usize = 100;

const LR_PRIMAL: f64 = 1e-3;
const LR_DUAL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scale {
    Full,
    Desk,
}

impl Scale {
    fn suffix(self) -> &'static str {
        match self {
            Scale::Full => "",
            Scale::Desk => "_desk",
        }
    }

    /// MH proposal spending `CHAIN_STEPS` evaluations and keeping `keep`.
    fn chain(self, variances: Vec<f64>, keep: usize) -> ProposalSpec {
        match self {
            Scale::Full => ProposalSpec::new(variances, CHAIN_STEPS, keep),
            Scale::Desk => ProposalSpec::new(variances, DESK_STEPS, keep / DESK_REPLICAS).with_replicas(DESK_REPLICAS),
        }
    }
}

/// Names of all shipped presets, sorted.
pub fn names() -> Vec<String> {
    let mut v: Vec<String> = all().into_iter().map(|c| c.name).collect();
    v.sort();
    v
}

pub fn get(name: &str) -> Option<ExperimentConfig> {
    all().into_iter().find(|c| c.name == name)
}

/// Every preset at both scales.
pub fn all() -> Vec<ExperimentConfig> {
    let mut out = Vec::new();
    for scale in [Scale::Full, Scale::Desk] {
        out.extend(single_problem(scale));
        out.extend(parametric(scale));
        out.extend(invariance(scale));
        out.extend(observational(scale));
        out.push(burgers(scale));
    }
    for c in &mut out {
        c.preset = Some(c.name.clone());
    }
    out
}

fn config(name: String, problem: ProblemConfig, hidden: Vec<usize>, train: TrainConfig, constraints: Vec<ConstraintSpec>) -> ExperimentConfig {
    ExperimentConfig {
        version: CONFIG_VERSION,
        name,
        preset: None,
        problem,
        model: ModelConfig { hidden },
        train,
        constraints,
        evaluation: EvaluationConfig::default(),
        observations: None,
        output: OutputConfig::default(),
    }
}

fn train_config(epochs: usize, decay: bool, mode: TrainMode) -> TrainConfig {
    let mut t = TrainConfig::new(epochs, LR_PRIMAL, LR_DUAL, 0).with_mode(mode);
    if decay {
        t = t.with_decay(0.9, 5000);
    }
    t.log_every = (epochs / 1000).max(1);
    t
}

fn counts(initial: usize, periodic: usize, per_face: usize, shape: usize) -> BoundaryCounts {
    BoundaryCounts { initial, periodic, per_face, shape }
}

/// IC plus periodic pairs as one mean, the SCL objective of the transient
/// problems.
fn transient_bc_objective() -> ConstraintSpec {
    ConstraintSpec::new("bc", ConstraintKind::Boundary, Role::Objective, 0.0, SamplingPolicy::Equispaced)
        .with_boundary(counts(256, 100, 0, 0))
}

/// The baseline weighs the IC and the periodic condition separately.
fn transient_bc_pinn(mu_ic: f64, mu_bc: f64) -> Vec<ConstraintSpec> {
    vec![
        ConstraintSpec::new("ic", ConstraintKind::Boundary, Role::Constraint, 0.0, SamplingPolicy::Equispaced)
            .with_boundary(counts(256, 0, 0, 0))
            .with_weight(mu_ic),
        ConstraintSpec::new("bc", ConstraintKind::Boundary, Role::Constraint, 0.0, SamplingPolicy::Equispaced)
            .with_boundary(counts(0, 100, 0, 0))
            .with_weight(mu_bc),
    ]
}

fn pde_mh(eps: f64, proposal: ProposalSpec) -> ConstraintSpec {
    ConstraintSpec::new("pde", ConstraintKind::Pde, Role::Constraint, eps, SamplingPolicy::Mh { proposal })
}

fn pde_uniform(eps: f64, count: usize, mu: f64) -> ConstraintSpec {
    ConstraintSpec::new("pde", ConstraintKind::Pde, Role::Constraint, eps, SamplingPolicy::Uniform { count }).with_weight(mu)
}

/// Shape used by the eikonal presets in place of an external asset.
pub fn eikonal_shape() -> Shape {
    Shape::TwoCircles { centers: [[-0.4, -0.3], [0.4, 0.35]], radii: [0.3, 0.25] }
}

fn single_problem(scale: Scale) -> Vec<ExperimentConfig> {
    let sfx = scale.suffix();
    let desk = scale == Scale::Desk;
    let mut out = Vec::new();
    let transient = [
        ("convection_b30", ProblemKind::Convection, vec![30.0], 1e-3, 175_000, true),
        ("convection_b50", ProblemKind::Convection, vec![50.0], 5e-3, 200_000, true),
        ("rd_3_3", ProblemKind::ReactionDiffusion, vec![3.0, 3.0], 1e-2, 200_000, false),
        ("rd_3_5", ProblemKind::ReactionDiffusion, vec![3.0, 5.0], 5e-3, 200_000, false),
    ];
    for (base, kind, coeffs, eps, epochs, decay) in transient {
        let epochs = if desk { 30_000 } else { epochs };
        let problem = ProblemConfig::single(kind, &coeffs);
        out.push(config(
            format!("{base}_scl{sfx}"),
            problem.clone(),
            vec![50; 4],
            train_config(epochs, decay, TrainMode::Scl),
            vec![transient_bc_objective(), pde_mh(eps, scale.chain(vec![0.25, 0.01], 1000))],
        ));
        let mut specs = vec![pde_uniform(eps, 1000, 1.0)];
        specs.extend(transient_bc_pinn(100.0, 100.0));
        out.push(config(format!("{base}_pinn{sfx}"), problem, vec![50; 4], train_config(epochs, decay, TrainMode::Pinn), specs));
    }

    // Eikonal: zero level on the shape as objective, non-negativity on the
    // outer box as a structural constraint.
    let epochs = if desk { 10_000 } else { 60_000 };
    let problem = ProblemConfig { shape: Some(eikonal_shape()), ..ProblemConfig::single(ProblemKind::Eikonal, &[]) };
    let problem = ProblemConfig { coefficients: None, ..problem };
    let zero_level = || {
        ConstraintSpec::new("zero_level", ConstraintKind::Boundary, Role::Objective, 0.0, SamplingPolicy::Equispaced)
            .with_boundary(counts(0, 0, 0, 2234))
    };
    let hinge = || {
        ConstraintSpec::new("structural", ConstraintKind::Structural, Role::Constraint, 1e-3, SamplingPolicy::Equispaced)
            .with_boundary(counts(0, 0, 10, 0))
    };
    out.push(config(
        format!("eikonal_scl{sfx}"),
        problem.clone(),
        vec![128; 4],
        train_config(epochs, true, TrainMode::Scl),
        vec![zero_level(), hinge(), pde_mh(0.5, scale.chain(vec![0.04, 0.04], 1000))],
    ));
    out.push(config(
        format!("eikonal_pinn{sfx}"),
        problem,
        vec![128; 4],
        train_config(epochs, true, TrainMode::Pinn),
        vec![pde_uniform(0.5, 1000, 1.0), zero_level().with_weight(500.0), hinge().with_weight(10.0)],
    ));
    out
}

struct Family {
    base: &'static str,
    kind: ProblemKind,
    lo: Vec<f64>,
    hi: Vec<f64>,
    eps: f64,
    /// Proposal variances over the sampled coordinates.
    variances: Vec<f64>,
    keep: usize,
    decay: bool,
    /// Baseline coefficient discretisations, one preset each.
    grids: Vec<Vec<Vec<f64>>>,
}

fn square_grid(nodes: &[f64]) -> Vec<Vec<f64>> {
    nodes.iter().flat_map(|a| nodes.iter().map(move |b| vec![*a, *b])).collect()
}

fn families() -> Vec<Family> {
    let betas = |v: &[f64]| v.iter().map(|b| vec![*b]).collect::<Vec<_>>();
    let sq = |lo: f64, hi: f64, n: usize| square_grid(&linspace(lo, hi, n));
    vec![
        Family {
            base: "convection_param",
            kind: ProblemKind::Convection,
            lo: vec![1.0],
            hi: vec![30.0],
            eps: 1e-3,
            variances: vec![0.25, 0.01, 9.0],
            keep: 2500,
            decay: true,
            grids: vec![
                betas(&[1.0, 10.0, 20.0, 30.0]),
                betas(&[1.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0]),
                betas(&linspace(1.0, 30.0, 30)),
            ],
        },
        Family {
            base: "rd_param_5",
            kind: ProblemKind::ReactionDiffusion,
            lo: vec![0.0, 0.0],
            hi: vec![5.0, 5.0],
            eps: 5e-3,
            variances: vec![0.25, 0.01, 1.0, 1.0],
            keep: 2500,
            decay: false,
            grids: vec![sq(0.0, 5.0, 3), sq(0.0, 5.0, 4), sq(0.0, 5.0, 5), sq(0.0, 5.0, 6)],
        },
        Family {
            base: "rd_param_10",
            kind: ProblemKind::ReactionDiffusion,
            lo: vec![0.0, 0.0],
            hi: vec![10.0, 10.0],
            eps: 1e-2,
            variances: vec![0.25, 0.01, 1.0, 1.0],
            keep: 2500,
            decay: false,
            grids: vec![sq(0.0, 10.0, 3), sq(0.0, 10.0, 5), sq(0.0, 10.0, 6)],
        },
        Family {
            base: "rd_param_20",
            kind: ProblemKind::ReactionDiffusion,
            lo: vec![1.0, 1.0],
            hi: vec![20.0, 20.0],
            eps: 1e-1,
            variances: vec![0.25, 0.01, 1.0, 1.0],
            keep: 2500,
            decay: false,
            grids: vec![square_grid(&[1.0, 10.0, 20.0]), square_grid(&[1.0, 5.0, 10.0, 15.0, 20.0])],
        },
        Family {
            base: "helmholtz_param_2",
            kind: ProblemKind::Helmholtz,
            lo: vec![1.0, 1.0],
            hi: vec![2.0, 2.0],
            eps: 0.5,
            variances: vec![0.04; 4],
            keep: 2500,
            decay: true,
            grids: vec![sq(1.0, 2.0, 3), sq(1.0, 2.0, 5), sq(1.0, 2.0, 6)],
        },
        Family {
            base: "helmholtz_param_3",
            kind: ProblemKind::Helmholtz,
            lo: vec![1.0, 1.0],
            hi: vec![3.0, 3.0],
            eps: 5.0,
            variances: vec![0.04; 4],
            keep: 5000,
            decay: true,
            grids: vec![sq(1.0, 3.0, 3), sq(1.0, 3.0, 5), sq(1.0, 3.0, 6)],
        },
    ]
}

fn parametric(scale: Scale) -> Vec<ExperimentConfig> {
    let sfx = scale.suffix();
    let desk = scale == Scale::Desk;
    let epochs = if desk { 30_000 } else { 200_000 };
    let mut out = Vec::new();
    for f in families() {
        let problem = ProblemConfig::family(f.kind, &f.lo, &f.hi);
        let q = f.lo.len();
        let bc_counts = if f.kind == ProblemKind::Helmholtz { counts(0, 0, 256, 0) } else { counts(256, 100, 0, 0) };
        // Worst-case coefficients for the boundary mean: one short chain per
        // boundary point, same coefficient variances as the PDE chains.
        let bc_chain = ProposalSpec::new(f.variances[f.variances.len() - q..].to_vec(), 20, 1);
        let evaluation = EvaluationConfig {
            grid_points: match (scale, q) {
                (Scale::Full, 1) => 1000,
                (Scale::Full, _) => 100,
                (Scale::Desk, 1) => 20,
                (Scale::Desk, _) => 10,
            },
            ..EvaluationConfig::default()
        };
        let mut scl = config(
            format!("{}_scl{sfx}", f.base),
            problem.clone(),
            vec![50; 4],
            train_config(epochs, f.decay, TrainMode::Scl),
            vec![
                ConstraintSpec::new("bc", ConstraintKind::Boundary, Role::Objective, 0.0, SamplingPolicy::Mh { proposal: bc_chain })
                    .with_boundary(bc_counts),
                pde_mh(f.eps, scale.chain(f.variances.clone(), f.keep)),
            ],
        );
        scl.evaluation = evaluation.clone();
        out.push(scl);
        for grid in &f.grids {
            let n = if q == 1 { grid.len() } else { (grid.len() as f64).sqrt().round() as usize };
            let mut pinn = config(
                format!("{}_pinn_{n}{sfx}", f.base),
                problem.clone(),
                vec![50; 4],
                train_config(epochs, f.decay, TrainMode::Pinn),
                vec![
                    ConstraintSpec::new(
                        "pde",
                        ConstraintKind::Pde,
                        Role::Constraint,
                        f.eps,
                        SamplingPolicy::Grid { coefficients: grid.clone(), per_coefficient: 1000 },
                    ),
                    ConstraintSpec::new(
                        "bc",
                        ConstraintKind::Boundary,
                        Role::Constraint,
                        0.0,
                        SamplingPolicy::Grid { coefficients: grid.clone(), per_coefficient: 0 },
                    )
                    .with_boundary(bc_counts)
                    .with_weight(100.0),
                ],
            );
            pinn.evaluation = evaluation.clone();
            out.push(pinn);
        }
    }
    out
}

/// Convection at beta = 30 with 100 fixed PDE points; SCL adds the
/// time-period invariance.
fn invariance(scale: Scale) -> Vec<ExperimentConfig> {
    let sfx = scale.suffix();
    let epochs = if scale == Scale::Desk { 30_000 } else { 200_000 };
    let problem = ProblemConfig {
        invariances: vec![Invariance::ConvectionPeriod],
        ..ProblemConfig::single(ProblemKind::Convection, &[30.0])
    };
    let fixed_pde = ConstraintSpec::new("pde", ConstraintKind::Pde, Role::Constraint, 1e-3, SamplingPolicy::Fixed { count: 100 });
    let period = ConstraintSpec::new(
        "period",
        ConstraintKind::Invariance { transform: 0 },
        Role::Constraint,
        1e-3,
        SamplingPolicy::Mh { proposal: scale.chain(vec![0.5, 0.1], 1000) },
    );
    let mut pinn_specs = vec![fixed_pde.clone()];
    pinn_specs.extend(transient_bc_pinn(100.0, 100.0));
    vec![
        config(
            format!("convection_invariance_scl{sfx}"),
            problem.clone(),
            vec![50; 4],
            train_config(epochs, true, TrainMode::Scl),
            vec![transient_bc_objective(), fixed_pde, period],
        ),
        config(
            format!("convection_invariance_pinn{sfx}"),
            problem,
            vec![50; 4],
            train_config(epochs, true, TrainMode::Pinn),
            pinn_specs,
        ),
    ]
}

/// Coefficients of the synthetic observational datasets.
pub fn observational_betas() -> Vec<f64> {
    linspace(1.0, 30.0, 12)
}

/// Parametric convection fitted to 12 oracle solutions on a fixed grid:
/// per-sample feasibility constraints (SCL) against the averaged loss.
fn observational(scale: Scale) -> Vec<ExperimentConfig> {
    let sfx = scale.suffix();
    let epochs = if scale == Scale::Desk { 3000 } else { 20_000 };
    let betas = observational_betas();
    let grid = EvalGrid {
        axes: vec![GridAxis::periodic("x", 0.0, 2.0 * std::f64::consts::PI, 32), GridAxis::closed("t", 0.0, 1.0, 16)],
    };
    let observations = ObservationConfig { grid, coefficients: betas.iter().map(|b| vec![*b]).collect(), noise_sd: 0.0 };
    let spec = |j: usize, w: f64| {
        ConstraintSpec::new(
            &format!("obs_{j:02}"),
            ConstraintKind::Observation { dataset: j },
            Role::Constraint,
            1e-3,
            SamplingPolicy::Equispaced,
        )
        .with_weight(w)
    };
    let n = betas.len();
    let evaluation = EvaluationConfig { coefficients: Some(observations.coefficients.clone()), ..EvaluationConfig::default() };
    let problem = ProblemConfig::family(ProblemKind::Convection, &[1.0], &[30.0]);
    let mut scl = config(
        format!("convection_observational_scl{sfx}"),
        problem.clone(),
        vec![50; 4],
        train_config(epochs, true, TrainMode::Scl),
        (0..n).map(|j| spec(j, 1.0)).collect(),
    );
    let mut avg = config(
        format!("convection_observational_avg{sfx}"),
        problem,
        vec![50; 4],
        train_config(epochs, true, TrainMode::Pinn),
        (0..n).map(|j| spec(j, 1.0 / n as f64)).collect(),
    );
    for c in [&mut scl, &mut avg] {
        c.observations = Some(observations.clone());
        c.evaluation = evaluation.clone();
        c.evaluation.feasibility_points = 0;
    }
    vec![scl, avg]
}

/// Burgers residual with the sine initial profile. Experimental: there is
/// no reference solution, so the run reports losses only.
fn burgers(scale: Scale) -> ExperimentConfig {
    let sfx = scale.suffix();
    let epochs = if scale == Scale::Desk { 10_000 } else { 100_000 };
    config(
        format!("burgers_scl{sfx}"),
        ProblemConfig::single(ProblemKind::Burgers, &[0.01]),
        vec![50; 4],
        train_config(epochs, true, TrainMode::Scl),
        vec![transient_bc_objective(), pde_mh(1e-3, scale.chain(vec![0.01, 0.01], 1000))],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    #[test]
    fn names_are_unique_and_paired_by_scale() {
        let names = names();
        let mut dedup = names.clone();
        dedup.dedup();
        assert_eq!(names, dedup);
        for n in names.iter().filter(|n| !n.ends_with("_desk")) {
            assert!(names.contains(&format!("{n}_desk")), "{n} has no desk variant");
        }
    }

    #[test]
    fn every_preset_resolves() {
        for c in all() {
            if let Err(e) = c.resolve(Path::new(".")) {
                panic!("{}: {e}", c.name);
            }
        }
    }

    #[test]
    fn desk_chains_spend_the_full_scale_budget() {
        for (full, desk) in [("convection_b30_scl", "convection_b30_scl_desk"), ("convection_param_scl", "convection_param_scl_desk")] {
            let per_epoch = |n: &str| get(n).unwrap().constraints.iter().map(|c| c.pde_evaluations_per_epoch()).sum::<u64>();
            assert_eq!(per_epoch(full), 5000);
            assert_eq!(per_epoch(desk), 5000);
        }
        let kept = |n: &str| match &get(n).unwrap().constraints[1].sampling {
            SamplingPolicy::Mh { proposal } => proposal.kept(),
            _ => unreachable!(),
        };
        assert_eq!(kept("convection_b30_scl"), 1000);
        assert_eq!(kept("convection_b30_scl_desk"), 1000);
        assert_eq!(kept("convection_param_scl_desk"), 2500);
        assert_eq!(kept("helmholtz_param_3_scl_desk"), 5000);
    }

    #[test]
    fn baseline_grid_matches_its_name() {
        let c = get("convection_param_pinn_30_desk").unwrap();
        assert_eq!(c.constraints[0].pde_evaluations_per_epoch(), 30_000);
        let c = get("rd_param_5_pinn_4").unwrap();
        assert_eq!(c.constraints[0].pde_evaluations_per_epoch(), 16_000);
    }
}
