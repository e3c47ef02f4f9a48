//! Primal-dual training of constrained learning problems and the
//! weighted-sum baseline.
//!
//! Every epoch draws one batch per constraint (fixed point sets, fresh
//! uniform points or MH chains targeting the pointwise loss), evaluates the
//! empirical losses and their parameter gradients, takes one Adam step on the
//! empirical Lagrangian and one projected ascent step on the multipliers.

mod adam;
mod batch;

#[cfg(test)]
mod tests;

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bvp::{BoundaryCounts, BvpError, BvpSpec};
use crate::jets::{param_gradient, FieldModel, JetError, Mlp, ParamGradient};
use crate::oracles::{EvalGrid, Observation};
use crate::sampler::{ProposalSpec, SamplerError};

pub use adam::{Adam, AdamParams};
pub use batch::{sample_space, uniform_points, EpochBatch, Term};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("constraint {index}: {reason}")]
    InvalidConstraint { index: usize, reason: String },
    #[error("constraint {constraint:?} has an empty batch")]
    EmptyBatch { constraint: String },
    #[error("training diverged at epoch {epoch}: loss of {constraint:?} is {loss}")]
    Diverged { epoch: usize, constraint: String, loss: f64 },
    #[error("non-finite parameter gradient at epoch {epoch}")]
    NonFiniteGradient { epoch: usize },
    #[error("output: {0}")]
    Io(String),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Bvp(#[from] BvpError),
}

/// What a constraint measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstraintKind {
    /// Mean squared PDE residual.
    Pde,
    /// Mean squared mismatch with initial/boundary data, periodic pairs
    /// included.
    Boundary,
    /// Mean squared change of `u` under invariance `transform` of the problem.
    Invariance { transform: usize },
    /// Mean hinge `[-u]_+` over the outer box boundary.
    Structural,
    /// Mean squared error against observation `dataset`.
    Observation { dataset: usize },
}

/// Whether a loss is minimised directly or constrained below its tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Objective,
    #[default]
    Constraint,
}

/// How a constraint's points are obtained.
///
/// | kind | supported policies |
/// |---|---|
/// | pde | `fixed`, `uniform`, `mh`, `grid` (parametric only) |
/// | invariance | `fixed`, `uniform`, `mh` |
/// | boundary | `equispaced`, `mh` and `grid` (parametric only) |
/// | structural, observation | `equispaced` |
///
/// For boundary constraints the point set is always the equispaced one of
/// [`crate::bvp::boundary_points`]; in parametric mode the policy chooses the
/// coefficients paired with each point: one uniform draw per point
/// (`equispaced`), one MH chain per point over the coefficient box (`mh`,
/// replicas ignored) or every listed coefficient (`grid`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplingPolicy {
    /// The deterministic point set belonging to the constraint kind.
    Equispaced,
    /// `count` uniform points drawn once before training.
    Fixed { count: usize },
    /// `count` fresh uniform points every epoch.
    Uniform { count: usize },
    /// Metropolis-Hastings chains targeting the pointwise loss, rerun from a
    /// uniform start every epoch.
    Mh { proposal: ProposalSpec },
    /// `per_coefficient` fresh domain points for each listed coefficient
    /// vector; the per-coefficient means are summed.
    Grid { coefficients: Vec<Vec<f64>>, #[serde(default)] per_coefficient: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSpec {
    pub name: String,
    pub kind: ConstraintKind,
    #[serde(default)]
    pub role: Role,
    /// Tolerance `epsilon`; unused for the objective.
    #[serde(default)]
    pub tolerance: f64,
    /// Baseline weight `mu`; unused by primal-dual training.
    #[serde(default = "default_weight")]
    pub weight: f64,
    pub sampling: SamplingPolicy,
    /// Boundary point counts (boundary and structural kinds).
    #[serde(default)]
    pub boundary: BoundaryCounts,
}

fn default_weight() -> f64 {
    1.0
}

impl ConstraintSpec {
    pub fn new(name: &str, kind: ConstraintKind, role: Role, tolerance: f64, sampling: SamplingPolicy) -> Self {
        Self {
            name: name.into(),
            kind,
            role,
            tolerance,
            weight: 1.0,
            sampling,
            boundary: BoundaryCounts::default(),
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn with_boundary(mut self, boundary: BoundaryCounts) -> Self {
        self.boundary = boundary;
        self
    }

    /// Operator evaluations this constraint spends per epoch.
    pub fn pde_evaluations_per_epoch(&self) -> u64 {
        match (&self.kind, &self.sampling) {
            (ConstraintKind::Pde, SamplingPolicy::Fixed { count } | SamplingPolicy::Uniform { count }) => {
                *count as u64
            }
            (ConstraintKind::Pde, SamplingPolicy::Mh { proposal }) => proposal.evaluations(),
            (ConstraintKind::Pde, SamplingPolicy::Grid { coefficients, per_coefficient }) => {
                (coefficients.len() * per_coefficient) as u64
            }
            _ => 0,
        }
    }
}

/// Training-loop algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    /// Primal-dual on the empirical Lagrangian.
    #[default]
    Scl,
    /// Adam on the fixed weighted sum `sum_c mu_c l_c`.
    Pinn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr_primal: f64,
    #[serde(default = "default_lr_dual")]
    pub lr_dual: f64,
    /// Both learning rates are multiplied by `decay_factor` every
    /// `decay_every` epochs; 0 disables the schedule.
    #[serde(default = "default_decay_factor")]
    pub decay_factor: f64,
    #[serde(default)]
    pub decay_every: usize,
    #[serde(default)]
    pub adam: AdamParams,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: TrainMode,
    /// Primal steps per dual step (on the same batches).
    #[serde(default = "default_inner_steps")]
    pub inner_steps: usize,
    /// Any empirical loss above this aborts training.
    #[serde(default = "default_divergence")]
    pub divergence_threshold: f64,
    /// Trajectory logging stride in epochs; the final epoch is always logged.
    #[serde(default = "default_log_every")]
    pub log_every: usize,
}

fn default_lr_dual() -> f64 {
    1e-4
}

fn default_decay_factor() -> f64 {
    1.0
}

fn default_inner_steps() -> usize {
    1
}

fn default_divergence() -> f64 {
    1e6
}

fn default_log_every() -> usize {
    1
}

impl TrainConfig {
    pub fn new(epochs: usize, lr_primal: f64, lr_dual: f64, seed: u64) -> Self {
        Self {
            epochs,
            lr_primal,
            lr_dual,
            decay_factor: default_decay_factor(),
            decay_every: 0,
            adam: AdamParams::default(),
            seed,
            mode: TrainMode::Scl,
            inner_steps: 1,
            divergence_threshold: default_divergence(),
            log_every: 1,
        }
    }

    pub fn with_decay(mut self, factor: f64, every: usize) -> Self {
        self.decay_factor = factor;
        self.decay_every = every;
        self
    }

    pub fn with_mode(mut self, mode: TrainMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::InvalidConfig(m));
        for (name, v) in [("lr_primal", self.lr_primal), ("lr_dual", self.lr_dual)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return bad(format!("decay_factor must lie in (0, 1], got {}", self.decay_factor));
        }
        if self.inner_steps == 0 {
            return bad("inner_steps must be at least 1".into());
        }
        if self.log_every == 0 {
            return bad("log_every must be at least 1".into());
        }
        if !(self.divergence_threshold > 0.0) {
            return bad(format!("divergence_threshold must be positive, got {}", self.divergence_threshold));
        }
        self.adam.validate().map_err(TrainError::InvalidConfig)
    }

    /// Decay multiplier applied at `epoch` (0-based).
    pub fn decay_at(&self, epoch: usize) -> f64 {
        if self.decay_every == 0 {
            1.0
        } else {
            self.decay_factor.powi((epoch / self.decay_every) as i32)
        }
    }

    /// `(primal, dual)` learning rates at `epoch`.
    pub fn learning_rates(&self, epoch: usize) -> (f64, f64) {
        let s = self.decay_at(epoch);
        (self.lr_primal * s, self.lr_dual * s)
    }
}

/// Observation datasets shared by all observation constraints.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainData {
    /// Grid the observed fields live on.
    pub grid: Option<EvalGrid>,
    pub observations: Vec<Observation>,
}

/// Logged losses and multipliers of one epoch. `lambdas` are the values after
/// that epoch's dual step; `losses` were measured before its primal step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub losses: Vec<f64>,
    pub lambdas: Vec<f64>,
}

/// Multipliers, one per constraint spec (the objective keeps 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    pub lambdas: Vec<f64>,
    /// False for the objective, which carries no multiplier.
    pub constrained: Vec<bool>,
    pub trajectory: Vec<EpochRecord>,
}

impl DualState {
    pub fn new(specs: &[ConstraintSpec]) -> Self {
        Self {
            lambdas: vec![0.0; specs.len()],
            constrained: specs.iter().map(|s| s.role == Role::Constraint).collect(),
            trajectory: Vec::new(),
        }
    }
}

/// Projected ascent `lambda <- [lambda + eta (loss - eps)]_+` on every
/// constrained entry.
pub fn dual_step(state: &mut DualState, losses: &[f64], tolerances: &[f64], eta: f64) {
    for (((l, &c), loss), eps) in state.lambdas.iter_mut().zip(&state.constrained).zip(losses).zip(tolerances) {
        if c {
            *l = (*l + eta * (loss - eps)).max(0.0);
        }
    }
}

/// One Adam step on `grad` with learning rate `lr`.
pub fn primal_step(
    model: &mut Mlp,
    adam: &mut Adam,
    grad: &ParamGradient,
    lr: f64,
    epoch: usize,
) -> Result<(), TrainError> {
    if !grad.is_finite() {
        return Err(TrainError::NonFiniteGradient { epoch });
    }
    adam.step(model.params_mut(), grad.as_slice(), lr);
    model.check_finite()?;
    Ok(())
}

/// Everything a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub model: Mlp,
    pub mode: TrainMode,
    pub epochs: usize,
    pub names: Vec<String>,
    pub dual: DualState,
    /// Losses of the last epoch (before its primal step).
    pub final_losses: Vec<f64>,
    /// PDE operator evaluations over the whole run.
    pub operator_evaluations: u64,
    pub evaluations_per_epoch: u64,
    /// Mean MH acceptance rate per constraint (None when not sampled by MH).
    pub acceptance: Vec<Option<f64>>,
    pub wall_time_secs: f64,
}

impl TrainReport {
    /// `epoch,constraint,lambda,loss` rows for every logged epoch.
    pub fn write_lambda_csv<W: Write>(&self, mut out: W) -> Result<(), TrainError> {
        let io = |e: std::io::Error| TrainError::Io(e.to_string());
        writeln!(out, "epoch,constraint,lambda,loss").map_err(io)?;
        for rec in &self.dual.trajectory {
            for (i, name) in self.names.iter().enumerate() {
                writeln!(out, "{},{},{:e},{:e}", rec.epoch, name, rec.lambdas[i], rec.losses[i]).map_err(io)?;
            }
        }
        Ok(())
    }
}

/// Hook called once per epoch after the losses are measured and before the
/// parameters move.
pub trait TrainObserver {
    fn on_epoch(&mut self, epoch: usize, model: &Mlp, batches: &[EpochBatch], losses: &[f64]);
}

impl TrainObserver for () {
    fn on_epoch(&mut self, _: usize, _: &Mlp, _: &[EpochBatch], _: &[f64]) {}
}

/// Empirical loss of each batch (spec order).
pub fn empirical_losses<M: FieldModel + ?Sized>(
    model: &M,
    bvp: &BvpSpec,
    batches: &[EpochBatch],
) -> Result<Vec<f64>, TrainError> {
    batches
        .iter()
        .enumerate()
        .map(|(i, b)| {
            if b.terms.is_empty() {
                return Err(TrainError::EmptyBatch { constraint: format!("#{i}") });
            }
            batch::batch_loss(model, bvp, b)
        })
        .collect()
}

/// Draws one batch per constraint for `epoch` under the current `model`.
pub fn draw_batches<M: FieldModel + ?Sized>(
    model: &M,
    bvp: &BvpSpec,
    specs: &[ConstraintSpec],
    data: &TrainData,
    epoch: usize,
    seed: u64,
) -> Result<Vec<EpochBatch>, TrainError> {
    validate_constraints(bvp, specs, data, TrainMode::Scl)?;
    let fixed = batch::fixed_batches(bvp, specs, data, seed)?;
    specs.iter().enumerate().map(|(i, s)| batch::epoch_batch(model, bvp, s, i, epoch, seed, &fixed)).collect()
}

/// Checks a constraint list against the problem and the datasets.
pub fn validate_constraints(
    bvp: &BvpSpec,
    specs: &[ConstraintSpec],
    data: &TrainData,
    mode: TrainMode,
) -> Result<(), TrainError> {
    if specs.is_empty() {
        return Err(TrainError::InvalidConfig("no constraints".into()));
    }
    let objectives = specs.iter().filter(|s| s.role == Role::Objective).count();
    if objectives > 1 {
        return Err(TrainError::InvalidConfig(format!("{objectives} objectives; at most one is allowed")));
    }
    let parametric = bvp.is_parametric();
    let space = sample_space(bvp);
    for (index, s) in specs.iter().enumerate() {
        let bad = |reason: String| Err(TrainError::InvalidConstraint { index, reason });
        if !(s.tolerance.is_finite() && s.tolerance >= 0.0) {
            return bad(format!("tolerance must be >= 0, got {}", s.tolerance));
        }
        if !(s.weight.is_finite() && s.weight >= 0.0) {
            return bad(format!("weight must be >= 0, got {}", s.weight));
        }
        let sampled = matches!(s.kind, ConstraintKind::Pde | ConstraintKind::Invariance { .. });
        match &s.sampling {
            SamplingPolicy::Equispaced => {
                if sampled {
                    return bad(format!("{:?} constraints need fixed, uniform or mh sampling", s.kind));
                }
            }
            SamplingPolicy::Fixed { count } | SamplingPolicy::Uniform { count } => {
                if !sampled {
                    return bad(format!("{:?} constraints do not draw uniform points", s.kind));
                }
                if *count == 0 {
                    return bad("batch size must be at least 1".into());
                }
            }
            SamplingPolicy::Mh { proposal } => {
                if mode == TrainMode::Pinn {
                    return bad("the weighted-sum baseline uses fixed or uniform points only".into());
                }
                match s.kind {
                    ConstraintKind::Pde | ConstraintKind::Invariance { .. } => {
                        proposal.validate(space.dim()).map_err(|e| TrainError::InvalidConstraint {
                            index,
                            reason: e.to_string(),
                        })?;
                    }
                    ConstraintKind::Boundary if parametric => {
                        proposal.validate(bvp.coefficient_dim()).map_err(|e| TrainError::InvalidConstraint {
                            index,
                            reason: e.to_string(),
                        })?;
                    }
                    _ => return bad(format!("mh sampling is not supported for {:?} here", s.kind)),
                }
            }
            SamplingPolicy::Grid { coefficients, per_coefficient } => {
                if !parametric {
                    return bad("grid sampling needs a parametric problem".into());
                }
                match s.kind {
                    ConstraintKind::Pde if *per_coefficient == 0 => {
                        return bad("per_coefficient must be at least 1".into())
                    }
                    ConstraintKind::Pde | ConstraintKind::Boundary => {}
                    _ => return bad(format!("grid sampling is not supported for {:?}", s.kind)),
                }
                if coefficients.is_empty() {
                    return bad("empty coefficient grid".into());
                }
                if let Some(pi) = coefficients.iter().find(|pi| !bvp.coeffs.contains(pi)) {
                    return bad(format!("coefficients {pi:?} outside the coefficient box"));
                }
            }
        }
        match s.kind {
            ConstraintKind::Boundary => {
                let b = &s.boundary;
                if b.initial + b.periodic + b.per_face + b.shape == 0 {
                    return bad("boundary counts are all zero".into());
                }
                if crate::bvp::boundary_points(bvp, b).is_empty() {
                    return bad("the boundary point set is empty".into());
                }
            }
            ConstraintKind::Structural => {
                if s.boundary.per_face == 0 {
                    return bad("structural constraints need boundary.per_face >= 1".into());
                }
            }
            ConstraintKind::Invariance { transform } => {
                if transform >= bvp.invariances.len() {
                    return bad(format!(
                        "transform {transform} not registered ({} invariances)",
                        bvp.invariances.len()
                    ));
                }
            }
            ConstraintKind::Observation { dataset } => {
                let Some(grid) = &data.grid else {
                    return bad("observation constraints need an observation grid".into());
                };
                let Some(obs) = data.observations.get(dataset) else {
                    return bad(format!("dataset {dataset} missing ({} loaded)", data.observations.len()));
                };
                if grid.dim() != bvp.domain_dim() || obs.field.len() != grid.len() {
                    return bad(format!("dataset {dataset} does not match its grid"));
                }
                if obs.coefficients.len() != bvp.coefficient_dim() {
                    return bad(format!("dataset {dataset} has the wrong coefficient count"));
                }
            }
            ConstraintKind::Pde => {}
        }
    }
    Ok(())
}

/// Primal-dual training (or the weighted-sum baseline when
/// `config.mode` is [`TrainMode::Pinn`]).
pub fn train(
    model: Mlp,
    bvp: &BvpSpec,
    specs: &[ConstraintSpec],
    data: &TrainData,
    config: &TrainConfig,
) -> Result<TrainReport, TrainError> {
    train_observed(model, bvp, specs, data, config, &mut ())
}

/// Weighted-sum baseline: Adam on `sum_c mu_c l_c` with `mu_c` taken from
/// each spec's `weight`.
pub fn pinn_baseline(
    model: Mlp,
    bvp: &BvpSpec,
    specs: &[ConstraintSpec],
    data: &TrainData,
    config: &TrainConfig,
) -> Result<TrainReport, TrainError> {
    train(model, bvp, specs, data, &config.clone().with_mode(TrainMode::Pinn))
}

/// [`train`] with a per-epoch hook.
pub fn train_observed(
    mut model: Mlp,
    bvp: &BvpSpec,
    specs: &[ConstraintSpec],
    data: &TrainData,
    config: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<TrainReport, TrainError> {
    let start = Instant::now();
    config.validate()?;
    bvp.validate()?;
    validate_constraints(bvp, specs, data, config.mode)?;
    if model.input_width() != bvp.model_input_width() {
        return Err(TrainError::InvalidConfig(format!(
            "model takes {} inputs, the problem needs {}",
            model.input_width(),
            bvp.model_input_width()
        )));
    }

    let fixed = batch::fixed_batches(bvp, specs, data, config.seed)?;
    let tolerances: Vec<f64> = specs.iter().map(|s| s.tolerance).collect();
    let per_epoch: u64 = specs.iter().map(ConstraintSpec::pde_evaluations_per_epoch).sum();
    let mut dual = DualState::new(specs);
    let mut adam = Adam::new(model.params().len(), config.adam);
    let mut counter = 0u64;
    let mut final_losses = Vec::new();
    let mut acc_sum = vec![0.0; specs.len()];
    let mut acc_n = vec![0usize; specs.len()];

    for epoch in 0..config.epochs {
        let (lr_p, lr_d) = config.learning_rates(epoch);
        let batches: Vec<EpochBatch> = specs
            .iter()
            .enumerate()
            .map(|(i, s)| batch::epoch_batch(&model, bvp, s, i, epoch, config.seed, &fixed))
            .collect::<Result<_, _>>()?;
        for (i, b) in batches.iter().enumerate() {
            counter += b.pde_evaluations;
            if let Some(a) = b.acceptance {
                acc_sum[i] += a;
                acc_n[i] += 1;
            }
        }

        let mut losses = Vec::new();
        for inner in 0..config.inner_steps {
            let coefs: Vec<f64> = specs
                .iter()
                .enumerate()
                .map(|(i, s)| match (config.mode, s.role) {
                    (TrainMode::Pinn, _) => s.weight,
                    (TrainMode::Scl, Role::Objective) => 1.0,
                    (TrainMode::Scl, Role::Constraint) => dual.lambdas[i],
                })
                .collect();
            let (step_losses, grad) = lagrangian_gradient(&model, bvp, specs, &batches, &coefs, epoch)?;
            for (s, &l) in specs.iter().zip(&step_losses) {
                if !(l <= config.divergence_threshold) {
                    return Err(TrainError::Diverged { epoch, constraint: s.name.clone(), loss: l });
                }
            }
            if inner == 0 {
                observer.on_epoch(epoch, &model, &batches, &step_losses);
                losses = step_losses;
            }
            primal_step(&mut model, &mut adam, &grad, lr_p, epoch)?;
        }

        if config.mode == TrainMode::Scl {
            dual_step(&mut dual, &losses, &tolerances, lr_d);
        }
        if epoch % config.log_every == 0 || epoch + 1 == config.epochs {
            dual.trajectory.push(EpochRecord { epoch, losses: losses.clone(), lambdas: dual.lambdas.clone() });
        }
        final_losses = losses;
    }

    Ok(TrainReport {
        model,
        mode: config.mode,
        epochs: config.epochs,
        names: specs.iter().map(|s| s.name.clone()).collect(),
        dual,
        final_losses,
        operator_evaluations: counter,
        evaluations_per_epoch: per_epoch,
        acceptance: acc_sum.iter().zip(&acc_n).map(|(s, &n)| (n > 0).then(|| s / n as f64)).collect(),
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// Losses of every batch and the gradient of `sum_c coefs[c] * l_c`. Batches
/// with a zero coefficient are only evaluated forward.
fn lagrangian_gradient(
    model: &Mlp,
    bvp: &BvpSpec,
    specs: &[ConstraintSpec],
    batches: &[EpochBatch],
    coefs: &[f64],
    epoch: usize,
) -> Result<(Vec<f64>, ParamGradient), TrainError> {
    let mut total = ParamGradient::zeros_like(model);
    let mut losses = Vec::with_capacity(batches.len());
    for ((spec, b), &c) in specs.iter().zip(batches).zip(coefs) {
        if b.terms.is_empty() {
            return Err(TrainError::EmptyBatch { constraint: spec.name.clone() });
        }
        let diverged = |e: JetError| match e {
            JetError::NonFiniteLoss { .. } => {
                TrainError::Diverged { epoch, constraint: spec.name.clone(), loss: f64::NAN }
            }
            e => e.into(),
        };
        if c == 0.0 {
            let l = batch::batch_loss(model, bvp, b).map_err(|e| match e {
                TrainError::Jet(j) => diverged(j),
                e => e,
            })?;
            losses.push(l);
            continue;
        }
        let mut err = None;
        let lg = param_gradient(model, &b.inputs, b.order, batch::axes_for(b.order), |jets, seeds| {
            if let Err(e) = batch::apply_terms(bvp, b, jets, seeds) {
                err = Some(e);
            }
        })
        .map_err(diverged)?;
        if let Some(e) = err {
            return Err(e);
        }
        total.add_scaled(&lg.grad, c);
        losses.push(lg.loss);
    }
    Ok((losses, total))
}
