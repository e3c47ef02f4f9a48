//! Per-epoch sample batches and the loss terms built on them.

use super::{ConstraintKind, ConstraintSpec, SamplingPolicy, TrainData, TrainError};
use crate::bvp::{
    apply_invariance, boundary_data, boundary_points, box_perimeter, residual_terms, BoundaryPoint, BvpSpec,
};
use crate::jets::{FieldModel, JetBatch, JetOrder, LossSeeds};
use crate::rng::{self, Rng};
use crate::sampler::{mh_run_batched, SampleBox};

/// One additive loss term over batch rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Term {
    /// `weight * r^2` with `r` the PDE residual at `row`.
    Residual { row: usize, weight: f64 },
    /// `weight * (u(row) - target)^2`.
    Target { row: usize, target: f64, weight: f64 },
    /// `weight * (u(first) - u(second))^2`.
    Pair { first: usize, second: usize, weight: f64 },
    /// `weight * [-u(row)]_+`.
    Hinge { row: usize, weight: f64 },
}

/// Model inputs drawn for one constraint in one epoch, with the terms of its
/// empirical loss.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochBatch {
    /// Row-major model inputs.
    pub inputs: Vec<f64>,
    pub width: usize,
    pub order: JetOrder,
    pub terms: Vec<Term>,
    /// Sampled coordinates (domain point, then coefficients when they are
    /// sampled too), row-major with `sample_dim` columns.
    pub samples: Vec<f64>,
    pub sample_dim: usize,
    /// PDE operator evaluations spent drawing and using this batch.
    pub pde_evaluations: u64,
    /// Mean acceptance rate when the batch came from MH chains.
    pub acceptance: Option<f64>,
}

impl EpochBatch {
    pub fn rows(&self) -> usize {
        if self.width == 0 {
            0
        } else {
            self.inputs.len() / self.width
        }
    }

    /// Rebuilds a PDE or invariance batch from dumped samples (as found in
    /// [`EpochBatch::samples`]). Each sample gets weight `1 / n`.
    pub fn from_samples(bvp: &BvpSpec, kind: ConstraintKind, samples: &[f64]) -> Result<Self, TrainError> {
        let dim = sample_space(bvp).dim();
        if samples.len() % dim != 0 || samples.is_empty() {
            return Err(TrainError::EmptyBatch { constraint: format!("{kind:?}") });
        }
        let n = samples.len() / dim;
        let weights = vec![1.0 / n as f64; n];
        match kind {
            ConstraintKind::Pde => Ok(pde_batch(bvp, samples, &weights, 0)),
            ConstraintKind::Invariance { transform } => invariance_batch(bvp, transform, samples, &weights, 0),
            _ => Err(TrainError::InvalidConstraint {
                index: 0,
                reason: "only PDE and invariance batches are rebuilt from samples".into(),
            }),
        }
    }
}

/// Where loss contributions and jet adjoints go.
pub(crate) trait Sink {
    fn add_loss(&mut self, i: usize, v: f64);
    fn seed_value(&mut self, i: usize, d: f64);
    fn seed_grad(&mut self, i: usize, slot: usize, d: f64);
    fn seed_diag2(&mut self, i: usize, slot: usize, d: f64);
}

impl Sink for LossSeeds {
    fn add_loss(&mut self, i: usize, v: f64) {
        LossSeeds::add_loss(self, i, v);
    }
    fn seed_value(&mut self, i: usize, d: f64) {
        LossSeeds::seed_value(self, i, d);
    }
    fn seed_grad(&mut self, i: usize, slot: usize, d: f64) {
        LossSeeds::seed_grad(self, i, slot, d);
    }
    fn seed_diag2(&mut self, i: usize, slot: usize, d: f64) {
        LossSeeds::seed_diag2(self, i, slot, d);
    }
}

/// Collects contributions only; sums them in row order like [`LossSeeds`].
pub(crate) struct ForwardSink {
    pub contrib: Vec<f64>,
}

impl Sink for ForwardSink {
    fn add_loss(&mut self, i: usize, v: f64) {
        self.contrib[i] += v;
    }
    fn seed_value(&mut self, _: usize, _: f64) {}
    fn seed_grad(&mut self, _: usize, _: usize, _: f64) {}
    fn seed_diag2(&mut self, _: usize, _: usize, _: f64) {}
}

/// Splits a model input row into the domain point and its coefficients.
pub(crate) fn split_row<'a>(bvp: &'a BvpSpec, row: &'a [f64]) -> (&'a [f64], &'a [f64]) {
    let d = bvp.domain_dim();
    match bvp.fixed_coefficients() {
        Some(pi) => (&row[..d], pi),
        None if bvp.is_parametric() => (&row[..d], &row[d..]),
        None => (&row[..d], &[]),
    }
}

/// Writes every term of `batch` into `sink`.
pub(crate) fn apply_terms<S: Sink>(
    bvp: &BvpSpec,
    batch: &EpochBatch,
    jets: &JetBatch,
    sink: &mut S,
) -> Result<(), TrainError> {
    let w = batch.width;
    let second = batch.order == JetOrder::Second;
    for term in &batch.terms {
        match *term {
            Term::Residual { row, weight } => {
                let (point, pi) = split_row(bvp, &batch.inputs[row * w..(row + 1) * w]);
                let grad = [jets.grad(row, 0), jets.grad(row, 1)];
                let diag2 = if second { [jets.diag2(row, 0), jets.diag2(row, 1)] } else { [0.0; 2] };
                let r = residual_terms(bvp, jets.value(row), grad, diag2, pi, point)?;
                sink.add_loss(row, weight * r.value * r.value);
                let s = 2.0 * weight * r.value;
                sink.seed_value(row, s * r.du);
                for slot in 0..2 {
                    sink.seed_grad(row, slot, s * r.dgrad[slot]);
                    if second {
                        sink.seed_diag2(row, slot, s * r.ddiag2[slot]);
                    }
                }
            }
            Term::Target { row, target, weight } => {
                let e = jets.value(row) - target;
                sink.add_loss(row, weight * e * e);
                sink.seed_value(row, 2.0 * weight * e);
            }
            Term::Pair { first, second, weight } => {
                let e = jets.value(first) - jets.value(second);
                sink.add_loss(first, weight * e * e);
                sink.seed_value(first, 2.0 * weight * e);
                sink.seed_value(second, -2.0 * weight * e);
            }
            Term::Hinge { row, weight } => {
                let u = jets.value(row);
                sink.add_loss(row, weight * crate::bvp::structural_hinge(u));
                sink.seed_value(row, weight * crate::bvp::structural_hinge_slope(u));
            }
        }
    }
    Ok(())
}

/// Empirical loss of one batch under `model`, summed in row order.
pub(crate) fn batch_loss<M: FieldModel + ?Sized>(
    model: &M,
    bvp: &BvpSpec,
    batch: &EpochBatch,
) -> Result<f64, TrainError> {
    let axes = axes_for(batch.order);
    let jets = model.jets(&batch.inputs, batch.order, axes)?;
    let mut sink = ForwardSink { contrib: vec![0.0; batch.rows()] };
    apply_terms(bvp, batch, &jets, &mut sink)?;
    Ok(sink.contrib.iter().sum())
}

pub(crate) fn axes_for(order: JetOrder) -> &'static [usize] {
    if order == JetOrder::Value {
        &[]
    } else {
        &[0, 1]
    }
}

/// Box over which PDE and invariance samples live: the domain, extended by
/// the coefficient box in parametric mode.
pub fn sample_space(bvp: &BvpSpec) -> SampleBox {
    let mut lo = bvp.domain.lo();
    let mut hi = bvp.domain.hi();
    if bvp.is_parametric() {
        lo.extend_from_slice(&bvp.coeffs.lo);
        hi.extend_from_slice(&bvp.coeffs.hi);
    }
    SampleBox { lo, hi }
}

fn coefficient_space(bvp: &BvpSpec) -> SampleBox {
    SampleBox { lo: bvp.coeffs.lo.clone(), hi: bvp.coeffs.hi.clone() }
}

/// Samples are already model inputs (the sample space and the model input
/// share their layout).
fn pde_batch(bvp: &BvpSpec, samples: &[f64], weights: &[f64], evaluations: u64) -> EpochBatch {
    let width = bvp.model_input_width();
    let terms = weights.iter().enumerate().map(|(row, &weight)| Term::Residual { row, weight }).collect();
    EpochBatch {
        inputs: samples.to_vec(),
        width,
        order: bvp.kind.jet_order(),
        terms,
        samples: samples.to_vec(),
        sample_dim: width,
        pde_evaluations: evaluations,
        acceptance: None,
    }
}

fn invariance_batch(
    bvp: &BvpSpec,
    transform: usize,
    samples: &[f64],
    weights: &[f64],
    evaluations: u64,
) -> Result<EpochBatch, TrainError> {
    let width = bvp.model_input_width();
    let mut inputs = Vec::with_capacity(2 * samples.len());
    let mut terms = Vec::with_capacity(weights.len());
    for (i, row) in samples.chunks(width).enumerate() {
        let (point, pi) = split_row(bvp, row);
        let image = apply_invariance(bvp, transform, point, pi)?;
        inputs.extend_from_slice(row);
        bvp.push_model_input(&image, pi, &mut inputs);
        terms.push(Term::Pair { first: 2 * i, second: 2 * i + 1, weight: weights[i] });
    }
    Ok(EpochBatch {
        inputs,
        width,
        order: JetOrder::Value,
        terms,
        samples: samples.to_vec(),
        sample_dim: width,
        pde_evaluations: evaluations,
        acceptance: None,
    })
}

/// Per-sample losses used as MH targets.
fn pde_point_losses<M: FieldModel + ?Sized>(
    model: &M,
    bvp: &BvpSpec,
    points: &[f64],
    out: &mut [f64],
) -> Result<(), TrainError> {
    let order = bvp.kind.jet_order();
    let jets = model.jets(points, order, axes_for(order))?;
    let w = bvp.model_input_width();
    for (i, o) in out.iter_mut().enumerate() {
        let (point, pi) = split_row(bvp, &points[i * w..(i + 1) * w]);
        let grad = [jets.grad(i, 0), jets.grad(i, 1)];
        let diag2 = if order == JetOrder::Second { [jets.diag2(i, 0), jets.diag2(i, 1)] } else { [0.0; 2] };
        let r = residual_terms(bvp, jets.value(i), grad, diag2, pi, point)?.value;
        *o = r * r;
    }
    Ok(())
}

/// Out-of-box proposals carry loss 0 without evaluation: they are rejected
/// regardless and their transform image may not exist.
fn invariance_point_losses<M: FieldModel + ?Sized>(
    model: &M,
    bvp: &BvpSpec,
    transform: usize,
    space: &SampleBox,
    points: &[f64],
    out: &mut [f64],
) -> Result<(), TrainError> {
    let w = bvp.model_input_width();
    let mut inputs = Vec::with_capacity(2 * points.len());
    let mut inside = Vec::with_capacity(out.len());
    for row in points.chunks(w) {
        if !space.contains(row) {
            continue;
        }
        let (point, pi) = split_row(bvp, row);
        let image = apply_invariance(bvp, transform, point, pi)?;
        inputs.extend_from_slice(row);
        bvp.push_model_input(&image, pi, &mut inputs);
        inside.push(inside.len());
    }
    let u = if inputs.is_empty() { Vec::new() } else { model.values(&inputs)? };
    let mut k = 0;
    for (row, o) in points.chunks(w).zip(out.iter_mut()) {
        if space.contains(row) {
            let e = u[2 * k] - u[2 * k + 1];
            *o = e * e;
            k += 1;
        } else {
            *o = 0.0;
        }
    }
    Ok(())
}

/// Fixed point sets drawn once before training.
#[derive(Debug, Clone, Default)]
pub(crate) struct FixedSets {
    pub per_spec: Vec<Option<EpochBatch>>,
}

/// Draws `count` uniform samples of the sample space.
fn uniform_samples(space: &SampleBox, count: usize, rng: &mut Rng) -> Vec<f64> {
    let mut out = Vec::with_capacity(count * space.dim());
    for _ in 0..count {
        space.push_uniform(rng, &mut out);
    }
    out
}

fn boundary_batch(
    bvp: &BvpSpec,
    points: &[BoundaryPoint],
    coeffs: &[Vec<f64>],
    weight: f64,
) -> EpochBatch {
    let width = bvp.model_input_width();
    let mut inputs = Vec::new();
    let mut terms = Vec::new();
    let mut samples = Vec::new();
    let mut row = 0;
    for (bp, pi) in points.iter().zip(coeffs) {
        match bp {
            BoundaryPoint::Dirichlet(p) => {
                bvp.push_model_input(p, pi, &mut inputs);
                terms.push(Term::Target { row, target: boundary_data(bvp, p, pi), weight });
                samples.extend_from_slice(p);
                row += 1;
            }
            BoundaryPoint::Periodic { lo, hi } => {
                bvp.push_model_input(lo, pi, &mut inputs);
                bvp.push_model_input(hi, pi, &mut inputs);
                terms.push(Term::Pair { first: row, second: row + 1, weight });
                samples.extend_from_slice(lo);
                row += 2;
            }
        }
        samples.extend_from_slice(pi);
    }
    let sample_dim = 2 + if bvp.is_parametric() { bvp.coefficient_dim() } else { 0 };
    EpochBatch {
        inputs,
        width,
        order: JetOrder::Value,
        terms,
        samples,
        sample_dim,
        pde_evaluations: 0,
        acceptance: None,
    }
}

/// Coefficients used alongside non-sampled point sets.
fn pi_for(bvp: &BvpSpec) -> Vec<f64> {
    bvp.fixed_coefficients().map(<[f64]>::to_vec).unwrap_or_default()
}

/// Draws the batches that stay fixed for the whole run.
pub(crate) fn fixed_batches(
    bvp: &BvpSpec,
    specs: &[ConstraintSpec],
    data: &TrainData,
    seed: u64,
) -> Result<FixedSets, TrainError> {
    let mut per_spec = Vec::with_capacity(specs.len());
    for (idx, spec) in specs.iter().enumerate() {
        let mut rng = rng::substream(seed, rng::stream::FIXED_POINTS, idx as u64, 0);
        let batch = match (&spec.kind, &spec.sampling) {
            (ConstraintKind::Pde, SamplingPolicy::Fixed { count }) => {
                let s = uniform_samples(&sample_space(bvp), *count, &mut rng);
                Some(pde_batch(bvp, &s, &vec![1.0 / *count as f64; *count], *count as u64))
            }
            (ConstraintKind::Invariance { transform }, SamplingPolicy::Fixed { count }) => {
                let s = uniform_samples(&sample_space(bvp), *count, &mut rng);
                Some(invariance_batch(bvp, *transform, &s, &vec![1.0 / *count as f64; *count], 0)?)
            }
            (ConstraintKind::Boundary, SamplingPolicy::Equispaced) => {
                let pts = boundary_points(bvp, &spec.boundary);
                let coeffs = equispaced_coefficients(bvp, pts.len(), &mut rng);
                Some(boundary_batch(bvp, &pts, &coeffs, 1.0 / pts.len() as f64))
            }
            (ConstraintKind::Boundary, SamplingPolicy::Grid { coefficients, .. }) => {
                let base = boundary_points(bvp, &spec.boundary);
                let mut pts = Vec::with_capacity(base.len() * coefficients.len());
                let mut coeffs = Vec::with_capacity(pts.capacity());
                for pi in coefficients {
                    for bp in &base {
                        pts.push(*bp);
                        coeffs.push(pi.clone());
                    }
                }
                Some(boundary_batch(bvp, &pts, &coeffs, 1.0 / pts.len() as f64))
            }
            (ConstraintKind::Structural, SamplingPolicy::Equispaced) => {
                let pts = box_perimeter(&bvp.domain.space_lo, &bvp.domain.space_hi, spec.boundary.per_face);
                let coeffs = equispaced_coefficients(bvp, pts.len(), &mut rng);
                let width = bvp.model_input_width();
                let mut inputs = Vec::with_capacity(pts.len() * width);
                let mut samples = Vec::new();
                for (p, pi) in pts.iter().zip(&coeffs) {
                    bvp.push_model_input(p, pi, &mut inputs);
                    samples.extend_from_slice(p);
                    samples.extend_from_slice(pi);
                }
                let weight = 1.0 / pts.len() as f64;
                Some(EpochBatch {
                    inputs,
                    width,
                    order: JetOrder::Value,
                    terms: (0..pts.len()).map(|row| Term::Hinge { row, weight }).collect(),
                    samples,
                    sample_dim: width,
                    pde_evaluations: 0,
                    acceptance: None,
                })
            }
            (ConstraintKind::Observation { dataset }, SamplingPolicy::Equispaced) => {
                let grid = data.grid.as_ref().expect("validated observation grid");
                let obs = &data.observations[*dataset];
                let pts = grid.points();
                let width = bvp.model_input_width();
                let mut inputs = Vec::with_capacity(grid.len() * width);
                for p in pts.chunks(grid.dim()) {
                    bvp.push_model_input(p, &obs.coefficients, &mut inputs);
                }
                let weight = 1.0 / grid.len() as f64;
                Some(EpochBatch {
                    inputs: inputs.clone(),
                    width,
                    order: JetOrder::Value,
                    terms: obs
                        .field
                        .iter()
                        .enumerate()
                        .map(|(row, &target)| Term::Target { row, target, weight })
                        .collect(),
                    samples: inputs,
                    sample_dim: width,
                    pde_evaluations: 0,
                    acceptance: None,
                })
            }
            _ => None,
        };
        per_spec.push(batch);
    }
    Ok(FixedSets { per_spec })
}

/// Fixed coefficients, or one uniform draw per point in parametric mode.
fn equispaced_coefficients(bvp: &BvpSpec, n: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    if bvp.is_parametric() {
        let space = coefficient_space(bvp);
        (0..n)
            .map(|_| {
                let mut pi = Vec::with_capacity(space.dim());
                space.push_uniform(rng, &mut pi);
                pi
            })
            .collect()
    } else {
        vec![pi_for(bvp); n]
    }
}

/// Draws the batch of constraint `idx` for `epoch`.
pub(crate) fn epoch_batch<M: FieldModel + ?Sized>(
    model: &M,
    bvp: &BvpSpec,
    spec: &ConstraintSpec,
    idx: usize,
    epoch: usize,
    seed: u64,
    fixed: &FixedSets,
) -> Result<EpochBatch, TrainError> {
    if let Some(b) = &fixed.per_spec[idx] {
        return Ok(b.clone());
    }
    let mut rng = rng::substream(seed, rng::stream::EPOCH, epoch as u64, idx as u64);
    let space = sample_space(bvp);
    match (&spec.kind, &spec.sampling) {
        (ConstraintKind::Pde, SamplingPolicy::Uniform { count }) => {
            let s = uniform_samples(&space, *count, &mut rng);
            Ok(pde_batch(bvp, &s, &vec![1.0 / *count as f64; *count], *count as u64))
        }
        (ConstraintKind::Invariance { transform }, SamplingPolicy::Uniform { count }) => {
            let s = uniform_samples(&space, *count, &mut rng);
            invariance_batch(bvp, *transform, &s, &vec![1.0 / *count as f64; *count], 0)
        }
        (ConstraintKind::Pde, SamplingPolicy::Grid { coefficients, per_coefficient }) => {
            // One group of fresh domain points per listed coefficient; each
            // group contributes its own mean, and the groups are summed.
            let domain = SampleBox { lo: bvp.domain.lo(), hi: bvp.domain.hi() };
            let mut s = Vec::with_capacity(coefficients.len() * per_coefficient * space.dim());
            for pi in coefficients {
                for _ in 0..*per_coefficient {
                    domain.push_uniform(&mut rng, &mut s);
                    s.extend_from_slice(pi);
                }
            }
            let n = coefficients.len() * per_coefficient;
            Ok(pde_batch(bvp, &s, &vec![1.0 / *per_coefficient as f64; n], n as u64))
        }
        (ConstraintKind::Pde, SamplingPolicy::Mh { proposal }) => {
            let run = mh_run_batched(
                |pts, out| pde_point_losses(model, bvp, pts, out).map_err(|e| e.to_string()),
                &space,
                proposal,
                &mut rng,
            )?;
            let n = run.len();
            let mut b = pde_batch(bvp, &run.samples, &vec![1.0 / n as f64; n], run.evaluations);
            b.acceptance = Some(run.acceptance_rate());
            Ok(b)
        }
        (ConstraintKind::Invariance { transform }, SamplingPolicy::Mh { proposal }) => {
            let run = mh_run_batched(
                |pts, out| {
                    invariance_point_losses(model, bvp, *transform, &space, pts, out).map_err(|e| e.to_string())
                },
                &space,
                proposal,
                &mut rng,
            )?;
            let n = run.len();
            let mut b = invariance_batch(bvp, *transform, &run.samples, &vec![1.0 / n as f64; n], 0)?;
            b.acceptance = Some(run.acceptance_rate());
            Ok(b)
        }
        (ConstraintKind::Boundary, SamplingPolicy::Mh { proposal }) => {
            boundary_mh_batch(model, bvp, spec, proposal, &mut rng)
        }
        (kind, policy) => Err(TrainError::InvalidConstraint {
            index: idx,
            reason: format!("sampling policy {policy:?} is not supported for {kind:?}"),
        }),
    }
}

/// Boundary points stay fixed; each gets its own chain over the coefficient
/// box targeting that point's squared mismatch.
fn boundary_mh_batch<M: FieldModel + ?Sized>(
    model: &M,
    bvp: &BvpSpec,
    spec: &ConstraintSpec,
    proposal: &crate::sampler::ProposalSpec,
    rng: &mut Rng,
) -> Result<EpochBatch, TrainError> {
    let pts = boundary_points(bvp, &spec.boundary);
    let q = bvp.coefficient_dim();
    let chains = proposal.clone().with_replicas(pts.len());
    let run = mh_run_batched(
        |pis, out| {
            let mut inputs = Vec::new();
            for (bp, pi) in pts.iter().zip(pis.chunks(q)) {
                match bp {
                    BoundaryPoint::Dirichlet(p) => bvp.push_model_input(p, pi, &mut inputs),
                    BoundaryPoint::Periodic { lo, hi } => {
                        bvp.push_model_input(lo, pi, &mut inputs);
                        bvp.push_model_input(hi, pi, &mut inputs);
                    }
                }
            }
            let u = model.values(&inputs).map_err(|e| e.to_string())?;
            let mut row = 0;
            for ((bp, pi), o) in pts.iter().zip(pis.chunks(q)).zip(out.iter_mut()) {
                let e = match bp {
                    BoundaryPoint::Dirichlet(p) => {
                        row += 1;
                        u[row - 1] - boundary_data(bvp, p, pi)
                    }
                    BoundaryPoint::Periodic { .. } => {
                        row += 2;
                        u[row - 2] - u[row - 1]
                    }
                };
                *o = e * e;
            }
            Ok(())
        },
        &coefficient_space(bvp),
        &chains,
        rng,
    )?;
    // Samples are replica-major: chain c owns rows c * keep .. (c + 1) * keep.
    let keep = chains.keep;
    let mut all_pts = Vec::with_capacity(run.len());
    let mut coeffs = Vec::with_capacity(run.len());
    for (c, bp) in pts.iter().enumerate() {
        for s in 0..keep {
            all_pts.push(*bp);
            coeffs.push(run.sample(c * keep + s).to_vec());
        }
    }
    let mut b = boundary_batch(bvp, &all_pts, &coeffs, 1.0 / all_pts.len() as f64);
    b.acceptance = Some(run.acceptance_rate());
    Ok(b)
}

/// Uniform points of the sample space for diagnostics.
pub fn uniform_points(bvp: &BvpSpec, count: usize, rng: &mut Rng) -> Vec<f64> {
    uniform_samples(&sample_space(bvp), count, rng)
}
