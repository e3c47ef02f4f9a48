//! Metropolis-Hastings sampling of loss-proportional densities.
//!
//! The target on a box `R` is `psi(z) ~ loss(z)`. Chains start uniformly in
//! `R`, propose `z + N(0, diag(variances))`, and accept with probability
//! `min(1, loss(z') / loss(z))` when `z'` lies in `R` (rejected otherwise).
//! A zero current loss accepts any in-box proposal.
//!
//! Several independent replica chains can share one run. They advance in
//! lockstep so that each step evaluates the loss on a whole batch of
//! proposals at once.

#[cfg(test)]
mod tests;

use std::io::Write;

use rand::Rng as _;
use rand_distr::{StandardNormal, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{self, Rng};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("invalid sampler configuration: {0}")]
    InvalidSpec(String),
    #[error("negative loss {loss}")]
    NegativeLoss { loss: f64 },
    #[error("non-finite loss {value} at point {point:?}")]
    NonFiniteLoss { point: Vec<f64>, value: f64 },
    #[error("negative loss {value} at point {point:?}")]
    NegativeLossAt { point: Vec<f64>, value: f64 },
    #[error("loss evaluation failed: {0}")]
    Loss(String),
    #[error("sample dump: {0}")]
    Io(String),
}

/// Axis-aligned sampling box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SampleBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, SamplerError> {
        let b = Self { lo, hi };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.lo.len() != self.hi.len() || self.lo.is_empty() {
            return Err(SamplerError::InvalidSpec("box bounds must be nonempty and of equal length".into()));
        }
        for (i, (l, h)) in self.lo.iter().zip(&self.hi).enumerate() {
            if !(l.is_finite() && h.is_finite() && l <= h) {
                return Err(SamplerError::InvalidSpec(format!("box axis {i}: need lo <= hi, got [{l}, {h}]")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        self.lo.iter().zip(&self.hi).zip(z).all(|((l, h), v)| l <= v && v <= h)
    }

    /// Appends one uniform point.
    pub fn push_uniform(&self, rng: &mut Rng, out: &mut Vec<f64>) {
        for (l, h) in self.lo.iter().zip(&self.hi) {
            out.push(if l < h { rng.sample(Uniform::new_inclusive(*l, *h).expect("finite bounds")) } else { *l });
        }
    }
}

/// Gaussian random-walk proposal and chain lengths.
///
/// Each of the `replicas` chains holds `steps` states (the uniform start
/// plus `steps - 1` proposals) and contributes its last `keep` states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProposalSpec {
    /// Diagonal of the proposal covariance.
    pub variances: Vec<f64>,
    pub steps: usize,
    pub keep: usize,
    #[serde(default = "one")]
    pub replicas: usize,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}

impl ProposalSpec {
    pub fn new(variances: Vec<f64>, steps: usize, keep: usize) -> Self {
        Self { variances, steps, keep, replicas: 1, seed: 0 }
    }

    pub fn with_replicas(mut self, replicas: usize) -> Self {
        self.replicas = replicas;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self, dim: usize) -> Result<(), SamplerError> {
        let bad = |m: String| Err(SamplerError::InvalidSpec(m));
        if self.variances.len() != dim {
            return bad(format!("{} proposal variances for a {dim}-dimensional box", self.variances.len()));
        }
        if let Some(v) = self.variances.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return bad(format!("proposal variances must be positive, got {v}"));
        }
        if self.keep == 0 || self.keep > self.steps {
            return bad(format!("need 0 < keep <= steps, got keep {} and steps {}", self.keep, self.steps));
        }
        if self.replicas == 0 {
            return bad("replicas must be at least 1".into());
        }
        Ok(())
    }

    /// Loss evaluations one run performs.
    pub fn evaluations(&self) -> u64 {
        (self.replicas * self.steps) as u64
    }

    /// Samples one run returns.
    pub fn kept(&self) -> usize {
        self.replicas * self.keep
    }
}

/// Position and statistics of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub point: Vec<f64>,
    pub loss: f64,
    pub accepted: u64,
    pub proposed: u64,
}

/// Output of a sampling run. `samples` is `len() x dim` row-major, replica
/// by replica, each replica's states in chain order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MhRun {
    pub dim: usize,
    pub samples: Vec<f64>,
    /// Loss at each kept sample.
    pub losses: Vec<f64>,
    pub chains: Vec<ChainState>,
    pub evaluations: u64,
}

impl MhRun {
    pub fn len(&self) -> usize {
        self.losses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.losses.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.samples[i * self.dim..(i + 1) * self.dim]
    }

    pub fn accepted(&self) -> u64 {
        self.chains.iter().map(|c| c.accepted).sum()
    }

    pub fn proposed(&self) -> u64 {
        self.chains.iter().map(|c| c.proposed).sum()
    }

    pub fn acceptance_rate(&self) -> f64 {
        let p = self.proposed();
        if p == 0 {
            0.0
        } else {
            self.accepted() as f64 / p as f64
        }
    }
}

/// `min(1, loss_prop / loss_cur)` inside the box, 0 outside. A zero current
/// loss gives 1.
pub fn acceptance_prob(loss_prop: f64, loss_cur: f64, in_domain: bool) -> Result<f64, SamplerError> {
    for l in [loss_prop, loss_cur] {
        if !(l >= 0.0) || !l.is_finite() {
            return Err(SamplerError::NegativeLoss { loss: l });
        }
    }
    if !in_domain {
        return Ok(0.0);
    }
    if loss_cur == 0.0 {
        return Ok(1.0);
    }
    Ok((loss_prop / loss_cur).min(1.0))
}

/// Single chain over `bx`, seeded by `proposal.seed`.
pub fn mh_run<F>(mut loss: F, bx: &SampleBox, proposal: &ProposalSpec) -> Result<MhRun, SamplerError>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut rng = rng::seeded(proposal.seed, rng::stream::SAMPLER);
    let d = bx.dim();
    mh_run_batched(
        |points, out| {
            for (p, o) in points.chunks(d).zip(out.iter_mut()) {
                *o = loss(p);
            }
            Ok(())
        },
        bx,
        proposal,
        &mut rng,
    )
}

/// Lockstep replica chains with batched loss evaluation.
///
/// `loss(points, out)` fills `out[i]` with the loss at the `i`-th row of
/// `points`. Out-of-box proposals are evaluated too (and then rejected), so
/// every run costs exactly [`ProposalSpec::evaluations`] loss calls.
pub fn mh_run_batched<F>(mut loss: F, bx: &SampleBox, proposal: &ProposalSpec, rng: &mut Rng) -> Result<MhRun, SamplerError>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<(), String>,
{
    bx.validate()?;
    let d = bx.dim();
    proposal.validate(d)?;
    let (r, n, keep) = (proposal.replicas, proposal.steps, proposal.keep);
    let sd: Vec<f64> = proposal.variances.iter().map(|v| v.sqrt()).collect();
    let first_kept = n - keep;

    let mut cur = Vec::with_capacity(r * d);
    for _ in 0..r {
        bx.push_uniform(rng, &mut cur);
    }
    let mut cur_loss = vec![0.0; r];
    loss(&cur, &mut cur_loss).map_err(SamplerError::Loss)?;
    for (i, &l) in cur_loss.iter().enumerate() {
        check_loss(&cur[i * d..(i + 1) * d], l)?;
    }

    let mut samples = vec![0.0; r * keep * d];
    let mut losses = vec![0.0; r * keep];
    let mut store = |step: usize, cur: &[f64], cur_loss: &[f64]| {
        if step >= first_kept {
            let s = step - first_kept;
            for c in 0..r {
                let at = c * keep + s;
                samples[at * d..(at + 1) * d].copy_from_slice(&cur[c * d..(c + 1) * d]);
                losses[at] = cur_loss[c];
            }
        }
    };
    store(0, &cur, &cur_loss);

    let mut prop = vec![0.0; r * d];
    let mut prop_loss = vec![0.0; r];
    let mut accepted = vec![0u64; r];
    for step in 1..n {
        for (p, (c, s)) in prop.iter_mut().zip(cur.iter().zip(sd.iter().cycle())) {
            let z: f64 = rng.sample(StandardNormal);
            *p = c + s * z;
        }
        loss(&prop, &mut prop_loss).map_err(SamplerError::Loss)?;
        for c in 0..r {
            let z = &prop[c * d..(c + 1) * d];
            let inside = bx.contains(z);
            let u: f64 = rng.random();
            if !inside {
                continue;
            }
            check_loss(z, prop_loss[c])?;
            let p = acceptance_prob(prop_loss[c], cur_loss[c], true)?;
            if u < p {
                cur[c * d..(c + 1) * d].copy_from_slice(z);
                cur_loss[c] = prop_loss[c];
                accepted[c] += 1;
            }
        }
        store(step, &cur, &cur_loss);
    }

    let chains = (0..r)
        .map(|c| ChainState {
            point: cur[c * d..(c + 1) * d].to_vec(),
            loss: cur_loss[c],
            accepted: accepted[c],
            proposed: (n - 1) as u64,
        })
        .collect();
    Ok(MhRun { dim: d, samples, losses, chains, evaluations: proposal.evaluations() })
}

fn check_loss(point: &[f64], value: f64) -> Result<(), SamplerError> {
    if !value.is_finite() {
        return Err(SamplerError::NonFiniteLoss { point: point.to_vec(), value });
    }
    if value < 0.0 {
        return Err(SamplerError::NegativeLossAt { point: point.to_vec(), value });
    }
    Ok(())
}

/// Fixed-bin histogram of one coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(values: impl IntoIterator<Item = f64>, lo: f64, hi: f64, bins: usize) -> Self {
        let mut counts = vec![0u64; bins];
        let width = (hi - lo) / bins as f64;
        for v in values {
            let b = if width > 0.0 { ((v - lo) / width).floor() } else { 0.0 };
            let b = (b.max(0.0) as usize).min(bins - 1);
            counts[b] += 1;
        }
        Self { lo, hi, counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Bin probabilities.
    pub fn frequencies(&self) -> Vec<f64> {
        let t = self.total().max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / t).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub acceptance_rate: f64,
    pub samples: usize,
    pub histograms: Vec<Histogram>,
}

/// Acceptance rate and per-axis histograms over the sampling box.
pub fn chain_diagnostics(run: &MhRun, bx: &SampleBox, bins: usize) -> ChainDiagnostics {
    let bins = bins.max(1);
    let histograms = (0..run.dim)
        .map(|a| Histogram::new((0..run.len()).map(|i| run.sample(i)[a]), bx.lo[a], bx.hi[a], bins))
        .collect();
    ChainDiagnostics { acceptance_rate: run.acceptance_rate(), samples: run.len(), histograms }
}

/// Writes kept samples as CSV: `epoch,<axis names...>`, one row per sample.
pub fn write_samples_csv<W: Write>(mut out: W, run: &MhRun, axis_names: &[&str], epoch: usize, header: bool) -> Result<(), SamplerError> {
    let io = |e: std::io::Error| SamplerError::Io(e.to_string());
    if axis_names.len() != run.dim {
        return Err(SamplerError::InvalidSpec(format!("{} axis names for {} coordinates", axis_names.len(), run.dim)));
    }
    if header {
        writeln!(out, "epoch,{}", axis_names.join(",")).map_err(io)?;
    }
    for i in 0..run.len() {
        let coords: Vec<String> = run.sample(i).iter().map(|v| v.to_string()).collect();
        writeln!(out, "{epoch},{}", coords.join(",")).map_err(io)?;
    }
    Ok(())
}
