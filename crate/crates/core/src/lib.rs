//! Neural PDE surrogates trained as constrained learning problems.
//!
//! The crate is organised bottom-up:
//!
//! - [`jets`]: tanh MLPs with exact input derivatives (value, gradient,
//!   diagonal Hessian) and reverse-mode parameter gradients of losses built
//!   from those jets.
//! - [`bvp`]: the boundary-value problem catalog (residual operators,
//!   forcing, boundary data, invariance transforms, eikonal shapes).
//! - [`oracles`]: analytic and spectral reference solutions plus error
//!   metrics and field I/O.
//! - [`sampler`]: Metropolis-Hastings chains targeting loss-proportional
//!   collocation densities.
//! - [`trainer`]: the primal-dual loop, the weighted-sum baseline and the
//!   constraint machinery shared by both.

pub mod bvp;
pub mod jets;
pub mod oracles;
pub mod rng;
pub mod sampler;
pub mod trainer;

pub use bvp::{BvpSpec, CoefficientBox, DomainBox, ProblemKind, Shape};
pub use jets::{Jet, JetBatch, JetOrder, Mlp, ParamGradient};
pub use oracles::{ErrorReport, EvalGrid};
pub use sampler::{ChainState, MhRun, ProposalSpec, SampleBox};
pub use trainer::{
    ConstraintKind, ConstraintSpec, DualState, Role, SamplingPolicy, TrainConfig, TrainMode,
    TrainReport,
};
