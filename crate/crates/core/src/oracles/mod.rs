//! Reference solutions, error metrics and field export.
//!
//! Closed forms cover convection, Helmholtz and the eikonal distance to
//! analytic shapes. Reaction-diffusion has no closed form for `nu > 0`; its
//! reference is a Strang splitting solver (exact logistic reaction, exact
//! spectral diffusion) that is treated as ground truth.

mod grid;
mod io;
mod rd;


use std::f64::consts::{PI, TAU};

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bvp::{rd_initial, BvpError, BvpSpec, ProblemKind, Shape};
use crate::jets::{FieldModel, Jet, JetBatch, JetError, JetOrder};
use crate::rng;

pub use grid::{EvalGrid, GridAxis};
pub use io::{read_field_binary, write_field_binary, write_field_csv, FieldFile, FIELD_MAGIC, FIELD_VERSION};
pub use rd::{rd_reference, RD_DEFAULT_DT};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("no exact oracle for {kind}: {reason}")]
    NoOracle { kind: ProblemKind, reason: String },
    #[error("length mismatch: prediction has {pred} values, reference {reference}")]
    LengthMismatch { pred: usize, reference: usize },
    #[error("reference field is identically zero")]
    ZeroReference,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("time step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("reference solver left [0, 1] at t = {t}: u = {value}")]
    Unstable { t: f64, value: f64 },
    #[error("coefficients {pi:?} outside the coefficient box")]
    CoefficientOutOfBox { pi: Vec<f64> },
    #[error("field file: {0}")]
    Io(String),
    #[error(transparent)]
    Bvp(#[from] BvpError),
    #[error(transparent)]
    Jet(#[from] JetError),
}

/// `sin(x - beta t)`. `x` is first reduced modulo `2 pi`, so the two ends
/// of the periodic interval give identical values.
pub fn convection_exact(x: f64, t: f64, beta: f64) -> f64 {
    (x.rem_euclid(TAU) - beta * t).sin()
}

/// Jet of `sin(x - beta t)` along `(x, t)`.
pub fn convection_jet(x: f64, t: f64, beta: f64) -> Jet {
    let (s, c) = (x.rem_euclid(TAU) - beta * t).sin_cos();
    Jet { value: s, grad: vec![c, -beta * c], diag2: vec![-s, -beta * beta * s] }
}

pub fn helmholtz_exact(x: f64, y: f64, a1: f64, a2: f64) -> f64 {
    (PI * a1 * x).sin() * (PI * a2 * y).sin()
}

/// Jet of `sin(pi a1 x) sin(pi a2 y)` along `(x, y)`.
pub fn helmholtz_jet(x: f64, y: f64, a1: f64, a2: f64) -> Jet {
    let (w1, w2) = (PI * a1, PI * a2);
    let (sx, cx) = (w1 * x).sin_cos();
    let (sy, cy) = (w2 * y).sin_cos();
    Jet { value: sx * sy, grad: vec![w1 * cx * sy, w2 * sx * cy], diag2: vec![-w1 * w1 * sx * sy, -w2 * w2 * sx * sy] }
}

/// Signed distance to an analytic shape, negative inside.
pub fn eikonal_signed_distance(point: &[f64], shape: &Shape) -> Result<f64, OracleError> {
    shape.signed_distance(point).ok_or_else(|| OracleError::NoOracle {
        kind: ProblemKind::Eikonal,
        reason: "point-cloud shapes have no exact signed distance".into(),
    })
}

/// Jet of the signed distance along `(x, y)`. Undefined on the medial axis
/// (e.g. a circle's centre); the returned gradient there is zero.
pub fn eikonal_jet(point: &[f64], shape: &Shape) -> Result<Jet, OracleError> {
    let value = eikonal_signed_distance(point, shape)?;
    let p = [point[0], point[1]];
    let radial = |c: [f64; 2]| {
        let (dx, dy) = (p[0] - c[0], p[1] - c[1]);
        let r = dx.hypot(dy);
        if r == 0.0 {
            return (vec![0.0, 0.0], vec![0.0, 0.0]);
        }
        let r3 = r * r * r;
        (vec![dx / r, dy / r], vec![dy * dy / r3, dx * dx / r3])
    };
    let (grad, diag2) = match shape {
        Shape::Circle { center, .. } => radial(*center),
        Shape::TwoCircles { centers, radii } => {
            let d0 = (p[0] - centers[0][0]).hypot(p[1] - centers[0][1]) - radii[0];
            let d1 = (p[0] - centers[1][0]).hypot(p[1] - centers[1][1]) - radii[1];
            radial(if d0 <= d1 { centers[0] } else { centers[1] })
        }
        Shape::Square { center, half_side } => {
            let (ox, oy) = (p[0] - center[0], p[1] - center[1]);
            let (dx, dy) = (ox.abs() - half_side, oy.abs() - half_side);
            if dx > 0.0 && dy > 0.0 {
                let corner = [center[0] + half_side * ox.signum(), center[1] + half_side * oy.signum()];
                radial(corner)
            } else if dx > dy {
                (vec![ox.signum(), 0.0], vec![0.0, 0.0])
            } else {
                (vec![0.0, oy.signum()], vec![0.0, 0.0])
            }
        }
        Shape::PointCloud { .. } => unreachable!("rejected by eikonal_signed_distance"),
    };
    Ok(Jet { value, grad, diag2 })
}

/// Reaction-only (`nu = 0`) reaction-diffusion solution
/// `h0 e^{rho t} / (h0 e^{rho t} + 1 - h0)` with the Gaussian initial bump.
pub fn logistic_exact(x: f64, t: f64, rho: f64) -> f64 {
    let h = rd_initial(x);
    let e = (rho * t).exp();
    h * e / (h * e + 1.0 - h)
}

/// Jet of [`logistic_exact`] along `(x, t)`.
pub fn logistic_jet(x: f64, t: f64, rho: f64) -> Jet {
    let h = rd_initial(x);
    let e = (rho * t).exp();
    let d = h * e + 1.0 - h;
    let u = h * e / d;
    let w = PI / 4.0;
    let z = (x - PI) / w;
    let h1 = -z / w * h;
    let h2 = (z * z - 1.0) / (w * w) * h;
    let du_dh = e / (d * d);
    let d2u_dh2 = -2.0 * e * (e - 1.0) / (d * d * d);
    Jet {
        value: u,
        grad: vec![du_dh * h1, rho * u * (1.0 - u)],
        diag2: vec![d2u_dh2 * h1 * h1 + du_dh * h2, rho * rho * u * (1.0 - u) * (1.0 - 2.0 * u)],
    }
}

/// Viscous Burgers travelling front `c - a tanh(a (x - c t) / (2 nu))`.
pub fn burgers_front_jet(x: f64, t: f64, nu: f64, a: f64, c: f64) -> Jet {
    let k = a / (2.0 * nu);
    let s = (k * (x - c * t)).tanh();
    let sech2 = 1.0 - s * s;
    Jet {
        value: c - a * s,
        grad: vec![-a * k * sech2, a * k * c * sech2],
        diag2: vec![2.0 * a * k * k * s * sech2, 2.0 * a * k * k * c * c * s * sech2],
    }
}

/// Exact jet along the two domain axes for catalog problems with a closed form.
pub fn exact_jet(spec: &BvpSpec, point: &[f64], pi: &[f64]) -> Result<Jet, OracleError> {
    let (x, y) = (point[0], point[1]);
    match spec.kind {
        ProblemKind::Convection => Ok(convection_jet(x, y, pi[0])),
        ProblemKind::Helmholtz => Ok(helmholtz_jet(x, y, pi[0], pi[1])),
        ProblemKind::Eikonal => eikonal_jet(point, shape_of(spec)?),
        ProblemKind::ReactionDiffusion if pi[0] == 0.0 => Ok(logistic_jet(x, y, pi[1])),
        ProblemKind::ReactionDiffusion => Err(OracleError::NoOracle {
            kind: spec.kind,
            reason: "closed form only for nu = 0; use rd_reference".into(),
        }),
        ProblemKind::Burgers => Err(OracleError::NoOracle {
            kind: spec.kind,
            reason: "the catalog initial profile has no closed-form solution".into(),
        }),
    }
}

fn shape_of(spec: &BvpSpec) -> Result<&Shape, OracleError> {
    spec.shape.as_ref().ok_or_else(|| OracleError::NoOracle { kind: spec.kind, reason: "no shape".into() })
}

/// Reference values of the problem at grid points (grid axes are the domain
/// coordinates).
pub fn reference_field(spec: &BvpSpec, pi: &[f64], grid: &EvalGrid) -> Result<Vec<f64>, OracleError> {
    if pi.len() != spec.coefficient_dim() {
        return Err(BvpError::CoefficientMismatch { kind: spec.kind, expected: spec.coefficient_dim(), got: pi.len() }
            .into());
    }
    if grid.dim() != spec.domain_dim() {
        return Err(OracleError::InvalidGrid(format!(
            "grid has {} axes, {} needs {}",
            grid.dim(),
            spec.kind,
            spec.domain_dim()
        )));
    }
    let pts = grid.points();
    let field = match spec.kind {
        ProblemKind::Convection => pts.chunks(2).map(|p| convection_exact(p[0], p[1], pi[0])).collect(),
        ProblemKind::Helmholtz => pts.chunks(2).map(|p| helmholtz_exact(p[0], p[1], pi[0], pi[1])).collect(),
        ProblemKind::Eikonal => {
            let shape = shape_of(spec)?;
            pts.chunks(2).map(|p| eikonal_signed_distance(p, shape)).collect::<Result<_, _>>()?
        }
        ProblemKind::ReactionDiffusion => rd_reference(grid, pi[0], pi[1], RD_DEFAULT_DT)?,
        ProblemKind::Burgers => return Err(exact_jet(spec, &[0.0, 0.0], pi).unwrap_err()),
    };
    Ok(field)
}

/// Exact solution wrapped as a model. Inputs follow
/// [`BvpSpec::push_model_input`]; derivatives are available along the two
/// domain axes only.
#[derive(Debug, Clone)]
pub struct ExactModel {
    spec: BvpSpec,
}

impl ExactModel {
    pub fn new(spec: BvpSpec) -> Result<Self, OracleError> {
        let pi = spec.fixed_coefficients().map(<[f64]>::to_vec).unwrap_or_else(|| spec.coeffs.lo.clone());
        exact_jet(&spec, &[0.1, 0.1], &pi)?;
        Ok(Self { spec })
    }

    fn split<'a>(&'a self, input: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        let d = self.spec.domain_dim();
        match self.spec.fixed_coefficients() {
            Some(pi) => (&input[..d], pi),
            None => (&input[..d], &input[d..]),
        }
    }
}

impl FieldModel for ExactModel {
    fn input_width(&self) -> usize {
        self.spec.model_input_width()
    }

    fn jets(&self, inputs: &[f64], order: JetOrder, axes: &[usize]) -> Result<JetBatch, JetError> {
        let w = self.input_width();
        if inputs.len() % w != 0 {
            return Err(JetError::DimensionMismatch { expected: w, got: inputs.len() % w });
        }
        if let Some(&axis) = axes.iter().find(|&&a| a >= self.spec.domain_dim()) {
            return Err(JetError::AxisOutOfRange { axis, width: self.spec.domain_dim() });
        }
        let jets: Vec<Jet> = inputs
            .chunks(w)
            .map(|input| {
                let (point, pi) = self.split(input);
                let full = exact_jet(&self.spec, point, pi).map_err(|e| JetError::InvalidModel(e.to_string()))?;
                Ok(Jet {
                    value: full.value,
                    grad: axes.iter().map(|&a| full.grad[a]).collect(),
                    diag2: axes.iter().map(|&a| full.diag2[a]).collect(),
                })
            })
            .collect::<Result<_, JetError>>()?;
        JetBatch::from_jets(order, axes, &jets)
    }
}

/// `sqrt(sum (pred - ref)^2 / sum ref^2)`.
pub fn relative_l2(pred: &[f64], reference: &[f64]) -> Result<f64, OracleError> {
    if pred.len() != reference.len() {
        return Err(OracleError::LengthMismatch { pred: pred.len(), reference: reference.len() });
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (p, r) in pred.iter().zip(reference) {
        num += (p - r) * (p - r);
        den += r * r;
    }
    if den == 0.0 {
        return Err(OracleError::ZeroReference);
    }
    Ok((num / den).sqrt())
}

pub fn max_abs_error(pred: &[f64], reference: &[f64]) -> f64 {
    pred.iter().zip(reference).map(|(p, r)| (p - r).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientError {
    pub coefficients: Vec<f64>,
    pub relative_l2: f64,
    pub max_abs_error: f64,
}

/// Error of a prediction against a reference. With a coefficient grid,
/// `relative_l2` is the mean of the per-coefficient errors and
/// `max_abs_error` their maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub relative_l2: f64,
    pub max_abs_error: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_coefficient: Vec<CoefficientError>,
}

impl ErrorReport {
    pub fn single(pred: &[f64], reference: &[f64]) -> Result<Self, OracleError> {
        Ok(Self {
            relative_l2: relative_l2(pred, reference)?,
            max_abs_error: max_abs_error(pred, reference),
            per_coefficient: Vec::new(),
        })
    }

    pub fn averaged(per_coefficient: Vec<CoefficientError>) -> Self {
        let n = per_coefficient.len().max(1) as f64;
        Self {
            relative_l2: per_coefficient.iter().map(|c| c.relative_l2).sum::<f64>() / n,
            max_abs_error: per_coefficient.iter().map(|c| c.max_abs_error).fold(0.0, f64::max),
            per_coefficient,
        }
    }
}

/// Evaluates `model` against the reference on `grid` for every coefficient
/// vector in `coefficients`.
pub fn evaluate_model<M: FieldModel + ?Sized>(
    model: &M,
    spec: &BvpSpec,
    grid: &EvalGrid,
    coefficients: &[Vec<f64>],
) -> Result<ErrorReport, OracleError> {
    let pts = grid.points();
    let d = grid.dim();
    let mut per = Vec::with_capacity(coefficients.len());
    for pi in coefficients {
        let reference = reference_field(spec, pi, grid)?;
        let mut inputs = Vec::with_capacity(grid.len() * spec.model_input_width());
        for p in pts.chunks(d) {
            spec.push_model_input(p, pi, &mut inputs);
        }
        let pred = model.values(&inputs)?;
        per.push(CoefficientError {
            coefficients: pi.clone(),
            relative_l2: relative_l2(&pred, &reference)?,
            max_abs_error: max_abs_error(&pred, &reference),
        });
    }
    if !spec.is_parametric() && per.len() == 1 {
        let c = per.pop().unwrap();
        return Ok(ErrorReport { relative_l2: c.relative_l2, max_abs_error: c.max_abs_error, per_coefficient: Vec::new() });
    }
    Ok(ErrorReport::averaged(per))
}

/// One synthetic dataset entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub coefficients: Vec<f64>,
    /// Values on the grid, row-major.
    pub field: Vec<f64>,
}

/// Reference fields for each coefficient vector, optionally perturbed by
/// seeded Gaussian noise of standard deviation `noise_sd`.
pub fn synthesize_observations(
    spec: &BvpSpec,
    coefficients: &[Vec<f64>],
    grid: &EvalGrid,
    noise_sd: f64,
    seed: u64,
) -> Result<Vec<Observation>, OracleError> {
    if !(noise_sd.is_finite() && noise_sd >= 0.0) {
        return Err(OracleError::InvalidGrid(format!("noise standard deviation must be >= 0, got {noise_sd}")));
    }
    let mut rng = rng::seeded(seed, rng::stream::NOISE);
    let normal = Normal::new(0.0, noise_sd).expect("validated standard deviation");
    coefficients
        .iter()
        .map(|pi| {
            if !spec.coeffs.contains(pi) {
                return Err(OracleError::CoefficientOutOfBox { pi: pi.clone() });
            }
            let mut field = reference_field(spec, pi, grid)?;
            if noise_sd > 0.0 {
                for v in &mut field {
                    *v += normal.sample(&mut rng);
                }
            }
            Ok(Observation { coefficients: pi.clone(), field })
        })
        .collect()
}
