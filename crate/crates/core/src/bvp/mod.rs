//! Boundary-value problem catalog.
//!
//! Every catalog entry lives on a two-dimensional domain: `(x, t)` for the
//! transient problems and `(x, y)` for the stationary ones. Model inputs are
//! the domain coordinates followed, in parametric mode, by the coefficients.
//! Residuals read derivatives from jets whose first two axes are the domain
//! coordinates.

mod shape;

#[cfg(test)]
mod tests;

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jets::{FieldModel, Jet, JetError, JetOrder};

pub use shape::{parse_point_cloud, Shape};

/// Tolerance used when deciding whether a point sits on a boundary.
pub const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BvpError {
    #[error("{kind} expects {expected} coefficient(s), got {got}")]
    CoefficientMismatch { kind: ProblemKind, expected: usize, got: usize },
    #[error("{kind} needs a jet of order {needed} along both domain axes")]
    JetTooShallow { kind: ProblemKind, needed: u8 },
    #[error("point {point:?} is not on the boundary of the {kind} problem")]
    NotOnBoundary { kind: ProblemKind, point: Vec<f64> },
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid coefficient box: {0}")]
    InvalidCoefficients(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("invariance transform {index} out of range ({count} registered)")]
    NoSuchTransform { index: usize, count: usize },
    #[error("invariance transform cannot be wrapped into the domain: {0}")]
    TransformOutOfDomain(String),
    #[error("shape: {0}")]
    Shape(String),
    #[error(transparent)]
    Jet(#[from] JetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Convection,
    ReactionDiffusion,
    Eikonal,
    Helmholtz,
    /// Residual-only entry; there is no reference solution for it.
    Burgers,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 5] =
        [Self::Convection, Self::ReactionDiffusion, Self::Eikonal, Self::Helmholtz, Self::Burgers];

    pub fn name(self) -> &'static str {
        match self {
            Self::Convection => "convection",
            Self::ReactionDiffusion => "reaction_diffusion",
            Self::Eikonal => "eikonal",
            Self::Helmholtz => "helmholtz",
            Self::Burgers => "burgers",
        }
    }

    /// Number of PDE coefficients `pi`.
    pub fn coefficient_dim(self) -> usize {
        match self {
            Self::Convection | Self::Burgers => 1,
            Self::ReactionDiffusion | Self::Helmholtz => 2,
            Self::Eikonal => 0,
        }
    }

    pub fn coefficient_names(self) -> &'static [&'static str] {
        match self {
            Self::Convection => &["beta"],
            Self::ReactionDiffusion => &["nu", "rho"],
            Self::Helmholtz => &["a1", "a2"],
            Self::Burgers => &["nu"],
            Self::Eikonal => &[],
        }
    }

    /// Jet order the residual needs.
    pub fn jet_order(self) -> JetOrder {
        match self {
            Self::Convection | Self::Eikonal => JetOrder::First,
            _ => JetOrder::Second,
        }
    }

    pub fn is_transient(self) -> bool {
        !matches!(self, Self::Eikonal | Self::Helmholtz)
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Where the boundary data lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    /// Initial condition at `t = 0` plus periodic spatial faces.
    PeriodicSpace,
    /// Dirichlet data on every face of the spatial box.
    DirichletFaces,
    /// Dirichlet data on an embedded shape `dS`.
    EmbeddedShape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainBox {
    pub space_lo: Vec<f64>,
    pub space_hi: Vec<f64>,
    /// Final time; zero for stationary problems.
    pub time_hi: f64,
    pub boundary: BoundaryKind,
}

impl DomainBox {
    pub fn validate(&self) -> Result<(), BvpError> {
        if self.space_lo.len() != self.space_hi.len() || self.space_lo.is_empty() {
            return Err(BvpError::InvalidDomain("space bounds must be nonempty and of equal length".into()));
        }
        for (i, (lo, hi)) in self.space_lo.iter().zip(&self.space_hi).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(BvpError::InvalidDomain(format!("space axis {i}: need lo < hi, got [{lo}, {hi}]")));
            }
        }
        if !(self.time_hi.is_finite() && self.time_hi >= 0.0) {
            return Err(BvpError::InvalidDomain(format!("time_hi must be >= 0, got {}", self.time_hi)));
        }
        if self.boundary == BoundaryKind::PeriodicSpace && self.time_hi == 0.0 {
            return Err(BvpError::InvalidDomain("periodic-space problems need time_hi > 0".into()));
        }
        Ok(())
    }

    pub fn is_transient(&self) -> bool {
        self.time_hi > 0.0
    }

    /// Number of domain coordinates (space plus time when transient).
    pub fn dim(&self) -> usize {
        self.space_lo.len() + usize::from(self.is_transient())
    }

    pub fn lo(&self) -> Vec<f64> {
        let mut v = self.space_lo.clone();
        if self.is_transient() {
            v.push(0.0);
        }
        v
    }

    pub fn hi(&self) -> Vec<f64> {
        let mut v = self.space_hi.clone();
        if self.is_transient() {
            v.push(self.time_hi);
        }
        v
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && self.lo().iter().zip(self.hi()).zip(point).all(|((lo, hi), p)| *lo <= *p && *p <= hi)
    }
}

/// Box `Pi` of admissible coefficients. In single-problem mode `fixed` is
/// set, `lo == hi` holds the coefficient values and the model does not take
/// coefficients as input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    #[serde(default)]
    pub fixed: bool,
}

impl CoefficientBox {
    pub fn fixed(values: &[f64]) -> Self {
        Self { lo: values.to_vec(), hi: values.to_vec(), fixed: true }
    }

    pub fn range(lo: &[f64], hi: &[f64]) -> Self {
        Self { lo: lo.to_vec(), hi: hi.to_vec(), fixed: false }
    }

    pub fn none() -> Self {
        Self::fixed(&[])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn validate(&self) -> Result<(), BvpError> {
        if self.lo.len() != self.hi.len() {
            return Err(BvpError::InvalidCoefficients("lo and hi differ in length".into()));
        }
        for (i, (lo, hi)) in self.lo.iter().zip(&self.hi).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(BvpError::InvalidCoefficients(format!("axis {i}: need lo <= hi, got [{lo}, {hi}]")));
            }
            if self.fixed && lo != hi {
                return Err(BvpError::InvalidCoefficients(format!("axis {i}: fixed coefficients need lo == hi")));
            }
        }
        Ok(())
    }

    pub fn contains(&self, pi: &[f64]) -> bool {
        pi.len() == self.dim() && self.lo.iter().zip(&self.hi).zip(pi).all(|((lo, hi), p)| lo <= p && p <= hi)
    }
}

/// Symmetry `gamma(pi)` of the solution, acting on domain points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Invariance {
    /// `t -> t + 2 pi / beta` for convection, wrapped back into `(0, T]`.
    ConvectionPeriod,
}

/// Named initial profile for Burgers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case", deny_unknown_fields)]
pub enum BurgersInitial {
    /// `amplitude * sin(2 pi x / L)` on a domain of length `L`.
    Sine { amplitude: f64 },
}

impl Default for BurgersInitial {
    fn default() -> Self {
        Self::Sine { amplitude: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BvpSpec {
    pub kind: ProblemKind,
    pub domain: DomainBox,
    pub coeffs: CoefficientBox,
    /// Helmholtz wave number `k`; ignored elsewhere.
    #[serde(default = "default_wave_number")]
    pub wave_number: f64,
    /// Eikonal zero-level shape.
    #[serde(default)]
    pub shape: Option<Shape>,
    #[serde(default)]
    pub burgers_initial: BurgersInitial,
    #[serde(default)]
    pub invariances: Vec<Invariance>,
}

fn default_wave_number() -> f64 {
    1.0
}

impl BvpSpec {
    fn base(kind: ProblemKind, domain: DomainBox, coeffs: CoefficientBox) -> Self {
        Self {
            kind,
            domain,
            coeffs,
            wave_number: default_wave_number(),
            shape: None,
            burgers_initial: BurgersInitial::default(),
            invariances: Vec::new(),
        }
    }

    /// `u_t + beta u_x = 0` on `(0, 2 pi) x (0, 1]`, `u(x, 0) = sin x`, periodic.
    pub fn convection(coeffs: CoefficientBox) -> Result<Self, BvpError> {
        let spec = Self::base(ProblemKind::Convection, periodic_domain(2.0 * PI, 1.0), coeffs);
        spec.validate()?;
        Ok(spec)
    }

    /// `u_t - nu u_xx - rho u (1 - u) = 0`, Gaussian bump initial data, periodic.
    pub fn reaction_diffusion(coeffs: CoefficientBox) -> Result<Self, BvpError> {
        let spec = Self::base(ProblemKind::ReactionDiffusion, periodic_domain(2.0 * PI, 1.0), coeffs);
        spec.validate()?;
        Ok(spec)
    }

    /// `|grad u| = 1` on `(-1, 1)^2` with `u = 0` on the shape boundary.
    pub fn eikonal(shape: Shape) -> Result<Self, BvpError> {
        let domain = DomainBox {
            space_lo: vec![-1.0, -1.0],
            space_hi: vec![1.0, 1.0],
            time_hi: 0.0,
            boundary: BoundaryKind::EmbeddedShape,
        };
        let mut spec = Self::base(ProblemKind::Eikonal, domain, CoefficientBox::none());
        spec.shape = Some(shape);
        spec.validate()?;
        Ok(spec)
    }

    /// `lap u + k^2 u = tau` on `[0, 1]^2` with the manufactured solution as
    /// boundary data.
    pub fn helmholtz(coeffs: CoefficientBox, wave_number: f64) -> Result<Self, BvpError> {
        let domain = DomainBox {
            space_lo: vec![0.0, 0.0],
            space_hi: vec![1.0, 1.0],
            time_hi: 0.0,
            boundary: BoundaryKind::DirichletFaces,
        };
        let mut spec = Self::base(ProblemKind::Helmholtz, domain, coeffs);
        spec.wave_number = wave_number;
        spec.validate()?;
        Ok(spec)
    }

    /// `u_t + u u_x - nu u_xx = 0` on `(0, 1) x (0, 1]`, periodic. Experimental.
    pub fn burgers(coeffs: CoefficientBox) -> Result<Self, BvpError> {
        let spec = Self::base(ProblemKind::Burgers, periodic_domain(1.0, 1.0), coeffs);
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_invariance(mut self, inv: Invariance) -> Result<Self, BvpError> {
        self.invariances.push(inv);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), BvpError> {
        self.domain.validate()?;
        self.coeffs.validate()?;
        let expected = self.kind.coefficient_dim();
        if self.coeffs.dim() != expected {
            return Err(BvpError::CoefficientMismatch { kind: self.kind, expected, got: self.coeffs.dim() });
        }
        if self.domain.dim() != 2 {
            return Err(BvpError::InvalidDomain("catalog problems live on two-dimensional domains".into()));
        }
        if self.kind.is_transient() != self.domain.is_transient() {
            return Err(BvpError::InvalidDomain(format!(
                "{} is {}transient but time_hi = {}",
                self.kind,
                if self.kind.is_transient() { "" } else { "not " },
                self.domain.time_hi
            )));
        }
        let expected_boundary = match self.kind {
            ProblemKind::Eikonal => BoundaryKind::EmbeddedShape,
            ProblemKind::Helmholtz => BoundaryKind::DirichletFaces,
            _ => BoundaryKind::PeriodicSpace,
        };
        if self.domain.boundary != expected_boundary {
            return Err(BvpError::InvalidDomain(format!(
                "{} needs boundary {expected_boundary:?}, got {:?}",
                self.kind, self.domain.boundary
            )));
        }
        match self.kind {
            ProblemKind::Helmholtz if !(self.wave_number.is_finite() && self.wave_number > 0.0) => {
                return Err(BvpError::InvalidProblem(format!("wave_number must be > 0, got {}", self.wave_number)));
            }
            ProblemKind::Eikonal => match &self.shape {
                None => return Err(BvpError::InvalidProblem("eikonal needs a shape".into())),
                Some(s) => s.validate()?,
            },
            _ => {}
        }
        if self.kind == ProblemKind::Convection && self.coeffs.lo.first().is_some_and(|b| *b < 0.0) {
            return Err(BvpError::InvalidCoefficients("convection speed beta must be >= 0".into()));
        }
        for inv in &self.invariances {
            match inv {
                Invariance::ConvectionPeriod if self.kind != ProblemKind::Convection => {
                    return Err(BvpError::InvalidProblem(format!("{inv:?} only applies to convection")));
                }
                Invariance::ConvectionPeriod => {
                    if !(self.coeffs.lo[0] > 0.0) {
                        return Err(BvpError::InvalidProblem("convection period needs beta > 0".into()));
                    }
                    let longest = 2.0 * PI / self.coeffs.lo[0];
                    if longest > self.domain.time_hi {
                        return Err(BvpError::InvalidProblem(format!(
                            "period 2 pi / beta = {longest} exceeds T = {}; the shift cannot be wrapped",
                            self.domain.time_hi
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn domain_dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn coefficient_dim(&self) -> usize {
        self.coeffs.dim()
    }

    /// True when the model takes the coefficients as extra inputs.
    pub fn is_parametric(&self) -> bool {
        !self.coeffs.fixed && self.coeffs.dim() > 0
    }

    /// Coefficients in single-problem mode.
    pub fn fixed_coefficients(&self) -> Option<&[f64]> {
        self.coeffs.fixed.then_some(self.coeffs.lo.as_slice())
    }

    pub fn model_input_width(&self) -> usize {
        self.domain_dim() + if self.is_parametric() { self.coefficient_dim() } else { 0 }
    }

    /// Appends the model input for `point` under coefficients `pi`.
    pub fn push_model_input(&self, point: &[f64], pi: &[f64], out: &mut Vec<f64>) {
        out.extend_from_slice(&point[..self.domain_dim()]);
        if self.is_parametric() {
            out.extend_from_slice(pi);
        }
    }

    /// Shift and scale mapping the model input box onto `[-1, 1]`. Degenerate
    /// axes get unit scale.
    pub fn input_map(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = self.domain.lo();
        let mut hi = self.domain.hi();
        if self.is_parametric() {
            lo.extend_from_slice(&self.coeffs.lo);
            hi.extend_from_slice(&self.coeffs.hi);
        }
        lo.iter()
            .zip(&hi)
            .map(|(l, h)| if h > l { (0.5 * (l + h), 2.0 / (h - l)) } else { (*l, 1.0) })
            .unzip()
    }

    /// Jet axes holding the domain coordinates.
    pub fn jet_axes(&self) -> [usize; 2] {
        [0, 1]
    }

    fn check_coefficients(&self, pi: &[f64]) -> Result<(), BvpError> {
        let expected = self.kind.coefficient_dim();
        if pi.len() != expected {
            return Err(BvpError::CoefficientMismatch { kind: self.kind, expected, got: pi.len() });
        }
        Ok(())
    }
}

fn periodic_domain(length: f64, time_hi: f64) -> DomainBox {
    DomainBox { space_lo: vec![0.0], space_hi: vec![length], time_hi, boundary: BoundaryKind::PeriodicSpace }
}

/// Residual value and its partial derivatives with respect to the jet
/// entries it reads (`u`, first derivatives, diagonal second derivatives
/// along the two domain axes).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualTerms {
    pub value: f64,
    pub du: f64,
    pub dgrad: [f64; 2],
    pub ddiag2: [f64; 2],
}

/// Residual with partials, from raw jet components.
pub fn residual_terms(
    spec: &BvpSpec,
    u: f64,
    grad: [f64; 2],
    diag2: [f64; 2],
    pi: &[f64],
    point: &[f64],
) -> Result<ResidualTerms, BvpError> {
    spec.check_coefficients(pi)?;
    let [g0, g1] = grad;
    let [h0, h1] = diag2;
    let t = match spec.kind {
        ProblemKind::Convection => {
            let beta = pi[0];
            ResidualTerms { value: g1 + beta * g0, du: 0.0, dgrad: [beta, 1.0], ddiag2: [0.0, 0.0] }
        }
        ProblemKind::ReactionDiffusion => {
            let (nu, rho) = (pi[0], pi[1]);
            ResidualTerms {
                value: g1 - nu * h0 - rho * u * (1.0 - u),
                du: -rho * (1.0 - 2.0 * u),
                dgrad: [0.0, 1.0],
                ddiag2: [-nu, 0.0],
            }
        }
        ProblemKind::Eikonal => {
            let norm = g0.hypot(g1);
            let dgrad = if norm > 0.0 { [g0 / norm, g1 / norm] } else { [0.0, 0.0] };
            ResidualTerms { value: norm - 1.0, du: 0.0, dgrad, ddiag2: [0.0, 0.0] }
        }
        ProblemKind::Helmholtz => {
            let k2 = spec.wave_number * spec.wave_number;
            ResidualTerms {
                value: h0 + h1 + k2 * u - forcing(spec, point, pi),
                du: k2,
                dgrad: [0.0, 0.0],
                ddiag2: [1.0, 1.0],
            }
        }
        ProblemKind::Burgers => {
            let nu = pi[0];
            ResidualTerms { value: g1 + u * g0 - nu * h0, du: g0, dgrad: [u, 1.0], ddiag2: [-nu, 0.0] }
        }
    };
    Ok(t)
}

/// Signed PDE residual `D_pi[u](point) - tau(point, pi)`.
///
/// `jet.grad` and `jet.diag2` must start with the two domain axes.
pub fn pde_residual(spec: &BvpSpec, jet: &Jet, pi: &[f64], point: &[f64]) -> Result<f64, BvpError> {
    let needed = spec.kind.jet_order();
    let too_shallow = BvpError::JetTooShallow { kind: spec.kind, needed: needed.level() };
    if jet.grad.len() < 2 {
        return Err(too_shallow);
    }
    let diag2 = if needed == JetOrder::Second {
        if jet.diag2.len() < 2 {
            return Err(too_shallow);
        }
        [jet.diag2[0], jet.diag2[1]]
    } else {
        [0.0, 0.0]
    };
    Ok(residual_terms(spec, jet.value, [jet.grad[0], jet.grad[1]], diag2, pi, point)?.value)
}

/// Forcing `tau(point, pi)`; nonzero only for Helmholtz.
///
/// # Panics
/// For Helmholtz when `pi` has fewer than two entries.
pub fn forcing(spec: &BvpSpec, point: &[f64], pi: &[f64]) -> f64 {
    match spec.kind {
        ProblemKind::Helmholtz => {
            let (a1, a2) = (pi[0], pi[1]);
            let k2 = spec.wave_number * spec.wave_number;
            (k2 - PI * PI * a1 * a1 - PI * PI * a2 * a2) * (PI * a1 * point[0]).sin() * (PI * a2 * point[1]).sin()
        }
        _ => 0.0,
    }
}

/// Boundary data `h(point, pi)`. Evaluated off the boundary it returns the
/// closed-form expression anyway.
pub fn boundary_data(spec: &BvpSpec, point: &[f64], pi: &[f64]) -> f64 {
    let x = point[0];
    match spec.kind {
        ProblemKind::Convection => x.sin(),
        ProblemKind::ReactionDiffusion => rd_initial(x),
        ProblemKind::Eikonal => 0.0,
        ProblemKind::Helmholtz => (PI * pi[0] * x).sin() * (PI * pi[1] * point[1]).sin(),
        ProblemKind::Burgers => match spec.burgers_initial {
            BurgersInitial::Sine { amplitude } => {
                let len = spec.domain.space_hi[0] - spec.domain.space_lo[0];
                amplitude * (2.0 * PI * (x - spec.domain.space_lo[0]) / len).sin()
            }
        },
    }
}

/// Reaction-diffusion initial profile `exp(-(x - pi)^2 / (2 (pi/4)^2))`.
pub fn rd_initial(x: f64) -> f64 {
    let z = (x - PI) / (PI / 4.0);
    (-0.5 * z * z).exp()
}

/// Whether `point` carries Dirichlet or initial data.
pub fn on_boundary(spec: &BvpSpec, point: &[f64]) -> bool {
    if point.len() != spec.domain_dim() || !spec.domain.contains(point) {
        return false;
    }
    match spec.domain.boundary {
        BoundaryKind::PeriodicSpace => point[1].abs() <= BOUNDARY_TOL,
        BoundaryKind::DirichletFaces => spec
            .domain
            .space_lo
            .iter()
            .zip(&spec.domain.space_hi)
            .zip(point)
            .any(|((lo, hi), p)| (p - lo).abs() <= BOUNDARY_TOL || (p - hi).abs() <= BOUNDARY_TOL),
        BoundaryKind::EmbeddedShape => {
            spec.shape.as_ref().is_some_and(|s| s.distance_to_boundary(point) <= BOUNDARY_TOL)
        }
    }
}

/// Signed mismatch `u - h` at a Dirichlet or initial-data point.
pub fn boundary_residual(spec: &BvpSpec, u_value: f64, point: &[f64], pi: &[f64]) -> Result<f64, BvpError> {
    spec.check_coefficients(pi)?;
    if !on_boundary(spec, point) {
        return Err(BvpError::NotOnBoundary { kind: spec.kind, point: point.to_vec() });
    }
    Ok(u_value - boundary_data(spec, point, pi))
}

/// Periodic mismatch between the two ends of a matched pair.
pub fn periodic_residual(u_lo: f64, u_hi: f64) -> f64 {
    u_lo - u_hi
}

/// `[-u]_+`, the hinge that penalises negative values.
pub fn structural_hinge(u_value: f64) -> f64 {
    (-u_value).max(0.0)
}

/// Derivative of [`structural_hinge`] (taking 0 at the kink).
pub fn structural_hinge_slope(u_value: f64) -> f64 {
    if u_value < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// A point where boundary data is enforced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPoint {
    Dirichlet([f64; 2]),
    /// Matched points on opposite periodic faces.
    Periodic { lo: [f64; 2], hi: [f64; 2] },
}

/// Point counts used by [`boundary_points`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryCounts {
    /// Initial-condition points on `t = 0`, endpoints included.
    pub initial: usize,
    /// Periodic pairs at equally spaced `t` in `(0, T]`.
    pub periodic: usize,
    /// Points per face of a Dirichlet box.
    pub per_face: usize,
    /// Points on an embedded shape.
    pub shape: usize,
}

impl Default for BoundaryCounts {
    fn default() -> Self {
        Self { initial: 256, periodic: 100, per_face: 256, shape: 256 }
    }
}

/// Deterministic equispaced boundary points.
pub fn boundary_points(spec: &BvpSpec, counts: &BoundaryCounts) -> Vec<BoundaryPoint> {
    let d = &spec.domain;
    match d.boundary {
        BoundaryKind::PeriodicSpace => {
            let (lo, hi, t_hi) = (d.space_lo[0], d.space_hi[0], d.time_hi);
            let mut pts: Vec<BoundaryPoint> =
                linspace(lo, hi, counts.initial).into_iter().map(|x| BoundaryPoint::Dirichlet([x, 0.0])).collect();
            pts.extend((1..=counts.periodic).map(|i| {
                let t = t_hi * i as f64 / counts.periodic as f64;
                BoundaryPoint::Periodic { lo: [lo, t], hi: [hi, t] }
            }));
            pts
        }
        BoundaryKind::DirichletFaces => {
            box_perimeter(&d.space_lo, &d.space_hi, counts.per_face).into_iter().map(BoundaryPoint::Dirichlet).collect()
        }
        BoundaryKind::EmbeddedShape => spec
            .shape
            .as_ref()
            .map(|s| s.boundary_points(counts.shape))
            .unwrap_or_default()
            .into_iter()
            .map(BoundaryPoint::Dirichlet)
            .collect(),
    }
}

/// `per_face` equispaced points on each side of a 2D box, walking the
/// perimeter counter-clockwise from `lo`; corners appear once.
pub fn box_perimeter(lo: &[f64], hi: &[f64], per_face: usize) -> Vec<[f64; 2]> {
    let corners = [[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]];
    let mut pts = Vec::with_capacity(4 * per_face);
    for side in 0..4 {
        let (a, b) = (corners[side], corners[(side + 1) % 4]);
        for i in 0..per_face {
            let s = i as f64 / per_face as f64;
            pts.push([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]);
        }
    }
    pts
}

/// `n` equally spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect(),
    }
}

/// Image of `point` under invariance `index`, wrapped back into the domain.
///
/// For the convection period the shifted time `t + P` (`P = 2 pi / beta`)
/// is reduced by whole periods until it lies in `(0, T]`; the exact solution
/// is `P`-periodic in time, so the image carries the same value.
pub fn apply_invariance(spec: &BvpSpec, index: usize, point: &[f64], pi: &[f64]) -> Result<[f64; 2], BvpError> {
    let inv =
        spec.invariances.get(index).ok_or(BvpError::NoSuchTransform { index, count: spec.invariances.len() })?;
    spec.check_coefficients(pi)?;
    match inv {
        Invariance::ConvectionPeriod => {
            let beta = pi[0];
            let t_hi = spec.domain.time_hi;
            if !(beta > 0.0) {
                return Err(BvpError::TransformOutOfDomain(format!("beta = {beta} has no finite period")));
            }
            let period = 2.0 * PI / beta;
            let whole = (t_hi / period).floor();
            if whole < 1.0 {
                return Err(BvpError::TransformOutOfDomain(format!("period {period} exceeds T = {t_hi}")));
            }
            let mut t = point[1] + period;
            if t > t_hi {
                t -= whole * period;
            }
            Ok([point[0], t])
        }
    }
}

/// `u(pi)(point) - u(pi)(gamma(pi)(point))`.
pub fn invariance_residual<M: FieldModel + ?Sized>(
    spec: &BvpSpec,
    model: &M,
    pi: &[f64],
    point: &[f64],
    transform_index: usize,
) -> Result<f64, BvpError> {
    let image = apply_invariance(spec, transform_index, point, pi)?;
    let mut inputs = Vec::with_capacity(2 * spec.model_input_width());
    spec.push_model_input(point, pi, &mut inputs);
    spec.push_model_input(&image, pi, &mut inputs);
    let u = model.values(&inputs)?;
    Ok(u[0] - u[1])
}
