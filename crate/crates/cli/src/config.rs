//! Experiment configuration files.
//!
//! Configs are TOML documents with a `version` field; unknown keys are
//! rejected at every level. See the README for the full schema.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use scl_core::bvp::{self, BurgersInitial, Invariance};
use scl_core::oracles::{synthesize_observations, EvalGrid};
use scl_core::trainer::{validate_constraints, TrainData};
use scl_core::{BvpSpec, CoefficientBox, ConstraintKind, ConstraintSpec, Mlp, ProblemKind, Role, Shape, TrainConfig};

pub const CONFIG_VERSION: u32 = 1;

/// Every problem found while checking a config, one line each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub issues: Vec<String>,
}

impl ConfigError {
    fn one(msg: impl Into<String>) -> Self {
        Self { issues: vec![msg.into()] }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config ({} issue{})", self.issues.len(), if self.issues.len() == 1 { "" } else { "s" })?;
        for i in &self.issues {
            write!(f, "\n  - {i}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub name: String,
    /// Preset this config was generated from, if any. Informational.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub problem: ProblemConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub constraints: Vec<ConstraintSpec>,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observations: Option<ObservationConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Problem selection. Give `coefficients` for a single problem or
/// `coefficient_lo`/`coefficient_hi` for a parametric family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficient_lo: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficient_hi: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wave_number: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<Shape>,
    /// Point-cloud file (`x,y` per line), relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub invariances: Vec<Invariance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burgers_initial: Option<BurgersInitial>,
}

impl ProblemConfig {
    pub fn single(kind: ProblemKind, coefficients: &[f64]) -> Self {
        Self {
            kind,
            coefficients: Some(coefficients.to_vec()),
            coefficient_lo: None,
            coefficient_hi: None,
            wave_number: None,
            shape: None,
            shape_file: None,
            invariances: Vec::new(),
            burgers_initial: None,
        }
    }

    pub fn family(kind: ProblemKind, lo: &[f64], hi: &[f64]) -> Self {
        Self { coefficients: None, coefficient_lo: Some(lo.to_vec()), coefficient_hi: Some(hi.to_vec()), ..Self::single(kind, &[]) }
    }

    /// Builds the problem; relative `shape_file` paths resolve against `base`.
    pub fn build(&self, base: &Path) -> Result<BvpSpec, String> {
        let coeffs = match (&self.coefficients, &self.coefficient_lo, &self.coefficient_hi) {
            (Some(c), None, None) => CoefficientBox::fixed(c),
            (None, Some(lo), Some(hi)) => CoefficientBox::range(lo, hi),
            (None, None, None) if self.kind.coefficient_dim() == 0 => CoefficientBox::none(),
            _ => {
                return Err("give either coefficients or both coefficient_lo and coefficient_hi".into());
            }
        };
        if self.kind != ProblemKind::Eikonal && (self.shape.is_some() || self.shape_file.is_some()) {
            return Err(format!("shape only applies to eikonal, not {}", self.kind));
        }
        if self.kind != ProblemKind::Helmholtz && self.wave_number.is_some() {
            return Err(format!("wave_number only applies to helmholtz, not {}", self.kind));
        }
        if self.kind != ProblemKind::Burgers && self.burgers_initial.is_some() {
            return Err(format!("burgers_initial only applies to burgers, not {}", self.kind));
        }
        let err = |e: bvp::BvpError| e.to_string();
        let mut spec = match self.kind {
            ProblemKind::Convection => BvpSpec::convection(coeffs).map_err(err)?,
            ProblemKind::ReactionDiffusion => BvpSpec::reaction_diffusion(coeffs).map_err(err)?,
            ProblemKind::Helmholtz => BvpSpec::helmholtz(coeffs, self.wave_number.unwrap_or(1.0)).map_err(err)?,
            ProblemKind::Burgers => {
                let mut s = BvpSpec::burgers(coeffs).map_err(err)?;
                if let Some(init) = self.burgers_initial {
                    s.burgers_initial = init;
                }
                s
            }
            ProblemKind::Eikonal => {
                let shape = match (&self.shape, &self.shape_file) {
                    (Some(s), None) => s.clone(),
                    (None, Some(path)) => {
                        let path = base.join(path);
                        let text = std::fs::read_to_string(&path)
                            .map_err(|e| format!("shape_file {}: {e}", path.display()))?;
                        bvp::parse_point_cloud(&text).map_err(err)?
                    }
                    _ => return Err("eikonal needs exactly one of shape and shape_file".into()),
                };
                if !coeffs_empty(&self.coefficients, &self.coefficient_lo) {
                    return Err("eikonal takes no coefficients".into());
                }
                BvpSpec::eikonal(shape).map_err(err)?
            }
        };
        for inv in &self.invariances {
            spec = spec.with_invariance(*inv).map_err(err)?;
        }
        Ok(spec)
    }
}

fn coeffs_empty(a: &Option<Vec<f64>>, b: &Option<Vec<f64>>) -> bool {
    a.as_ref().is_none_or(Vec::is_empty) && b.as_ref().is_none_or(Vec::is_empty)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Hidden layer widths; input and output widths follow from the problem.
    pub hidden: Vec<usize>,
}

impl ModelConfig {
    pub fn widths(&self, bvp: &BvpSpec) -> Vec<usize> {
        let mut w = vec![bvp.model_input_width()];
        w.extend(&self.hidden);
        w.push(1);
        w
    }

    /// Seeded Glorot network with the problem's input normalisation.
    pub fn init(&self, bvp: &BvpSpec, seed: u64) -> Result<Mlp, String> {
        let mut m = Mlp::glorot(&self.widths(bvp), seed).map_err(|e| e.to_string())?;
        let (shift, scale) = bvp.input_map();
        m.set_input_map(shift, scale).map_err(|e| e.to_string())?;
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Evaluation grid over the domain; the problem default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<EvalGrid>,
    /// Explicit coefficient vectors for parametric problems.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<Vec<f64>>>,
    /// Otherwise a tensor grid with this many points per coefficient axis.
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    /// Fresh uniform points for the final PDE-loss check (0 disables it).
    #[serde(default = "default_feasibility_points")]
    pub feasibility_points: usize,
}

fn default_grid_points() -> usize {
    20
}

fn default_feasibility_points() -> usize {
    10_000
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            grid: None,
            coefficients: None,
            grid_points: default_grid_points(),
            feasibility_points: default_feasibility_points(),
        }
    }
}

impl EvaluationConfig {
    pub fn grid_for(&self, bvp: &BvpSpec) -> EvalGrid {
        self.grid.clone().unwrap_or_else(|| EvalGrid::default_for(bvp))
    }

    /// Coefficient vectors at which the model is scored.
    pub fn coefficients_for(&self, bvp: &BvpSpec) -> Vec<Vec<f64>> {
        if let Some(pi) = bvp.fixed_coefficients() {
            return vec![pi.to_vec()];
        }
        if !bvp.is_parametric() {
            return vec![Vec::new()];
        }
        if let Some(c) = &self.coefficients {
            return c.clone();
        }
        tensor_grid(&bvp.coeffs.lo, &bvp.coeffs.hi, self.grid_points)
    }
}

/// Row-major tensor grid with `n` equispaced nodes per axis, first axis
/// slowest.
pub fn tensor_grid(lo: &[f64], hi: &[f64], n: usize) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = lo.iter().zip(hi).map(|(l, h)| bvp::linspace(*l, *h, n)).collect();
    let mut out = vec![Vec::new()];
    for axis in &axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(*v);
                    p
                })
            })
            .collect();
    }
    out
}

/// Synthetic observations: reference solutions on `grid` at each coefficient
/// vector, optionally with Gaussian noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationConfig {
    pub grid: EvalGrid,
    pub coefficients: Vec<Vec<f64>>,
    #[serde(default)]
    pub noise_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Artifact directory; `runs/<name>` when absent. Relative paths resolve
    /// against the output root.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Epochs at which sampled points are dumped.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sample_epochs: Vec<usize>,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
}

fn default_bins() -> usize {
    50
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: None, sample_epochs: Vec::new(), histogram_bins: default_bins() }
    }
}

/// A checked config with everything training needs.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub bvp: BvpSpec,
    pub data: TrainData,
    pub eval_grid: EvalGrid,
    pub eval_coefficients: Vec<Vec<f64>>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::one(e.to_string().trim_end().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs always serialise")
    }

    /// Reads and checks a config file.
    pub fn load(path: &Path) -> Result<(Self, Resolved), ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError::one(format!("{}: {e}", path.display())))?;
        let cfg = Self::from_toml(&text).map_err(|mut e| {
            e.issues = e.issues.into_iter().map(|i| format!("{}: {i}", path.display())).collect();
            e
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolved = cfg.resolve(base)?;
        Ok((cfg, resolved))
    }

    /// Hex SHA-256 of the canonical JSON form, ignoring `output.dir` so the
    /// same experiment hashes alike wherever it is written.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output.dir = None;
        let bytes = serde_json::to_vec(&c).expect("configs always serialise");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Checks every section and reports all problems at once.
    pub fn resolve(&self, base: &Path) -> Result<Resolved, ConfigError> {
        let mut issues = Vec::new();
        if self.version != CONFIG_VERSION {
            issues.push(format!("version: expected {CONFIG_VERSION}, got {}", self.version));
        }
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c)) {
            issues.push(format!("name: must be non-empty and use [A-Za-z0-9_.-], got {:?}", self.name));
        }
        if self.model.hidden.is_empty() || self.model.hidden.contains(&0) {
            issues.push(format!("model.hidden: need at least one layer, all widths >= 1, got {:?}", self.model.hidden));
        }
        check_train(&self.train, &mut issues);
        if self.output.histogram_bins == 0 {
            issues.push("output.histogram_bins: must be >= 1".into());
        }
        if let Some(bad) = self.output.sample_epochs.iter().find(|e| **e >= self.train.epochs.max(1)) {
            issues.push(format!("output.sample_epochs: epoch {bad} is not below train.epochs = {}", self.train.epochs));
        }

        let bvp = match self.problem.build(base) {
            Ok(b) => Some(b),
            Err(e) => {
                issues.push(format!("problem: {e}"));
                None
            }
        };

        let mut data = TrainData::default();
        if let (Some(obs), Some(bvp)) = (&self.observations, &bvp) {
            if let Err(e) = obs.grid.validate() {
                issues.push(format!("observations.grid: {e}"));
            } else if obs.grid.dim() != bvp.domain_dim() {
                issues.push(format!("observations.grid: needs {} axes, got {}", bvp.domain_dim(), obs.grid.dim()));
            } else {
                match synthesize_observations(bvp, &obs.coefficients, &obs.grid, obs.noise_sd, self.train.seed) {
                    Ok(o) => {
                        data.grid = Some(obs.grid.clone());
                        data.observations = o;
                    }
                    Err(e) => issues.push(format!("observations: {e}")),
                }
            }
        }

        let mut names = BTreeSet::new();
        if self.constraints.is_empty() {
            issues.push("constraints: at least one is required".into());
        }
        let objectives = self.constraints.iter().filter(|c| c.role == Role::Objective).count();
        if objectives > 1 {
            issues.push(format!("constraints: {objectives} have role = \"objective\"; at most one is allowed"));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            let at = format!("constraints[{i}] ({})", c.name);
            if c.name.is_empty() || c.name.contains([',', '\n', '/']) {
                issues.push(format!("constraints[{i}].name: must be non-empty without ',', '/' or newlines"));
            } else if !names.insert(c.name.as_str()) {
                issues.push(format!("{at}.name: duplicate name"));
            }
            let before = issues.len();
            if !(c.tolerance.is_finite() && c.tolerance >= 0.0) {
                issues.push(format!("{at}.tolerance: must be finite and >= 0, got {}", c.tolerance));
            }
            if !(c.weight.is_finite() && c.weight >= 0.0) {
                issues.push(format!("{at}.weight: must be finite and >= 0, got {}", c.weight));
            }
            if issues.len() > before {
                continue;
            }
            if matches!(c.kind, ConstraintKind::Observation { .. }) && self.observations.is_none() {
                issues.push(format!("{at}.kind: observation constraints need an [observations] section"));
                continue;
            }
            if let Some(bvp) = &bvp {
                if let Err(e) = validate_constraints(bvp, std::slice::from_ref(c), &data, self.train.mode) {
                    let msg = e.to_string();
                    let msg = msg.strip_prefix("constraint 0: ").unwrap_or(&msg);
                    issues.push(format!("{at}: {msg}"));
                }
            }
        }

        let mut eval_grid = None;
        let mut eval_coefficients = Vec::new();
        if let Some(bvp) = &bvp {
            let grid = self.evaluation.grid_for(bvp);
            if let Err(e) = grid.validate() {
                issues.push(format!("evaluation.grid: {e}"));
            } else if grid.dim() != bvp.domain_dim() {
                issues.push(format!("evaluation.grid: needs {} axes, got {}", bvp.domain_dim(), grid.dim()));
            } else {
                eval_grid = Some(grid);
            }
            if self.evaluation.coefficients.is_some() && !bvp.is_parametric() {
                issues.push("evaluation.coefficients: only parametric problems take a coefficient list".into());
            }
            if bvp.is_parametric() && self.evaluation.coefficients.is_none() && self.evaluation.grid_points < 2 {
                issues.push("evaluation.grid_points: must be >= 2".into());
            }
            eval_coefficients = self.evaluation.coefficients_for(bvp);
            if eval_coefficients.is_empty() {
                issues.push("evaluation.coefficients: empty".into());
            }
            if let Some(pi) = eval_coefficients.iter().find(|pi| !bvp.coeffs.contains(pi) && bvp.is_parametric()) {
                issues.push(format!("evaluation.coefficients: {pi:?} outside the coefficient box"));
            }
        }

        match (bvp, eval_grid) {
            (Some(bvp), Some(eval_grid)) if issues.is_empty() => {
                Ok(Resolved { bvp, data, eval_grid, eval_coefficients })
            }
            _ => Err(ConfigError { issues }),
        }
    }
}

fn check_train(t: &TrainConfig, issues: &mut Vec<String>) {
    let positive = |v: f64| v.is_finite() && v > 0.0;
    if !positive(t.lr_primal) {
        issues.push(format!("train.lr_primal: must be > 0, got {}", t.lr_primal));
    }
    if !positive(t.lr_dual) {
        issues.push(format!("train.lr_dual: must be > 0, got {}", t.lr_dual));
    }
    if !(t.decay_factor > 0.0 && t.decay_factor <= 1.0) {
        issues.push(format!("train.decay_factor: must lie in (0, 1], got {}", t.decay_factor));
    }
    if t.inner_steps == 0 {
        issues.push("train.inner_steps: must be >= 1".into());
    }
    if t.log_every == 0 {
        issues.push("train.log_every: must be >= 1".into());
    }
    if !positive(t.divergence_threshold) {
        issues.push(format!("train.divergence_threshold: must be > 0, got {}", t.divergence_threshold));
    }
    if let Err(e) = t.adam.validate() {
        issues.push(format!("train.{e}"));
    }
}
