//! Running experiments and writing their artifacts.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use scl_core::jets::{load_checkpoint, save_checkpoint, FieldModel};
use scl_core::oracles::{evaluate_model, OracleError};
use scl_core::rng;
use scl_core::sampler::Histogram;
use scl_core::trainer::{
    draw_batches, empirical_losses, sample_space, train_observed, uniform_points, EpochBatch, TrainError,
    TrainObserver,
};
use scl_core::{BvpSpec, ConstraintKind, ErrorReport, Mlp, Role, SamplingPolicy, TrainMode, TrainReport};

use crate::config::{ConfigError, ExperimentConfig, Resolved};

/// Overrides the root that relative output directories resolve against.
pub const OUTPUT_ROOT_ENV: &str = "SCL_OUTPUT_ROOT";

pub const METRICS_FILE: &str = "metrics.json";
pub const LAMBDA_FILE: &str = "lambda.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const HEATMAP_FILE: &str = "heatmap.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TIMING_FILE: &str = "timing.json";
pub const CONFIG_COPY: &str = "config.toml";

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("training aborted: {0}")]
    Train(#[from] TrainError),
    #[error("evaluation failed: {0}")]
    Oracle(#[from] OracleError),
    #[error("{0}")]
    Io(String),
    #[error("complexity: {0}")]
    Complexity(String),
}

impl RunError {
    /// Process exit status: 2 for config problems, 3 for runtime aborts.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            _ => 3,
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> RunError + '_ {
    move |e| RunError::Io(format!("{}: {e}", path.display()))
}

/// Final PDE loss on fresh uniform points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    pub points: usize,
    pub pde_loss: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintMetrics {
    pub name: String,
    pub kind: ConstraintKind,
    pub role: Role,
    pub tolerance: f64,
    pub weight: f64,
    pub final_loss: f64,
    /// `None` for the objective.
    pub final_lambda: Option<f64>,
    pub acceptance: Option<f64>,
}

/// Contents of `metrics.json`. Deterministic given config and seed; wall
/// time lives in `timing.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub name: String,
    pub preset: Option<String>,
    pub config_hash: String,
    pub seed: u64,
    pub problem: String,
    pub mode: TrainMode,
    pub epochs: usize,
    /// `None` when the problem has no reference solution.
    pub relative_l2: Option<f64>,
    pub max_abs_error: Option<f64>,
    pub coefficients_evaluated: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation_note: Option<String>,
    pub feasibility: Option<Feasibility>,
    pub constraints: Vec<ConstraintMetrics>,
    pub operator_evaluations: u64,
    pub evaluations_per_epoch: u64,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub metrics: Metrics,
    pub report: TrainReport,
    pub evaluation: Option<ErrorReport>,
}

/// Output root: `$SCL_OUTPUT_ROOT` when set, else the working directory.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."))
}

/// Artifact directory of `cfg` under `root`.
pub fn output_dir(cfg: &ExperimentConfig, root: &Path) -> PathBuf {
    let dir = cfg.output.dir.clone().unwrap_or_else(|| Path::new("runs").join(&cfg.name));
    if dir.is_absolute() {
        dir
    } else {
        root.join(dir)
    }
}

fn provenance(cfg: &ExperimentConfig) -> String {
    format!("# config_hash={} seed={}", cfg.hash(), cfg.train.seed)
}

/// Collects sampled points at the requested epochs.
struct SampleDump {
    epochs: BTreeSet<usize>,
    dumps: Vec<(usize, usize, Vec<f64>, usize)>,
}

impl TrainObserver for SampleDump {
    fn on_epoch(&mut self, epoch: usize, _: &Mlp, batches: &[EpochBatch], _: &[f64]) {
        if !self.epochs.contains(&epoch) {
            return;
        }
        for (i, b) in batches.iter().enumerate() {
            if !b.samples.is_empty() {
                self.dumps.push((epoch, i, b.samples.clone(), b.sample_dim));
            }
        }
    }
}

/// Trains, evaluates and writes every artifact of `cfg` into `dir`.
pub fn run_experiment(cfg: &ExperimentConfig, resolved: &Resolved, dir: &Path) -> Result<RunOutcome, RunError> {
    let started = Instant::now();
    let bvp = &resolved.bvp;
    let model = cfg.model.init(bvp, cfg.train.seed).map_err(|e| ConfigError { issues: vec![format!("model: {e}")] })?;
    let mut dump = SampleDump { epochs: cfg.output.sample_epochs.iter().copied().collect(), dumps: Vec::new() };
    let report = train_observed(model, bvp, &cfg.constraints, &resolved.data, &cfg.train, &mut dump)?;

    let evaluation = match evaluate_model(&report.model, bvp, &resolved.eval_grid, &resolved.eval_coefficients) {
        Ok(r) => Some(r),
        Err(OracleError::NoOracle { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let feasibility = feasibility(cfg, bvp, &report.model)?;
    let metrics = build_metrics(cfg, bvp, &report, evaluation.as_ref(), feasibility, resolved.eval_coefficients.len());

    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let samples_dir = dir.join("samples");
    if samples_dir.exists() {
        fs::remove_dir_all(&samples_dir).map_err(io_err(&samples_dir))?;
    }
    let mut written = Vec::new();
    let head = provenance(cfg);

    write_file(dir, CONFIG_COPY, format!("{head}\n{}", cfg.to_toml()).as_bytes(), &mut written)?;
    let mut json = serde_json::to_string_pretty(&metrics).expect("metrics serialise");
    json.push('\n');
    write_file(dir, METRICS_FILE, json.as_bytes(), &mut written)?;

    let mut csv = format!("{head}\n").into_bytes();
    report.write_lambda_csv(&mut csv)?;
    write_file(dir, LAMBDA_FILE, &csv, &mut written)?;

    let ckpt = dir.join(CHECKPOINT_FILE);
    save_checkpoint(&report.model, &ckpt).map_err(|e| RunError::Io(e.to_string()))?;
    written.push(CHECKPOINT_FILE.to_string());

    if let Some(ev) = evaluation.as_ref().filter(|e| !e.per_coefficient.is_empty()) {
        write_file(dir, HEATMAP_FILE, heatmap_csv(&head, bvp, ev).as_bytes(), &mut written)?;
    }

    if !dump.dumps.is_empty() {
        fs::create_dir_all(&samples_dir).map_err(io_err(&samples_dir))?;
    }
    for (epoch, idx, samples, dim) in &dump.dumps {
        let name = &cfg.constraints[*idx].name;
        let axes = axis_names(bvp, *dim);
        let stem = format!("samples/{name}_epoch{epoch:06}");
        let text = samples_csv(&head, &axes, *epoch, samples, *dim);
        write_file(dir, &format!("{stem}.csv"), text.as_bytes(), &mut written)?;
        let text = histogram_csv(&head, bvp, &axes, samples, *dim, cfg.output.histogram_bins);
        write_file(dir, &format!("{stem}_hist.csv"), text.as_bytes(), &mut written)?;
    }

    write_manifest(dir, cfg, &written)?;
    let timing = serde_json::json!({
        "train_wall_time_secs": report.wall_time_secs,
        "total_wall_time_secs": started.elapsed().as_secs_f64(),
    });
    let tpath = dir.join(TIMING_FILE);
    fs::write(&tpath, format!("{timing:#}\n")).map_err(io_err(&tpath))?;

    Ok(RunOutcome { dir: dir.to_path_buf(), metrics, report, evaluation })
}

fn write_file(dir: &Path, rel: &str, bytes: &[u8], written: &mut Vec<String>) -> Result<(), RunError> {
    let path = dir.join(rel);
    fs::write(&path, bytes).map_err(io_err(&path))?;
    written.push(rel.to_string());
    Ok(())
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// `manifest.json`: config hash, seed and the SHA-256 of every artifact.
fn write_manifest(dir: &Path, cfg: &ExperimentConfig, written: &[String]) -> Result<(), RunError> {
    let mut files = Vec::new();
    let mut names: Vec<&String> = written.iter().collect();
    names.sort();
    for rel in names {
        let path = dir.join(rel);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        files.push(serde_json::json!({ "path": rel, "sha256": sha256_hex(&bytes) }));
    }
    let doc = serde_json::json!({
        "config_hash": cfg.hash(),
        "seed": cfg.train.seed,
        "files": files,
    });
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, format!("{doc:#}\n")).map_err(io_err(&path))
}

fn feasibility(cfg: &ExperimentConfig, bvp: &BvpSpec, model: &Mlp) -> Result<Option<Feasibility>, RunError> {
    let n = cfg.evaluation.feasibility_points;
    let Some(pde) = cfg.constraints.iter().find(|c| c.kind == ConstraintKind::Pde) else {
        return Ok(None);
    };
    if n == 0 {
        return Ok(None);
    }
    let mut rng = rng::seeded(cfg.train.seed, rng::stream::DIAGNOSTICS);
    let pts = uniform_points(bvp, n, &mut rng);
    let batch = EpochBatch::from_samples(bvp, ConstraintKind::Pde, &pts)?;
    let loss = empirical_losses(model, bvp, std::slice::from_ref(&batch))?[0];
    Ok(Some(Feasibility { points: n, pde_loss: loss, tolerance: pde.tolerance }))
}

fn build_metrics(
    cfg: &ExperimentConfig,
    bvp: &BvpSpec,
    report: &TrainReport,
    evaluation: Option<&ErrorReport>,
    feasibility: Option<Feasibility>,
    n_coefficients: usize,
) -> Metrics {
    let constraints = cfg
        .constraints
        .iter()
        .enumerate()
        .map(|(i, c)| ConstraintMetrics {
            name: c.name.clone(),
            kind: c.kind,
            role: c.role,
            tolerance: c.tolerance,
            weight: c.weight,
            final_loss: report.final_losses.get(i).copied().unwrap_or(f64::NAN),
            final_lambda: report.dual.constrained[i].then(|| report.dual.lambdas[i]),
            acceptance: report.acceptance[i],
        })
        .collect();
    Metrics {
        name: cfg.name.clone(),
        preset: cfg.preset.clone(),
        config_hash: cfg.hash(),
        seed: cfg.train.seed,
        problem: bvp.kind.name().to_string(),
        mode: cfg.train.mode,
        epochs: report.epochs,
        relative_l2: evaluation.map(|e| e.relative_l2),
        max_abs_error: evaluation.map(|e| e.max_abs_error),
        coefficients_evaluated: if evaluation.is_some() { n_coefficients } else { 0 },
        evaluation_note: evaluation.is_none().then(|| format!("no reference solution for {}", bvp.kind)),
        feasibility,
        constraints,
        operator_evaluations: report.operator_evaluations,
        evaluations_per_epoch: report.evaluations_per_epoch,
    }
}

/// Names of the sampled coordinates of a batch with `dim` columns.
fn axis_names(bvp: &BvpSpec, dim: usize) -> Vec<String> {
    let domain: &[&str] = if bvp.kind.is_transient() { &["x", "t"] } else { &["x", "y"] };
    let coef = bvp.kind.coefficient_names();
    let full: Vec<&str> = domain.iter().chain(if bvp.is_parametric() { coef.iter() } else { [].iter() }).copied().collect();
    if dim == full.len() {
        full.iter().map(|s| s.to_string()).collect()
    } else if dim == coef.len() {
        coef.iter().map(|s| s.to_string()).collect()
    } else {
        (0..dim).map(|i| format!("z{i}")).collect()
    }
}

fn samples_csv(head: &str, axes: &[String], epoch: usize, samples: &[f64], dim: usize) -> String {
    let mut s = format!("{head}\nepoch,{}\n", axes.join(","));
    for row in samples.chunks(dim) {
        let vals: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        s.push_str(&format!("{epoch},{}\n", vals.join(",")));
    }
    s
}

/// Per-axis histograms over the sampling box: `axis,bin,lo,hi,count,density`.
fn histogram_csv(head: &str, bvp: &BvpSpec, axes: &[String], samples: &[f64], dim: usize, bins: usize) -> String {
    let space = sample_space(bvp);
    let (lo, hi) = if dim == space.dim() {
        (space.lo.clone(), space.hi.clone())
    } else if dim == bvp.coefficient_dim() {
        (bvp.coeffs.lo.clone(), bvp.coeffs.hi.clone())
    } else {
        let col = |a: usize, f: fn(f64, f64) -> f64, init: f64| samples.chunks(dim).map(|r| r[a]).fold(init, f);
        ((0..dim).map(|a| col(a, f64::min, f64::INFINITY)).collect(), (0..dim).map(|a| col(a, f64::max, f64::NEG_INFINITY)).collect())
    };
    let mut s = format!("{head}\naxis,bin,lo,hi,count,density\n");
    for a in 0..dim {
        let h = Histogram::new(samples.chunks(dim).map(|r| r[a]), lo[a], hi[a], bins);
        let width = (hi[a] - lo[a]) / bins as f64;
        let total = h.total().max(1) as f64;
        for (b, c) in h.counts.iter().enumerate() {
            let l = lo[a] + b as f64 * width;
            let density = if width > 0.0 { *c as f64 / total / width } else { 0.0 };
            s.push_str(&format!("{},{b},{l:e},{:e},{c},{density:e}\n", axes[a], l + width));
        }
    }
    s
}

fn heatmap_csv(head: &str, bvp: &BvpSpec, ev: &ErrorReport) -> String {
    let names = bvp.kind.coefficient_names();
    let mut s = format!("{head}\n{},relative_l2,max_abs_error\n", names.join(","));
    for c in &ev.per_coefficient {
        let coeffs: Vec<String> = c.coefficients.iter().map(|v| format!("{v:e}")).collect();
        s.push_str(&format!("{},{:e},{:e}\n", coeffs.join(","), c.relative_l2, c.max_abs_error));
    }
    s
}

/// Scores a checkpoint against the config's oracle; writes the heatmap CSV
/// into `out` for parametric problems.
pub fn evaluate(
    checkpoint: &Path,
    cfg: &ExperimentConfig,
    resolved: &Resolved,
    out: Option<&Path>,
) -> Result<ErrorReport, RunError> {
    let model = load_checkpoint(checkpoint).map_err(|e| RunError::Io(e.to_string()))?;
    if model.input_width() != resolved.bvp.model_input_width() {
        return Err(RunError::Io(format!(
            "{}: model takes {} inputs, the problem needs {}",
            checkpoint.display(),
            model.input_width(),
            resolved.bvp.model_input_width()
        )));
    }
    evaluate_field(&model, cfg, resolved, out)
}

/// [`evaluate`] for any field model, e.g. an oracle wrapped as a model.
pub fn evaluate_field<M: FieldModel + ?Sized>(
    model: &M,
    cfg: &ExperimentConfig,
    resolved: &Resolved,
    out: Option<&Path>,
) -> Result<ErrorReport, RunError> {
    let report = evaluate_model(model, &resolved.bvp, &resolved.eval_grid, &resolved.eval_coefficients)?;
    if let Some(dir) = out.filter(|_| !report.per_coefficient.is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let path = dir.join(HEATMAP_FILE);
        fs::write(&path, heatmap_csv(&provenance(cfg), &resolved.bvp, &report)).map_err(io_err(&path))?;
    }
    Ok(report)
}

/// One sampled constraint in `sample-diagnostics`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleDiagnostics {
    pub constraint: String,
    pub samples: usize,
    pub acceptance: Option<f64>,
    pub samples_file: String,
    pub histogram_file: String,
}

/// Draws one epoch of samples under `model` (the seeded initial network when
/// `None`) and writes samples and histograms of every sampled constraint.
pub fn sample_diagnostics(
    cfg: &ExperimentConfig,
    resolved: &Resolved,
    model: Option<Mlp>,
    dir: &Path,
) -> Result<Vec<SampleDiagnostics>, RunError> {
    let bvp = &resolved.bvp;
    let model = match model {
        Some(m) => m,
        None => cfg.model.init(bvp, cfg.train.seed).map_err(|e| ConfigError { issues: vec![format!("model: {e}")] })?,
    };
    let batches = draw_batches(&model, bvp, &cfg.constraints, &resolved.data, 0, cfg.train.seed)?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let head = provenance(cfg);
    let mut out = Vec::new();
    for (spec, b) in cfg.constraints.iter().zip(&batches) {
        if b.samples.is_empty() || matches!(spec.sampling, SamplingPolicy::Equispaced) && spec.kind != ConstraintKind::Boundary {
            continue;
        }
        let axes = axis_names(bvp, b.sample_dim);
        let samples_file = format!("{}_samples.csv", spec.name);
        let histogram_file = format!("{}_hist.csv", spec.name);
        let p = dir.join(&samples_file);
        fs::write(&p, samples_csv(&head, &axes, 0, &b.samples, b.sample_dim)).map_err(io_err(&p))?;
        let p = dir.join(&histogram_file);
        fs::write(&p, histogram_csv(&head, bvp, &axes, &b.samples, b.sample_dim, cfg.output.histogram_bins))
            .map_err(io_err(&p))?;
        out.push(SampleDiagnostics {
            constraint: spec.name.clone(),
            samples: b.samples.len() / b.sample_dim.max(1),
            acceptance: b.acceptance,
            samples_file,
            histogram_file,
        });
    }
    let p = dir.join("diagnostics.json");
    fs::write(&p, format!("{}\n", serde_json::to_string_pretty(&out).expect("serialisable"))).map_err(io_err(&p))?;
    Ok(out)
}

/// `100 * (evals_a / epochs_a) / (evals_b / epochs_b)`: PDE operator
/// evaluations per epoch of run A relative to run B, in percent.
pub fn relative_complexity(evals_a: u64, epochs_a: usize, evals_b: u64, epochs_b: usize) -> Result<f64, RunError> {
    if epochs_a == 0 || epochs_b == 0 {
        return Err(RunError::Complexity("a run with zero epochs has no per-epoch cost".into()));
    }
    if evals_b == 0 {
        return Err(RunError::Complexity("the reference run performed no operator evaluations".into()));
    }
    Ok(100.0 * (evals_a as f64 / epochs_a as f64) / (evals_b as f64 / epochs_b as f64))
}

pub fn complexity_report(a: &TrainReport, b: &TrainReport) -> Result<f64, RunError> {
    relative_complexity(a.operator_evaluations, a.epochs, b.operator_evaluations, b.epochs)
}

/// [`complexity_report`] from two `metrics.json` files.
pub fn complexity_from_files(a: &Path, b: &Path) -> Result<f64, RunError> {
    let read = |p: &Path| -> Result<Metrics, RunError> {
        let text = fs::read_to_string(p).map_err(io_err(p))?;
        serde_json::from_str(&text).map_err(|e| RunError::Io(format!("{}: {e}", p.display())))
    };
    let (ma, mb) = (read(a)?, read(b)?);
    relative_complexity(ma.operator_evaluations, ma.epochs, mb.operator_evaluations, mb.epochs)
}

/// Writes `text` to `path`, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<(), RunError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(text.as_bytes()).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complexity_examples() {
        assert_eq!(relative_complexity(7, 1, 7, 1).unwrap(), 100.0);
        let finest = relative_complexity(5000 * 10, 10, 30 * 1000 * 4, 4).unwrap();
        assert!((finest - 100.0 / 6.0).abs() < 1e-12);
        assert_eq!(relative_complexity(5000, 1, 4000, 1).unwrap(), 125.0);
        assert!(relative_complexity(5000, 1, 0, 1).is_err());
        assert!(relative_complexity(5000, 0, 10, 1).is_err());
    }

    #[test]
    fn output_dir_resolves_against_the_root() {
        let mut c = crate::presets::get("rd_3_3_scl_desk").unwrap();
        assert_eq!(output_dir(&c, Path::new("/r")), Path::new("/r/runs/rd_3_3_scl_desk"));
        c.output.dir = Some("/abs".into());
        assert_eq!(output_dir(&c, Path::new("/r")), Path::new("/abs"));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(RunError::Config(ConfigError { issues: vec![] }).exit_code(), 2);
        assert_eq!(RunError::Io("x".into()).exit_code(), 3);
    }
}
