//! Experiment harness for `scl-core`: TOML configs, shipped presets, the
//! experiment runner and its artifacts.

pub mod config;
pub mod presets;
pub mod run;

pub use config::{ConfigError, ExperimentConfig, Resolved};
pub use run::{
    complexity_from_files, complexity_report, evaluate, evaluate_field, output_dir, output_root, relative_complexity,
    run_experiment, sample_diagnostics, Metrics, RunError, RunOutcome,
};

/// Loads a config from a path, or a shipped preset given as `preset:<name>`.
pub fn load_config(arg: &str) -> Result<(ExperimentConfig, Resolved), ConfigError> {
    if let Some(name) = arg.strip_prefix("preset:") {
        let cfg = presets::get(name)
            .ok_or_else(|| ConfigError { issues: vec![format!("unknown preset {name:?}; see list-presets")] })?;
        let resolved = cfg.resolve(std::path::Path::new("."))?;
        return Ok((cfg, resolved));
    }
    ExperimentConfig::load(std::path::Path::new(arg))
}
