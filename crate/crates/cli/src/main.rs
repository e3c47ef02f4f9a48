use std::path::PathBuf;
use std::process::{Command, ExitCode};

use clap::{Parser, Subcommand};

use scl_cli::run::{output_dir, output_root, write_text};
use scl_cli::{load_config, presets, RunError};
use scl_core::jets::load_checkpoint;

/// Constrained-learning PDE surrogates.
#[derive(Parser)]
#[command(name = "scl", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train and evaluate one or more configs (paths or `preset:<name>`).
    Train {
        #[arg(required = true)]
        configs: Vec<String>,
        /// Override the seed of every config.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the epoch count of every config.
        #[arg(long)]
        epochs: Option<usize>,
        /// Run several configs as parallel child processes.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Score a checkpoint against the reference solution of a config.
    Evaluate {
        checkpoint: PathBuf,
        config: String,
        /// Where to write the per-coefficient heatmap CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw one epoch of samples and write histograms and acceptance rates.
    SampleDiagnostics {
        config: String,
        /// Network to sample under; the seeded initial network by default.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Operator evaluations per epoch of run A relative to run B, in percent.
    CompareComplexity { report_a: PathBuf, report_b: PathBuf },
    /// List the shipped presets.
    ListPresets,
    /// Print a preset as a TOML config.
    ShowPreset { name: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<(), RunError> {
    match cmd {
        Cmd::Train { configs, seed, epochs, jobs } if configs.len() > 1 && jobs > 1 => fan_out(&configs, seed, epochs, jobs),
        Cmd::Train { configs, seed, epochs, .. } => {
            for arg in &configs {
                train_one(arg, seed, epochs)?;
            }
            Ok(())
        }
        Cmd::Evaluate { checkpoint, config, out } => {
            let (cfg, resolved) = load_config(&config)?;
            let report = scl_cli::evaluate(&checkpoint, &cfg, &resolved, out.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&report).expect("serialisable"));
            Ok(())
        }
        Cmd::SampleDiagnostics { config, checkpoint, out } => {
            let (cfg, resolved) = load_config(&config)?;
            let model = checkpoint.map(|p| load_checkpoint(&p)).transpose().map_err(|e| RunError::Io(e.to_string()))?;
            let dir = out.unwrap_or_else(|| output_dir(&cfg, &output_root()).join("diagnostics"));
            let rows = scl_cli::sample_diagnostics(&cfg, &resolved, model, &dir)?;
            for r in rows {
                let acc = r.acceptance.map_or("-".to_string(), |a| format!("{a:.3}"));
                println!("{:<16} samples {:>6}  acceptance {acc}", r.constraint, r.samples);
            }
            println!("written to {}", dir.display());
            Ok(())
        }
        Cmd::CompareComplexity { report_a, report_b } => {
            let pct = scl_cli::complexity_from_files(&report_a, &report_b)?;
            println!("{pct:.2}%");
            Ok(())
        }
        Cmd::ListPresets => {
            for name in presets::names() {
                println!("{name}");
            }
            Ok(())
        }
        Cmd::ShowPreset { name } => {
            let cfg = presets::get(&name)
                .ok_or_else(|| scl_cli::ConfigError { issues: vec![format!("unknown preset {name:?}")] })?;
            print!("{}", cfg.to_toml());
            Ok(())
        }
    }
}

fn train_one(arg: &str, seed: Option<u64>, epochs: Option<usize>) -> Result<(), RunError> {
    let (mut cfg, _) = load_config(arg)?;
    if let Some(s) = seed {
        cfg.train.seed = s;
    }
    if let Some(e) = epochs {
        cfg.train.epochs = e;
        cfg.output.sample_epochs.retain(|x| *x < e);
    }
    // Overrides can change the observations (seeded noise), so resolve again.
    let base = std::path::Path::new(arg).parent().filter(|_| !arg.starts_with("preset:")).unwrap_or(std::path::Path::new("."));
    let resolved = cfg.resolve(base)?;
    let dir = output_dir(&cfg, &output_root());
    let out = scl_cli::run_experiment(&cfg, &resolved, &dir)?;
    let m = &out.metrics;
    let rel = m.relative_l2.map_or("n/a".to_string(), |v| format!("{v:.4e}"));
    println!("{}: relative_l2 {rel}, {} epochs, artifacts in {}", m.name, m.epochs, out.dir.display());
    write_text(&dir.join("summary.txt"), &format!("{}\n", serde_json::to_string(m).expect("serialisable")))?;
    Ok(())
}

/// Runs each config as `scl train <config>` in a child process, at most
/// `jobs` at a time. Fails with the first non-zero child status.
fn fan_out(configs: &[String], seed: Option<u64>, epochs: Option<usize>, jobs: usize) -> Result<(), RunError> {
    let exe = std::env::current_exe().map_err(|e| RunError::Io(e.to_string()))?;
    let mut pending = configs.iter();
    let mut running = Vec::new();
    let mut worst = 0;
    loop {
        while running.len() < jobs {
            let Some(arg) = pending.next() else { break };
            let mut cmd = Command::new(&exe);
            cmd.arg("train").arg(arg);
            if let Some(s) = seed {
                cmd.arg("--seed").arg(s.to_string());
            }
            if let Some(e) = epochs {
                cmd.arg("--epochs").arg(e.to_string());
            }
            running.push(cmd.spawn().map_err(|e| RunError::Io(e.to_string()))?);
        }
        if running.is_empty() {
            break;
        }
        let status = running.remove(0).wait().map_err(|e| RunError::Io(e.to_string()))?;
        worst = worst.max(status.code().unwrap_or(3));
    }
    match worst {
        0 => Ok(()),
        2 => Err(scl_cli::ConfigError { issues: vec!["a child run rejected its config".into()] }.into()),
        _ => Err(RunError::Io("a child run aborted".into())),
    }
}
