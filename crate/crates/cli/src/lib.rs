//! Configuration loading, output writing and exit-code policy for the
//! `unstretch` runner. The experiments themselves live in [`experiments`].

pub mod config;
pub mod experiments;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;

pub use config::{ExperimentConfig, EXPERIMENTS};
pub use experiments::{execute, Outcome, RunError};

/// Command-line overrides applied on top of the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

pub fn load_config(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig, RunError> {
    let text = fs::read_to_string(path).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))?;
    let mut cfg =
        ExperimentConfig::from_toml(&text).map_err(|e| RunError::Validation(format!("{}: {e}", path.display())))?;
    if let Some(s) = overrides.seed {
        cfg.seed = s;
    }
    if let Some(d) = &overrides.output_dir {
        cfg.output_dir = d.clone();
    }
    cfg.experiment_info().map_err(RunError::Validation)?;
    Ok(cfg)
}

/// Writes every table and `summary.json` into `cfg.output_dir`.
///
/// `wall_time_s` is the only field of the summary that varies between
/// identical runs; the CSV files are byte-identical.
pub fn write_outputs(cfg: &ExperimentConfig, outcome: &Outcome, wall_time_s: f64) -> Result<(), RunError> {
    let io = |e: std::io::Error| RunError::Io(format!("{}: {e}", cfg.output_dir.display()));
    fs::create_dir_all(&cfg.output_dir).map_err(io)?;
    for t in &outcome.tables {
        fs::write(cfg.output_dir.join(&t.file), &t.bytes).map_err(io)?;
    }
    let summary = json!({
        "experiment": cfg.experiment,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cfg.seed,
        "config": cfg,
        "wall_time_s": wall_time_s,
        "partial": outcome.partial(),
        "status": outcome.status.as_ref().map(|s| s.message().to_string()),
        "verdicts": outcome.verdicts,
        "results": outcome.results,
    });
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(cfg.output_dir.join("summary.json"), text + "\n").map_err(io)
}

/// Runs one configuration end to end and returns the process exit code.
/// Validation failures write nothing.
pub fn run(cfg: &ExperimentConfig) -> i32 {
    let started = Instant::now();
    let outcome = match execute(cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {}", e.message());
            return e.exit_code();
        }
    };
    if let Err(e) = write_outputs(cfg, &outcome, started.elapsed().as_secs_f64()) {
        eprintln!("error: {}", e.message());
        return e.exit_code();
    }
    for (k, v) in &outcome.verdicts {
        println!("{k}: {v}");
    }
    match &outcome.status {
        None => {
            println!("wrote {}", cfg.output_dir.display());
            0
        }
        Some(s) => {
            eprintln!("{}: {}", if outcome.partial() { "partial" } else { "failed" }, s.message());
            s.exit_code()
        }
    }
}

/// The `list` table: name, required inputs, output files.
pub fn experiment_table() -> String {
    let w = EXPERIMENTS.iter().map(|e| e.name.len()).max().unwrap_or(0);
    let mut out = String::new();
    for e in EXPERIMENTS {
        out.push_str(&format!("{:<w$}  needs: {}\n{:<w$}  emits: {}\n", e.name, e.needs, "", e.emits));
    }
    out
}
