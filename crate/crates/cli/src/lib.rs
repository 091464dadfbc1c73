//! Config-driven runner for the `chi2atom` simulator.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

pub use config::{preset, ExperimentConfig, Format, Preset, PRESETS};
pub use error::CliError;
pub use output::RunManifest;

pub const DEFAULT_OUT: &str = "chi2atom-out";

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub jobs: Option<usize>,
    /// Fallback output directory, normally from `CHI2ATOM_OUT`.
    pub env_out: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: RunManifest,
}

/// Parse, validate, run and persist one experiment.
///
/// Output directory precedence: `--out`, then the config's `output`, then
/// `env_out`, then [`DEFAULT_OUT`].
pub fn run(opts: &RunOptions) -> Result<RunOutcome, CliError> {
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64());
    let cfg = ExperimentConfig::load(&opts.config)?;
    cfg.validate()?;
    let format = opts.format.or(cfg.format).unwrap_or(Format::Csv);
    let dir = opts
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(|p| cfg.resolve(p)))
        .or_else(|| opts.env_out.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    if opts.jobs == Some(0) {
        return Err(CliError::config("--jobs", "must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::config("--jobs", e))?;
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Output(format!("cannot create {}: {e}", dir.display())))?;

    let t0 = Instant::now();
    let outcome = pool.install(|| experiments::execute(&cfg))?;
    let compute = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let files = output::write_artifacts(&dir, &outcome.artifacts, format)?;
    let manifest = RunManifest {
        schema_version: output::MANIFEST_SCHEMA_VERSION,
        tool: "chi2atom".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        experiment: cfg.experiment.name().into(),
        format,
        started_unix: started,
        timings: output::Timings {
            compute_seconds: compute,
            write_seconds: t1.elapsed().as_secs_f64(),
        },
        config: cfg.to_json(),
        summary: outcome.summary,
        files,
    };
    manifest.write(&dir)?;
    Ok(RunOutcome { dir, manifest })
}
