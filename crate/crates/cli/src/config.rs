//! Experiment configuration: parsing, validation and presets.
//!
//! A config file is TOML (or JSON when the extension is `.json`) with three
//! top-level keys besides the parameter block:
//!
//! ```toml
//! experiment = "store"
//! format = "csv"
//! output = "results/store"
//!
//! [params]
//! # experiment-specific keys
//! ```
//!
//! All rates are in units of `κ_ref = 1`, all times in `1/κ_ref`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chi2atom::czgate::GateConfig;
use chi2atom::envelope::Envelope;
use chi2atom::fock::{AtomKind, AtomSpec, ModeLabel, ModeSpec};
use chi2atom::ode::Tolerance;
use chi2atom::scattering::{JointSpectrum, ScatterParams, TimeGrid};
use chi2atom::storage::AntennaParams;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

/// File layout before the parameter block is interpreted.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    format: Option<Format>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    output: Option<PathBuf>,
    #[serde(default)]
    params: Value,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    NoJump,
    Lindblad,
}

/// Inclusive uniform grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Range {
    fn validate(&self, key: &str, min_points: usize) -> Result<(), CliError> {
        if !(self.start.is_finite() && self.stop.is_finite() && self.stop > self.start) {
            return Err(CliError::config(key, "need finite start < stop"));
        }
        if self.points < min_points {
            return Err(CliError::config(
                &format!("{key}.points"),
                format!("need at least {min_points} points"),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelsParams {
    pub atom: AtomSpec,
    #[serde(default = "two")]
    pub n_max: usize,
    /// Use `H − iΣκ n` and report complex eigenvalues.
    #[serde(default)]
    pub with_loss: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectroscopyParams {
    pub atom: AtomSpec,
    #[serde(default = "four")]
    pub n_max: usize,
    #[serde(default = "mode_a")]
    pub mode: ModeLabel,
    pub amplitude: f64,
    pub detuning: Range,
    /// Basis-state label whose peaks are summarised; defaults to two
    /// photons in the driven mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monitor: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RabiParams {
    pub atom: AtomSpec,
    #[serde(default = "three")]
    pub n_max: usize,
    #[serde(default = "mode_a")]
    pub mode: ModeLabel,
    pub amplitude: f64,
    pub t_end: f64,
    pub points: usize,
    #[serde(default = "no_jump")]
    pub method: Method,
    /// Defaults to one photon in the driven mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monitor: Option<String>,
    #[serde(default)]
    pub tolerance: Tolerance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpectrumSource {
    Gaussian {
        center: f64,
        sigma: f64,
        half_width: f64,
        points: usize,
    },
    File {
        path: PathBuf,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scatter2Params {
    pub cavity: ScatterParams,
    pub input: SpectrumSource,
    /// Time-domain cross-check of the analytic output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<TimeGrid>,
    #[serde(default)]
    pub tolerance: Tolerance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PulseSource {
    /// Unit-energy truncated Gaussian on `[start, start + duration]`.
    TruncatedGaussian {
        start: f64,
        duration: f64,
        points: usize,
    },
    File {
        path: PathBuf,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DriveSource {
    Optimal,
    File { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoreParams {
    pub antenna: AntennaParams,
    pub input: PulseSource,
    #[serde(default = "optimal")]
    pub drive: DriveSource,
    #[serde(default)]
    pub tolerance: Tolerance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrieveParams {
    pub antenna: AntennaParams,
    /// Shape the optimal drive aims for; required with `drive.kind = "optimal"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<PulseSource>,
    #[serde(default = "optimal")]
    pub drive: DriveSource,
    #[serde(default)]
    pub tolerance: Tolerance,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GRange {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    #[serde(default = "yes")]
    pub log: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParams {
    #[serde(default)]
    pub gate: GateConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_range: Option<GRange>,
}

impl SweepParams {
    pub fn g_values(&self) -> Vec<f64> {
        match (&self.g_values, &self.g_range) {
            (Some(v), _) => v.clone(),
            (None, Some(r)) if r.log => chi2atom::czgate::log_spaced(r.start, r.stop, r.points),
            (None, Some(r)) => chi2atom::ode::uniform_grid(r.start, r.stop, r.points),
            (None, None) => Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Experiment {
    Levels(LevelsParams),
    Spectroscopy(SpectroscopyParams),
    Rabi(RabiParams),
    Scatter2(Scatter2Params),
    Store(StoreParams),
    Retrieve(RetrieveParams),
    Cz(GateConfig),
    Sweep(SweepParams),
}

pub const EXPERIMENTS: [&str; 8] = ["levels", "spectroscopy", "rabi", "scatter2", "store", "retrieve", "cz", "sweep"];

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Levels(_) => "levels",
            Experiment::Spectroscopy(_) => "spectroscopy",
            Experiment::Rabi(_) => "rabi",
            Experiment::Scatter2(_) => "scatter2",
            Experiment::Store(_) => "store",
            Experiment::Retrieve(_) => "retrieve",
            Experiment::Cz(_) => "cz",
            Experiment::Sweep(_) => "sweep",
        }
    }

    pub fn params_json(&self) -> Value {
        let v = match self {
            Experiment::Levels(p) => serde_json::to_value(p),
            Experiment::Spectroscopy(p) => serde_json::to_value(p),
            Experiment::Rabi(p) => serde_json::to_value(p),
            Experiment::Scatter2(p) => serde_json::to_value(p),
            Experiment::Store(p) => serde_json::to_value(p),
            Experiment::Retrieve(p) => serde_json::to_value(p),
            Experiment::Cz(p) => serde_json::to_value(p),
            Experiment::Sweep(p) => serde_json::to_value(p),
        };
        v.expect("parameter types serialize to JSON")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub format: Option<Format>,
    pub output: Option<PathBuf>,
    /// Directory that relative file references are resolved against.
    pub base_dir: PathBuf,
}

fn typed<T: DeserializeOwned>(params: Value) -> Result<T, CliError> {
    serde_path_to_error::deserialize(params).map_err(|e| {
        let path = e.path().to_string();
        let key = if path == "." {
            "params".to_string()
        } else {
            format!("params.{path}")
        };
        CliError::config(&key, e.into_inner().to_string())
    })
}

impl ExperimentConfig {
    /// Parse TOML text.
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config(toml_message(&e)))?;
        Self::from_raw(raw)
    }

    /// Parse JSON text.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        Self::from_raw(raw)
    }

    /// Read and parse a config file; `.json` selects JSON, anything else TOML.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = if path.extension().is_some_and(|x| x == "json") {
            Self::from_json(&text)?
        } else {
            Self::from_toml(&text)?
        };
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    fn from_raw(raw: RawConfig) -> Result<Self, CliError> {
        let params = match raw.params {
            Value::Null => Value::Object(Default::default()),
            v => v,
        };
        let experiment = match raw.experiment.as_str() {
            "levels" => Experiment::Levels(typed(params)?),
            "spectroscopy" => Experiment::Spectroscopy(typed(params)?),
            "rabi" => Experiment::Rabi(typed(params)?),
            "scatter2" => Experiment::Scatter2(typed(params)?),
            "store" => Experiment::Store(typed(params)?),
            "retrieve" => Experiment::Retrieve(typed(params)?),
            "cz" => Experiment::Cz(typed(params)?),
            "sweep" => Experiment::Sweep(typed(params)?),
            other => {
                return Err(CliError::config(
                    "experiment",
                    format!("unknown experiment `{other}`, expected one of {}", EXPERIMENTS.join(", ")),
                ))
            }
        };
        Ok(ExperimentConfig {
            experiment,
            format: raw.format,
            output: raw.output,
            base_dir: PathBuf::new(),
        })
    }

    fn raw(&self) -> RawConfig {
        RawConfig {
            experiment: self.experiment.name().to_string(),
            format: self.format,
            output: self.output.clone(),
            params: strip_nulls(self.experiment.params_json()),
        }
    }

    /// Fully resolved config as JSON (defaults filled in).
    pub fn to_json(&self) -> Value {
        serde_json::to_value(self.raw()).expect("config serializes")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.raw()).expect("config serializes to TOML")
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Semantic checks that need no computation: rate signs, grid sizes,
    /// referenced files.
    pub fn validate(&self) -> Result<(), CliError> {
        let core = |key: &str, r: chi2atom::Result<()>| r.map_err(|e| CliError::config(key, e.to_string()));
        let file = |key: &str, p: &Path| {
            let full = self.resolve(p);
            if full.is_file() {
                Ok(())
            } else {
                Err(CliError::config(key, format!("file {} does not exist", full.display())))
            }
        };
        match &self.experiment {
            Experiment::Levels(p) => {
                core("params.atom", p.atom.validate())?;
            }
            Experiment::Spectroscopy(p) => {
                core("params.atom", p.atom.validate())?;
                mode_present(&p.atom, p.mode)?;
                nonneg("params.amplitude", p.amplitude)?;
                p.detuning.validate("params.detuning", 2)?;
            }
            Experiment::Rabi(p) => {
                core("params.atom", p.atom.validate())?;
                mode_present(&p.atom, p.mode)?;
                nonneg("params.amplitude", p.amplitude)?;
                if !(p.t_end > 0.0 && p.t_end.is_finite()) {
                    return Err(CliError::config("params.t_end", "must be positive"));
                }
                if p.points < 2 {
                    return Err(CliError::config("params.points", "need at least 2 points"));
                }
                tolerance("params.tolerance", &p.tolerance)?;
            }
            Experiment::Scatter2(p) => {
                core("params.cavity", p.cavity.validate())?;
                match &p.input {
                    SpectrumSource::Gaussian {
                        sigma, half_width, points, ..
                    } => {
                        positive("params.input.sigma", *sigma)?;
                        positive("params.input.half_width", *half_width)?;
                        if *points < 8 {
                            return Err(CliError::config("params.input.points", "need at least 8 points"));
                        }
                    }
                    SpectrumSource::File { path } => file("params.input.path", path)?,
                }
                if let Some(g) = &p.oracle {
                    if !(g.t_end > g.t_start) || g.points < 16 {
                        return Err(CliError::config("params.oracle", "need t_end > t_start and at least 16 points"));
                    }
                }
                tolerance("params.tolerance", &p.tolerance)?;
            }
            Experiment::Store(p) => {
                core("params.antenna", p.antenna.validate())?;
                pulse("params.input", &p.input, &file)?;
                if let DriveSource::File { path } = &p.drive {
                    file("params.drive.path", path)?;
                }
                tolerance("params.tolerance", &p.tolerance)?;
            }
            Experiment::Retrieve(p) => {
                core("params.antenna", p.antenna.validate())?;
                match (&p.drive, &p.target) {
                    (DriveSource::Optimal, None) => {
                        return Err(CliError::config("params.target", "required when params.drive.kind = \"optimal\""));
                    }
                    (DriveSource::File { path }, _) => file("params.drive.path", path)?,
                    _ => {}
                }
                if let Some(t) = &p.target {
                    pulse("params.target", t, &file)?;
                }
                tolerance("params.tolerance", &p.tolerance)?;
            }
            Experiment::Cz(g) => core("params", g.validate())?,
            Experiment::Sweep(p) => {
                core("params.gate", p.gate.validate())?;
                match (&p.g_values, &p.g_range) {
                    (Some(_), Some(_)) => return Err(CliError::config("params.g_range", "give either g_values or g_range, not both")),
                    (None, None) => return Err(CliError::config("params.g_values", "missing (or give params.g_range)")),
                    (Some(v), None) => {
                        if v.is_empty() {
                            return Err(CliError::config("params.g_values", "must not be empty"));
                        }
                        for g in v {
                            positive("params.g_values", *g)?;
                        }
                    }
                    (None, Some(r)) => {
                        positive("params.g_range.start", r.start)?;
                        if !(r.stop >= r.start && r.stop.is_finite()) {
                            return Err(CliError::config("params.g_range.stop", "must be finite and >= start"));
                        }
                        if r.points == 0 {
                            return Err(CliError::config("params.g_range.points", "must be at least 1"));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Load a referenced envelope file.
    pub fn read_envelope(&self, key: &str, p: &Path) -> Result<Envelope, CliError> {
        let full = self.resolve(p);
        let f = std::fs::File::open(&full).map_err(|e| CliError::config(key, format!("cannot open {}: {e}", full.display())))?;
        Envelope::read_csv(std::io::BufReader::new(f)).map_err(|e| CliError::config(key, format!("{}: {e}", full.display())))
    }

    /// Load a referenced joint-spectrum file.
    pub fn read_spectrum(&self, key: &str, p: &Path) -> Result<JointSpectrum, CliError> {
        let full = self.resolve(p);
        let f = std::fs::File::open(&full).map_err(|e| CliError::config(key, format!("cannot open {}: {e}", full.display())))?;
        JointSpectrum::read_csv(std::io::BufReader::new(f)).map_err(|e| CliError::config(key, format!("{}: {e}", full.display())))
    }
}

fn toml_message(e: &toml::de::Error) -> String {
    let msg = e.message().to_string();
    match e.span() {
        Some(s) => format!("{msg} (at byte {})", s.start),
        None => msg,
    }
}

fn strip_nulls(v: Value) -> Value {
    match v {
        Value::Object(m) => Value::Object(
            m.into_iter()
                .filter(|(_, v)| !v.is_null())
                .map(|(k, v)| (k, strip_nulls(v)))
                .collect(),
        ),
        Value::Array(a) => Value::Array(a.into_iter().map(strip_nulls).collect()),
        v => v,
    }
}

fn nonneg(key: &str, v: f64) -> Result<(), CliError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::config(key, format!("must be finite and >= 0, got {v}")))
    }
}

fn positive(key: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::config(key, format!("must be finite and > 0, got {v}")))
    }
}

fn tolerance(key: &str, t: &Tolerance) -> Result<(), CliError> {
    positive(&format!("{key}.rtol"), t.rtol)?;
    positive(&format!("{key}.atol"), t.atol)
}

fn mode_present(atom: &AtomSpec, mode: ModeLabel) -> Result<(), CliError> {
    if atom.mode(mode).is_none() {
        return Err(CliError::config("params.mode", format!("atom has no mode `{mode}`")));
    }
    Ok(())
}

fn pulse(key: &str, p: &PulseSource, file: &dyn Fn(&str, &Path) -> Result<(), CliError>) -> Result<(), CliError> {
    match p {
        PulseSource::TruncatedGaussian { start, duration, points } => {
            if !start.is_finite() {
                return Err(CliError::config(&format!("{key}.start"), "must be finite"));
            }
            positive(&format!("{key}.duration"), *duration)?;
            if *points < 3 {
                return Err(CliError::config(&format!("{key}.points"), "need at least 3 points"));
            }
            Ok(())
        }
        PulseSource::File { path } => file(&format!("{key}.path"), path),
    }
}

fn two() -> usize {
    2
}
fn three() -> usize {
    3
}
fn four() -> usize {
    4
}
fn yes() -> bool {
    true
}
fn mode_a() -> ModeLabel {
    ModeLabel::A
}
fn no_jump() -> Method {
    Method::NoJump
}
fn optimal() -> DriveSource {
    DriveSource::Optimal
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Fig1b,
    Fig1c,
    Fig2,
    Fig3,
    LnToday,
    LnUltimate,
}

pub const PRESETS: [&str; 6] = ["fig1b", "fig1c", "fig2", "fig3", "ln-today", "ln-ultimate"];

impl FromStr for Preset {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Ok(match s {
            "fig1b" => Preset::Fig1b,
            "fig1c" => Preset::Fig1c,
            "fig2" => Preset::Fig2,
            "fig3" => Preset::Fig3,
            "ln-today" => Preset::LnToday,
            "ln-ultimate" => Preset::LnUltimate,
            other => {
                return Err(CliError::config(
                    "preset",
                    format!("unknown preset `{other}`, expected one of {}", PRESETS.join(", ")),
                ))
            }
        })
    }
}

fn degenerate(g: f64) -> AtomSpec {
    AtomSpec {
        kind: AtomKind::Degenerate,
        g,
        modes: vec![
            ModeSpec::new(ModeLabel::A, 0.0, 1.0, 0.0),
            ModeSpec::new(ModeLabel::C, 0.0, 1.0, 0.0),
        ],
    }
}

/// Fully populated config for a named figure or material estimate.
pub fn preset(p: Preset) -> ExperimentConfig {
    let experiment = match p {
        Preset::Fig1b => Experiment::Spectroscopy(SpectroscopyParams {
            atom: degenerate(4.0),
            n_max: 4,
            mode: ModeLabel::A,
            amplitude: 0.2,
            detuning: Range {
                start: -10.0,
                stop: 10.0,
                points: 801,
            },
            monitor: Some("20".into()),
        }),
        Preset::Fig1c => Experiment::Rabi(RabiParams {
            atom: degenerate(80.0),
            n_max: 3,
            mode: ModeLabel::A,
            amplitude: 10.0,
            t_end: 2.0,
            points: 4001,
            method: Method::NoJump,
            monitor: Some("10".into()),
            tolerance: Tolerance::default(),
        }),
        Preset::Fig2 => Experiment::Scatter2(Scatter2Params {
            cavity: ScatterParams::fig2(),
            input: SpectrumSource::Gaussian {
                center: 0.0,
                sigma: 0.5,
                half_width: 4.0,
                points: 201,
            },
            oracle: None,
            tolerance: Tolerance::default(),
        }),
        Preset::Fig3 => Experiment::Cz(GateConfig::default()),
        Preset::LnToday => Experiment::Cz(GateConfig {
            g: 0.25,
            ..GateConfig::default()
        }),
        Preset::LnUltimate => Experiment::Cz(GateConfig {
            g: 100.0,
            ..GateConfig::default()
        }),
    };
    ExperimentConfig {
        experiment,
        format: Some(Format::Csv),
        output: None,
        base_dir: PathBuf::new(),
    }
}
