//! Artifact writers and the run manifest.

use std::fs;
use std::io::Write;
use std::path::Path;

use chi2atom::envelope::{fmt17, Envelope};
use chi2atom::scattering::JointSpectrum;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::Format;
use crate::error::CliError;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => fmt17(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) => json!(x),
            Cell::Int(i) => json!(i),
            Cell::Text(s) => json!(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as i64)
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", self.columns.join(","))?;
        for r in &self.rows {
            writeln!(w, "{}", r.iter().map(Cell::csv).collect::<Vec<_>>().join(","))?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        json!({
            "columns": self.columns,
            "rows": self.rows.iter().map(|r| r.iter().map(Cell::json).collect::<Vec<_>>()).collect::<Vec<_>>(),
        })
    }
}

fn envelope_table(e: &Envelope) -> Table {
    let mut t = Table::new(["t", "re", "im"]);
    for (i, s) in e.samples.iter().enumerate() {
        t.push(vec![e.time(i).into(), s.re.into(), s.im.into()]);
    }
    t
}

fn spectrum_table(s: &JointSpectrum) -> Table {
    let mut t = Table::new(["p1", "p2", "re", "im", "abs2"]);
    for i in 0..s.n() {
        for j in 0..s.n() {
            let a = s.amp[(i, j)];
            t.push(vec![s.p[i].into(), s.p[j].into(), a.re.into(), a.im.into(), a.norm_sqr().into()]);
        }
    }
    t
}

/// One output of an experiment, named without extension.
#[derive(Clone, Debug)]
pub enum Artifact {
    Table(String, Table),
    Envelope(String, Envelope),
    Spectrum(String, JointSpectrum),
    Json(String, Value),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

fn emit(dir: &Path, file: String, body: Vec<u8>, files: &mut Vec<FileEntry>) -> Result<(), CliError> {
    let full = dir.join(&file);
    fs::write(&full, &body).map_err(|e| CliError::Output(format!("cannot write {}: {e}", full.display())))?;
    files.push(FileEntry {
        path: file,
        sha256: format!("{:x}", Sha256::digest(&body)),
        bytes: body.len() as u64,
    });
    Ok(())
}

fn pretty(v: &Value) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("JSON value serializes");
    s.push(b'\n');
    s
}

/// Write every artifact into `dir` in the requested format.
pub fn write_artifacts(dir: &Path, artifacts: &[Artifact], format: Format) -> Result<Vec<FileEntry>, CliError> {
    let mut files = Vec::new();
    for a in artifacts {
        match (a, format) {
            (Artifact::Table(name, t), Format::Csv) => {
                let mut buf = Vec::new();
                t.write_csv(&mut buf)?;
                emit(dir, format!("{name}.csv"), buf, &mut files)?;
            }
            (Artifact::Table(name, t), Format::Json) => emit(dir, format!("{name}.json"), pretty(&t.to_json()), &mut files)?,
            (Artifact::Envelope(name, e), Format::Csv) => {
                let mut buf = Vec::new();
                e.write_csv(&mut buf).map_err(|e| CliError::Output(e.to_string()))?;
                emit(dir, format!("{name}.csv"), buf, &mut files)?;
            }
            (Artifact::Envelope(name, e), Format::Json) => {
                let mut v = envelope_table(e).to_json();
                v["kind"] = json!(e.kind);
                v["dt"] = json!(e.dt);
                v["energy"] = json!(e.energy());
                emit(dir, format!("{name}.json"), pretty(&v), &mut files)?;
            }
            (Artifact::Spectrum(name, s), Format::Csv) => {
                let mut buf = Vec::new();
                s.write_csv(&mut buf).map_err(|e| CliError::Output(e.to_string()))?;
                emit(dir, format!("{name}.csv"), buf, &mut files)?;
                let side = serde_json::to_value(s.sidecar()).expect("sidecar serializes");
                emit(dir, format!("{name}.meta.json"), pretty(&side), &mut files)?;
            }
            (Artifact::Spectrum(name, s), Format::Json) => {
                let mut v = spectrum_table(s).to_json();
                v["grid"] = serde_json::to_value(s.sidecar()).expect("sidecar serializes");
                emit(dir, format!("{name}.json"), pretty(&v), &mut files)?;
            }
            (Artifact::Json(name, v), _) => emit(dir, format!("{name}.json"), pretty(v), &mut files)?,
        }
    }
    Ok(files)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub compute_seconds: f64,
    pub write_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub experiment: String,
    pub format: Format,
    /// Seconds since the Unix epoch at the start of the run.
    pub started_unix: f64,
    pub timings: Timings,
    pub config: Value,
    pub summary: Value,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let v = serde_json::to_value(self).expect("manifest serializes");
        let full = dir.join("manifest.json");
        fs::write(&full, pretty(&v)).map_err(|e| CliError::Output(format!("cannot write {}: {e}", full.display())))
    }

    /// Re-hash every listed file and report the first mismatch.
    pub fn verify(&self, dir: &Path) -> Result<(), String> {
        for f in &self.files {
            let body = fs::read(dir.join(&f.path)).map_err(|e| format!("{}: {e}", f.path))?;
            if format!("{:x}", Sha256::digest(&body)) != f.sha256 {
                return Err(format!("{}: checksum mismatch", f.path));
            }
        }
        Ok(())
    }
}
