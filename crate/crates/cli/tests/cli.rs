use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chi2atom_cli::config::{Experiment, ExperimentConfig};
use chi2atom_cli::{preset, Preset, RunManifest, PRESETS};
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_chi2atom"));
    c.env_remove("CHI2ATOM_OUT");
    c
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .args(["run", "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const STORE: &str = r#"
experiment = "store"

[params.antenna]
kappa_d0 = 1.0
kappa_d1 = 1000.0
kappa_b = 0.0

[params.input]
kind = "truncated-gaussian"
start = 0.0
duration = 1.0
points = 2001
"#;

const LEVELS: &str = r#"
experiment = "levels"

[params]
atom = { kind = "degenerate", g = 4.0, modes = [{ label = "a", kappa0 = 1.0 }, { label = "c", kappa0 = 1.0 }] }
"#;

#[test]
fn misspelt_key_is_a_config_error_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", &STORE.replace("kappa_d0", "kapa0"));
    let o = run(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("kapa0"), "{}", stderr(&o));
    assert!(!dir.path().join("out").exists(), "nothing may be computed or written");
}

#[test]
fn unknown_top_level_key_and_experiment_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.toml", &format!("formt = \"csv\"\n{LEVELS}"));
    let o = run(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("formt"));
    let cfg = write(dir.path(), "b.toml", &LEVELS.replace("\"levels\"", "\"lvels\""));
    let o = run(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("experiment"));
}

#[test]
fn negative_rate_and_missing_file_name_their_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "neg.toml", &STORE.replace("kappa_b = 0.0", "kappa_b = -1.0"));
    let o = run(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("kappa_b"), "{}", stderr(&o));
    let body = STORE.replace(
        "kind = \"truncated-gaussian\"\nstart = 0.0\nduration = 1.0\npoints = 2001",
        "kind = \"file\"\npath = \"missing.csv\"",
    );
    let cfg = write(dir.path(), "file.toml", &body);
    let o = run(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("params.input.path"), "{}", stderr(&o));
}

#[test]
fn numerical_failure_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = preset(Preset::Fig2).to_toml();
    cfg.push_str("\n[params.oracle]\nt_start = -1.0\nt_end = 1.0\npoints = 64\n");
    let cfg = write(dir.path(), "clip.toml", &cfg);
    let o = run(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let msg = stderr(&o);
    assert!(msg.contains("scattering") && msg.contains("clipping"), "{msg}");
}

#[test]
fn levels_reports_split_two_excitation_pair() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "levels.toml", LEVELS);
    let out = dir.path().join("out");
    assert!(run(&cfg, &out, &[]).status.success());
    let csv = fs::read_to_string(out.join("levels.csv")).unwrap();
    let n2: Vec<f64> = csv
        .lines()
        .skip(1)
        .filter(|l| l.starts_with("2,"))
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    let e = 2f64.sqrt() * 4.0;
    assert_eq!(n2.len(), 2);
    assert!((n2[0] + e).abs() < 1e-12 && (n2[1] - e).abs() < 1e-12, "{n2:?}");
}

#[test]
fn store_reaches_bound_and_manifest_checks_out() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "store.toml", STORE);
    let out = dir.path().join("out");
    let o = run(&cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = manifest(&out);
    let eta = m.summary["eta_s"].as_f64().unwrap();
    assert!((eta - 0.999).abs() < 1e-3, "{eta}");
    m.verify(&out).unwrap();
    let names: Vec<&str> = m.files.iter().map(|f| f.path.as_str()).collect();
    assert_eq!(names, ["input.csv", "drive.csv", "leak.csv"]);
    assert_eq!(m.config["params"]["antenna"]["kappa_d1"], 1000.0);
    assert_eq!(m.schema_version, 1);
}

#[test]
fn csv_bodies_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "store.toml", STORE);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run(&cfg, &a, &[]).status.success());
    assert!(run(&cfg, &b, &["--jobs", "3"]).status.success());
    let (ma, mb) = (manifest(&a), manifest(&b));
    assert_eq!(ma.files, mb.files);
    for f in &ma.files {
        assert_eq!(fs::read(a.join(&f.path)).unwrap(), fs::read(b.join(&f.path)).unwrap());
    }
}

#[test]
fn csv_uses_seventeen_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "store.toml", STORE);
    let out = dir.path().join("out");
    assert!(run(&cfg, &out, &[]).status.success());
    let csv = fs::read_to_string(out.join("drive.csv")).unwrap();
    let row = csv.lines().nth(5).unwrap();
    for field in row.split(',') {
        let mantissa = field.split('e').next().unwrap().trim_start_matches('-');
        assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17, "{field}");
    }
}

#[test]
fn env_var_sets_default_output_dir_and_flag_wins() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "levels.toml", LEVELS);
    let env_dir = dir.path().join("from-env");
    let o = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .env("CHI2ATOM_OUT", &env_dir)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(env_dir.join("manifest.json").is_file());
    let flag_dir = dir.path().join("from-flag");
    let o = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&flag_dir)
        .env("CHI2ATOM_OUT", dir.path().join("unused"))
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(flag_dir.join("manifest.json").is_file());
    assert!(!dir.path().join("unused").exists());
}

#[test]
fn json_format_writes_tables_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "levels.toml", LEVELS);
    let out = dir.path().join("out");
    assert!(run(&cfg, &out, &["--format", "json"]).status.success());
    let v: Value = serde_json::from_slice(&fs::read(out.join("levels.json")).unwrap()).unwrap();
    assert_eq!(v["columns"][0], "block");
    assert_eq!(v["rows"].as_array().unwrap().len(), 4);
    manifest(&out).verify(&out).unwrap();
}

#[test]
fn envelope_files_feed_back_as_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "store.toml", STORE);
    let first = dir.path().join("first");
    assert!(run(&cfg, &first, &[]).status.success());
    let body = STORE.replace(
        "kind = \"truncated-gaussian\"\nstart = 0.0\nduration = 1.0\npoints = 2001",
        "kind = \"file\"\npath = \"first/input.csv\"",
    ) + "\n[params.drive]\nkind = \"file\"\npath = \"first/drive.csv\"\n";
    let cfg2 = write(dir.path(), "again.toml", &body);
    let second = dir.path().join("second");
    let o = run(&cfg2, &second, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(manifest(&first).summary["eta_s"], manifest(&second).summary["eta_s"]);
}

#[test]
fn sweep_is_independent_of_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"
experiment = "sweep"

[params]
g_values = [40.0, 5.0, 12.0]

[params.gate]
samples_per_pulse = 60
"#;
    let cfg = write(dir.path(), "sweep.toml", body);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run(&cfg, &a, &["--jobs", "1"]).status.success());
    assert!(run(&cfg, &b, &["--jobs", "3"]).status.success());
    let sa = fs::read_to_string(a.join("sweep.csv")).unwrap();
    assert_eq!(sa, fs::read_to_string(b.join("sweep.csv")).unwrap());
    let mut lines = sa.lines();
    assert_eq!(lines.next(), Some("g,F_raw,F_ps,P_ps,phi_cond"));
    let g: Vec<f64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(g, [5.0, 12.0, 40.0]);
}

#[test]
fn every_preset_round_trips_through_toml_and_json() {
    for name in PRESETS {
        let p: Preset = name.parse().unwrap();
        let cfg = preset(p);
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg, "{name}");
        let back = ExperimentConfig::from_json(&cfg.to_json().to_string()).unwrap();
        assert_eq!(back, cfg, "{name}");
        cfg.validate().unwrap();
    }
    let o = bin().args(["preset", "fig4"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn presets_carry_the_stated_parameters() {
    match preset(Preset::Fig2).experiment {
        Experiment::Scatter2(p) => {
            assert_eq!(
                (
                    p.cavity.g,
                    p.cavity.kappa_a0,
                    p.cavity.kappa_a1,
                    p.cavity.kappa_c0,
                    p.cavity.kappa_c1
                ),
                (3.0, 1.0, 3.0, 1.0, 1.0)
            );
        }
        _ => panic!("fig2 is a scattering run"),
    }
    match preset(Preset::Fig3).experiment {
        Experiment::Cz(g) => {
            assert_eq!(g.antenna.kappa_d1, 1e3 * g.antenna.kappa_d0);
            assert_eq!(g.antenna.kappa_d0, 2.0);
            assert_eq!(g.pulse_duration, 0.1);
        }
        _ => panic!("fig3 is a gate run"),
    }
    match (preset(Preset::LnToday).experiment, preset(Preset::LnUltimate).experiment) {
        (Experiment::Cz(a), Experiment::Cz(b)) => {
            assert_eq!(a.g / a.kappa_a0, 0.25);
            assert_eq!(b.g / b.kappa_a0, 100.0);
        }
        _ => panic!("material presets are gate runs"),
    }
}

/// Every key the parser accepts in a preset must be declared by the schema.
fn check_against_schema(root: &Value, schema: &Value, value: &Value, at: &str) {
    let schema = resolve(root, schema);
    if let Some(alts) = schema.get("oneOf").and_then(Value::as_array) {
        let kind = value.get("kind").expect("tagged union carries kind");
        let alt = alts
            .iter()
            .map(|a| resolve(root, a))
            .find(|a| a["properties"]["kind"]["const"] == *kind)
            .unwrap_or_else(|| panic!("{at}: no schema branch for kind {kind}"));
        return check_against_schema(root, alt, value, at);
    }
    match value {
        Value::Object(m) => {
            let props = schema["properties"]
                .as_object()
                .unwrap_or_else(|| panic!("{at}: schema has no properties"));
            for req in schema["required"].as_array().into_iter().flatten() {
                assert!(m.contains_key(req.as_str().unwrap()), "{at}: required {req} missing");
            }
            for (k, v) in m {
                let sub = props.get(k).unwrap_or_else(|| panic!("{at}.{k} not in schema"));
                check_against_schema(root, sub, v, &format!("{at}.{k}"));
            }
        }
        Value::Array(items) => {
            if let Some(item) = schema.get("items") {
                for (i, v) in items.iter().enumerate() {
                    check_against_schema(root, item, v, &format!("{at}[{i}]"));
                }
            }
        }
        _ => {}
    }
}

fn resolve<'a>(root: &'a Value, s: &'a Value) -> &'a Value {
    match s.get("$ref").and_then(Value::as_str) {
        Some(r) => {
            let name = r.strip_prefix("#/$defs/").expect("local reference");
            resolve(root, &root["$defs"][name])
        }
        None => s,
    }
}

#[test]
fn schema_declares_every_preset_key() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schema/experiment-config.schema.json");
    let schema: Value = serde_json::from_slice(&fs::read(path).unwrap()).unwrap();
    for name in PRESETS {
        let cfg = preset(name.parse().unwrap()).to_json();
        let exp = cfg["experiment"].as_str().unwrap();
        let top = schema["properties"].as_object().unwrap();
        for k in cfg.as_object().unwrap().keys() {
            assert!(top.contains_key(k), "{name}: top-level {k}");
        }
        let params = &schema["$defs"][format!("params_{exp}")];
        assert!(!params.is_null(), "{exp} has a params schema");
        check_against_schema(&schema, params, &cfg["params"], name);
    }
}
