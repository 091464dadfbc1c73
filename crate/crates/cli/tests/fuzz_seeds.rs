//! Replays the checked-in fuzz corpus through the same checks as the fuzz targets.

use std::fs;
use std::path::{Path, PathBuf};

use chi2atom::envelope::Envelope;
use chi2atom::scattering::JointSpectrum;
use chi2atom_cli::config::ExperimentConfig;
use proptest::prelude::*;

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .map(|p| {
            let body = fs::read(&p).unwrap();
            (p, body)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "{target} has no seeds");
    out
}

fn config_round_trip(parse: fn(&str) -> Result<ExperimentConfig, chi2atom_cli::CliError>, text: &str, json: bool) -> bool {
    let Ok(cfg) = parse(text) else { return false };
    if cfg.validate().is_ok() {
        let written = if json { cfg.to_json().to_string() } else { cfg.to_toml() };
        let again = parse(&written).expect("serialized config parses");
        assert_eq!(again.to_json(), cfg.to_json());
    }
    true
}

#[test]
fn config_toml_seeds() {
    let mut accepted = 0;
    for (p, body) in seeds("config_toml") {
        let text = std::str::from_utf8(&body).unwrap();
        let ok = config_round_trip(ExperimentConfig::from_toml, text, false);
        assert_eq!(ok, !p.to_string_lossy().contains("-key"), "{}", p.display());
        accepted += ok as usize;
    }
    assert!(accepted >= 8);
}

#[test]
fn config_json_seeds() {
    for (p, body) in seeds("config_json") {
        let text = std::str::from_utf8(&body).unwrap();
        assert!(config_round_trip(ExperimentConfig::from_json, text, true), "{}", p.display());
    }
}

#[test]
fn envelope_csv_seeds() {
    for (p, body) in seeds("envelope_csv") {
        match Envelope::read_csv(body.as_slice()) {
            Ok(e) => {
                let mut out = Vec::new();
                e.write_csv(&mut out).unwrap();
                assert_eq!(Envelope::read_csv(out.as_slice()).unwrap().samples, e.samples);
            }
            Err(_) => assert!(p.ends_with("non-uniform.csv"), "{}", p.display()),
        }
    }
}

#[test]
fn joint_spectrum_csv_seeds() {
    for (p, body) in seeds("joint_spectrum_csv") {
        let s = JointSpectrum::read_csv(body.as_slice()).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        let mut out = Vec::new();
        s.write_csv(&mut out).unwrap();
        assert_eq!(JointSpectrum::read_csv(out.as_slice()).unwrap().amp, s.amp);
    }
}

#[test]
fn truncated_and_garbage_inputs_are_errors() {
    for (_, body) in seeds("envelope_csv").into_iter().chain(seeds("joint_spectrum_csv")) {
        for cut in [0, 1, body.len() / 3, body.len() / 2] {
            let _ = Envelope::read_csv(&body[..cut]);
            let _ = JointSpectrum::read_csv(&body[..cut]);
        }
    }
    assert!(Envelope::read_csv(&b"t,re,im\n0,1,0\n1e308,0,0\n-1e308,0,0\n"[..]).is_err());
    assert!(JointSpectrum::read_csv(&b"p1,p2,re,im,abs2\n0,0,nan,0,0\n"[..]).is_err());
    assert!(ExperimentConfig::from_toml("experiment = 3").is_err());
    assert!(ExperimentConfig::from_json("[").is_err());
}

fn all_seeds() -> Vec<Vec<u8>> {
    ["config_toml", "config_json", "envelope_csv", "joint_spectrum_csv"]
        .iter()
        .flat_map(|t| seeds(t))
        .map(|(_, b)| b)
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn mutated_seeds_never_panic(pick in any::<prop::sample::Index>(), edits in prop::collection::vec((any::<prop::sample::Index>(), any::<u8>()), 1..8), cut in any::<prop::sample::Index>()) {
        let pool = all_seeds();
        let mut body = pool[pick.index(pool.len())].clone();
        for (at, byte) in edits {
            let i = at.index(body.len());
            body[i] = byte;
        }
        body.truncate(cut.index(body.len() + 1));
        let _ = Envelope::read_csv(body.as_slice());
        let _ = JointSpectrum::read_csv(body.as_slice());
        if let Ok(text) = std::str::from_utf8(&body) {
            config_round_trip(ExperimentConfig::from_toml, text, false);
            config_round_trip(ExperimentConfig::from_json, text, true);
        }
    }
}
