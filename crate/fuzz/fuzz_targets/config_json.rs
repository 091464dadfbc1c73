#![no_main]

use chi2atom_cli::config::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = ExperimentConfig::from_json(text) else { return };
    if cfg.validate().is_ok() {
        let again = ExperimentConfig::from_json(&cfg.to_json().to_string()).expect("serialized config parses");
        assert_eq!(again.to_json(), cfg.to_json());
    }
});
