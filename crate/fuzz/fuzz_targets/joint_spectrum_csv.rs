#![no_main]

use chi2atom::scattering::JointSpectrum;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = JointSpectrum::read_csv(data) {
        let mut out = Vec::new();
        s.write_csv(&mut out).unwrap();
        let back = JointSpectrum::read_csv(out.as_slice()).expect("written spectrum parses");
        assert_eq!(back.amp, s.amp);
    }
});
