#![no_main]

use chi2atom::envelope::Envelope;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(e) = Envelope::read_csv(data) {
        let mut out = Vec::new();
        e.write_csv(&mut out).unwrap();
        let back = Envelope::read_csv(out.as_slice()).expect("written envelope parses");
        assert_eq!(back.samples, e.samples);
    }
});
