//! CSV IQ record parser: must never panic; accepted inputs must survive a
//! re-encode/re-parse cycle with identical values (NaN compared as NaN).

#![no_main]

use kernelpa::io::{parse_iq_csv, write_iq_csv};
use libfuzzer_sys::fuzz_target;

fn same(a: f64, b: f64) -> bool {
    (a.is_nan() && b.is_nan()) || a == b
}

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(samples) = parse_iq_csv(text) {
        let encoded = write_iq_csv(&samples);
        let again = parse_iq_csv(&encoded).expect("re-encoded CSV must parse");
        assert_eq!(samples.len(), again.len());
        for (a, b) in samples.iter().zip(&again) {
            assert!(same(a.re, b.re) && same(a.im, b.im), "{a} vs {b}");
        }
    }
});
