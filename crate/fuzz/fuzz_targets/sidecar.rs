//! Sidecar metadata parser: must never panic; accepted metadata must survive
//! a render/re-parse cycle field for field.

#![no_main]

use kernelpa::io::parse_sidecar;
use libfuzzer_sys::fuzz_target;

fn same(a: f64, b: f64) -> bool {
    (a.is_nan() && b.is_nan()) || a == b
}

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(meta) = parse_sidecar(text) {
        let rendered = format!(
            "sample_rate_hz = {:?}\nbandwidth_hz = {:?}\nlabel = {}\nn_samples = {}\n",
            meta.sample_rate_hz, meta.bandwidth_hz, meta.label, meta.n_samples
        );
        let again = parse_sidecar(&rendered).expect("rendered sidecar must parse");
        assert!(same(again.sample_rate_hz, meta.sample_rate_hz));
        assert!(same(again.bandwidth_hz, meta.bandwidth_hz));
        assert_eq!(again.label, meta.label);
        assert_eq!(again.n_samples, meta.n_samples);
    }
});
