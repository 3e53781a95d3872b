//! Reference-PA config parser: must never panic; accepted configs must have
//! a stable serialization fixed point.

#![no_main]

use kernelpa::refpa::ReferencePaConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = ReferencePaConfig::from_text(text) {
        let first = cfg.to_text();
        let again = ReferencePaConfig::from_text(&first).expect("serialized config must parse");
        assert_eq!(again.to_text(), first);
    }
});
