//! Run-configuration override parser: must never panic; accepted override
//! sets must round-trip through the rendered form.

#![no_main]

use kernelpa::config::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let mut cfg = RunConfig::default();
    if cfg.apply_overrides(text).is_ok() {
        let rendered = cfg.to_text();
        let mut again = RunConfig::default();
        again
            .apply_overrides(&rendered)
            .expect("rendered config must parse");
        assert_eq!(again, cfg);
    }
});
