//! Pre-distorter file parser: must never panic; accepted files must have a
//! stable serialization fixed point.

#![no_main]

use kernelpa::dpd::DpdModel;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(model) = DpdModel::from_text(text) {
        let first = model.to_text();
        let again = DpdModel::from_text(&first).expect("serialized pre-distorter must parse");
        assert_eq!(again.to_text(), first);
    }
});
