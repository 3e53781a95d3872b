//! Parametric-model file parser: must never panic; accepted models must have
//! a stable serialization fixed point.

#![no_main]

use kernelpa::parametric::ParametricModel;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(model) = ParametricModel::from_text(text) {
        let first = model.to_text();
        let again = ParametricModel::from_text(&first).expect("serialized model must parse");
        assert_eq!(again.to_text(), first);
    }
});
