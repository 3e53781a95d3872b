//! Model-file parser: must never panic; any accepted model must serialize to
//! a stable fixed point (parse -> serialize -> parse -> serialize agrees).

#![no_main]

use kernelpa::npmodel::NonParametricModel;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(model) = NonParametricModel::from_text(text) {
        let first = model.to_text();
        let again = NonParametricModel::from_text(&first).expect("serialized model must parse");
        assert_eq!(again.to_text(), first);
    }
});
