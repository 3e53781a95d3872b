//! Binary IQ record decoder: must never panic, and decoding followed by
//! re-encoding must reproduce the input bytes exactly.

#![no_main]

use kernelpa::io::{parse_iq_bytes, write_iq_bytes};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(samples) = parse_iq_bytes(data) {
        assert_eq!(write_iq_bytes(&samples), data);
    }
});
