#![no_main]

use libfuzzer_sys::fuzz_target;

// Arbitrary bytes must never panic the model parser; bad input is rejected
// through the error type.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = aggdp::io::parse_mdp(text);
    }
});
