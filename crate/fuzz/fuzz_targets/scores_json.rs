#![no_main]

use libfuzzer_sys::fuzz_target;

// Score specs are either a value vector or a builtin name; parsing arbitrary
// bytes must stay panic-free.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = aggdp::io::parse_scores(text);
    }
});
