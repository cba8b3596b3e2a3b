#![no_main]

use libfuzzer_sys::fuzz_target;

// The scheme parser validates against a state count; exercise a few so both
// the partition and the explicit-matrix paths get hit.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        for n in [1, 3, 8] {
            let _ = aggdp::io::parse_scheme(text, n);
        }
    }
});
