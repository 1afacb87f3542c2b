#![no_main]

use libfuzzer_sys::fuzz_target;

// Pair files embed two lattice descriptions plus embedding matrices; the
// parser also verifies orthogonality and index bounds, all of which must
// fail cleanly on malformed input.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = voatrace::io::parse_pair(text);
    }
});
