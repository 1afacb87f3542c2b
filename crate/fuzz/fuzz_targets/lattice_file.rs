#![no_main]

use libfuzzer_sys::fuzz_target;

// The lattice parser must reject arbitrary input with an error, never panic
// or hang. Validation runs the full pipeline: JSON shape, Gram symmetry,
// evenness, positivity, and the size caps.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = voatrace::io::parse_lattice(text);
    }
});
