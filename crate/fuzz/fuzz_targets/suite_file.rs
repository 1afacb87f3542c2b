#![no_main]

use libfuzzer_sys::fuzz_target;

// Suite files are the largest input surface: they carry lattice and pair
// tables plus one section per check, with cross-references between them.
// Parsing resolves every reference eagerly, so dangling names, bad matrices,
// and out-of-range indices must all surface as errors.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = voatrace::io::parse_suite(text);
    }
});
