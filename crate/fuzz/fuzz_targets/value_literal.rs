#![no_main]

use libfuzzer_sys::fuzz_target;

// The command line accepts hand-written complex scalars ("0.2+1.1i") and
// matrix literals ("[[2i,0.5];[0.5,i]]"). Both decoders are exercised on the
// same input since either may receive arbitrary argv text.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = voatrace::io::parse_complex(text);
        let _ = voatrace::io::parse_point_matrix(text);
    }
});
