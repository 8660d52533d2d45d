#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(model) = ldx::config::parse_affine(text) {
            assert_eq!(model.dim(), model.m + model.n);
        }
    }
});
