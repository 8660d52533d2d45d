#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(v) = ldx::config::parse_list(text) {
            assert!(!v.is_empty());
        }
        if let Ok((lo, hi)) = ldx::config::parse_set(text) {
            assert!(lo <= hi);
        }
    }
});
