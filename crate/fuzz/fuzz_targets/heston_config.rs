#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(p) = ldx::config::parse_heston(text) {
            let again = ldx::config::parse_heston(&ldx::config::heston_to_string(&p)).unwrap();
            assert_eq!(p, again);
            let _ = ldx::heston::domain(&p);
        }
    }
});
