#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(kv) = ldx::config::KeyValues::parse(text) {
            for key in kv.keys() {
                assert!(kv.get(key).is_some());
            }
        }
    }
});
