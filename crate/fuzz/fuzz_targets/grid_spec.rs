#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(g) = ldx::config::GridSpec::parse(text) {
            if g.count <= 4096 {
                let pts = g.points();
                assert_eq!(pts.len(), g.count);
                assert!(pts.windows(2).all(|w| w[0] <= w[1]));
            }
        }
    }
});
