#![no_main]

use libfuzzer_sys::fuzz_target;
use ratreg::config::MeasureSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = MeasureSpec::from_json(text) {
        // file lookups stay inside an empty directory
        let dir = std::env::temp_dir().join("ratreg-fuzz-empty");
        if let Ok(mu) = spec.build(&dir, 16) {
            assert!(mu.total_mass().is_finite());
        }
    }
});
