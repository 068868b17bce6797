#![no_main]

use libfuzzer_sys::fuzz_target;
use ratreg::config::CesaroConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = CesaroConfig::from_json(text) {
        if let Ok(j) = cfg.jacobi.build() {
            assert!(j.sup_norm().is_finite() || j.is_empty());
        }
        let _ = cfg.torus.build();
    }
});
