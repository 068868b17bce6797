#![no_main]

use libfuzzer_sys::fuzz_target;
use ratreg::config::PipelineConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = PipelineConfig::from_json(text) {
        let _ = cfg.validate();
    }
});
