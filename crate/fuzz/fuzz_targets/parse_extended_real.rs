#![no_main]

use libfuzzer_sys::fuzz_target;
use ratreg::ExtendedReal;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(x) = text.parse::<ExtendedReal>() {
        let back: ExtendedReal = x.to_string().parse().expect("display output parses");
        assert_eq!(back, x);
    }
});
