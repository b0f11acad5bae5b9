#![no_main]

use libfuzzer_sys::fuzz_target;
use mlmprep::pll;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(pairs) = pll::parse_pairs(text) {
        assert!(pairs.iter().all(|p| p.good != p.bad));
    }
});
