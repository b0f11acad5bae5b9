#![no_main]

use libfuzzer_sys::fuzz_target;
use mlmprep::pll::{self, ProviderResponse, UniformProvider};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let mut out = Vec::new();
    pll::serve_provider(&UniformProvider::new(8), text.as_bytes(), &mut out).unwrap();
    let replies = std::str::from_utf8(&out).unwrap();
    let requests = text.lines().filter(|l| !l.trim().is_empty()).count();
    assert_eq!(replies.lines().count(), requests);
    for line in replies.lines() {
        let _: ProviderResponse = serde_json::from_str(line).unwrap();
    }
});
