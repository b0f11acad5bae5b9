#![no_main]

use libfuzzer_sys::fuzz_target;
use mlmprep::pipeline::PipelineConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(config) = PipelineConfig::from_toml(text, "/nonexistent") {
        let _ = config.hash();
        let _ = config.validate();
    }
});
