#![no_main]

use libfuzzer_sys::fuzz_target;
use mlmprep::pack::PackManifest;

fuzz_target!(|data: &[u8]| {
    if let Ok(manifest) = PackManifest::from_bytes(data) {
        let again = PackManifest::from_bytes(&manifest.to_bytes()).unwrap();
        assert_eq!(again, manifest);
    }
});
