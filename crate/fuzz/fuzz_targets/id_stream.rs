#![no_main]

use libfuzzer_sys::fuzz_target;
use mlmprep::pack;

fuzz_target!(|data: &[u8]| {
    if let Ok(docs) = pack::ids_from_bytes(data) {
        assert_eq!(pack::ids_to_bytes(&docs), data);
    }
});
