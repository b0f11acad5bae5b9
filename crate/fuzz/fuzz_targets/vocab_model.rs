#![no_main]

use libfuzzer_sys::fuzz_target;
use mlmprep::unigram::Vocabulary;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(vocab) = Vocabulary::from_model_str(text) {
        let again = Vocabulary::from_model_str(&vocab.to_model_string()).unwrap();
        assert_eq!(again.pieces(), vocab.pieces());
    }
});
