#![no_main]

use std::sync::OnceLock;

use libfuzzer_sys::fuzz_target;
use mlmprep::unigram::{self, TrainerConfig, Vocabulary};

fn vocab() -> &'static Vocabulary {
    static VOCAB: OnceLock<Vocabulary> = OnceLock::new();
    VOCAB.get_or_init(|| {
        let docs = [
            "the cat sat on the mat",
            "these dogs are not happy",
            "c0n60 t240 c0r60 c9n36 t120 c9r36",
            "every child can sing",
        ];
        unigram::train_unigram(&docs, &TrainerConfig::new(60))
            .unwrap()
            .0
    })
}

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let vocab = vocab();
    let ids = vocab.encode(text);
    let decoded = vocab.decode(&ids).unwrap();
    if !ids.contains(&unigram::UNK_ID) {
        let words: Vec<String> = unigram::boundary_words(text).collect();
        let normalized = words.join("").replace(unigram::WORD_BOUNDARY, " ");
        assert_eq!(decoded, normalized.trim_start_matches(' '));
    }
});
