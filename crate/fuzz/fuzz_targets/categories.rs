#![no_main]

use libfuzzer_sys::fuzz_target;
use mlmprep::mask::CategorySet;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(set) = CategorySet::parse(text) {
        for (i, cat) in set.categories().iter().enumerate() {
            for word in &cat.words {
                assert!(set.category_of(word).is_some_and(|c| c <= i));
            }
        }
    }
});
