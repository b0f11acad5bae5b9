#![no_main]

use libfuzzer_sys::fuzz_target;
use mlmprep::midi;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(score) = midi::decode_events(text) {
        let again = midi::decode_events(&midi::encode_events(&score)).unwrap();
        assert_eq!(again.absolute_times(), score.absolute_times());
        assert_eq!(
            again.events.iter().map(|e| e.event).collect::<Vec<_>>(),
            score.events.iter().map(|e| e.event).collect::<Vec<_>>()
        );
        if let Ok(bytes) = midi::write_smf(&score) {
            assert_eq!(midi::parse_smf(&bytes).unwrap(), score);
        }
    }
});
