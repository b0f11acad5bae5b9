#![no_main]

use libfuzzer_sys::fuzz_target;
use mlmprep::midi;

fuzz_target!(|data: &[u8]| {
    if let Ok(score) = midi::parse_smf_with_warnings(data).map(|(s, _)| s) {
        assert!(score.is_canonical());
        let text = midi::encode_events(&score);
        let back = midi::decode_events_with_resolution(&text, score.ticks_per_quarter).unwrap();
        assert_eq!(back.absolute_times(), score.absolute_times());
    }
});
