mod common;

use mlmprep::midi::{self, MidiScore, NoteEvent, NoteKind, TimedEvent};
use proptest::prelude::*;

fn score_strategy() -> impl Strategy<Value = MidiScore> {
    (
        1u16..=0x7FFF,
        proptest::collection::vec((0u64..5000, 0u8..16, 0u8..128, any::<bool>()), 0..120),
    )
        .prop_map(|(tpq, raw)| {
            let mut score = MidiScore::new(tpq);
            let mut sounding: Vec<(u8, u8)> = Vec::new();
            for (delta, c, k, release) in raw {
                let event = if release && !sounding.is_empty() {
                    let (c, k) = sounding.remove(usize::from(k) % sounding.len());
                    NoteEvent::release(c, k).unwrap()
                } else {
                    sounding.push((c, k));
                    NoteEvent::onset(c, k).unwrap()
                };
                score.events.push(TimedEvent {
                    delta_ticks: delta,
                    event,
                });
            }
            score
        })
}

proptest! {
    #[test]
    fn decode_inverts_encode(score in score_strategy()) {
        let text = midi::encode_events(&score);
        let back = midi::decode_events_with_resolution(&text, score.ticks_per_quarter).unwrap();
        prop_assert_eq!(back, score);
    }

    #[test]
    fn smf_write_then_parse(score in score_strategy()) {
        let back = midi::parse_smf(&midi::write_smf(&score).unwrap()).unwrap();
        prop_assert_eq!(back, score);
    }

    #[test]
    fn codes_are_well_formed(score in score_strategy()) {
        let text = midi::encode_events(&score);
        let re = regex::Regex::new(r"^(c([0-9]|1[0-5])[nr]([0-9]|[1-9][0-9]|1[01][0-9]|12[0-7])|t[1-9][0-9]*)$").unwrap();
        for code in text.split(' ').filter(|c| !c.is_empty()) {
            prop_assert!(re.is_match(code), "{}", code);
        }
        let onsets = text.split(' ').filter(|c| c.contains('n')).count();
        let expected = score.events.iter().filter(|e| e.event.kind() == NoteKind::Onset).count();
        prop_assert_eq!(onsets, expected);
    }

    #[test]
    fn decoder_never_panics(text in "[ctnr0-9 ]{0,64}") {
        let _ = midi::decode_events(&text);
    }

    #[test]
    fn parser_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
        let mut file = common::smf(0, 96, &[]);
        file.truncate(14);
        file[11] = 1;
        file.extend_from_slice(b"MTrk");
        file.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
        file.extend_from_slice(&bytes);
        if let Ok(score) = midi::parse_smf(&file) {
            prop_assert!(score.is_canonical());
        }
    }
}

#[test]
fn consecutive_time_codes_add_up() {
    let score = midi::decode_events("c0n71 t18 t2 c0r71").unwrap();
    assert_eq!(score.absolute_times(), vec![0, 20]);
    assert_eq!(midi::encode_events(&score), "c0n71 t20 c0r71");
}
