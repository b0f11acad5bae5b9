use super::{MidiScore, NoteKind};
use crate::{Error, Result};

const MAX_VLQ: u64 = 0x0FFF_FFFF;
const ONSET_VELOCITY: u8 = 100;
const RELEASE_VELOCITY: u8 = 64;

fn push_vlq(out: &mut Vec<u8>, value: u64) {
    let mut groups = [0u8; 4];
    let mut n = 0;
    let mut v = value;
    loop {
        groups[n] = (v & 0x7F) as u8;
        n += 1;
        v >>= 7;
        if v == 0 {
            break;
        }
    }
    for i in (0..n).rev() {
        out.push(groups[i] | if i > 0 { 0x80 } else { 0 });
    }
}

/// Writes a score as a single-track format-0 SMF. Onsets carry velocity
/// 100, releases are note-off events.
pub fn write_smf(score: &MidiScore) -> Result<Vec<u8>> {
    if score.ticks_per_quarter == 0 || score.ticks_per_quarter & 0x8000 != 0 {
        return Err(Error::Parameter(format!(
            "ticks_per_quarter {} is not a metrical division",
            score.ticks_per_quarter
        )));
    }
    let mut track = Vec::with_capacity(score.events.len() * 4 + 4);
    for (i, e) in score.events.iter().enumerate() {
        if e.delta_ticks > MAX_VLQ {
            return Err(Error::Parameter(format!(
                "event {i}: delta {} exceeds the largest SMF delta",
                e.delta_ticks
            )));
        }
        push_vlq(&mut track, e.delta_ticks);
        let (status, velocity) = match e.event.kind() {
            NoteKind::Onset => (0x90, ONSET_VELOCITY),
            NoteKind::Release => (0x80, RELEASE_VELOCITY),
        };
        track.extend_from_slice(&[status | e.event.channel(), e.event.key(), velocity]);
    }
    track.extend_from_slice(&[0x00, 0xFF, 0x2F, 0x00]);

    let mut out = Vec::with_capacity(track.len() + 22);
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&0u16.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&score.ticks_per_quarter.to_be_bytes());
    out.extend_from_slice(b"MTrk");
    out.extend_from_slice(&(track.len() as u32).to_be_bytes());
    out.extend_from_slice(&track);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::midi::{parse_smf, NoteEvent, TimedEvent};

    #[test]
    fn vlq_bytes() {
        for (value, bytes) in [
            (0u64, vec![0x00]),
            (0x7F, vec![0x7F]),
            (0x80, vec![0x81, 0x00]),
            (0x3FFF, vec![0xFF, 0x7F]),
            (0x0FFF_FFFF, vec![0xFF, 0xFF, 0xFF, 0x7F]),
        ] {
            let mut out = Vec::new();
            push_vlq(&mut out, value);
            assert_eq!(out, bytes, "{value:#x}");
        }
    }

    #[test]
    fn written_file_parses_back() {
        let mut score = MidiScore::new(480);
        for (delta, event) in [
            (0, NoteEvent::onset(0, 60)),
            (0, NoteEvent::onset(9, 36)),
            (240, NoteEvent::release(0, 60)),
            (200_000, NoteEvent::release(9, 36)),
        ] {
            score.events.push(TimedEvent {
                delta_ticks: delta,
                event: event.unwrap(),
            });
        }
        assert_eq!(parse_smf(&write_smf(&score).unwrap()).unwrap(), score);
    }

    #[test]
    fn oversized_delta_is_rejected() {
        let mut score = MidiScore::new(96);
        score.events.push(TimedEvent {
            delta_ticks: MAX_VLQ + 1,
            event: NoteEvent::onset(0, 1).unwrap(),
        });
        assert!(write_smf(&score).is_err());
    }
}
