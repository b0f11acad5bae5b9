use std::fmt::Write;

use tracing::warn;

use super::{canonicalize, MidiScore, NoteEvent, NoteKind};
use crate::{Error, Result};

/// Resolution assumed by [`decode_events`]; the text form does not carry it.
pub const DEFAULT_TICKS_PER_QUARTER: u16 = 480;

/// Renders a score as space-delimited codes: `t{d}` for a nonzero delta,
/// then `c{channel}n{key}` for an onset or `c{channel}r{key}` for a release.
pub fn encode_events(score: &MidiScore) -> String {
    let mut out = String::with_capacity(score.events.len() * 7);
    for e in &score.events {
        if e.delta_ticks > 0 {
            if !out.is_empty() {
                out.push(' ');
            }
            write!(out, "t{}", e.delta_ticks).unwrap();
        }
        if !out.is_empty() {
            out.push(' ');
        }
        let letter = match e.event.kind() {
            NoteKind::Onset => 'n',
            NoteKind::Release => 'r',
        };
        write!(out, "c{}{}{}", e.event.channel(), letter, e.event.key()).unwrap();
    }
    out
}

pub fn decode_events(text: &str) -> Result<MidiScore> {
    decode_events_with_resolution(text, DEFAULT_TICKS_PER_QUARTER)
}

/// Inverse of [`encode_events`]. Consecutive time codes add up; a time code
/// with no following event is ignored.
pub fn decode_events_with_resolution(text: &str, ticks_per_quarter: u16) -> Result<MidiScore> {
    let mut time = 0u64;
    let mut absolute = Vec::new();
    for (index, token) in text.split_whitespace().enumerate() {
        let bad = || Error::EventCode {
            index,
            token: token.to_string(),
        };
        match parse_code(token).ok_or_else(bad)? {
            Code::Time(d) => time = time.checked_add(d).ok_or_else(bad)?,
            Code::Note(e) => absolute.push((time, e)),
        }
    }
    let (score, dropped) = canonicalize(ticks_per_quarter, absolute);
    for (tick, e) in dropped {
        warn!(
            tick,
            channel = e.channel(),
            key = e.key(),
            "dropping release with no sounding onset"
        );
    }
    Ok(score)
}

enum Code {
    Time(u64),
    Note(NoteEvent),
}

fn parse_code(token: &str) -> Option<Code> {
    let digits = |s: &str, max_len: usize| -> Option<u64> {
        (!s.is_empty() && s.len() <= max_len && s.bytes().all(|b| b.is_ascii_digit()))
            .then(|| s.parse().ok())
            .flatten()
    };
    if let Some(rest) = token.strip_prefix('t') {
        return digits(rest, 20).map(Code::Time);
    }
    let rest = token.strip_prefix('c')?;
    let split = rest.find(['n', 'r'])?;
    let channel = digits(&rest[..split], 2)?;
    let key = digits(&rest[split + 1..], 3)?;
    let kind = if rest.as_bytes()[split] == b'n' {
        NoteKind::Onset
    } else {
        NoteKind::Release
    };
    let channel = u8::try_from(channel).ok()?;
    let key = u8::try_from(key).ok()?;
    NoteEvent::new(kind, channel, key).map(Code::Note)
}
