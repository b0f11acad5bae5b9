//! Standard MIDI File ingestion and the event-code text representation.
//!
//! A [`MidiScore`] is a single merged, chronological timeline of note onsets
//! and releases. [`parse_smf`] builds one from SMF bytes, [`encode_events`]
//! renders it as space-delimited codes and [`decode_events`] inverts that.
//! [`write_smf`] turns a score back into a format-0 file.

mod codec;
mod smf;
mod writer;

pub use codec::{
    decode_events, decode_events_with_resolution, encode_events, DEFAULT_TICKS_PER_QUARTER,
};
pub use smf::{parse_smf, parse_smf_with_warnings, ParseWarning};
pub use writer::write_smf;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoteKind {
    Onset,
    Release,
}

/// A note onset or release on one channel/key. Construct through
/// [`NoteEvent::new`] to keep channel and key in their MIDI ranges.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NoteEvent {
    kind: NoteKind,
    channel: u8,
    key: u8,
}

impl NoteEvent {
    pub fn new(kind: NoteKind, channel: u8, key: u8) -> Option<Self> {
        (channel < 16 && key < 128).then_some(NoteEvent { kind, channel, key })
    }

    pub fn onset(channel: u8, key: u8) -> Option<Self> {
        Self::new(NoteKind::Onset, channel, key)
    }

    pub fn release(channel: u8, key: u8) -> Option<Self> {
        Self::new(NoteKind::Release, channel, key)
    }

    pub fn kind(&self) -> NoteKind {
        self.kind
    }

    pub fn channel(&self) -> u8 {
        self.channel
    }

    pub fn key(&self) -> u8 {
        self.key
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimedEvent {
    /// Ticks since the previous event of the merged timeline.
    pub delta_ticks: u64,
    pub event: NoteEvent,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MidiScore {
    pub ticks_per_quarter: u16,
    pub events: Vec<TimedEvent>,
}

impl MidiScore {
    pub fn new(ticks_per_quarter: u16) -> Self {
        MidiScore {
            ticks_per_quarter,
            events: Vec::new(),
        }
    }

    /// Absolute tick of every event.
    pub fn absolute_times(&self) -> Vec<u64> {
        self.events
            .iter()
            .scan(0u64, |t, e| {
                *t += e.delta_ticks;
                Some(*t)
            })
            .collect()
    }

    /// True when every release closes a still-sounding onset on the same
    /// channel and key.
    pub fn is_canonical(&self) -> bool {
        let mut sounding = [[0u32; 128]; 16];
        for e in &self.events {
            let slot = &mut sounding[e.event.channel as usize][e.event.key as usize];
            match e.event.kind {
                NoteKind::Onset => *slot += 1,
                NoteKind::Release if *slot == 0 => return false,
                NoteKind::Release => *slot -= 1,
            }
        }
        true
    }
}

/// Builds a canonical timeline from events at absolute times, dropping
/// releases with no sounding onset. Returns the score and the absolute times
/// of the dropped releases.
pub(crate) fn canonicalize(
    ticks_per_quarter: u16,
    absolute: impl IntoIterator<Item = (u64, NoteEvent)>,
) -> (MidiScore, Vec<(u64, NoteEvent)>) {
    let mut sounding = [[0u32; 128]; 16];
    let mut score = MidiScore::new(ticks_per_quarter);
    let mut dropped = Vec::new();
    let mut last = 0u64;
    for (time, event) in absolute {
        let slot = &mut sounding[event.channel as usize][event.key as usize];
        match event.kind {
            NoteKind::Onset => *slot += 1,
            NoteKind::Release if *slot == 0 => {
                dropped.push((time, event));
                continue;
            }
            NoteKind::Release => *slot -= 1,
        }
        score.events.push(TimedEvent {
            delta_ticks: time - last,
            event,
        });
        last = time;
    }
    (score, dropped)
}
