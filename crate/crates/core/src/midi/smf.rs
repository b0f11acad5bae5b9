use tracing::warn;

use super::{canonicalize, MidiScore, NoteEvent};
use crate::{Error, Result};

/// Non-fatal findings while reading an SMF.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParseWarning {
    UnknownChunk { offset: usize, id: [u8; 4] },
    OrphanRelease { tick: u64, channel: u8, key: u8 },
    TrackCountMismatch { declared: u16, found: u16 },
    TrailingBytes { offset: usize, len: usize },
    MissingEndOfTrack { track: u16 },
}

/// Parses SMF bytes into a merged note timeline, logging any warnings.
pub fn parse_smf(bytes: &[u8]) -> Result<MidiScore> {
    let (score, warnings) = parse_smf_with_warnings(bytes)?;
    for w in &warnings {
        warn!(warning = ?w, "smf");
    }
    Ok(score)
}

/// Like [`parse_smf`] but returns the warnings instead of logging them.
pub fn parse_smf_with_warnings(bytes: &[u8]) -> Result<(MidiScore, Vec<ParseWarning>)> {
    let mut reader = Reader { bytes, pos: 0 };
    let mut warnings = Vec::new();

    let id = reader.take(4, "missing header chunk")?;
    if id != b"MThd" {
        return Err(smf_error(0, "file does not start with an MThd chunk"));
    }
    let header_len = reader.u32("truncated header length")? as usize;
    if header_len < 6 {
        return Err(smf_error(
            4,
            format!("header length {header_len} is shorter than 6"),
        ));
    }
    let header_start = reader.pos;
    let format = reader.u16("truncated header")?;
    let declared_tracks = reader.u16("truncated header")?;
    let division = reader.u16("truncated header")?;
    if format > 1 {
        return Err(smf_error(
            header_start,
            format!("unsupported SMF format {format}"),
        ));
    }
    if division & 0x8000 != 0 {
        return Err(smf_error(
            header_start + 4,
            "SMPTE time division is not supported",
        ));
    }
    if division == 0 {
        return Err(smf_error(
            header_start + 4,
            "ticks per quarter note must be positive",
        ));
    }
    reader.skip(header_len - 6, "truncated header")?;

    let mut notes: Vec<(u64, u16, NoteEvent)> = Vec::new();
    let mut track_index: u16 = 0;
    while reader.pos < bytes.len() {
        let chunk_start = reader.pos;
        if bytes.len() - chunk_start < 8 {
            warnings.push(ParseWarning::TrailingBytes {
                offset: chunk_start,
                len: bytes.len() - chunk_start,
            });
            break;
        }
        let id: [u8; 4] = reader.take(4, "truncated chunk id")?.try_into().unwrap();
        let len = reader.u32("truncated chunk length")? as usize;
        let body_start = reader.pos;
        let body = reader
            .take(len, "chunk length runs past end of file")
            .map_err(|_| {
                smf_error(
                    chunk_start + 4,
                    format!("chunk length {len} runs past end of file"),
                )
            })?;
        if &id == b"MTrk" {
            let ended = parse_track(body, body_start, track_index, &mut notes)?;
            if !ended {
                warnings.push(ParseWarning::MissingEndOfTrack { track: track_index });
            }
            track_index = track_index.saturating_add(1);
        } else {
            warnings.push(ParseWarning::UnknownChunk {
                offset: chunk_start,
                id,
            });
        }
    }
    if track_index != declared_tracks {
        warnings.push(ParseWarning::TrackCountMismatch {
            declared: declared_tracks,
            found: track_index,
        });
    }

    // Stable sort: equal times keep track order, then within-track order.
    notes.sort_by_key(|&(time, track, _)| (time, track));
    let (score, dropped) = canonicalize(division, notes.into_iter().map(|(t, _, e)| (t, e)));
    warnings.extend(
        dropped
            .into_iter()
            .map(|(tick, e)| ParseWarning::OrphanRelease {
                tick,
                channel: e.channel(),
                key: e.key(),
            }),
    );
    Ok((score, warnings))
}

/// Returns whether an end-of-track meta event was seen.
fn parse_track(
    body: &[u8],
    base: usize,
    track: u16,
    out: &mut Vec<(u64, u16, NoteEvent)>,
) -> Result<bool> {
    let mut r = Reader {
        bytes: body,
        pos: 0,
    };
    let mut time = 0u64;
    let mut running: Option<u8> = None;
    let at = |pos: usize| base + pos;

    while r.pos < body.len() {
        time += u64::from(r.vlq().map_err(|e| e.rebase(base))?);
        let status_pos = r.pos;
        let first = r
            .byte()
            .ok_or_else(|| smf_error(at(status_pos), "truncated event"))?;
        let status = if first & 0x80 != 0 {
            first
        } else {
            r.pos -= 1;
            running.ok_or_else(|| smf_error(at(status_pos), "data byte with no running status"))?
        };
        match status {
            0x80..=0xEF => {
                running = Some(status);
                let n = if (0xC0..=0xDF).contains(&status) {
                    1
                } else {
                    2
                };
                let mut data = [0u8; 2];
                for slot in data.iter_mut().take(n) {
                    let pos = r.pos;
                    let b = r
                        .byte()
                        .ok_or_else(|| smf_error(at(pos), "truncated channel message"))?;
                    if b & 0x80 != 0 {
                        return Err(smf_error(
                            at(pos),
                            format!("status byte {b:#04x} inside channel message"),
                        ));
                    }
                    *slot = b;
                }
                let channel = status & 0x0F;
                let event = match status & 0xF0 {
                    0x80 => NoteEvent::release(channel, data[0]),
                    0x90 if data[1] == 0 => NoteEvent::release(channel, data[0]),
                    0x90 => NoteEvent::onset(channel, data[0]),
                    _ => None,
                };
                if let Some(event) = event {
                    out.push((time, track, event));
                }
            }
            0xFF => {
                running = None;
                let pos = r.pos;
                let kind = r
                    .byte()
                    .ok_or_else(|| smf_error(at(pos), "truncated meta event"))?;
                let len = r.vlq().map_err(|e| e.rebase(base))? as usize;
                let pos = r.pos;
                r.skip(len, "")
                    .map_err(|_| smf_error(at(pos), "meta event runs past end of track"))?;
                if kind == 0x2F {
                    return Ok(true);
                }
            }
            0xF0 | 0xF7 => {
                running = None;
                let len = r.vlq().map_err(|e| e.rebase(base))? as usize;
                let pos = r.pos;
                r.skip(len, "")
                    .map_err(|_| smf_error(at(pos), "sysex event runs past end of track"))?;
            }
            other => {
                return Err(smf_error(
                    at(status_pos),
                    format!("unsupported status byte {other:#04x}"),
                ));
            }
        }
    }
    Ok(false)
}

fn smf_error(offset: usize, message: impl Into<String>) -> Error {
    Error::Smf {
        offset,
        message: message.into(),
    }
}

impl Error {
    fn rebase(self, base: usize) -> Error {
        match self {
            Error::Smf { offset, message } => Error::Smf {
                offset: offset + base,
                message,
            },
            other => other,
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn byte(&mut self) -> Option<u8> {
        let b = *self.bytes.get(self.pos)?;
        self.pos += 1;
        Some(b)
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&end| end <= self.bytes.len())
            .ok_or_else(|| smf_error(self.pos, what))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn skip(&mut self, n: usize, what: &str) -> Result<()> {
        self.take(n, what).map(|_| ())
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        let b = self.take(2, what)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    /// Variable-length quantity: at most four bytes, seven bits each.
    fn vlq(&mut self) -> Result<u32> {
        let start = self.pos;
        let mut value = 0u32;
        for _ in 0..4 {
            let b = self
                .byte()
                .ok_or_else(|| smf_error(start, "truncated variable-length quantity"))?;
            value = (value << 7) | u32::from(b & 0x7F);
            if b & 0x80 == 0 {
                return Ok(value);
            }
        }
        Err(smf_error(
            start,
            "variable-length quantity longer than four bytes",
        ))
    }
}
