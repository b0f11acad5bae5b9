#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use mlmprep::mask::{self, AlignedSample, CategorySet};
use mlmprep::midi::{MidiScore, NoteEvent, NoteKind, TimedEvent};
use mlmprep::pll::LogitProvider;
use mlmprep::unigram::{self, Piece, Vocabulary, MASK_ID};
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;

// ---------------------------------------------------------------- SMF

pub fn vlq(mut v: u32) -> Vec<u8> {
    let mut out = vec![(v & 0x7F) as u8];
    v >>= 7;
    while v > 0 {
        out.push((v & 0x7F) as u8 | 0x80);
        v >>= 7;
    }
    out.reverse();
    out
}

pub fn smf(format: u16, division: u16, tracks: &[Vec<u8>]) -> Vec<u8> {
    let mut out = b"MThd".to_vec();
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&format.to_be_bytes());
    out.extend_from_slice(&(tracks.len() as u16).to_be_bytes());
    out.extend_from_slice(&division.to_be_bytes());
    for t in tracks {
        out.extend_from_slice(b"MTrk");
        out.extend_from_slice(&(t.len() as u32).to_be_bytes());
        out.extend_from_slice(t);
    }
    out
}

pub const EOT: [u8; 4] = [0x00, 0xFF, 0x2F, 0x00];

/// Track bytes from `(delta, raw event bytes)` items, end-of-track appended.
pub fn track(items: &[(u32, &[u8])]) -> Vec<u8> {
    let mut out = Vec::new();
    for (delta, bytes) in items {
        out.extend(vlq(*delta));
        out.extend_from_slice(bytes);
    }
    out.extend_from_slice(&EOT);
    out
}

/// Hand-assembled files covering format 0 and 1, running status,
/// velocity-0 releases, meta/sysex interleaving and multi-byte deltas.
pub fn golden_files() -> Vec<(&'static str, Vec<u8>)> {
    vec![
        (
            "format0_note_off",
            smf(
                0,
                480,
                &[track(&[
                    (0, &[0x90, 71, 0x40]),
                    (18, &[0x80, 71, 0x40]),
                    (0, &[0x90, 72, 0x50]),
                    (462, &[0x80, 72, 0]),
                ])],
            ),
        ),
        (
            "format0_running_status_velocity0",
            smf(
                0,
                96,
                &[track(&[
                    (0, &[0x90, 60, 100]),
                    (0, &[64, 100]),
                    (0, &[67, 100]),
                    (96, &[60, 0]),
                    (0, &[64, 0]),
                    (48, &[67, 0]),
                    (0, &[60, 90]),
                    (200, &[60, 0]),
                ])],
            ),
        ),
        (
            "format1_three_tracks_ties",
            smf(
                1,
                240,
                &[
                    track(&[
                        (0, &[0xFF, 0x51, 0x03, 0x07, 0xA1, 0x20]),
                        (0, &[0xFF, 0x58, 0x04, 4, 2, 24, 8]),
                    ]),
                    track(&[
                        (0, &[0x90, 60, 80]),
                        (240, &[0x80, 60, 0]),
                        (0, &[0x90, 62, 80]),
                        (240, &[62, 0]),
                    ]),
                    track(&[
                        (0, &[0x91, 36, 70]),
                        (240, &[0x91, 36, 0]),
                        (0, &[0x91, 38, 70]),
                        (480, &[0x81, 38, 0]),
                    ]),
                ],
            ),
        ),
        (
            "format0_meta_and_sysex_between_notes",
            smf(
                0,
                480,
                &[track(&[
                    (0, &[0xFF, 0x03, 0x04, b'l', b'e', b'a', b'd']),
                    (0, &[0xC0, 5]),
                    (10, &[0x99, 36, 100]),
                    (0, &[0xF0, 0x03, 0x7E, 0x7F, 0xF7]),
                    (5, &[0x99, 42, 100]),
                    (0, &[0xB0, 7, 100]),
                    (30, &[0x89, 36, 0]),
                    (0, &[0xFF, 0x01, 0x02, b'h', b'i']),
                    (0, &[0x99, 42, 0]),
                ])],
            ),
        ),
        (
            "format0_long_deltas_overlapping_keys",
            smf(
                0,
                960,
                &[track(&[
                    (0, &[0x90, 50, 64]),
                    (0x3FFF, &[0x90, 50, 64]),
                    (0x4000, &[0x80, 50, 64]),
                    (0x0FFF_FFFF, &[0x80, 50, 64]),
                    (1, &[0x9F, 127, 1]),
                    (0x7F, &[0x8F, 127, 0]),
                ])],
            ),
        ),
        (
            "format1_orphan_release_and_pitch_bend",
            smf(
                1,
                120,
                &[
                    track(&[
                        (0, &[0x80, 40, 0]),
                        (10, &[0x90, 41, 60]),
                        (0, &[0xE0, 0x00, 0x40]),
                        (10, &[0x80, 41, 0]),
                    ]),
                    track(&[
                        (10, &[0x92, 41, 60]),
                        (0, &[0xA2, 41, 30]),
                        (10, &[0x92, 41, 0]),
                    ]),
                ],
            ),
        ),
    ]
}

/// Note timeline from the independent midly parser: per-track absolute
/// times, stable merge by (time, track), velocity-0 onsets as releases,
/// unmatched releases dropped.
pub fn midly_timeline(bytes: &[u8]) -> (u16, Vec<(u64, NoteKind, u8, u8)>) {
    let parsed = midly::Smf::parse(bytes).expect("reference parser accepts the file");
    let tpq = match parsed.header.timing {
        midly::Timing::Metrical(t) => t.as_int(),
        other => panic!("unexpected timing {other:?}"),
    };
    let mut raw = Vec::new();
    for (track_index, track) in parsed.tracks.iter().enumerate() {
        let mut t = 0u64;
        for ev in track {
            t += u64::from(ev.delta.as_int());
            if let midly::TrackEventKind::Midi { channel, message } = ev.kind {
                let (kind, key) = match message {
                    midly::MidiMessage::NoteOn { key, vel } if vel.as_int() > 0 => {
                        (NoteKind::Onset, key.as_int())
                    }
                    midly::MidiMessage::NoteOn { key, .. }
                    | midly::MidiMessage::NoteOff { key, .. } => (NoteKind::Release, key.as_int()),
                    _ => continue,
                };
                raw.push((t, track_index, kind, channel.as_int(), key));
            }
        }
    }
    raw.sort_by_key(|&(t, track, ..)| (t, track));
    let mut sounding: HashMap<(u8, u8), u32> = HashMap::new();
    let mut out = Vec::new();
    for (t, _, kind, ch, key) in raw {
        let n = sounding.entry((ch, key)).or_default();
        match kind {
            NoteKind::Onset => *n += 1,
            NoteKind::Release if *n == 0 => continue,
            NoteKind::Release => *n -= 1,
        }
        out.push((t, kind, ch, key));
    }
    (tpq, out)
}

pub fn timeline(score: &MidiScore) -> Vec<(u64, NoteKind, u8, u8)> {
    score
        .absolute_times()
        .into_iter()
        .zip(&score.events)
        .map(|(t, e)| (t, e.event.kind(), e.event.channel(), e.event.key()))
        .collect()
}

/// Random canonical score: releases only close sounding notes.
pub fn random_score(rng: &mut ChaCha8Rng, max_events: usize) -> MidiScore {
    let mut score = MidiScore::new(rng.random_range(1..=0x7FFF));
    let mut sounding: Vec<(u8, u8)> = Vec::new();
    for _ in 0..rng.random_range(0..=max_events) {
        let delta = match rng.random_range(0..4) {
            0 => 0,
            1 => rng.random_range(1..20),
            2 => rng.random_range(20..2000),
            _ => rng.random_range(2000..10_000_000),
        };
        let event = if sounding.is_empty() || rng.random_bool(0.55) {
            let (c, k) = (rng.random_range(0..16), rng.random_range(0..128));
            sounding.push((c, k));
            NoteEvent::onset(c, k).unwrap()
        } else {
            let (c, k) = sounding.swap_remove(rng.random_range(0..sounding.len()));
            NoteEvent::release(c, k).unwrap()
        };
        score.events.push(TimedEvent {
            delta_ticks: delta,
            event,
        });
    }
    score
}

// ---------------------------------------------------------- text corpora

const SYLLABLES: &[&str] = &[
    "ka", "lo", "mi", "ren", "tas", "vu", "bel", "cor", "dan", "fi", "gra", "hol", "jun", "pe",
    "qua", "ris", "sto", "tel", "ul", "wen", "xo", "yar", "zi", "an", "er", "in", "on", "us",
    "ett", "ing", "ly", "ness",
];
const FUNCTION_WORDS: &[&str] = &[
    "the", "a", "of", "and", "to", "in", "is", "was", "that", "this", "these", "every", "some",
    "can", "would", "not", "only", "never", "always", "himself", "herself", "who", "what", "don't",
    "isn't", "many", "much", "must", "should",
];

/// Lexicon of pseudo-words built from syllables.
pub fn lexicon(rng: &mut ChaCha8Rng, size: usize) -> Vec<String> {
    let mut words: Vec<String> = (0..size)
        .map(|_| {
            (0..rng.random_range(1..=4))
                .map(|_| *SYLLABLES.choose(rng).unwrap())
                .collect()
        })
        .collect();
    words.sort();
    words.dedup();
    words
}

/// One normalized line: single spaces, no leading or trailing space.
pub fn text_line(rng: &mut ChaCha8Rng, lexicon: &[String]) -> String {
    let n = rng.random_range(4..18);
    let mut words = Vec::with_capacity(n);
    for i in 0..n {
        let w = if rng.random_bool(0.35) {
            FUNCTION_WORDS.choose(rng).unwrap().to_string()
        } else {
            // rough Zipf: square the uniform draw toward the head
            let u: f64 = rng.random();
            lexicon[((u * u) * lexicon.len() as f64) as usize].clone()
        };
        let w = if i == 0 { capitalize(&w) } else { w };
        words.push(w);
    }
    let mut line = words.join(" ");
    line.push(*['.', '?', '!', '.'].choose(rng).unwrap());
    line
}

pub fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    c.next()
        .map(|f| f.to_uppercase().chain(c).collect())
        .unwrap_or_default()
}

/// Event-code line of a short random score.
pub fn music_line(rng: &mut ChaCha8Rng) -> String {
    let mut score = MidiScore::new(480);
    let mut t_sounding: Vec<(u8, u8)> = Vec::new();
    for _ in 0..rng.random_range(8..40) {
        let delta = *[0u64, 0, 60, 120, 240, 480, 18, 360].choose(rng).unwrap();
        let event = if t_sounding.is_empty() || rng.random_bool(0.5) {
            let (c, k) = (rng.random_range(0..3), rng.random_range(40..80));
            t_sounding.push((c, k));
            NoteEvent::onset(c, k).unwrap()
        } else {
            let (c, k) = t_sounding.remove(0);
            NoteEvent::release(c, k).unwrap()
        };
        score.events.push(TimedEvent {
            delta_ticks: delta,
            event,
        });
    }
    mlmprep::midi::encode_events(&score)
}

/// Mixed text and music lines totalling at least `bytes`.
pub fn mixed_corpus(rng: &mut ChaCha8Rng, lexicon: &[String], bytes: usize) -> Vec<String> {
    let mut lines = Vec::new();
    let mut total = 0;
    while total < bytes {
        let line = if rng.random_bool(0.2) {
            music_line(rng)
        } else {
            text_line(rng, lexicon)
        };
        total += line.len() + 1;
        lines.push(line);
    }
    lines
}

// ------------------------------------------------------------ tokenizer

pub fn toy_vocab(pieces: &[(&str, f64)]) -> Vocabulary {
    Vocabulary::from_pieces(
        pieces
            .iter()
            .map(|&(s, lp)| Piece {
                surface: s.to_string(),
                log_prob: lp,
            })
            .collect(),
    )
    .unwrap()
}

/// Best segmentation score by enumerating every split of `word`.
pub fn brute_force_best(
    word: &[char],
    score: &dyn Fn(&str) -> Option<f64>,
) -> Option<(f64, Vec<String>)> {
    if word.is_empty() {
        return Some((0.0, Vec::new()));
    }
    let mut best: Option<(f64, Vec<String>)> = None;
    for cut in 1..=word.len() {
        let head: String = word[..cut].iter().collect();
        let Some(s) = score(&head) else { continue };
        if let Some((rest, mut pieces)) = brute_force_best(&word[cut..], score) {
            let total = s + rest;
            if best.as_ref().is_none_or(|(b, _)| total > *b) {
                pieces.insert(0, head);
                best = Some((total, pieces));
            }
        }
    }
    best
}

/// log of the summed probability of every segmentation of `word`.
pub fn brute_force_marginal(word: &[char], score: &dyn Fn(&str) -> Option<f64>) -> f64 {
    if word.is_empty() {
        return 0.0;
    }
    let mut terms = Vec::new();
    for cut in 1..=word.len() {
        let head: String = word[..cut].iter().collect();
        if let Some(s) = score(&head) {
            let rest = brute_force_marginal(&word[cut..], score);
            if rest.is_finite() {
                terms.push(s + rest);
            }
        }
    }
    mlmprep::pll::log_sum_exp(&terms)
}

// ---------------------------------------------------------------- masks

pub fn word_regex() -> Regex {
    Regex::new(r"[\p{Alphabetic}\p{N}_]+(?:['\x{2019}][\p{Alphabetic}\p{N}_]+)*").unwrap()
}

/// Targeted positions computed from the rebuilt text with a regex word
/// matcher and plain set lookups.
pub fn oracle_targets(sample: &AlignedSample, categories: &CategorySet) -> BTreeMap<usize, usize> {
    let re = word_regex();
    let mut out = BTreeMap::new();
    for m in re.find_iter(&sample.text) {
        let word = m.as_str().to_lowercase().replace('\u{2019}', "'");
        let Some(cat) = categories
            .categories()
            .iter()
            .position(|c| c.words.contains(&word))
        else {
            continue;
        };
        for (pos, range) in sample.token_ranges.iter().enumerate() {
            let overlaps = range.start < m.end() && m.start() < range.end;
            if overlaps && !unigram::is_control(sample.tokens[pos]) {
                out.entry(pos).or_insert(cat);
            }
        }
    }
    out
}

/// Words drawn from categories, fillers, casing and punctuation variants.
pub fn mask_corpus_lines(rng: &mut ChaCha8Rng, words: usize) -> Vec<String> {
    let categories = CategorySet::bundled();
    let targets: Vec<&String> = categories
        .categories()
        .iter()
        .flat_map(|c| c.words.iter())
        .collect();
    let fillers = [
        "cat",
        "thatch",
        "cannot",
        "thesis",
        "isle",
        "dog's",
        "all-round",
        "o'clock",
        "mayor",
        "x1",
        "_id",
    ];
    let mut lines = Vec::new();
    let mut line = Vec::new();
    for _ in 0..words {
        let mut w = if rng.random_bool(0.4) {
            targets.choose(rng).unwrap().to_string()
        } else {
            fillers.choose(rng).unwrap().to_string()
        };
        match rng.random_range(0..8) {
            0 => w = capitalize(&w),
            1 => w = w.to_uppercase(),
            2 => w.push(','),
            3 => w = format!("\"{w}\""),
            4 => w = w.replace('\'', "\u{2019}"),
            _ => {}
        }
        line.push(w);
        if rng.random_bool(0.08) {
            lines.push(line.join(" ") + ".");
            line.clear();
        }
    }
    if !line.is_empty() {
        lines.push(line.join(" "));
    }
    lines
}

pub fn ascii_char_vocab() -> Vocabulary {
    let mut pieces: Vec<(String, f64)> = (' '..='~')
        .filter(|c| *c != ' ')
        .chain(['\u{2581}', '\u{2019}'])
        .map(|c| (c.to_string(), -4.0))
        .collect();
    for w in [
        "\u{2581}that",
        "\u{2581}the",
        "\u{2581}can",
        "not",
        "\u{2581}is",
        "n't",
        "\u{2581}do",
        "self",
        "\u{2581}a",
        "ll",
    ] {
        pieces.push((w.to_string(), -3.0));
    }
    Vocabulary::from_pieces(
        pieces
            .into_iter()
            .map(|(surface, log_prob)| Piece { surface, log_prob })
            .collect(),
    )
    .unwrap()
}

pub fn category_counts(targets: &BTreeMap<usize, usize>, n: usize) -> Vec<u64> {
    let mut counts = vec![0u64; n];
    for &c in targets.values() {
        counts[c] += 1;
    }
    counts
}

pub fn brute_force_stats(samples: &[AlignedSample], categories: &CategorySet) -> Vec<u64> {
    let mut totals = vec![0u64; categories.len()];
    for s in samples {
        for (t, c) in totals.iter_mut().zip(category_counts(
            &oracle_targets(s, categories),
            categories.len(),
        )) {
            *t += c;
        }
    }
    totals
}

pub fn mask_samples(vocab: &Vocabulary, lines: &[String], len: usize) -> Vec<AlignedSample> {
    let docs: Vec<Vec<u32>> = lines.iter().map(|l| vocab.encode(l)).collect();
    mask::chunk_samples(vocab, &docs, len).unwrap()
}

// ------------------------------------------------------------------ pll

/// Deterministic provider whose distribution depends on every unmasked id
/// and the masked position, normalized in closed form.
pub struct HashProvider {
    pub vocab: usize,
}

impl HashProvider {
    pub fn weights(&self, ids: &[u32], pos: usize) -> Vec<f64> {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ pos as u64;
        for (i, &id) in ids.iter().enumerate() {
            if i != pos {
                h = (h ^ u64::from(id)).wrapping_mul(0x100_0000_01b3);
            }
        }
        (0..self.vocab)
            .map(|v| {
                let x = (h ^ (v as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
                    .wrapping_mul(0xBF58_476D_1CE4_E5B9);
                1.0 + (x >> 40) as f64 / (1u64 << 24) as f64
            })
            .collect()
    }
}

impl LogitProvider for HashProvider {
    fn vocab_size(&self) -> usize {
        self.vocab
    }

    fn query(&self, ids: &[u32], pos: usize) -> mlmprep::Result<Vec<f64>> {
        assert_eq!(ids[pos], MASK_ID, "queried position must be masked");
        let w = self.weights(ids, pos);
        let z: f64 = w.iter().sum();
        Ok(w.into_iter().map(|x| (x / z).ln()).collect())
    }
}

/// Sequential sum of log(w[id] / sum w) over maskable positions.
pub fn brute_force_pll(p: &HashProvider, ids: &[u32]) -> f64 {
    let mut total = 0.0;
    let start = usize::from(ids.first() == Some(&unigram::CLS_ID));
    let end = ids.len() - usize::from(ids.len() > start && ids.last() == Some(&unigram::EOS_ID));
    for pos in start..end {
        let mut masked = ids.to_vec();
        masked[pos] = MASK_ID;
        let w = p.weights(&masked, pos);
        total += (w[ids[pos] as usize] / w.iter().sum::<f64>()).ln();
    }
    total
}

/// Toy determiner-noun grammar: singular nouns take `this`/`a`/`every`,
/// plural nouns take `these`/`many`/`several`.
pub struct Grammar {
    pub singular: Vec<&'static str>,
    pub plural: Vec<&'static str>,
}

impl Grammar {
    pub fn new() -> Self {
        Grammar {
            singular: vec![
                "dog", "cat", "bird", "tree", "house", "river", "child", "song", "book", "stone",
            ],
            plural: vec![
                "dogs", "cats", "birds", "trees", "houses", "rivers", "children", "songs", "books",
                "stones",
            ],
        }
    }

    pub fn sentence(&self, rng: &mut ChaCha8Rng) -> String {
        let verbs = ["is", "seems", "looks"];
        let adjectives = ["old", "green", "quiet", "small", "bright"];
        if rng.random_bool(0.5) {
            let det = ["this", "a", "every"].choose(rng).unwrap();
            let n = self.singular.choose(rng).unwrap();
            format!(
                "{det} {n} {} {}",
                verbs.choose(rng).unwrap(),
                adjectives.choose(rng).unwrap()
            )
        } else {
            let det = ["these", "many", "several"].choose(rng).unwrap();
            let n = self.plural.choose(rng).unwrap();
            let verb = ["are", "seem", "look"].choose(rng).unwrap();
            format!("{det} {n} {verb} {}", adjectives.choose(rng).unwrap())
        }
    }

    /// Attested determiner-noun pair and its unattested swap.
    pub fn pair(&self, rng: &mut ChaCha8Rng) -> (String, String) {
        let i = rng.random_range(0..self.singular.len());
        let adj = ["old", "green", "quiet", "small", "bright"]
            .choose(rng)
            .unwrap();
        if rng.random_bool(0.5) {
            let n = self.singular[i];
            (format!("this {n} is {adj}"), format!("these {n} is {adj}"))
        } else {
            let n = self.plural[i];
            (
                format!("these {n} are {adj}"),
                format!("this {n} are {adj}"),
            )
        }
    }
}
