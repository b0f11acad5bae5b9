//! Regenerates the bundled sample corpus under `data/sample/`:
//! synthetic English text, 20 MIDI files and a set of minimal pairs.
//!
//!     cargo run -p mlmprep --example make_sample -- data/sample

use std::fs;
use std::path::Path;

use mlmprep::midi::{self, MidiScore, NoteEvent, TimedEvent};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TEXT_FILES: usize = 4;
const TEXT_BYTES: usize = 200_000;
const MIDI_FILES: usize = 20;

const NAMES: &[&str] = &[
    "Anna", "Ben", "Clara", "David", "Ella", "Frank", "Grace", "Henry",
];
const NOUNS: &[(&str, &str)] = &[
    ("dog", "dogs"),
    ("cat", "cats"),
    ("teacher", "teachers"),
    ("child", "children"),
    ("book", "books"),
    ("garden", "gardens"),
    ("bird", "birds"),
    ("house", "houses"),
    ("friend", "friends"),
    ("song", "songs"),
    ("window", "windows"),
    ("apple", "apples"),
];
const ANIMATE: &[(&str, &str)] = &[
    ("dog", "dogs"),
    ("cat", "cats"),
    ("teacher", "teachers"),
    ("child", "children"),
    ("bird", "birds"),
    ("friend", "friends"),
];
const ADJECTIVES: &[&str] = &[
    "small", "old", "happy", "quiet", "green", "bright", "tired", "kind",
];
const VERBS: &[(&str, &str)] = &[
    ("sees", "see"),
    ("likes", "like"),
    ("finds", "find"),
    ("visits", "visit"),
    ("watches", "watch"),
    ("remembers", "remember"),
];
const INTRANSITIVE: &[(&str, &str)] = &[
    ("sleeps", "sleep"),
    ("sings", "sing"),
    ("waits", "wait"),
    ("laughs", "laugh"),
];
const MODALS: &[&str] = &[
    "can", "will", "could", "should", "might", "must", "may", "would",
];
const ADVERBS: &[&str] = &[
    "always",
    "never",
    "often",
    "sometimes",
    "usually",
    "perhaps",
    "quickly",
    "slowly",
];
const QUANTIFIERS: &[&str] = &[
    "every", "each", "some", "many", "few", "all", "several", "most",
];
const PLACES: &[&str] = &[
    "in the park",
    "at school",
    "near the river",
    "after dinner",
    "on the hill",
    "by the door",
];

fn pick<'a, T>(rng: &mut ChaCha8Rng, xs: &'a [T]) -> &'a T {
    xs.choose(rng).expect("non-empty list")
}

fn noun_phrase(rng: &mut ChaCha8Rng, plural: bool) -> String {
    let (sg, pl) = *pick(rng, NOUNS);
    let noun = if plural { pl } else { sg };
    let det = match (plural, rng.random_range(0..3)) {
        (false, 0) => "this",
        (false, 1) => "the",
        (false, _) => "a",
        (true, 0) => "these",
        (true, 1) => "the",
        (true, _) => *pick(rng, &["some", "many", "several", "few"]),
    };
    if rng.random_bool(0.4) {
        format!("{det} {} {noun}", pick(rng, ADJECTIVES))
    } else {
        format!("{det} {noun}")
    }
}

fn any_noun_phrase(rng: &mut ChaCha8Rng) -> String {
    let plural = rng.random_bool(0.5);
    noun_phrase(rng, plural)
}

fn sentence(rng: &mut ChaCha8Rng) -> String {
    let plural = rng.random_bool(0.5);
    let subject = if rng.random_bool(0.2) {
        pick(rng, NAMES).to_string()
    } else {
        noun_phrase(rng, plural)
    };
    let plural = plural && !NAMES.contains(&subject.as_str());
    let agree = |(sg, pl): (&'static str, &'static str)| if plural { pl } else { sg };
    let mut s = match rng.random_range(0..9) {
        0 => format!(
            "{subject} {} {}",
            agree(*pick(rng, VERBS)),
            any_noun_phrase(rng)
        ),
        1 => {
            format!("{subject} {} {}", pick(rng, MODALS), pick(rng, VERBS).1)
                + " "
                + &noun_phrase(rng, false)
        }
        2 => format!(
            "{subject} {} {}",
            agree(("is", "are")),
            pick(rng, ADJECTIVES)
        ),
        3 => format!(
            "{subject} {} {}",
            pick(rng, ADVERBS),
            agree(*pick(rng, INTRANSITIVE))
        ),
        4 => format!(
            "{subject} {} not {} {}",
            agree(("does", "do")),
            pick(rng, VERBS).1,
            any_noun_phrase(rng)
        ),
        5 => format!(
            "{} {} that {subject} {} {}",
            pick(rng, NAMES),
            pick(rng, &["knows", "thinks", "says", "hopes"]),
            agree(("was", "were")),
            pick(rng, ADJECTIVES)
        ),
        6 => {
            let q = *pick(rng, QUANTIFIERS);
            let (sg, pl) = *pick(rng, ANIMATE);
            let (v_sg, v_pl) = *pick(rng, INTRANSITIVE);
            if q == "every" || q == "each" {
                format!("{q} {sg} {v_sg}")
            } else {
                format!("{q} {pl} {v_pl}")
            }
        }
        7 => {
            let name = pick(rng, NAMES);
            let reflexive = if ["Anna", "Clara", "Ella", "Grace"].contains(name) {
                "herself"
            } else {
                "himself"
            };
            format!(
                "{name} {} {reflexive}",
                pick(rng, &["sees", "likes", "helps", "blames"])
            )
        }
        _ => format!(
            "{subject} {} {} {}",
            agree(("has", "have")),
            pick(rng, &["seen", "found", "liked"]),
            any_noun_phrase(rng)
        ),
    };
    if rng.random_bool(0.3) {
        s.push(' ');
        s.push_str(pick(rng, PLACES));
    }
    let mut chars = s.chars();
    let first = chars
        .next()
        .expect("non-empty")
        .to_uppercase()
        .collect::<String>();
    format!("{first}{}.", chars.as_str())
}

fn text_corpus(rng: &mut ChaCha8Rng) -> Vec<String> {
    let per_file = TEXT_BYTES / TEXT_FILES;
    (0..TEXT_FILES)
        .map(|_| {
            let mut file = String::new();
            while file.len() < per_file {
                let n = rng.random_range(3..9);
                let doc: Vec<String> = (0..n).map(|_| sentence(rng)).collect();
                file.push_str(&doc.join(" "));
                file.push('\n');
            }
            file
        })
        .collect()
}

fn melody(
    rng: &mut ChaCha8Rng,
    channel: u8,
    low: u8,
    notes: usize,
    unit: u64,
) -> Vec<(u64, NoteEvent)> {
    let mut out = Vec::new();
    let mut t = 0u64;
    let mut key = low + 12;
    for _ in 0..notes {
        key = (key as i16 + rng.random_range(-4i16..=4)).clamp(low as i16, low as i16 + 24) as u8;
        let len = unit * rng.random_range(1..=4);
        out.push((t, NoteEvent::onset(channel, key).unwrap()));
        out.push((t + len, NoteEvent::release(channel, key).unwrap()));
        t += len + if rng.random_bool(0.2) { unit } else { 0 };
    }
    out
}

fn score_from(tpq: u16, mut events: Vec<(u64, NoteEvent)>) -> MidiScore {
    // releases before onsets at equal times so repeated keys stay canonical
    events.sort_by_key(|(t, e)| (*t, e.kind() == midi::NoteKind::Onset));
    let mut score = MidiScore::new(tpq);
    let mut last = 0;
    for (t, event) in events {
        score.events.push(TimedEvent {
            delta_ticks: t - last,
            event,
        });
        last = t;
    }
    score
}

fn push_vlq(out: &mut Vec<u8>, mut v: u64) {
    let mut groups = vec![(v & 0x7F) as u8];
    v >>= 7;
    while v > 0 {
        groups.push((v & 0x7F) as u8 | 0x80);
        v >>= 7;
    }
    out.extend(groups.iter().rev());
}

/// Format-1 track with running status and velocity-0 releases.
fn running_status_track(score: &MidiScore) -> Vec<u8> {
    let mut track = vec![0x00, 0xFF, 0x03, 0x04, b'l', b'i', b'n', b'e'];
    let mut status = None;
    for e in &score.events {
        push_vlq(&mut track, e.delta_ticks);
        let s = 0x90 | e.event.channel();
        if status != Some(s) {
            track.push(s);
            status = Some(s);
        }
        let velocity = if e.event.kind() == midi::NoteKind::Onset {
            90
        } else {
            0
        };
        track.extend_from_slice(&[e.event.key(), velocity]);
    }
    track.extend_from_slice(&[0x00, 0xFF, 0x2F, 0x00]);
    track
}

fn format1_file(tpq: u16, tracks: &[Vec<u8>]) -> Vec<u8> {
    let mut out = b"MThd".to_vec();
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&(tracks.len() as u16 + 1).to_be_bytes());
    out.extend_from_slice(&tpq.to_be_bytes());
    // conductor track: tempo only
    let conductor = [
        0x00, 0xFF, 0x51, 0x03, 0x07, 0xA1, 0x20, 0x00, 0xFF, 0x2F, 0x00,
    ];
    for t in std::iter::once(&conductor[..]).chain(tracks.iter().map(Vec::as_slice)) {
        out.extend_from_slice(b"MTrk");
        out.extend_from_slice(&(t.len() as u32).to_be_bytes());
        out.extend_from_slice(t);
    }
    out
}

fn midi_file(rng: &mut ChaCha8Rng, index: usize) -> Vec<u8> {
    let tpq = *pick(rng, &[96u16, 240, 480]);
    let unit = u64::from(tpq) / 2;
    let notes = rng.random_range(120..240);
    let lead = melody(rng, 0, 60, notes, unit);
    let bass = melody(rng, 1, 36, notes / 2, unit * 2);
    if index.is_multiple_of(2) {
        let mut all = lead;
        all.extend(bass);
        midi::write_smf(&score_from(tpq, all)).expect("deltas fit")
    } else {
        let tracks = [score_from(tpq, lead), score_from(tpq, bass)];
        format1_file(
            tpq,
            &tracks.iter().map(running_status_track).collect::<Vec<_>>(),
        )
    }
}

fn minimal_pairs(rng: &mut ChaCha8Rng) -> String {
    let mut lines = Vec::new();
    let mut push = |good: String, bad: String, phenomenon: &str| {
        lines.push(serde_json::json!({"sentence_good": good, "sentence_bad": bad, "phenomenon": phenomenon}).to_string());
    };
    for _ in 0..40 {
        let (sg, pl) = *pick(rng, NOUNS);
        let adjective = pick(rng, ADJECTIVES);
        if rng.random_bool(0.5) {
            push(
                format!("This {sg} is {adjective}."),
                format!("These {sg} is {adjective}."),
                "determiner_noun_agreement",
            );
        } else {
            push(
                format!("These {pl} are {adjective}."),
                format!("This {pl} are {adjective}."),
                "determiner_noun_agreement",
            );
        }
    }
    for _ in 0..40 {
        let (sg, pl) = *pick(rng, ANIMATE);
        let (v_sg, v_pl) = *pick(rng, INTRANSITIVE);
        if rng.random_bool(0.5) {
            push(
                format!("The {sg} {v_sg}."),
                format!("The {sg} {v_pl}."),
                "subject_verb_agreement",
            );
        } else {
            push(
                format!("The {pl} {v_pl}."),
                format!("The {pl} {v_sg}."),
                "subject_verb_agreement",
            );
        }
    }
    for _ in 0..40 {
        let name = pick(rng, NAMES);
        let verb = pick(rng, &["sees", "likes", "helps", "blames"]);
        let (good, bad) = if ["Anna", "Clara", "Ella", "Grace"].contains(name) {
            ("herself", "himself")
        } else {
            ("himself", "herself")
        };
        push(
            format!("{name} {verb} {good}."),
            format!("{name} {verb} {bad}."),
            "anaphor_gender_agreement",
        );
    }
    lines.join("\n") + "\n"
}

const CONFIG: &str = r#"# Sample pipeline over the bundled corpus.
[paths]
text_dir = "text"
midi_dir = "midi"
output_dir = "../../target/sample-run"
pairs = "pairs.jsonl"

[tokenizer]
vocab_size = 2000

[curriculum]
preset = "lil-bevo"

[seeds]
pack = 20231014
mask = 7

[mask]
budget = 0.15

[score]
order = 2
alpha = 0.1
"#;

fn main() -> std::io::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "data/sample".into());
    let out = Path::new(&out);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5A3B_1E00);
    fs::create_dir_all(out.join("text"))?;
    fs::create_dir_all(out.join("midi"))?;
    for (i, file) in text_corpus(&mut rng).iter().enumerate() {
        fs::write(out.join(format!("text/part-{i:02}.txt")), file)?;
    }
    for i in 0..MIDI_FILES {
        fs::write(
            out.join(format!("midi/tune-{i:02}.mid")),
            midi_file(&mut rng, i),
        )?;
    }
    fs::write(out.join("pairs.jsonl"), minimal_pairs(&mut rng))?;
    fs::write(out.join("pipeline.toml"), CONFIG)?;
    Ok(())
}
