mod common;

use common::{golden_files, midly_timeline, random_score, timeline};
use mlmprep::midi::{self, ParseWarning};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn golden_files_match_midly() {
    for (name, bytes) in golden_files() {
        let score = midi::parse_smf(&bytes).unwrap_or_else(|e| panic!("{name}: {e}"));
        let (tpq, reference) = midly_timeline(&bytes);
        assert_eq!(score.ticks_per_quarter, tpq, "{name}");
        assert_eq!(timeline(&score), reference, "{name}");
        assert!(!reference.is_empty(), "{name}");
    }
}

#[test]
fn cross_track_ties_follow_track_order() {
    let (_, bytes) = golden_files()
        .into_iter()
        .find(|(n, _)| *n == "format1_three_tracks_ties")
        .unwrap();
    let codes = midi::encode_events(&midi::parse_smf(&bytes).unwrap());
    assert_eq!(
        codes,
        "c0n60 c1n36 t240 c0r60 c0n62 c1r36 c1n38 t240 c0r62 t240 c1r38"
    );
}

#[test]
fn orphan_release_is_reported() {
    let (_, bytes) = golden_files()
        .into_iter()
        .find(|(n, _)| n.starts_with("format1_orphan"))
        .unwrap();
    let (score, warnings) = midi::parse_smf_with_warnings(&bytes).unwrap();
    assert!(warnings.contains(&ParseWarning::OrphanRelease {
        tick: 0,
        channel: 0,
        key: 40
    }));
    assert!(score.is_canonical());
}

#[test]
fn bundled_sample_files_match_midly() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/sample/midi");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let bytes = std::fs::read(&path).unwrap();
        let score = midi::parse_smf(&bytes).unwrap();
        assert_eq!(
            timeline(&score),
            midly_timeline(&bytes).1,
            "{}",
            path.display()
        );
        seen += 1;
    }
    assert_eq!(seen, 20);
}

#[test]
fn written_files_match_midly() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let mut score = random_score(&mut rng, 60);
        for e in &mut score.events {
            e.delta_ticks %= 0x0FFF_FFFF;
        }
        let bytes = midi::write_smf(&score).unwrap();
        assert_eq!(
            midly_timeline(&bytes),
            (score.ticks_per_quarter, timeline(&score))
        );
    }
}
