use std::collections::BTreeMap;

use mlmprep::pack::{self, CorpusSource, MaskPolicy, PackManifest, StageSpec, PRESET_NAMES};
use mlmprep::unigram::EOS_ID;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_corpus(rng: &mut ChaCha8Rng) -> Vec<Vec<u32>> {
    (0..rng.random_range(1..60))
        .map(|_| {
            let mut doc: Vec<u32> = (0..rng.random_range(0..300))
                .map(|_| rng.random_range(5..5000))
                .collect();
            if rng.random_bool(0.3) {
                doc.push(EOS_ID);
            }
            doc
        })
        .collect()
}

fn multiset(tokens: impl IntoIterator<Item = u32>) -> BTreeMap<u32, usize> {
    let mut m = BTreeMap::new();
    for t in tokens {
        *m.entry(t).or_default() += 1;
    }
    m
}

#[test]
fn tokens_are_conserved() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (mut packed_corpora, mut round) = (0, 0);
    while packed_corpora < 100 {
        round += 1;
        let corpus = random_corpus(&mut rng);
        let seq_len = [8, 64, 128, 512][round % 4];
        let stream_len: usize = corpus
            .iter()
            .map(|d| d.len() + usize::from(d.last() != Some(&EOS_ID)))
            .sum();
        let manifest = match pack::pack(&corpus, seq_len, round as u64) {
            Err(mlmprep::Error::Pack(_)) if stream_len < seq_len => continue,
            other => other.unwrap(),
        };
        packed_corpora += 1;
        let blocks = manifest.blocks(&corpus).unwrap();
        let remainder = manifest.remainder(&corpus).unwrap();

        let stream = pack::concat_documents(corpus.iter().map(Vec::as_slice));
        assert_eq!(manifest.total_tokens, stream.len());
        assert_eq!(blocks.len() * seq_len + remainder.len(), stream.len());
        assert!(remainder.len() < seq_len);
        assert!(blocks.iter().all(|b| b.len() == seq_len));
        let packed = multiset(
            blocks
                .iter()
                .flatten()
                .copied()
                .chain(remainder.iter().copied()),
        );
        assert_eq!(packed, multiset(stream.iter().copied()));

        // blocks are exactly the seq_len chunks of the shuffled stream
        let shuffled = pack::concat_documents(
            manifest
                .doc_order
                .iter()
                .map(|&d| corpus[d as usize].as_slice()),
        );
        let mut chunks: Vec<&[u32]> = shuffled.chunks_exact(seq_len).collect();
        let mut got: Vec<&[u32]> = blocks.iter().map(Vec::as_slice).collect();
        chunks.sort();
        got.sort();
        assert_eq!(got, chunks);
        assert_eq!(remainder, shuffled[blocks.len() * seq_len..]);
    }
}

#[test]
fn equal_seeds_repack_byte_identically() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let corpus = random_corpus(&mut rng);
    let stage = StageSpec::new("short", 32, 4, &[CorpusSource::Text], MaskPolicy::Random);
    for epoch in 0..4 {
        let a = pack::pack_epoch(&corpus, &stage, 99, epoch)
            .unwrap()
            .to_bytes();
        let b = pack::pack_epoch(&corpus, &stage, 99, epoch)
            .unwrap()
            .to_bytes();
        assert_eq!(a, b);
        assert_eq!(PackManifest::from_bytes(&a).unwrap().to_bytes(), a);
    }
    let e0 = pack::pack_epoch(&corpus, &stage, 99, 0).unwrap();
    let e1 = pack::pack_epoch(&corpus, &stage, 99, 1).unwrap();
    assert_ne!(e0.doc_order, e1.doc_order);
}

#[test]
fn exported_blocks_are_little_endian_ids() {
    let corpus = vec![vec![5, 6, 7], vec![8, 9]];
    let manifest = pack::pack(&corpus, 3, 0).unwrap();
    let mut out = Vec::new();
    manifest.write_blocks(&corpus, &mut out).unwrap();
    let ids: Vec<u32> = out
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    assert_eq!(ids, manifest.blocks(&corpus).unwrap().concat());
    assert_eq!(ids.len(), 6);
}

#[test]
fn presets_total_57_epochs() {
    for name in PRESET_NAMES {
        let stages = pack::preset(name).unwrap();
        assert_eq!(stages.iter().map(|s| s.epochs).sum::<usize>(), 57, "{name}");
    }
}
