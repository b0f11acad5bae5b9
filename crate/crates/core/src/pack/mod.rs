//! Curriculum presets and fixed-length block packing.
//!
//! [`pack`] shuffles documents, joins them with end-of-sequence separators,
//! cuts the stream into `seq_len` blocks (dropping the remainder) and
//! shuffles block order. Both shuffles come from one seeded generator, so a
//! [`PackManifest`] is fully determined by corpus, length and seed.

mod manifest;
mod preset;

pub use manifest::{BlockRef, PackManifest};
pub use preset::{preset, CorpusSource, MaskPolicy, StageSpec, PRESET_NAMES};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::unigram::EOS_ID;
use crate::{Error, Result};

/// Length of a document once terminated by end-of-sequence.
pub(crate) fn terminated_len(doc: &[u32]) -> usize {
    if doc.last() == Some(&EOS_ID) {
        doc.len()
    } else {
        doc.len() + 1
    }
}

/// Concatenates documents, appending end-of-sequence to any that lack it.
pub fn concat_documents<'a>(docs: impl IntoIterator<Item = &'a [u32]>) -> Vec<u32> {
    let mut out = Vec::new();
    for doc in docs {
        out.extend_from_slice(doc);
        if doc.last() != Some(&EOS_ID) {
            out.push(EOS_ID);
        }
    }
    out
}

/// Flat little-endian `u32` stream of eos-terminated documents.
pub fn ids_to_bytes(docs: &[Vec<u32>]) -> Vec<u8> {
    concat_documents(docs.iter().map(Vec::as_slice))
        .into_iter()
        .flat_map(u32::to_le_bytes)
        .collect()
}

/// Splits a flat id stream back into documents at each end-of-sequence.
pub fn ids_from_bytes(bytes: &[u8]) -> Result<Vec<Vec<u32>>> {
    if !bytes.len().is_multiple_of(4) {
        return Err(Error::Pack(format!(
            "id stream length {} is not a multiple of 4",
            bytes.len()
        )));
    }
    let mut docs = Vec::new();
    let mut current = Vec::new();
    for c in bytes.chunks_exact(4) {
        let id = u32::from_le_bytes([c[0], c[1], c[2], c[3]]);
        current.push(id);
        if id == EOS_ID {
            docs.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        return Err(Error::Pack(format!(
            "id stream ends with {} ids after the last end-of-sequence",
            current.len()
        )));
    }
    Ok(docs)
}

pub fn pack(corpus: &[Vec<u32>], seq_len: usize, seed: u64) -> Result<PackManifest> {
    if seq_len == 0 {
        return Err(Error::Parameter("sequence length must be positive".into()));
    }
    if corpus.len() > u32::MAX as usize {
        return Err(Error::Pack("too many documents".into()));
    }
    let total: usize = corpus.iter().map(|d| terminated_len(d)).sum();
    if total < seq_len {
        return Err(Error::Pack(format!(
            "corpus has {total} tokens, fewer than one block of {seq_len}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut doc_order: Vec<u32> = (0..corpus.len() as u32).collect();
    doc_order.shuffle(&mut rng);

    let block_count = total / seq_len;
    let mut starts = Vec::with_capacity(block_count);
    let mut global = 0usize;
    let mut next_block = 0usize;
    for &doc in &doc_order {
        let len = terminated_len(&corpus[doc as usize]);
        while next_block < block_count && next_block * seq_len < global + len {
            let offset = next_block * seq_len - global;
            starts.push(BlockRef {
                doc,
                offset: u32::try_from(offset)
                    .map_err(|_| Error::Pack("document too long".into()))?,
            });
            next_block += 1;
        }
        global += len;
    }
    starts.shuffle(&mut rng);

    Ok(PackManifest {
        stage: None,
        epoch: 0,
        seq_len,
        seed,
        block_count,
        total_tokens: total,
        dropped_tokens: total - block_count * seq_len,
        doc_order,
        blocks: starts,
    })
}

/// Packs one epoch of a stage; the shuffle seed is `base_seed + epoch`.
pub fn pack_epoch(
    corpus: &[Vec<u32>],
    stage: &StageSpec,
    base_seed: u64,
    epoch: usize,
) -> Result<PackManifest> {
    let mut manifest = pack(corpus, stage.seq_len, base_seed.wrapping_add(epoch as u64))?;
    manifest.stage = Some(stage.clone());
    manifest.epoch = epoch;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(lengths: &[usize]) -> Vec<Vec<u32>> {
        let mut next = 10;
        lengths
            .iter()
            .map(|&n| {
                let doc: Vec<u32> = (next..next + n as u32).collect();
                next += n as u32;
                doc
            })
            .collect()
    }

    #[test]
    fn thousand_tokens_in_128_blocks() {
        // 10 documents of 99 tokens + eos = 1000
        let c = corpus(&[99; 10]);
        let m = pack(&c, 128, 5).unwrap();
        assert_eq!(m.block_count, 7);
        assert_eq!(m.dropped_tokens, 104);
        let blocks = m.blocks(&c).unwrap();
        assert!(blocks.iter().all(|b| b.len() == 128));
    }

    #[test]
    fn short_corpus_rejected() {
        assert!(matches!(pack(&corpus(&[10]), 64, 0), Err(Error::Pack(_))));
        assert!(matches!(
            pack(&corpus(&[10]), 0, 0),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn existing_eos_not_duplicated() {
        let c = vec![vec![7, 8, EOS_ID], vec![9]];
        assert_eq!(
            concat_documents(c.iter().map(Vec::as_slice)),
            vec![7, 8, EOS_ID, 9, EOS_ID]
        );
        assert_eq!(pack(&c, 1, 0).unwrap().total_tokens, 5);
    }

    #[test]
    fn id_stream_round_trip() {
        let docs = vec![vec![5, 6, EOS_ID], vec![7, EOS_ID]];
        assert_eq!(ids_from_bytes(&ids_to_bytes(&docs)).unwrap(), docs);
        assert_eq!(
            ids_from_bytes(&ids_to_bytes(&[vec![5]])).unwrap(),
            vec![vec![5, EOS_ID]]
        );
        assert!(ids_from_bytes(&[1, 2, 3]).is_err());
        assert!(ids_from_bytes(&5u32.to_le_bytes()).is_err());
    }

    #[test]
    fn epoch_seed_offsets() {
        let c = corpus(&[30, 40, 50, 60]);
        let stage = StageSpec::new("s", 16, 3, &[CorpusSource::Text], MaskPolicy::Random);
        let e2 = pack_epoch(&c, &stage, 100, 2).unwrap();
        assert_eq!(e2.seed, 102);
        assert_eq!(e2.blocks, pack(&c, 16, 102).unwrap().blocks);
        assert_eq!(e2.stage.as_ref(), Some(&stage));
    }
}
