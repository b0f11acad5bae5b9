use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{terminated_len, StageSpec};
use crate::unigram::EOS_ID;
use crate::{Error, Result};

const FORMAT: &str = "mlmprep-pack";
const VERSION: u32 = 1;
const TABLE_MAGIC: &[u8; 4] = b"PKTB";

/// Where a block starts: document id and token offset inside that document
/// (counting its end-of-sequence terminator).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockRef {
    pub doc: u32,
    pub offset: u32,
}

/// Deterministic block layout for one epoch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PackManifest {
    pub stage: Option<StageSpec>,
    pub epoch: usize,
    pub seq_len: usize,
    pub seed: u64,
    pub block_count: usize,
    pub total_tokens: usize,
    pub dropped_tokens: usize,
    /// Concatenation order of documents.
    pub doc_order: Vec<u32>,
    /// Block starts in training order.
    pub blocks: Vec<BlockRef>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    stage: Option<StageSpec>,
    epoch: usize,
    seq_len: usize,
    seed: u64,
    block_count: usize,
    doc_count: usize,
    total_tokens: usize,
    dropped_tokens: usize,
}

impl PackManifest {
    /// Concatenated token stream in this manifest's document order.
    fn stream(&self, corpus: &[Vec<u32>]) -> Result<(Vec<u32>, Vec<usize>)> {
        if corpus.len() != self.doc_order.len() {
            return Err(Error::Pack(format!(
                "manifest covers {} documents, corpus has {}",
                self.doc_order.len(),
                corpus.len()
            )));
        }
        let mut doc_start = vec![0usize; corpus.len()];
        let mut stream = Vec::with_capacity(self.total_tokens);
        for &doc in &self.doc_order {
            let d = &corpus[doc as usize];
            doc_start[doc as usize] = stream.len();
            stream.extend_from_slice(d);
            if d.last() != Some(&EOS_ID) {
                stream.push(EOS_ID);
            }
        }
        if stream.len() != self.total_tokens {
            return Err(Error::Pack(format!(
                "corpus has {} tokens, manifest expects {}",
                stream.len(),
                self.total_tokens
            )));
        }
        Ok((stream, doc_start))
    }

    /// Token ids of every block, in training order.
    pub fn blocks(&self, corpus: &[Vec<u32>]) -> Result<Vec<Vec<u32>>> {
        let (stream, doc_start) = self.stream(corpus)?;
        self.blocks
            .iter()
            .map(|b| {
                let doc = b.doc as usize;
                if b.offset as usize >= terminated_len(&corpus[doc]) {
                    return Err(Error::Pack(format!(
                        "block offset {} outside document {doc}",
                        b.offset
                    )));
                }
                let start = doc_start[doc] + b.offset as usize;
                stream
                    .get(start..start + self.seq_len)
                    .map(<[u32]>::to_vec)
                    .ok_or_else(|| Error::Pack("block runs past end of corpus".into()))
            })
            .collect()
    }

    /// The dropped tail of the concatenated stream.
    pub fn remainder(&self, corpus: &[Vec<u32>]) -> Result<Vec<u32>> {
        let (stream, _) = self.stream(corpus)?;
        Ok(stream[stream.len() - self.dropped_tokens..].to_vec())
    }

    /// Blocks as one flat little-endian `u32` array.
    pub fn write_blocks(&self, corpus: &[Vec<u32>], out: &mut impl Write) -> Result<()> {
        let mut buf = Vec::with_capacity(self.block_count * self.seq_len * 4);
        for block in self.blocks(corpus)? {
            for id in block {
                buf.extend_from_slice(&id.to_le_bytes());
            }
        }
        out.write_all(&buf).map_err(|e| Error::io("<blocks>", e))
    }

    /// One JSON header line followed by the binary table: magic `PKTB`,
    /// `doc_count` document ids, then `block_count` (doc, offset) pairs, all
    /// little-endian `u32`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            format: FORMAT.into(),
            version: VERSION,
            stage: self.stage.clone(),
            epoch: self.epoch,
            seq_len: self.seq_len,
            seed: self.seed,
            block_count: self.block_count,
            doc_count: self.doc_order.len(),
            total_tokens: self.total_tokens,
            dropped_tokens: self.dropped_tokens,
        };
        let mut out = serde_json::to_vec(&header).expect("header serializes");
        out.push(b'\n');
        out.extend_from_slice(TABLE_MAGIC);
        for &d in &self.doc_order {
            out.extend_from_slice(&d.to_le_bytes());
        }
        for b in &self.blocks {
            out.extend_from_slice(&b.doc.to_le_bytes());
            out.extend_from_slice(&b.offset.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: String| Error::ManifestFormat(m);
        let newline = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| bad("missing header line".into()))?;
        let header: Header =
            serde_json::from_slice(&bytes[..newline]).map_err(|e| bad(format!("header: {e}")))?;
        if header.format != FORMAT || header.version != VERSION {
            return Err(bad(format!(
                "unsupported format {} v{}",
                header.format, header.version
            )));
        }
        let table = &bytes[newline + 1..];
        let expected = header
            .doc_count
            .checked_add(
                header
                    .block_count
                    .checked_mul(2)
                    .ok_or_else(|| bad("block count overflow".into()))?,
            )
            .and_then(|words| words.checked_mul(4))
            .and_then(|n| n.checked_add(TABLE_MAGIC.len()))
            .ok_or_else(|| bad("table size overflow".into()))?;
        if table.len() != expected || &table[..4] != TABLE_MAGIC {
            return Err(bad(format!(
                "offset table is {} bytes, expected {expected}",
                table.len()
            )));
        }
        if header.seq_len == 0 {
            return Err(bad("seq_len must be positive".into()));
        }
        let block_tokens = header.block_count.checked_mul(header.seq_len);
        if block_tokens.and_then(|n| n.checked_add(header.dropped_tokens))
            != Some(header.total_tokens)
            || header.dropped_tokens >= header.seq_len
        {
            return Err(bad("token counts are inconsistent".into()));
        }
        let words: Vec<u32> = table[4..]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let (doc_order, pairs) = words.split_at(header.doc_count);
        let mut seen = vec![false; header.doc_count];
        for &d in doc_order {
            match seen.get_mut(d as usize) {
                Some(s) if !*s => *s = true,
                _ => return Err(bad("document order is not a permutation".into())),
            }
        }
        let blocks: Vec<BlockRef> = pairs
            .chunks_exact(2)
            .map(|p| BlockRef {
                doc: p[0],
                offset: p[1],
            })
            .collect();
        if blocks.iter().any(|b| b.doc as usize >= header.doc_count) {
            return Err(bad("block references unknown document".into()));
        }
        Ok(PackManifest {
            stage: header.stage,
            epoch: header.epoch,
            seq_len: header.seq_len,
            seed: header.seed,
            block_count: header.block_count,
            total_tokens: header.total_tokens,
            dropped_tokens: header.dropped_tokens,
            doc_order: doc_order.to_vec(),
            blocks,
        })
    }
}
