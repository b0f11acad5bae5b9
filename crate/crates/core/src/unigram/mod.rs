//! Unigram-LM subword tokenizer.
//!
//! Text is normalised by collapsing whitespace and prefixing every word with
//! [`WORD_BOUNDARY`]; pieces never straddle two words. Ids `0..5` are the
//! control symbols, ordinary pieces follow in descending log-probability.

mod lattice;
mod trainer;

pub use trainer::{
    train_on_corpus, train_unigram, TrainerConfig, TrainingCorpus, TrainingReport, UnigramModel,
};

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};
use lattice::Lattice;

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const EOS_ID: u32 = 2;
pub const MASK_ID: u32 = 3;
pub const CLS_ID: u32 = 4;
pub const NUM_CONTROL: usize = 5;
pub const CONTROL_SYMBOLS: [&str; NUM_CONTROL] = ["<pad>", "<unk>", "</s>", "<mask>", "<cls>"];

/// Marks the start of a word inside piece surfaces.
pub const WORD_BOUNDARY: char = '\u{2581}';

/// Longest piece considered during training and matching, in characters.
pub const MAX_PIECE_CHARS: usize = 16;

/// Unknown characters score this far below the least likely piece.
pub const UNK_PENALTY: f64 = 10.0;

pub fn is_control(id: u32) -> bool {
    (id as usize) < NUM_CONTROL
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub surface: String,
    pub log_prob: f64,
}

#[derive(Clone, Debug)]
pub struct Vocabulary {
    pieces: Vec<Piece>,
    index: HashMap<String, u32>,
    max_piece_chars: usize,
    unk_score: f64,
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.pieces == other.pieces
    }
}

/// Collapses whitespace and yields each word with its boundary marker.
/// A literal boundary character in the input counts as whitespace.
pub fn boundary_words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| c.is_whitespace() || c == WORD_BOUNDARY)
        .filter(|w| !w.is_empty())
        .map(|w| {
            let mut s = String::with_capacity(w.len() + 3);
            s.push(WORD_BOUNDARY);
            s.push_str(w);
            s
        })
}

impl Vocabulary {
    /// Builds a vocabulary from ordinary pieces (controls are implicit).
    /// Pieces keep the given order; ids start at [`NUM_CONTROL`].
    pub fn from_pieces(pieces: Vec<Piece>) -> Result<Self> {
        let mut index = HashMap::with_capacity(pieces.len());
        let mut max_piece_chars = 1;
        let mut min_log_prob = 0.0f64;
        for (i, p) in pieces.iter().enumerate() {
            let line = i + NUM_CONTROL + 1;
            if p.surface.is_empty() {
                return Err(Error::VocabFormat {
                    line,
                    message: "empty piece".into(),
                });
            }
            if p.surface.chars().any(|c| c.is_whitespace()) {
                return Err(Error::VocabFormat {
                    line,
                    message: "piece contains whitespace".into(),
                });
            }
            if CONTROL_SYMBOLS.contains(&p.surface.as_str()) {
                return Err(Error::VocabFormat {
                    line,
                    message: format!("piece {:?} shadows a control symbol", p.surface),
                });
            }
            if !p.log_prob.is_finite() || p.log_prob > 0.0 {
                return Err(Error::VocabFormat {
                    line,
                    message: format!(
                        "log probability {} must be finite and non-positive",
                        p.log_prob
                    ),
                });
            }
            let id = (i + NUM_CONTROL) as u32;
            if index.insert(p.surface.clone(), id).is_some() {
                return Err(Error::VocabFormat {
                    line,
                    message: format!("duplicate piece {:?}", p.surface),
                });
            }
            max_piece_chars = max_piece_chars.max(p.surface.chars().count());
            min_log_prob = min_log_prob.min(p.log_prob);
        }
        Ok(Vocabulary {
            pieces,
            index,
            max_piece_chars,
            unk_score: min_log_prob - UNK_PENALTY,
        })
    }

    /// Total entries including the control symbols.
    pub fn size(&self) -> usize {
        self.pieces.len() + NUM_CONTROL
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn id_of(&self, surface: &str) -> Option<u32> {
        if let Some(i) = CONTROL_SYMBOLS.iter().position(|&c| c == surface) {
            return Some(i as u32);
        }
        self.index.get(surface).copied()
    }

    /// Surface of an id; control symbols yield their bracketed name.
    pub fn surface(&self, id: u32) -> Result<&str> {
        let i = id as usize;
        if i < NUM_CONTROL {
            Ok(CONTROL_SYMBOLS[i])
        } else {
            self.pieces
                .get(i - NUM_CONTROL)
                .map(|p| p.surface.as_str())
                .ok_or(Error::TokenId {
                    id,
                    size: self.size(),
                })
        }
    }

    pub fn log_prob(&self, id: u32) -> Option<f64> {
        (id as usize)
            .checked_sub(NUM_CONTROL)
            .and_then(|i| self.pieces.get(i))
            .map(|p| p.log_prob)
    }

    /// Viterbi segmentation of a raw string (no normalisation) and its
    /// total score; unknown characters map to [`UNK_ID`].
    pub fn segment(&self, word: &str) -> (Vec<u32>, f64) {
        let lattice = Lattice::build(word, self.max_piece_chars, self.unk_score, |s| {
            self.index
                .get(s)
                .map(|&id| (id as usize, self.pieces[id as usize - NUM_CONTROL].log_prob))
        });
        let (path, score) = lattice.viterbi();
        let ids = path
            .into_iter()
            .map(|a| lattice.arcs[a].piece.map_or(UNK_ID, |p| p as u32))
            .collect();
        (ids, score)
    }

    pub fn encode(&self, text: &str) -> Vec<u32> {
        boundary_words(text)
            .flat_map(|w| self.segment(&w).0)
            .collect()
    }

    /// Encodes each whitespace word separately, returning ids per word.
    pub fn encode_words(&self, text: &str) -> Vec<Vec<u32>> {
        boundary_words(text).map(|w| self.segment(&w).0).collect()
    }

    /// Concatenates piece surfaces, maps boundary markers back to spaces and
    /// drops control symbols.
    pub fn decode(&self, ids: &[u32]) -> Result<String> {
        let mut out = String::new();
        for &id in ids {
            if is_control(id) {
                continue;
            }
            out.push_str(self.surface(id)?);
        }
        let text = out.replace(WORD_BOUNDARY, " ");
        Ok(text.strip_prefix(' ').map(str::to_string).unwrap_or(text))
    }

    /// Text model format: five control header lines, then one
    /// `surface<TAB>log_prob` line per piece.
    pub fn to_model_string(&self) -> String {
        let mut out = String::new();
        for c in CONTROL_SYMBOLS {
            writeln!(out, "{c}\tcontrol").unwrap();
        }
        for p in &self.pieces {
            writeln!(out, "{}\t{}", p.surface, p.log_prob).unwrap();
        }
        out
    }

    pub fn from_model_str(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        for (i, expected) in CONTROL_SYMBOLS.iter().enumerate() {
            let line = lines.next().ok_or_else(|| Error::VocabFormat {
                line: i + 1,
                message: "missing control-symbol header".into(),
            })?;
            if line != format!("{expected}\tcontrol") {
                return Err(Error::VocabFormat {
                    line: i + 1,
                    message: format!("expected control header for {expected}"),
                });
            }
        }
        let mut pieces = Vec::new();
        for (i, line) in lines.enumerate() {
            let line_no = i + NUM_CONTROL + 1;
            let (surface, lp) = line.rsplit_once('\t').ok_or_else(|| Error::VocabFormat {
                line: line_no,
                message: "expected surface<TAB>log_prob".into(),
            })?;
            let log_prob: f64 = lp.parse().map_err(|_| Error::VocabFormat {
                line: line_no,
                message: format!("bad log probability {lp:?}"),
            })?;
            pieces.push(Piece {
                surface: surface.to_string(),
                log_prob,
            });
        }
        Self::from_pieces(pieces)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_model_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_model_str(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Vocabulary {
        let pieces = [
            ("▁", -2.0),
            ("a", -1.0),
            ("b", -1.5),
            ("▁a", -1.2),
            ("ab", -1.8),
            ("▁ab", -2.5),
        ];
        Vocabulary::from_pieces(
            pieces
                .iter()
                .map(|&(s, lp)| Piece {
                    surface: s.into(),
                    log_prob: lp,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn control_ids_fixed() {
        let v = toy();
        assert_eq!(v.id_of("<pad>"), Some(PAD_ID));
        assert_eq!(v.id_of("<unk>"), Some(UNK_ID));
        assert_eq!(v.id_of("</s>"), Some(EOS_ID));
        assert_eq!(v.id_of("<mask>"), Some(MASK_ID));
        assert_eq!(v.id_of("<cls>"), Some(CLS_ID));
        assert_eq!(v.size(), 11);
    }

    #[test]
    fn encode_decode_basics() {
        let v = toy();
        assert!(v.encode("").is_empty());
        assert!(v.encode("ab z").contains(&UNK_ID));
        assert_eq!(v.decode(&[EOS_ID]).unwrap(), "");
        let ids = v.encode("  ab   ba\tb ");
        assert_eq!(v.decode(&ids).unwrap(), "ab ba b");
        assert!(matches!(
            v.decode(&[99]),
            Err(Error::TokenId { id: 99, size: 11 })
        ));
    }

    #[test]
    fn control_text_is_not_a_control_token() {
        let v = toy();
        let ids = v.encode("<mask>");
        assert!(ids.iter().all(|&id| id == UNK_ID || !is_control(id)));
        assert!(!ids.contains(&MASK_ID));
    }

    #[test]
    fn model_format_round_trip() {
        let v = toy();
        let text = v.to_model_string();
        assert!(text.starts_with(
            "<pad>\tcontrol\n<unk>\tcontrol\n</s>\tcontrol\n<mask>\tcontrol\n<cls>\tcontrol\n"
        ));
        assert_eq!(Vocabulary::from_model_str(&text).unwrap(), v);
    }

    #[test]
    fn model_format_errors() {
        assert!(matches!(
            Vocabulary::from_model_str(""),
            Err(Error::VocabFormat { line: 1, .. })
        ));
        let header: String = CONTROL_SYMBOLS
            .iter()
            .map(|c| format!("{c}\tcontrol\n"))
            .collect();
        for (body, line) in [
            ("a\t-1\na\t-2\n", 7),
            ("a\t0.5\n", 6),
            ("a -1\n", 6),
            ("\t-1\n", 6),
            ("<mask>\t-1\n", 6),
            ("a\tNaN\n", 6),
        ] {
            let err = Vocabulary::from_model_str(&format!("{header}{body}")).unwrap_err();
            assert!(
                matches!(err, Error::VocabFormat { line: l, .. } if l == line),
                "{body:?}: {err}"
            );
        }
    }
}
