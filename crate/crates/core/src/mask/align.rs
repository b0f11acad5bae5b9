use std::ops::Range;

use crate::unigram::{is_control, Vocabulary, WORD_BOUNDARY};
use crate::Result;

/// Character stand-in for control tokens when rebuilding text; never part of
/// a word.
const CONTROL_CHAR: char = '\n';
const UNK_CHAR: char = '\u{FFFD}';

/// A token sequence together with the text it spells and the byte range of
/// that text covered by each token.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlignedSample {
    pub tokens: Vec<u32>,
    pub text: String,
    pub token_ranges: Vec<Range<usize>>,
}

/// A pre-tokenization word: its byte span in the text and the tokens that
/// overlap it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WordSpan {
    pub chars: Range<usize>,
    pub tokens: Range<usize>,
}

impl AlignedSample {
    /// Rebuilds text from token surfaces. Boundary markers become spaces;
    /// control and unknown tokens become single separator characters.
    pub fn from_tokens(vocab: &Vocabulary, tokens: Vec<u32>) -> Result<Self> {
        let mut text = String::new();
        let mut token_ranges = Vec::with_capacity(tokens.len());
        for &id in &tokens {
            let start = text.len();
            if id == crate::unigram::UNK_ID {
                text.push(UNK_CHAR);
            } else if is_control(id) {
                text.push(CONTROL_CHAR);
            } else {
                for c in vocab.surface(id)?.chars() {
                    text.push(if c == WORD_BOUNDARY { ' ' } else { c });
                }
            }
            token_ranges.push(start..text.len());
        }
        Ok(AlignedSample {
            tokens,
            text,
            token_ranges,
        })
    }

    pub fn from_text(vocab: &Vocabulary, text: &str) -> Self {
        Self::from_tokens(vocab, vocab.encode(text)).expect("encoded ids are in range")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Words with their overlapping token spans, in text order.
    pub fn word_spans(&self) -> Vec<WordSpan> {
        word_units(&self.text)
            .into_iter()
            .filter_map(|chars| {
                let first = self.token_ranges.partition_point(|r| r.end <= chars.start);
                let last = self.token_ranges.partition_point(|r| r.start < chars.end);
                (first < last).then_some(WordSpan {
                    chars,
                    tokens: first..last,
                })
            })
            .collect()
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// Maximal runs of word characters, joined across apostrophes that sit
/// between two word characters ("don't" is one word, "'that'" yields "that").
pub(crate) fn word_units(text: &str) -> Vec<Range<usize>> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut units = Vec::new();
    let mut start: Option<usize> = None;
    for (i, &(pos, c)) in chars.iter().enumerate() {
        let joins = is_apostrophe(c)
            && start.is_some()
            && chars.get(i + 1).is_some_and(|&(_, n)| is_word_char(n));
        if is_word_char(c) || joins {
            start.get_or_insert(pos);
        } else if let Some(s) = start.take() {
            units.push(s..pos);
        }
    }
    if let Some(s) = start {
        units.push(s..text.len());
    }
    units
}
