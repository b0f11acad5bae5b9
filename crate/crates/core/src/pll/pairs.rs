use std::path::Path;

use serde::Deserialize;

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MinimalPair {
    pub good: String,
    pub bad: String,
    pub phenomenon: String,
}

/// Accepts BLiMP-distribution lines: the phenomenon tag falls back to
/// `linguistics_term`, then `UID`.
#[derive(Deserialize)]
struct RawPair {
    sentence_good: String,
    sentence_bad: String,
    phenomenon: Option<String>,
    linguistics_term: Option<String>,
    #[serde(rename = "UID")]
    uid: Option<String>,
}

pub fn parse_pairs(text: &str) -> Result<Vec<MinimalPair>> {
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::PairsFormat {
            line: i + 1,
            message,
        };
        let raw: RawPair = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        if raw.sentence_good == raw.sentence_bad {
            return Err(err("good and bad sentences are identical".into()));
        }
        pairs.push(MinimalPair {
            good: raw.sentence_good,
            bad: raw.sentence_bad,
            phenomenon: raw
                .phenomenon
                .or(raw.linguistics_term)
                .or(raw.uid)
                .unwrap_or_else(|| "unknown".into()),
        });
    }
    Ok(pairs)
}

pub fn load_pairs(path: &Path) -> Result<Vec<MinimalPair>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pairs(&text)
}
