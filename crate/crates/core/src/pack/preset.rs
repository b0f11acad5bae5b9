use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusSource {
    Text,
    Music,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskPolicy {
    Random,
    Targeted,
}

/// One curriculum stage.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSpec {
    pub name: String,
    pub seq_len: usize,
    pub epochs: usize,
    pub sources: Vec<CorpusSource>,
    pub mask_policy: MaskPolicy,
}

impl StageSpec {
    pub fn new(
        name: impl Into<String>,
        seq_len: usize,
        epochs: usize,
        sources: &[CorpusSource],
        mask_policy: MaskPolicy,
    ) -> Self {
        let mut sources = sources.to_vec();
        sources.sort();
        sources.dedup();
        StageSpec {
            name: name.into(),
            seq_len,
            epochs,
            sources,
            mask_policy,
        }
    }

    pub fn uses(&self, source: CorpusSource) -> bool {
        self.sources.contains(&source)
    }
}

pub const PRESET_NAMES: [&str; 6] = [
    "lil-bevo",
    "long-only",
    "short-only",
    "short-target",
    "music-short",
    "music-short-long",
];

/// Stage schedule of a named training regime. All presets spend 57 epochs.
pub fn preset(name: &str) -> Result<Vec<StageSpec>> {
    use CorpusSource::{Music, Text};
    use MaskPolicy::{Random, Targeted};

    let music = |epochs| StageSpec::new("music", 64, epochs, &[Text, Music], Random);
    let short = |epochs| StageSpec::new("short", 128, epochs, &[Text], Random);
    let long = |epochs| StageSpec::new("long", 512, epochs, &[Text], Random);
    let target = |epochs| StageSpec::new("target", 512, epochs, &[Text], Targeted);

    Ok(match name {
        "lil-bevo" => vec![music(5), short(50), target(2)],
        "long-only" => vec![long(57)],
        "short-only" => vec![short(57)],
        "short-target" => vec![short(55), target(2)],
        "music-short" => vec![music(5), short(52)],
        "music-short-long" => vec![music(5), short(50), long(2)],
        other => {
            return Err(Error::Parameter(format!(
                "unknown preset {other:?}; valid presets: {}",
                PRESET_NAMES.join(", ")
            )))
        }
    })
}
