use std::collections::BTreeMap;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AlignedSample, CategorySet};
use crate::unigram::is_control;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    ReplaceWithMask,
    ReplaceWithRandom,
    KeepOriginal,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Targeted(String),
    RandomFill,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskAction {
    pub position: usize,
    pub action: Action,
    pub source: Source,
}

/// Masking decisions for one sample, sorted by position.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskPlan {
    pub sample_length: usize,
    pub seed: u64,
    pub actions: Vec<MaskAction>,
}

/// One line of the plan JSON-lines file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub sample_index: usize,
    #[serde(flatten)]
    pub plan: MaskPlan,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskConfig {
    /// Fraction of sample positions to mask.
    pub budget: f64,
    pub mask_prob: f64,
    pub random_prob: f64,
}

impl Default for MaskConfig {
    fn default() -> Self {
        MaskConfig {
            budget: 0.15,
            mask_prob: 0.8,
            random_prob: 0.1,
        }
    }
}

impl MaskConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.budget > 0.0 && self.budget <= 1.0) {
            return Err(Error::Parameter(format!(
                "mask budget {} must lie in (0, 1]",
                self.budget
            )));
        }
        let split_ok = self.mask_prob >= 0.0
            && self.random_prob >= 0.0
            && self.mask_prob + self.random_prob <= 1.0;
        if !split_ok {
            return Err(Error::Parameter(format!(
                "mask/random probabilities {}/{} are not a valid split",
                self.mask_prob, self.random_prob
            )));
        }
        Ok(())
    }
}

/// `floor(budget * len)`, snapping products that miss an integer only by
/// floating-point error (0.15 * 20 must give 3).
pub fn budget_count(budget: f64, len: usize) -> usize {
    let x = budget * len as f64;
    let nearest = x.round();
    if (x - nearest).abs() <= 1e-9 * x.max(1.0) {
        nearest as usize
    } else {
        x.floor() as usize
    }
}

/// Token positions covered by category words, with the index of the
/// category each is attributed to. Earlier words claim shared tokens first.
pub fn targeted_positions(
    sample: &AlignedSample,
    categories: &CategorySet,
) -> BTreeMap<usize, usize> {
    let mut claimed = BTreeMap::new();
    for span in sample.word_spans() {
        if let Some(cat) = categories.category_of(&sample.text[span.chars.clone()]) {
            for pos in span.tokens {
                if !is_control(sample.tokens[pos]) {
                    claimed.entry(pos).or_insert(cat);
                }
            }
        }
    }
    claimed
}

/// Selects every targeted position, tops up with uniformly drawn positions
/// to `floor(budget * len)` and assigns each selection an action.
pub fn plan_masks(
    sample: &AlignedSample,
    categories: &CategorySet,
    config: &MaskConfig,
    seed: u64,
) -> Result<MaskPlan> {
    config.validate()?;
    let len = sample.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut selected: BTreeMap<usize, Source> = targeted_positions(sample, categories)
        .into_iter()
        .map(|(pos, cat)| {
            (
                pos,
                Source::Targeted(categories.categories()[cat].name.clone()),
            )
        })
        .collect();

    let budget = budget_count(config.budget, len);
    if selected.len() < budget {
        let free: Vec<usize> = (0..len)
            .filter(|&p| !is_control(sample.tokens[p]) && !selected.contains_key(&p))
            .collect();
        let need = (budget - selected.len()).min(free.len());
        for i in index::sample(&mut rng, free.len(), need) {
            selected.insert(free[i], Source::RandomFill);
        }
    }

    let actions = selected
        .into_iter()
        .map(|(position, source)| {
            let r: f64 = rng.random();
            let action = if r < config.mask_prob {
                Action::ReplaceWithMask
            } else if r < config.mask_prob + config.random_prob {
                Action::ReplaceWithRandom
            } else {
                Action::KeepOriginal
            };
            MaskAction {
                position,
                action,
                source,
            }
        })
        .collect();
    Ok(MaskPlan {
        sample_length: len,
        seed,
        actions,
    })
}
