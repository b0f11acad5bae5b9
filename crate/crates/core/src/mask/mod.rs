//! Targeted-MLM mask planning.
//!
//! Every token of a word found in a [`CategorySet`] is masked; random
//! positions top the selection up to the budget (15% by default). Word
//! matching is case-insensitive on whole words of the text the tokens spell.

mod align;
mod categories;
mod plan;

pub use align::{AlignedSample, WordSpan};
pub use categories::{
    load_categories, CategorySet, MaskCategory, CATEGORY_NAMES, DEFAULT_CATEGORIES,
};
pub use plan::{
    budget_count, plan_masks, targeted_positions, Action, MaskAction, MaskConfig, MaskPlan,
    PlanRecord, Source,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::unigram::Vocabulary;
use crate::{pack, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub name: String,
    pub total_masks: u64,
    pub avg_masks_per_sample: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskStats {
    pub samples: u64,
    pub categories: Vec<CategoryStats>,
}

/// Targeted token positions per category, summed over samples.
pub fn mask_stats_for_samples(samples: &[AlignedSample], categories: &CategorySet) -> MaskStats {
    let totals = samples
        .par_iter()
        .map(|s| {
            let mut counts = vec![0u64; categories.len()];
            for cat in targeted_positions(s, categories).into_values() {
                counts[cat] += 1;
            }
            counts
        })
        .reduce(
            || vec![0u64; categories.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let n = samples.len() as u64;
    MaskStats {
        samples: n,
        categories: categories
            .categories()
            .iter()
            .zip(totals)
            .map(|(c, total)| CategoryStats {
                name: c.name.clone(),
                total_masks: total,
                avg_masks_per_sample: if n == 0 { 0.0 } else { total as f64 / n as f64 },
            })
            .collect(),
    }
}

/// Splits documents, in order and eos-separated, into consecutive samples of
/// `sample_length` tokens; the trailing partial sample is dropped.
pub fn chunk_samples(
    vocab: &Vocabulary,
    documents: &[Vec<u32>],
    sample_length: usize,
) -> Result<Vec<AlignedSample>> {
    if sample_length == 0 {
        return Err(crate::Error::Parameter(
            "sample length must be positive".into(),
        ));
    }
    let stream = pack::concat_documents(documents.iter().map(Vec::as_slice));
    stream
        .chunks_exact(sample_length)
        .map(|c| AlignedSample::from_tokens(vocab, c.to_vec()))
        .collect()
}

pub fn mask_stats(
    vocab: &Vocabulary,
    documents: &[Vec<u32>],
    categories: &CategorySet,
    sample_length: usize,
) -> Result<MaskStats> {
    let samples = chunk_samples(vocab, documents, sample_length)?;
    Ok(mask_stats_for_samples(&samples, categories))
}
