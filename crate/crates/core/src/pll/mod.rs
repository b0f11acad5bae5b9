//! Pseudo-log-likelihood scoring and minimal-pair evaluation.
//!
//! A sentence's PLL masks each position in turn and sums the log-probability
//! the [`LogitProvider`] gives the original token. A pair is judged correct
//! when the grammatical sentence scores strictly higher.

mod pairs;
mod provider;

pub use pairs::{load_pairs, parse_pairs, MinimalPair};
pub use provider::{
    ngram_provider, serve_provider, ExternalProvider, LogitProvider, NgramProvider,
    ProviderRequest, ProviderResponse, UniformProvider, DEFAULT_BIGRAM_WEIGHT,
};

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::unigram::{Vocabulary, CLS_ID, EOS_ID, MASK_ID, PAD_ID};
use crate::{Error, Result};

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// Positions that get masked: everything except a leading `<cls>` and a
/// trailing `</s>`.
pub fn maskable_positions(ids: &[u32]) -> Range<usize> {
    let start = usize::from(ids.first() == Some(&CLS_ID));
    let end = if ids.len() > start && ids.last() == Some(&EOS_ID) {
        ids.len() - 1
    } else {
        ids.len()
    };
    start..end
}

/// Per-position log-probabilities of the original tokens, position
/// ascending.
pub fn pll_terms(provider: &dyn LogitProvider, ids: &[u32]) -> Result<Vec<f64>> {
    let size = provider.vocab_size();
    if let Some(&id) = ids.iter().find(|&&id| id as usize >= size) {
        return Err(Error::TokenId { id, size });
    }
    let positions = maskable_positions(ids);
    if positions.is_empty() {
        return Err(Error::Score("no maskable positions".into()));
    }
    if let Some(&id) = ids[positions.clone()]
        .iter()
        .find(|&&id| [PAD_ID, EOS_ID, MASK_ID, CLS_ID].contains(&id))
    {
        return Err(Error::Score(format!(
            "control id {id} inside the scored span"
        )));
    }
    positions
        .into_par_iter()
        .map(|t| {
            let mut masked = ids.to_vec();
            masked[t] = MASK_ID;
            let log_probs = provider.query(&masked, t)?;
            log_probs
                .get(ids[t] as usize)
                .copied()
                .ok_or_else(|| Error::Provider(format!("short response at position {t}")))
        })
        .collect()
}

/// Pseudo-log-likelihood, summed in position order.
pub fn pll(provider: &dyn LogitProvider, ids: &[u32]) -> Result<f64> {
    Ok(pll_terms(provider, ids)?.into_iter().sum())
}

/// How sentences are wrapped before scoring.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreOptions {
    pub add_cls: bool,
    pub add_eos: bool,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        ScoreOptions {
            add_cls: true,
            add_eos: true,
        }
    }
}

impl ScoreOptions {
    pub fn wrap(&self, body: Vec<u32>) -> Vec<u32> {
        let mut ids = Vec::with_capacity(body.len() + 2);
        if self.add_cls {
            ids.push(CLS_ID);
        }
        ids.extend(body);
        if self.add_eos {
            ids.push(EOS_ID);
        }
        ids
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub index: usize,
    pub phenomenon: String,
    pub pll_good: f64,
    pub pll_bad: f64,
    pub correct: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhenomenonScore {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall_accuracy: f64,
    pub pairs_scored: usize,
    /// Input indices of pairs that could not be scored.
    pub skipped: Vec<usize>,
    pub phenomena: BTreeMap<String, PhenomenonScore>,
    #[serde(skip)]
    pub records: Vec<PairRecord>,
}

impl EvalReport {
    fn from_records(records: Vec<PairRecord>, skipped: Vec<usize>) -> Self {
        let mut phenomena: BTreeMap<String, PhenomenonScore> = BTreeMap::new();
        for r in &records {
            let entry = phenomena
                .entry(r.phenomenon.clone())
                .or_insert(PhenomenonScore {
                    correct: 0,
                    total: 0,
                    accuracy: 0.0,
                });
            entry.total += 1;
            entry.correct += usize::from(r.correct);
        }
        for p in phenomena.values_mut() {
            p.accuracy = p.correct as f64 / p.total as f64;
        }
        let correct = records.iter().filter(|r| r.correct).count();
        EvalReport {
            overall_accuracy: if records.is_empty() {
                0.0
            } else {
                correct as f64 / records.len() as f64
            },
            pairs_scored: records.len(),
            skipped,
            phenomena,
            records,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Per-pair log: index, phenomenon, both scores, correctness.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("index\tphenomenon\tpll_good\tpll_bad\tcorrect\n");
        for r in &self.records {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                r.index, r.phenomenon, r.pll_good, r.pll_bad, r.correct
            )
            .unwrap();
        }
        out
    }
}

/// Tokenizes and scores every pair. Pairs with nothing to mask are skipped
/// and excluded from all denominators.
pub fn evaluate(
    provider: &dyn LogitProvider,
    pairs: &[MinimalPair],
    vocab: &Vocabulary,
    options: ScoreOptions,
) -> Result<EvalReport> {
    if pairs.is_empty() {
        return Err(Error::Score("no minimal pairs to evaluate".into()));
    }
    let scored: Vec<Option<PairRecord>> = pairs
        .par_iter()
        .enumerate()
        .map(|(index, pair)| {
            let good = vocab.encode(&pair.good);
            let bad = vocab.encode(&pair.bad);
            if good.is_empty() || bad.is_empty() {
                warn!(index, "skipping pair with an empty tokenization");
                return Ok(None);
            }
            let pll_good = pll(provider, &options.wrap(good))?;
            let pll_bad = pll(provider, &options.wrap(bad))?;
            Ok(Some(PairRecord {
                index,
                phenomenon: pair.phenomenon.clone(),
                pll_good,
                pll_bad,
                correct: pll_good > pll_bad,
            }))
        })
        .collect::<Result<_>>()?;
    let skipped = scored
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_none())
        .map(|(i, _)| i)
        .collect();
    Ok(EvalReport::from_records(
        scored.into_iter().flatten().collect(),
        skipped,
    ))
}
