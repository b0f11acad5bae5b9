//! EM training of the unigram model with likelihood-based pruning.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::info;

use super::lattice::{log_add, Lattice};
use super::{boundary_words, Piece, Vocabulary, MAX_PIECE_CHARS, NUM_CONTROL, UNK_PENALTY};
use crate::{Error, Result};

/// Words per parallel work unit. Fixed so partial sums always combine in the
/// same order.
const CHUNK: usize = 512;

/// Floor for re-estimated log-probabilities of pieces whose expected count
/// underflows.
const MIN_LOG_PROB: f64 = -1000.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    pub vocab_size: usize,
    pub seed_multiplier: usize,
    pub shrink_factor: f64,
    pub em_iters: usize,
    pub max_piece_chars: usize,
}

impl TrainerConfig {
    pub fn new(vocab_size: usize) -> Self {
        TrainerConfig {
            vocab_size,
            seed_multiplier: 4,
            shrink_factor: 0.75,
            em_iters: 2,
            max_piece_chars: MAX_PIECE_CHARS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size <= NUM_CONTROL {
            return Err(Error::Parameter(format!(
                "vocab_size must exceed the {NUM_CONTROL} control symbols"
            )));
        }
        if self.seed_multiplier == 0 || self.em_iters == 0 || self.max_piece_chars == 0 {
            return Err(Error::Parameter(
                "seed_multiplier, em_iters and max_piece_chars must be positive".into(),
            ));
        }
        if !(self.shrink_factor > 0.0 && self.shrink_factor < 1.0) {
            return Err(Error::Parameter(format!(
                "shrink_factor {} must lie in (0, 1)",
                self.shrink_factor
            )));
        }
        Ok(())
    }
}

/// Word frequency table built from normalised documents.
#[derive(Clone, Debug, Default)]
pub struct TrainingCorpus {
    words: Vec<(String, u64)>,
    char_counts: BTreeMap<char, u64>,
    documents: usize,
}

impl TrainingCorpus {
    pub fn from_documents<I, S>(docs: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut counts: HashMap<String, u64> = HashMap::new();
        let mut documents = 0;
        for doc in docs {
            documents += 1;
            for w in boundary_words(doc.as_ref()) {
                *counts.entry(w).or_default() += 1;
            }
        }
        let mut words: Vec<(String, u64)> = counts.into_iter().collect();
        words.sort_unstable();
        let mut char_counts = BTreeMap::new();
        for (w, n) in &words {
            for c in w.chars() {
                *char_counts.entry(c).or_default() += n;
            }
        }
        TrainingCorpus {
            words,
            char_counts,
            documents,
        }
    }

    pub fn words(&self) -> &[(String, u64)] {
        &self.words
    }

    pub fn documents(&self) -> usize {
        self.documents
    }

    pub fn distinct_chars(&self) -> usize {
        self.char_counts.len()
    }

    /// Characters seen at least twice; each gets a reserved piece.
    pub fn required_chars(&self) -> Vec<char> {
        self.char_counts
            .iter()
            .filter(|&(_, &n)| n >= 2)
            .map(|(&c, _)| c)
            .collect()
    }
}

/// Log-likelihood trace and sizes recorded during training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    /// Corpus log-likelihood before each M-step, one inner list per pruning
    /// round.
    pub log_likelihoods: Vec<Vec<f64>>,
    pub documents: usize,
    pub distinct_words: usize,
    pub distinct_chars: usize,
    pub required_chars: usize,
    pub seed_pieces: usize,
}

/// Intermediate model manipulated by the training loop.
#[derive(Clone, Debug)]
pub struct UnigramModel {
    pieces: Vec<String>,
    log_probs: Vec<f64>,
    required: Vec<bool>,
    index: HashMap<String, usize>,
    max_piece_chars: usize,
    unk_score: f64,
}

impl UnigramModel {
    /// Seed inventory: every required character plus the
    /// `seed_multiplier * vocab_size` best substrings by frequency times
    /// length.
    pub fn seed(corpus: &TrainingCorpus, config: &TrainerConfig) -> Result<Self> {
        config.validate()?;
        let target = config.vocab_size - NUM_CONTROL;
        let required = corpus.required_chars();
        if config.vocab_size <= corpus.distinct_chars() + NUM_CONTROL {
            return Err(Error::Train(format!(
                "vocab_size {} must exceed {} distinct characters plus {NUM_CONTROL} control symbols",
                config.vocab_size,
                corpus.distinct_chars()
            )));
        }
        let covered = |c: char| corpus.char_counts.get(&c).is_some_and(|&n| n >= 2);

        let mut substrings: HashMap<&str, u64> = HashMap::new();
        for (word, n) in &corpus.words {
            let bounds: Vec<usize> = word
                .char_indices()
                .map(|(i, _)| i)
                .chain(std::iter::once(word.len()))
                .collect();
            let chars: Vec<char> = word.chars().collect();
            let len = chars.len();
            for start in 0..len {
                if !covered(chars[start]) {
                    continue;
                }
                for end in start + 2..=len.min(start + config.max_piece_chars) {
                    if !covered(chars[end - 1]) {
                        break;
                    }
                    *substrings
                        .entry(&word[bounds[start]..bounds[end]])
                        .or_default() += n;
                }
            }
        }
        let achievable = required.len() + substrings.len();
        if achievable < target {
            return Err(Error::VocabUnreachable {
                requested: config.vocab_size,
                achievable: achievable + NUM_CONTROL,
            });
        }
        let mut ranked: Vec<(&str, u64)> = substrings
            .into_iter()
            .map(|(s, n)| (s, n * s.chars().count() as u64))
            .collect();
        ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked.truncate(config.seed_multiplier.saturating_mul(config.vocab_size));

        let mut entries: Vec<(String, f64, bool)> = required
            .iter()
            .map(|&c| (c.to_string(), corpus.char_counts[&c] as f64, true))
            .collect();
        entries.extend(
            ranked
                .into_iter()
                .map(|(s, score)| (s.to_string(), score as f64, false)),
        );
        let total: f64 = entries.iter().map(|e| e.1).sum();
        let log_total = total.ln();
        let (pieces, log_probs, required): (Vec<_>, Vec<_>, Vec<_>) = entries
            .into_iter()
            .map(|(s, score, req)| (s, score.ln() - log_total, req))
            .fold((vec![], vec![], vec![]), |mut acc, (s, lp, r)| {
                acc.0.push(s);
                acc.1.push(lp);
                acc.2.push(r);
                acc
            });
        let min = log_probs.iter().copied().fold(0.0f64, f64::min);
        let mut model = UnigramModel {
            index: HashMap::new(),
            pieces,
            log_probs,
            required,
            max_piece_chars: config.max_piece_chars,
            unk_score: min - UNK_PENALTY,
        };
        model.reindex();
        Ok(model)
    }

    fn reindex(&mut self) {
        self.index = self
            .pieces
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
    }

    pub fn pieces(&self) -> &[String] {
        &self.pieces
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    fn lattice(&self, word: &str) -> Lattice {
        Lattice::build(word, self.max_piece_chars, self.unk_score, |s| {
            self.index.get(s).map(|&i| (i, self.log_probs[i]))
        })
    }

    /// Expected piece counts over all segmentations, and the corpus
    /// log-likelihood under the current parameters.
    pub fn e_step(&self, words: &[(String, u64)]) -> (Vec<f64>, f64) {
        let partials: Vec<(Vec<f64>, f64)> = words
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut counts = vec![0.0; self.pieces.len()];
                let mut ll = 0.0;
                for (word, n) in chunk {
                    let lattice = self.lattice(word);
                    let (z, post) = lattice.posteriors();
                    let n = *n as f64;
                    ll += n * z;
                    for (arc, p) in lattice.arcs.iter().zip(post) {
                        if let Some(piece) = arc.piece {
                            counts[piece] += n * p;
                        }
                    }
                }
                (counts, ll)
            })
            .collect();
        let mut counts = vec![0.0; self.pieces.len()];
        let mut ll = 0.0;
        for (c, l) in partials {
            for (acc, x) in counts.iter_mut().zip(c) {
                *acc += x;
            }
            ll += l;
        }
        (counts, ll)
    }

    /// Maximum-likelihood re-estimation from expected counts.
    pub fn m_step(&mut self, counts: &[f64]) {
        let total: f64 = counts.iter().sum();
        for (lp, &c) in self.log_probs.iter_mut().zip(counts) {
            *lp = (c / total).ln().max(MIN_LOG_PROB);
        }
    }

    /// One E-step plus M-step; returns the log-likelihood before the update.
    pub fn em_iteration(&mut self, words: &[(String, u64)]) -> f64 {
        let (counts, ll) = self.e_step(words);
        self.m_step(&counts);
        ll
    }

    pub fn log_likelihood(&self, words: &[(String, u64)]) -> f64 {
        self.e_step(words).1
    }

    /// Removes the pieces whose loss of corpus likelihood is smallest until
    /// `max(target, shrink * len)` remain. Required characters stay.
    pub fn prune(&mut self, words: &[(String, u64)], target: usize, shrink_factor: f64) {
        let len = self.pieces.len();
        if len <= target {
            return;
        }
        let new_size = target.max((shrink_factor * len as f64) as usize);

        // Viterbi frequencies, and how often each piece's words occur.
        let partials: Vec<(Vec<f64>, Vec<f64>)> = words
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut freq = vec![0.0; len];
                let mut word_freq = vec![0.0; len];
                let mut seen = Vec::new();
                for (word, n) in chunk {
                    let lattice = self.lattice(word);
                    seen.clear();
                    for arc in lattice.viterbi().0 {
                        if let Some(p) = lattice.arcs[arc].piece {
                            freq[p] += *n as f64;
                            seen.push(p);
                        }
                    }
                    seen.sort_unstable();
                    seen.dedup();
                    for &p in &seen {
                        word_freq[p] += *n as f64;
                    }
                }
                (freq, word_freq)
            })
            .collect();
        let mut freq = vec![0.0; len];
        let mut word_freq = vec![0.0; len];
        for (f, wf) in partials {
            freq.iter_mut().zip(f).for_each(|(a, x)| *a += x);
            word_freq.iter_mut().zip(wf).for_each(|(a, x)| *a += x);
        }
        let total_freq: f64 = freq.iter().sum();
        let total_words: f64 = words.iter().map(|(_, n)| *n as f64).sum();
        let log_total = total_freq.ln();

        let losses: Vec<(usize, f64)> = (0..len)
            .into_par_iter()
            .filter(|&i| !self.required[i])
            .map(|i| {
                if freq[i] == 0.0 {
                    return (i, f64::NEG_INFINITY);
                }
                let Some(alternatives) = self.alternatives(i) else {
                    return (i, f64::INFINITY);
                };
                let share = word_freq[i] / total_words;
                let logprob_piece = freq[i].ln() - log_total;
                let log_total_alt = (total_freq + freq[i] * (alternatives.len() as f64 - 1.0)).ln();
                let logprob_alt: f64 = alternatives
                    .iter()
                    .map(|&a| (freq[a] + freq[i]).ln() - log_total_alt)
                    .sum();
                (i, share * (logprob_piece - logprob_alt))
            })
            .collect();
        let mut losses = losses;
        losses.sort_unstable_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

        let required = self.required.iter().filter(|&&r| r).count();
        let mut keep = self.required.clone();
        for &(i, _) in losses.iter().take(new_size.saturating_sub(required)) {
            keep[i] = true;
        }
        let mut k = keep.iter();
        self.pieces.retain(|_| *k.next().unwrap());
        let mut k = keep.iter();
        self.log_probs.retain(|_| *k.next().unwrap());
        let mut k = keep.iter();
        self.required.retain(|_| *k.next().unwrap());
        let norm = self
            .log_probs
            .iter()
            .fold(f64::NEG_INFINITY, |a, &b| log_add(a, b));
        for lp in &mut self.log_probs {
            *lp -= norm;
        }
        self.reindex();
    }

    /// Best segmentation of piece `i`'s surface without using piece `i`.
    fn alternatives(&self, i: usize) -> Option<Vec<usize>> {
        let surface = &self.pieces[i];
        let lattice = Lattice::build(surface, self.max_piece_chars, self.unk_score, |s| {
            self.index
                .get(s)
                .filter(|&&p| p != i)
                .map(|&p| (p, self.log_probs[p]))
        });
        let (path, _) = lattice.viterbi();
        path.into_iter().map(|a| lattice.arcs[a].piece).collect()
    }

    /// Final vocabulary ordered by descending log-probability.
    pub fn into_vocabulary(self) -> Result<Vocabulary> {
        let mut pieces: Vec<Piece> = self
            .pieces
            .into_iter()
            .zip(self.log_probs)
            .map(|(surface, log_prob)| Piece {
                surface,
                log_prob: log_prob.min(0.0),
            })
            .collect();
        pieces.sort_by(|a, b| {
            b.log_prob
                .total_cmp(&a.log_prob)
                .then_with(|| a.surface.cmp(&b.surface))
        });
        Vocabulary::from_pieces(pieces)
    }
}

/// Trains a vocabulary of exactly `config.vocab_size` entries.
pub fn train_unigram<S: AsRef<str>>(
    documents: &[S],
    config: &TrainerConfig,
) -> Result<(Vocabulary, TrainingReport)> {
    if documents.is_empty() {
        return Err(Error::Train("corpus is empty".into()));
    }
    let corpus = TrainingCorpus::from_documents(documents);
    train_on_corpus(&corpus, config)
}

pub fn train_on_corpus(
    corpus: &TrainingCorpus,
    config: &TrainerConfig,
) -> Result<(Vocabulary, TrainingReport)> {
    let mut model = UnigramModel::seed(corpus, config)?;
    let target = config.vocab_size - NUM_CONTROL;
    let mut report = TrainingReport {
        log_likelihoods: Vec::new(),
        documents: corpus.documents(),
        distinct_words: corpus.words.len(),
        distinct_chars: corpus.distinct_chars(),
        required_chars: corpus.required_chars().len(),
        seed_pieces: model.len(),
    };
    info!(
        seed_pieces = model.len(),
        target, "unigram training started"
    );
    loop {
        let round: Vec<f64> = (0..config.em_iters)
            .map(|_| model.em_iteration(&corpus.words))
            .collect();
        info!(
            pieces = model.len(),
            log_likelihood = round.last().copied().unwrap_or_default(),
            "em round"
        );
        report.log_likelihoods.push(round);
        if model.len() <= target {
            break;
        }
        model.prune(&corpus.words, target, config.shrink_factor);
    }
    let vocab = model.into_vocabulary()?;
    debug_assert_eq!(vocab.size(), config.vocab_size);
    Ok((vocab, report))
}
