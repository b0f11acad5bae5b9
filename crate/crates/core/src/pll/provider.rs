use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::log_sum_exp;
use crate::unigram::MASK_ID;
use crate::{Error, Result};

/// Masked-LM oracle: the log-probability of every vocabulary entry at
/// `masked_position` given the (masked) sequence.
pub trait LogitProvider: Send + Sync {
    fn vocab_size(&self) -> usize;

    fn query(&self, ids: &[u32], masked_position: usize) -> Result<Vec<f64>>;
}

impl<P: LogitProvider + ?Sized> LogitProvider for Box<P> {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn query(&self, ids: &[u32], masked_position: usize) -> Result<Vec<f64>> {
        (**self).query(ids, masked_position)
    }
}

/// Same distribution everywhere: `log(1/V)` for every entry.
#[derive(Clone, Debug)]
pub struct UniformProvider {
    vocab_size: usize,
}

impl UniformProvider {
    pub fn new(vocab_size: usize) -> Self {
        UniformProvider { vocab_size }
    }
}

impl LogitProvider for UniformProvider {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn query(&self, _ids: &[u32], _masked_position: usize) -> Result<Vec<f64>> {
        Ok(vec![(1.0 / self.vocab_size as f64).ln(); self.vocab_size])
    }
}

/// Count-based reference provider: add-alpha unigram, optionally
/// interpolated with an add-alpha bigram on the left neighbour.
#[derive(Clone, Debug)]
pub struct NgramProvider {
    vocab_size: usize,
    order: u8,
    alpha: f64,
    bigram_weight: f64,
    unigram: Vec<f64>,
    bigrams: HashMap<u32, (u64, HashMap<u32, u64>)>,
}

/// Interpolation weight on the bigram estimate for order 2.
pub const DEFAULT_BIGRAM_WEIGHT: f64 = 0.5;

pub fn ngram_provider(
    corpus: &[u32],
    vocab_size: usize,
    order: u8,
    alpha: f64,
) -> Result<NgramProvider> {
    NgramProvider::train(corpus, vocab_size, order, alpha, DEFAULT_BIGRAM_WEIGHT)
}

impl NgramProvider {
    pub fn train(
        corpus: &[u32],
        vocab_size: usize,
        order: u8,
        alpha: f64,
        bigram_weight: f64,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Parameter(format!(
                "smoothing alpha {alpha} must be positive"
            )));
        }
        if !(1..=2).contains(&order) {
            return Err(Error::Parameter(format!(
                "n-gram order {order} must be 1 or 2"
            )));
        }
        if !(0.0..=1.0).contains(&bigram_weight) {
            return Err(Error::Parameter(format!(
                "bigram weight {bigram_weight} must lie in [0, 1]"
            )));
        }
        if corpus.is_empty() {
            return Err(Error::Parameter("n-gram corpus is empty".into()));
        }
        if let Some(&id) = corpus.iter().find(|&&id| id as usize >= vocab_size) {
            return Err(Error::TokenId {
                id,
                size: vocab_size,
            });
        }
        let mut counts = vec![0u64; vocab_size];
        let mut bigrams: HashMap<u32, (u64, HashMap<u32, u64>)> = HashMap::new();
        for &id in corpus.iter().filter(|&&id| id != MASK_ID) {
            counts[id as usize] += 1;
        }
        if order == 2 {
            for pair in corpus.windows(2) {
                if pair.contains(&MASK_ID) {
                    continue;
                }
                let entry = bigrams.entry(pair[0]).or_default();
                entry.0 += 1;
                *entry.1.entry(pair[1]).or_default() += 1;
            }
        }
        let total: u64 = counts.iter().sum();
        let denom = total as f64 + alpha * vocab_size as f64;
        let unigram = counts.iter().map(|&c| (c as f64 + alpha) / denom).collect();
        Ok(NgramProvider {
            vocab_size,
            order,
            alpha,
            bigram_weight,
            unigram,
            bigrams,
        })
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    fn probabilities(&self, left: Option<u32>) -> Vec<f64> {
        if self.order == 1 {
            return self.unigram.clone();
        }
        let v = self.vocab_size as f64;
        let empty = (0, HashMap::new());
        let (left_total, followers) = left
            .filter(|&l| l != MASK_ID)
            .and_then(|l| self.bigrams.get(&l))
            .unwrap_or(&empty);
        let denom = *left_total as f64 + self.alpha * v;
        let w = self.bigram_weight;
        let mut probs: Vec<f64> = self
            .unigram
            .iter()
            .map(|&u| w * self.alpha / denom + (1.0 - w) * u)
            .collect();
        for (&next, &c) in followers {
            probs[next as usize] += w * c as f64 / denom;
        }
        probs
    }
}

impl LogitProvider for NgramProvider {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn query(&self, ids: &[u32], masked_position: usize) -> Result<Vec<f64>> {
        if masked_position >= ids.len() {
            return Err(Error::Provider(format!(
                "masked position {masked_position} outside sequence of {}",
                ids.len()
            )));
        }
        let left = masked_position.checked_sub(1).map(|p| ids[p]);
        Ok(self.probabilities(left).into_iter().map(f64::ln).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderRequest {
    pub ids: Vec<u32>,
    pub masked_position: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProviderResponse {
    LogProbs { log_probs: Vec<f64> },
    Error { error: String },
}

/// Provider backed by a subprocess speaking line-delimited JSON: one
/// [`ProviderRequest`] per line in, one [`ProviderResponse`] per line out.
pub struct ExternalProvider {
    vocab_size: usize,
    io: Mutex<ExternalIo>,
}

struct ExternalIo {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl ExternalProvider {
    pub fn spawn(mut command: Command, vocab_size: usize) -> Result<Self> {
        let mut child = command
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Provider(format!("failed to start provider: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(ExternalProvider {
            vocab_size,
            io: Mutex::new(ExternalIo {
                child,
                stdin,
                stdout,
            }),
        })
    }
}

impl Drop for ExternalProvider {
    fn drop(&mut self) {
        if let Ok(io) = self.io.get_mut() {
            let _ = io.child.kill();
            let _ = io.child.wait();
        }
    }
}

impl LogitProvider for ExternalProvider {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn query(&self, ids: &[u32], masked_position: usize) -> Result<Vec<f64>> {
        let request = serde_json::to_string(&ProviderRequest {
            ids: ids.to_vec(),
            masked_position,
        })?;
        let mut io = self
            .io
            .lock()
            .map_err(|_| Error::Provider("provider connection poisoned".into()))?;
        let broken = |e: std::io::Error| Error::Provider(format!("provider pipe: {e}"));
        writeln!(io.stdin, "{request}").map_err(broken)?;
        io.stdin.flush().map_err(broken)?;
        let mut line = String::new();
        if io.stdout.read_line(&mut line).map_err(broken)? == 0 {
            return Err(Error::Provider("provider closed its output".into()));
        }
        match serde_json::from_str(&line)
            .map_err(|e| Error::Provider(format!("bad provider response: {e}")))?
        {
            ProviderResponse::Error { error } => Err(Error::Provider(error)),
            ProviderResponse::LogProbs { log_probs } => {
                if log_probs.len() != self.vocab_size {
                    return Err(Error::Provider(format!(
                        "response has {} log-probabilities, vocabulary has {}",
                        log_probs.len(),
                        self.vocab_size
                    )));
                }
                let lse = log_sum_exp(&log_probs);
                if (lse).abs() > 1e-4 {
                    return Err(Error::Provider(format!(
                        "response is not normalized (logsumexp {lse})"
                    )));
                }
                Ok(log_probs)
            }
        }
    }
}

/// Answers provider requests from `input` until end of stream. Malformed
/// requests get an error response and the loop continues.
pub fn serve_provider(
    provider: &dyn LogitProvider,
    input: impl BufRead,
    mut output: impl Write,
) -> Result<()> {
    for line in input.lines() {
        let line = line.map_err(|e| Error::io("<stdin>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let response = match serde_json::from_str::<ProviderRequest>(&line) {
            Err(e) => ProviderResponse::Error {
                error: format!("malformed request: {e}"),
            },
            Ok(req) => match validate_request(provider, &req)
                .and_then(|_| provider.query(&req.ids, req.masked_position))
            {
                Ok(log_probs) => ProviderResponse::LogProbs { log_probs },
                Err(e) => ProviderResponse::Error {
                    error: e.to_string(),
                },
            },
        };
        serde_json::to_writer(&mut output, &response)?;
        writeln!(output).map_err(|e| Error::io("<stdout>", e))?;
        output.flush().map_err(|e| Error::io("<stdout>", e))?;
    }
    Ok(())
}

fn validate_request(provider: &dyn LogitProvider, req: &ProviderRequest) -> Result<()> {
    if req.masked_position >= req.ids.len() {
        return Err(Error::Provider("masked_position outside ids".into()));
    }
    if let Some(&id) = req
        .ids
        .iter()
        .find(|&&id| id as usize >= provider.vocab_size())
    {
        return Err(Error::TokenId {
            id,
            size: provider.vocab_size(),
        });
    }
    Ok(())
}
