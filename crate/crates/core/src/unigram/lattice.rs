//! Segmentation lattice over the characters of one word.

#[derive(Clone, Copy, Debug)]
pub(crate) struct Arc {
    pub start: usize,
    pub end: usize,
    /// `None` marks an unknown-character arc.
    pub piece: Option<usize>,
    pub score: f64,
}

pub(crate) struct Lattice {
    pub len: usize,
    /// Sorted by `start`, then `end`.
    pub arcs: Vec<Arc>,
}

impl Lattice {
    /// Every substring of up to `max_chars` characters that `lookup` knows
    /// becomes an arc. Positions whose character has no single-character
    /// piece get an unknown arc scored `unk_score`.
    pub fn build(
        word: &str,
        max_chars: usize,
        unk_score: f64,
        lookup: impl Fn(&str) -> Option<(usize, f64)>,
    ) -> Lattice {
        let bounds: Vec<usize> = word
            .char_indices()
            .map(|(i, _)| i)
            .chain(std::iter::once(word.len()))
            .collect();
        let len = bounds.len() - 1;
        let mut arcs = Vec::with_capacity(len * 2);
        for start in 0..len {
            let mut has_single = false;
            for end in start + 1..=len.min(start + max_chars) {
                if let Some((piece, score)) = lookup(&word[bounds[start]..bounds[end]]) {
                    has_single |= end == start + 1;
                    arcs.push(Arc {
                        start,
                        end,
                        piece: Some(piece),
                        score,
                    });
                }
            }
            if !has_single {
                // keep sorted by end within the same start
                let at = arcs.partition_point(|a| a.start < start);
                arcs.insert(
                    at,
                    Arc {
                        start,
                        end: start + 1,
                        piece: None,
                        score: unk_score,
                    },
                );
            }
        }
        Lattice { len, arcs }
    }

    /// Best-scoring path as arc indices, and its score.
    pub fn viterbi(&self) -> (Vec<usize>, f64) {
        let mut best = vec![f64::NEG_INFINITY; self.len + 1];
        let mut back = vec![usize::MAX; self.len + 1];
        best[0] = 0.0;
        for (i, arc) in self.arcs.iter().enumerate() {
            let candidate = best[arc.start] + arc.score;
            if candidate > best[arc.end] {
                best[arc.end] = candidate;
                back[arc.end] = i;
            }
        }
        let mut path = Vec::new();
        let mut pos = self.len;
        while pos > 0 {
            let arc = back[pos];
            path.push(arc);
            pos = self.arcs[arc].start;
        }
        path.reverse();
        (path, best[self.len])
    }

    /// Log partition function and each arc's posterior probability.
    pub fn posteriors(&self) -> (f64, Vec<f64>) {
        let mut alpha = vec![f64::NEG_INFINITY; self.len + 1];
        let mut beta = vec![f64::NEG_INFINITY; self.len + 1];
        alpha[0] = 0.0;
        beta[self.len] = 0.0;
        for arc in &self.arcs {
            alpha[arc.end] = log_add(alpha[arc.end], alpha[arc.start] + arc.score);
        }
        for arc in self.arcs.iter().rev() {
            beta[arc.start] = log_add(beta[arc.start], arc.score + beta[arc.end]);
        }
        let z = alpha[self.len];
        let post = self
            .arcs
            .iter()
            .map(|a| (alpha[a.start] + a.score + beta[a.end] - z).exp())
            .collect();
        (z, post)
    }
}

pub(crate) fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}
