//! Skip-gram word embeddings trained with negative sampling.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

use super::text::tokenize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub min_count: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        Self {
            dim: 50,
            window: 5,
            negatives: 5,
            epochs: 5,
            min_count: 1,
            learning_rate: 0.025,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipGramModel {
    pub dim: usize,
    pub words: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
    /// Row-major `words.len() x dim` word vectors.
    pub input: Vec<f64>,
    /// Row-major `words.len() x dim` context vectors.
    pub output: Vec<f64>,
}

const NEG_TABLE_SIZE: usize = 1 << 20;

fn sigmoid(x: f64) -> f64 {
    if x > 30.0 {
        1.0
    } else if x < -30.0 {
        0.0
    } else {
        1.0 / (1.0 + (-x).exp())
    }
}

impl SkipGramModel {
    /// Rebuilds the token index after deserialization.
    pub fn reindex(&mut self) {
        self.index = self.words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
    }

    pub fn vocab_len(&self) -> usize {
        self.words.len()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn embedding(&self, token: &str) -> Option<&[f64]> {
        self.index_of(token).map(|i| self.row(&self.input, i))
    }

    pub fn context_embedding(&self, token: &str) -> Option<&[f64]> {
        self.index_of(token).map(|i| self.row(&self.output, i))
    }

    fn row<'a>(&self, m: &'a [f64], i: usize) -> &'a [f64] {
        &m[i * self.dim..(i + 1) * self.dim]
    }

    /// Mean of the word vectors of in-vocabulary tokens; zeros if none.
    pub fn vectorize(&self, text: &str) -> Vec<f64> {
        self.vectorize_tokens(&tokenize(text))
    }

    pub fn vectorize_tokens(&self, tokens: &[String]) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        let mut n = 0usize;
        for i in tokens.iter().filter_map(|t| self.index_of(t)) {
            for (a, b) in v.iter_mut().zip(self.row(&self.input, i)) {
                *a += b;
            }
            n += 1;
        }
        if n > 0 {
            v.iter_mut().for_each(|a| *a /= n as f64);
        }
        v
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Trains on tokenized sentences with SGD and a linearly decaying rate.
pub fn train_skipgram(corpus: &[Vec<String>], config: &SkipGramConfig) -> Result<SkipGramModel> {
    ensure!(config.dim >= 2, Config, "embedding dimension must be at least 2");
    ensure!(config.window >= 1, Config, "window must be at least 1");
    ensure!(config.epochs >= 1, Config, "need at least one epoch");

    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for tok in corpus.iter().flatten() {
        *counts.entry(tok.as_str()).or_default() += 1;
    }
    let kept: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= config.min_count.max(1))
        .collect();
    if kept.is_empty() {
        return Err(Error::Data("skip-gram corpus is empty".into()));
    }
    let words: Vec<String> = kept.iter().map(|(w, _)| w.to_string()).collect();
    let index: HashMap<String, usize> = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
    let sentences: Vec<Vec<usize>> = corpus
        .iter()
        .map(|s| s.iter().filter_map(|t| index.get(t).copied()).collect())
        .collect();

    // Unigram^0.75 table for negative draws.
    let weights: Vec<f64> = kept.iter().map(|&(_, c)| (c as f64).powf(0.75)).collect();
    let total: f64 = weights.iter().sum();
    let table_len = NEG_TABLE_SIZE.min(words.len() * 1000).max(words.len());
    let mut table = Vec::with_capacity(table_len);
    let mut cum = 0.0;
    for (i, w) in weights.iter().enumerate() {
        cum += w / total;
        while table.len() < table_len && (table.len() as f64) < cum * table_len as f64 {
            table.push(i);
        }
    }
    while table.len() < table_len {
        table.push(words.len() - 1);
    }

    let dim = config.dim;
    let n = words.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let input: Vec<f64> = (0..n * dim)
        .map(|_| (rng.random::<f64>() - 0.5) / dim as f64)
        .collect();
    let mut model = SkipGramModel {
        dim,
        words,
        index,
        input,
        output: vec![0.0; n * dim],
    };

    let total_steps = (config.epochs * sentences.iter().map(Vec::len).sum::<usize>()).max(1);
    let mut step = 0usize;
    let mut grad = vec![0.0; dim];
    for _ in 0..config.epochs {
        for sent in &sentences {
            for (pos, &center) in sent.iter().enumerate() {
                let lr = (config.learning_rate * (1.0 - step as f64 / total_steps as f64))
                    .max(config.learning_rate * 1e-4);
                step += 1;
                let reach = rng.random_range(1..=config.window);
                let lo = pos.saturating_sub(reach);
                let hi = (pos + reach).min(sent.len() - 1);
                for (cpos, &context) in sent.iter().enumerate().take(hi + 1).skip(lo) {
                    if cpos == pos {
                        continue;
                    }
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    for k in 0..=config.negatives {
                        let (target, label) = if k == 0 {
                            (context, 1.0)
                        } else {
                            let t = table[rng.random_range(0..table.len())];
                            if t == context {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let (ci, ti) = (center * dim, target * dim);
                        let dot: f64 = (0..dim).map(|j| model.input[ci + j] * model.output[ti + j]).sum();
                        let g = lr * (label - sigmoid(dot));
                        for j in 0..dim {
                            grad[j] += g * model.output[ti + j];
                            model.output[ti + j] += g * model.input[ci + j];
                        }
                    }
                    let ci = center * dim;
                    for j in 0..dim {
                        model.input[ci + j] += grad[j];
                    }
                }
            }
        }
    }
    ensure!(
        model.input.iter().chain(&model.output).all(|x| x.is_finite()),
        Numerical,
        "skip-gram weights diverged"
    );
    Ok(model)
}
