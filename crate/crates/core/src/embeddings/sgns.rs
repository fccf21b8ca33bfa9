//! CBOW with negative sampling, optionally with character-trigram input
//! composition (the FastText variant).

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::vocab::{Vocabulary, MISSING, RESERVED};
use crate::error::{Error, Result};
use crate::neural::ops::sigmoid;
use crate::neural::tensor::{axpy, dot, Tensor2};
use crate::neural::Parameterized;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgnsConfig {
    pub dim: usize,
    pub window: usize,
    pub epochs: usize,
    pub lr: f64,
    pub negatives: usize,
    pub seed: u64,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        SgnsConfig { dim: 200, window: 5, epochs: 5, lr: 0.05, negatives: 5, seed: 7 }
    }
}

impl SgnsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::InvalidArgument("window must be at least 1".into()));
        }
        if self.dim == 0 || self.epochs == 0 {
            return Err(Error::InvalidArgument("dim and epochs must be positive".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::InvalidArgument(format!("learning rate {} must be positive", self.lr)));
        }
        Ok(())
    }
}

/// Character trigrams of `<word>`, deduplicated, in order of first
/// appearance.
pub fn trigrams(word: &str) -> Vec<String> {
    let chars: Vec<char> = std::iter::once('<').chain(word.chars()).chain(std::iter::once('>')).collect();
    let mut out: Vec<String> = Vec::new();
    for w in chars.windows(3) {
        let t: String = w.iter().collect();
        if !out.contains(&t) {
            out.push(t);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgnsModel {
    pub input: Tensor2,
    pub output: Tensor2,
    /// Trigram vectors; empty (0 rows) for plain CBOW.
    pub trigrams: Tensor2,
    /// Trigram rows composing each vocabulary id.
    pub word_trigrams: Vec<Vec<usize>>,
}

/// Gradient of one training example.
#[derive(Debug, Clone)]
pub struct ExampleGrad {
    pub loss: f64,
    /// Gradient reaching each context word's composed input vector.
    pub d_input: Vec<f64>,
    pub d_output: Vec<(usize, Vec<f64>)>,
}

impl SgnsModel {
    pub fn dim(&self) -> usize {
        self.input.cols
    }

    /// Input representation of a vocabulary id.
    pub fn compose(&self, w: usize) -> Vec<f64> {
        let mut v = self.input.row(w).to_vec();
        for &t in &self.word_trigrams[w] {
            axpy(1.0, self.trigrams.row(t), &mut v);
        }
        v
    }

    /// Negative-sampling loss of predicting `target` from the mean of the
    /// context representations.
    pub fn example(&self, context: &[usize], target: usize, negatives: &[usize]) -> ExampleGrad {
        let d = self.dim();
        let mut h = vec![0.0; d];
        for &c in context {
            axpy(1.0 / context.len() as f64, &self.compose(c), &mut h);
        }
        let mut loss = 0.0;
        let mut dh = vec![0.0; d];
        let mut d_output = Vec::with_capacity(1 + negatives.len());
        for (j, label) in std::iter::once((target, 1.0)).chain(negatives.iter().map(|&n| (n, 0.0))) {
            let s = dot(self.output.row(j), &h);
            let p = sigmoid(s);
            loss += if label > 0.0 { -(p.max(1e-300)).ln() } else { -((1.0 - p).max(1e-300)).ln() };
            let g = p - label;
            axpy(g, self.output.row(j), &mut dh);
            d_output.push((j, h.iter().map(|v| g * v).collect()));
        }
        let d_input = dh.iter().map(|v| v / context.len() as f64).collect();
        ExampleGrad { loss, d_input, d_output }
    }

    /// Adds `scale` times an example gradient into `grads`.
    pub fn accumulate(&self, context: &[usize], g: &ExampleGrad, scale: f64, grads: &mut SgnsModel) {
        for (j, row) in &g.d_output {
            axpy(scale, row, grads.output.row_mut(*j));
        }
        for &c in context {
            axpy(scale, &g.d_input, grads.input.row_mut(c));
            for &t in &self.word_trigrams[c] {
                axpy(scale, &g.d_input, grads.trigrams.row_mut(t));
            }
        }
    }

    fn sgd(&mut self, context: &[usize], g: &ExampleGrad, lr: f64) {
        for (j, row) in &g.d_output {
            axpy(-lr, row, self.output.row_mut(*j));
        }
        for &c in context {
            axpy(-lr, &g.d_input, self.input.row_mut(c));
            for k in 0..self.word_trigrams[c].len() {
                let t = self.word_trigrams[c][k];
                axpy(-lr, &g.d_input, self.trigrams.row_mut(t));
            }
        }
    }
}

impl Parameterized for SgnsModel {
    fn params(&self) -> Vec<&[f64]> {
        vec![&self.input.data, &self.output.data, &self.trigrams.data]
    }
    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.input.data, &mut self.output.data, &mut self.trigrams.data]
    }
}

/// Trigram inventory of the vocabulary words, sorted.
pub fn trigram_inventory(vocab: &Vocabulary) -> (Vec<String>, Vec<Vec<usize>>) {
    let mut all: Vec<String> = vocab.entries.iter().flat_map(|(w, _)| trigrams(w)).collect();
    all.sort();
    all.dedup();
    let mut per_word = vec![Vec::new(); vocab.len()];
    for (i, (w, _)) in vocab.entries.iter().enumerate() {
        per_word[i + RESERVED] = trigrams(w).iter().map(|t| all.binary_search(t).unwrap()).collect();
    }
    (all, per_word)
}

pub fn init_model(vocab: &Vocabulary, dim: usize, subword: bool, rng: &mut ChaCha8Rng) -> (SgnsModel, Vec<String>) {
    let bound = 0.5 / dim as f64;
    let input = Tensor2::uniform(vocab.len(), dim, bound, rng);
    let (names, word_trigrams) = if subword { trigram_inventory(vocab) } else { (Vec::new(), vec![Vec::new(); vocab.len()]) };
    let trigrams = Tensor2::uniform(names.len(), dim, bound, rng);
    (SgnsModel { input, output: Tensor2::zeros(vocab.len(), dim), trigrams, word_trigrams }, names)
}

/// Noise distribution over ids: unigram counts to the power 0.75, with
/// out-of-vocabulary occurrences counted for UNK.
pub fn noise_weights(vocab: &Vocabulary, sequences: &[Vec<usize>]) -> Vec<f64> {
    let mut counts = vec![0u64; vocab.len()];
    for s in sequences {
        for &w in s {
            counts[w] += 1;
        }
    }
    counts[MISSING] = 0;
    counts.iter().map(|&c| (c as f64).powf(0.75)).collect()
}

/// Trains on `sequences` of names; returns the model, trigram names and the
/// mean loss of every epoch.
pub fn train(
    sequences: &[Vec<String>],
    vocab: &Vocabulary,
    config: &SgnsConfig,
    subword: bool,
) -> Result<(SgnsModel, Vec<String>, Vec<f64>)> {
    config.validate()?;
    let ids: Vec<Vec<usize>> = sequences.iter().map(|s| s.iter().map(|t| vocab.id(t)).collect()).collect();
    let total_tokens: usize = ids.iter().map(Vec::len).sum();
    if total_tokens < 2 {
        return Err(Error::EmptyCorpus);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (mut model, names) = init_model(vocab, config.dim, subword, &mut rng);
    let noise = WeightedIndex::new(noise_weights(vocab, &ids))
        .map_err(|e| Error::InvalidArgument(format!("noise distribution: {e}")))?;
    let total_steps = (total_tokens * config.epochs) as f64;
    let mut step = 0usize;
    let mut epoch_loss = Vec::with_capacity(config.epochs);
    let mut negs = Vec::with_capacity(config.negatives);
    for epoch in 0..config.epochs {
        let (mut sum, mut n) = (0.0, 0usize);
        for seq in &ids {
            for t in 0..seq.len() {
                step += 1;
                let lo = t.saturating_sub(config.window);
                let hi = (t + config.window + 1).min(seq.len());
                let context: Vec<usize> = (lo..hi).filter(|&k| k != t).map(|k| seq[k]).collect();
                if context.is_empty() {
                    continue;
                }
                let target = seq[t];
                negs.clear();
                for _ in 0..config.negatives {
                    let s = noise.sample(&mut rng);
                    if s != target {
                        negs.push(s);
                    }
                }
                let lr = config.lr * (1.0 - step as f64 / total_steps).max(1e-4);
                let g = model.example(&context, target, &negs);
                if !g.loss.is_finite() {
                    return Err(Error::NonFinite(format!("embedding loss at epoch {} step {step}", epoch + 1)));
                }
                sum += g.loss;
                n += 1;
                model.sgd(&context, &g, lr);
            }
        }
        let mean = if n > 0 { sum / n as f64 } else { 0.0 };
        if !mean.is_finite() {
            return Err(Error::NonFinite(format!("embedding loss diverged in epoch {}", epoch + 1)));
        }
        epoch_loss.push(mean);
    }
    Ok((model, names, epoch_loss))
}
