//! Bidirectional LSTM language model over source tokens with a
//! character-convolution input layer, per-token layer-state stacks, and the
//! weighted collapse of a stack into one vector.

pub mod train;

use std::collections::HashMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::neural::charcnn::CharTrace;
use crate::neural::tensor::Tensor2;
use crate::neural::{CharCnn, CharCnnConfig, Lstm, LstmTrace, Parameterized};
use crate::store::{decode_f32, encode_f32, round_f32, Container, LM_MAGIC};

pub use train::{chunk_loss, perplexity, train_lm, TrainReport};

pub const LM_VERSION: u32 = 1;
pub const LM_UNK: &str = "<unk>";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmConfig {
    pub layers: usize,
    /// Hidden size per direction.
    pub hidden: usize,
    pub seq_len: usize,
    /// Chunks per parameter update.
    pub batch: usize,
    pub epochs: usize,
    pub lr: f64,
    pub clip: f64,
    pub lm_vocab_size: usize,
    pub char: CharCnnConfig,
    pub seed: u64,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig {
            layers: 2,
            hidden: 100,
            seq_len: 100,
            batch: 4,
            epochs: 5,
            lr: 0.002,
            clip: 5.0,
            lm_vocab_size: 50_000,
            char: CharCnnConfig::default(),
            seed: 7,
        }
    }
}

impl LmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.hidden == 0 || self.seq_len == 0 || self.batch == 0 {
            return Err(Error::InvalidArgument("layers, hidden, seq_len and batch must be positive".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::InvalidArgument(format!("learning rate {} must be positive", self.lr)));
        }
        Ok(())
    }

    /// Width of every layer-state vector.
    pub fn width(&self) -> usize {
        2 * self.hidden
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmParams {
    pub char: CharCnn,
    pub fwd: Vec<Lstm>,
    pub bwd: Vec<Lstm>,
    /// Output softmax shared by both directions: `V × H`.
    pub softmax_w: Tensor2,
    pub softmax_b: Vec<f64>,
}

impl Parameterized for LmParams {
    fn params(&self) -> Vec<&[f64]> {
        let mut v = self.char.params();
        for l in self.fwd.iter().chain(&self.bwd) {
            v.extend(l.params());
        }
        v.push(&self.softmax_w.data);
        v.push(&self.softmax_b);
        v
    }
    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.char.params_mut();
        for l in self.fwd.iter_mut().chain(self.bwd.iter_mut()) {
            v.extend(l.params_mut());
        }
        v.push(&mut self.softmax_w.data);
        v.push(&mut self.softmax_b);
        v
    }
}

impl LmParams {
    pub fn new(config: &LmConfig, vocab_len: usize, rng: &mut ChaCha8Rng) -> LmParams {
        let h = config.hidden;
        let char = CharCnn::new(config.char.clone(), config.width(), rng);
        let stack = |rng: &mut ChaCha8Rng| -> Vec<Lstm> {
            (0..config.layers).map(|j| Lstm::new(if j == 0 { 2 * h } else { h }, h, rng)).collect()
        };
        let fwd = stack(rng);
        let bwd = stack(rng);
        let softmax_w = Tensor2::glorot(vocab_len, h, rng);
        LmParams { char, fwd, bwd, softmax_w, softmax_b: vec![0.0; vocab_len] }
    }
}

/// The `L + 1` state vectors of one token: the input representation
/// followed by `[forward; backward]` of every layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStates {
    pub layers: Vec<Vec<f64>>,
}

/// Normalised layer weights `s` and scale `γ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseWeights {
    pub s: Vec<f64>,
    pub gamma: f64,
}

impl CollapseWeights {
    pub fn new(s: Vec<f64>, gamma: f64) -> Result<CollapseWeights> {
        let total: f64 = s.iter().sum();
        if s.is_empty() || (total - 1.0).abs() > 1e-9 || s.iter().any(|v| *v < 0.0) {
            return Err(Error::InvalidArgument(format!("layer weights {s:?} are not a distribution")));
        }
        Ok(CollapseWeights { s, gamma })
    }

    /// Weights from unnormalised scores, through a softmax.
    pub fn from_scores(scores: &[f64], gamma: f64) -> CollapseWeights {
        CollapseWeights { s: crate::neural::ops::softmax(scores), gamma }
    }

    /// `s_j = 1/(L+1)`, `γ = 1`.
    pub fn equal(layers: usize) -> CollapseWeights {
        CollapseWeights { s: vec![1.0 / (layers + 1) as f64; layers + 1], gamma: 1.0 }
    }

    /// All weight on layer `j`.
    pub fn one_hot(layers: usize, j: usize) -> CollapseWeights {
        let mut s = vec![0.0; layers + 1];
        s[j] = 1.0;
        CollapseWeights { s, gamma: 1.0 }
    }

    pub fn top(layers: usize) -> CollapseWeights {
        CollapseWeights::one_hot(layers, layers)
    }
}

/// `E = γ · Σ_j s_j · h_j`.
pub fn collapse(states: &LayerStates, w: &CollapseWeights) -> Result<Vec<f64>> {
    if w.s.len() != states.layers.len() {
        return Err(Error::InvalidArgument(format!(
            "{} layer weights for {} layer states",
            w.s.len(),
            states.layers.len()
        )));
    }
    let mut e = vec![0.0; states.layers[0].len()];
    for (sj, h) in w.s.iter().zip(&states.layers) {
        for (a, b) in e.iter_mut().zip(h) {
            *a += sj * b;
        }
    }
    for a in &mut e {
        *a *= w.gamma;
    }
    Ok(e)
}

/// All activations of one chunk.
pub(crate) struct Forward {
    /// Distinct token texts of the chunk, with their encoder traces.
    pub uniq: Vec<CharTrace>,
    pub pos_uniq: Vec<usize>,
    pub xs: Vec<Vec<f64>>,
    pub fwd: Vec<LstmTrace>,
    /// Backward-direction traces, in reversed time order.
    pub bwd: Vec<LstmTrace>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmModel {
    pub config: LmConfig,
    /// LM vocabulary; id 0 is UNK.
    pub vocab: Vec<String>,
    index: HashMap<String, usize>,
    pub params: LmParams,
}

impl LmModel {
    pub fn new(config: LmConfig, vocab: Vec<String>) -> Result<LmModel> {
        config.validate()?;
        if vocab.len() < 2 {
            return Err(Error::InvalidArgument(format!("LM vocabulary of {} entries is too small", vocab.len())));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let params = LmParams::new(&config, vocab.len(), &mut rng);
        Ok(LmModel::with_params(config, vocab, params))
    }

    pub fn with_params(config: LmConfig, vocab: Vec<String>, params: LmParams) -> LmModel {
        let index = vocab.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        LmModel { config, vocab, index, params }
    }

    pub fn token_id(&self, text: &str) -> usize {
        self.index.get(text).copied().unwrap_or(0)
    }

    pub fn layers(&self) -> usize {
        self.config.layers
    }

    pub(crate) fn run(&self, p: &LmParams, tokens: &[&str]) -> Forward {
        let mut seen: HashMap<&str, usize> = HashMap::new();
        let mut uniq = Vec::new();
        let mut uniq_x: Vec<Vec<f64>> = Vec::new();
        let mut pos_uniq = Vec::with_capacity(tokens.len());
        for &t in tokens {
            let u = *seen.entry(t).or_insert_with(|| {
                let (x, tr) = p.char.forward(t);
                uniq.push(tr);
                uniq_x.push(x);
                uniq.len() - 1
            });
            pos_uniq.push(u);
        }
        let xs: Vec<Vec<f64>> = pos_uniq.iter().map(|&u| uniq_x[u].clone()).collect();
        let mut fwd: Vec<LstmTrace> = Vec::with_capacity(p.fwd.len());
        for (j, l) in p.fwd.iter().enumerate() {
            let tr = l.forward(if j == 0 { &xs } else { &fwd[j - 1].h });
            fwd.push(tr);
        }
        let rev: Vec<Vec<f64>> = xs.iter().rev().cloned().collect();
        let mut bwd: Vec<LstmTrace> = Vec::with_capacity(p.bwd.len());
        for (j, l) in p.bwd.iter().enumerate() {
            let tr = l.forward(if j == 0 { &rev } else { &bwd[j - 1].h });
            bwd.push(tr);
        }
        Forward { uniq, pos_uniq, xs, fwd, bwd }
    }

    /// Context-free input representation of one token.
    pub fn input_state(&self, text: &str) -> Vec<f64> {
        self.params.char.encode(text)
    }

    /// Layer-state stacks of every token of `tokens`, run as one sequence
    /// from a zero state.
    pub fn layer_states(&self, tokens: &[&str]) -> Vec<LayerStates> {
        if tokens.is_empty() {
            return Vec::new();
        }
        let f = self.run(&self.params, tokens);
        let n = tokens.len();
        (0..n)
            .map(|k| {
                let mut layers = Vec::with_capacity(self.config.layers + 1);
                layers.push(f.xs[k].clone());
                for j in 0..self.config.layers {
                    layers.push([f.fwd[j].h[k].as_slice(), f.bwd[j].h[n - 1 - k].as_slice()].concat());
                }
                LayerStates { layers }
            })
            .collect()
    }

    /// Start offsets of the `seq_len` chunks of a stream of `n` tokens.
    pub fn chunk_of(&self, position: usize) -> std::ops::Range<usize> {
        let start = position / self.config.seq_len * self.config.seq_len;
        start..start + self.config.seq_len
    }

    pub fn to_container(&self) -> Container {
        let shapes: Vec<usize> = self.params.params().iter().map(|p| p.len()).collect();
        let header = json!({
            "config": self.config,
            "vocab": self.vocab,
            "buffers": shapes,
        });
        let mut c = Container::new(LM_MAGIC, LM_VERSION, header);
        for p in self.params.params() {
            c.push(encode_f32(p));
        }
        c
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_container().save(path)
    }

    pub fn from_container(c: &Container) -> Result<LmModel> {
        c.expect_version(LM_VERSION)?;
        let config: LmConfig = serde_json::from_value(c.header["config"].clone())?;
        let vocab: Vec<String> = serde_json::from_value(c.header["vocab"].clone())?;
        let mut model = LmModel::new(config, vocab)?;
        let buffers = model.params.params_mut();
        if c.records.len() != buffers.len() {
            return Err(Error::Format(format!("LM file has {} buffers, expected {}", c.records.len(), buffers.len())));
        }
        for (i, b) in buffers.into_iter().enumerate() {
            let v = decode_f32(c.record(i)?)?;
            if v.len() != b.len() {
                return Err(Error::Format(format!("LM buffer {i} has {} values, expected {}", v.len(), b.len())));
            }
            b.copy_from_slice(&v);
        }
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<LmModel> {
        LmModel::from_container(&Container::load(path, LM_MAGIC)?)
    }

    /// Rounds every parameter to single precision so the in-memory model
    /// matches its saved form exactly.
    pub fn round_to_storage(&mut self) {
        for p in self.params.params_mut() {
            round_f32(p);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> LmModel {
        let config = LmConfig { layers: 2, hidden: 3, ..LmConfig::default() };
        LmModel::new(config, vec![LM_UNK.into(), "a".into(), "b".into()]).unwrap()
    }

    #[test]
    fn stack_shape() {
        let m = tiny();
        let st = m.layer_states(&["a", "(", "b", ")"]);
        assert_eq!(st.len(), 4);
        assert!(st.iter().all(|s| s.layers.len() == 3 && s.layers.iter().all(|h| h.len() == 6)));
        assert_eq!(m.layer_states(&["x"]).len(), 1);
        assert!(m.layer_states(&[]).is_empty());
    }

    #[test]
    fn input_layer_is_context_free() {
        let m = tiny();
        let a = m.layer_states(&["p", "x", "q"]);
        let b = m.layer_states(&["r", "x", "s", "t"]);
        assert_eq!(a[1].layers[0], b[1].layers[0]);
        assert_ne!(a[1].layers[1], b[1].layers[1]);
    }

    #[test]
    fn collapse_identities() {
        let m = tiny();
        let st = &m.layer_states(&["a", "b", "c"])[1];
        let mean: Vec<f64> = (0..6).map(|i| st.layers.iter().map(|h| h[i]).sum::<f64>() / 3.0).collect();
        let e = collapse(st, &CollapseWeights::equal(2)).unwrap();
        assert!(e.iter().zip(&mean).all(|(a, b)| (a - b).abs() < 1e-12));
        assert_eq!(collapse(st, &CollapseWeights::top(2)).unwrap(), st.layers[2]);
        let double = CollapseWeights { gamma: 2.0, ..CollapseWeights::equal(2) };
        let e2 = collapse(st, &double).unwrap();
        assert!(e2.iter().zip(&e).all(|(a, b)| *a == 2.0 * b));
        assert!(collapse(st, &CollapseWeights::equal(3)).is_err());
    }

    #[test]
    fn weights_validation() {
        assert!(CollapseWeights::new(vec![0.5, 0.5], 1.0).is_ok());
        assert!(CollapseWeights::new(vec![0.5, 0.6], 1.0).is_err());
        let w = CollapseWeights::from_scores(&[0.0, 0.0, 0.0, 0.0], 1.0);
        assert!((w.s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tiny_vocabulary_is_rejected() {
        assert!(LmModel::new(LmConfig::default(), vec![LM_UNK.into()]).is_err());
    }

    #[test]
    fn container_round_trip() {
        let mut m = tiny();
        m.round_to_storage();
        let back = LmModel::from_container(&Container::read_from(&m.to_container().to_bytes().unwrap()[..], LM_MAGIC).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
