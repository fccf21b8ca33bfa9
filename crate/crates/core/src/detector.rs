//! Per-pattern bug classifier: a one-hidden-layer MLP over concatenated
//! slot vectors, trained with binary cross-entropy and RMSProp.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::extraction::{CodeInstance, Label, Pattern};
use crate::neural::ops::{bce_with_logit, dropout_mask, relu, sigmoid};
use crate::neural::tensor::{axpy, dot, Tensor2};
use crate::neural::{Parameterized, RmsProp};
use crate::provider::{FeatureProvider, FeatureVector, FileSource, ProviderMode, SlotVector};
use crate::store::{decode_f32, encode_f32, round_f32, Container, DETECTOR_MAGIC};

pub const DETECTOR_VERSION: u32 = 1;
pub const HIDDEN: usize = 200;
pub const OP_UNK: &str = "<unk-op>";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig { hidden: HIDDEN, epochs: 10, batch: 50, lr: 0.001, dropout: 0.2, seed: 7 }
    }
}

/// MLP weights plus the operator table used when a provider leaves the
/// operator slot to the detector.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    /// `hidden × input`
    pub w1: Tensor2,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    /// One row per known operator; row 0 is the unknown operator.
    pub ops: Tensor2,
}

impl Parameterized for MlpParams {
    fn params(&self) -> Vec<&[f64]> {
        vec![&self.w1.data, &self.b1, &self.w2, &self.b2, &self.ops.data]
    }
    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.w1.data, &mut self.b1, &mut self.w2, &mut self.b2, &mut self.ops.data]
    }
}

/// Dense input with an optional operator lookup at slot offset `op_at`.
#[derive(Debug, Clone, PartialEq)]
pub struct Input {
    pub dense: Vec<f64>,
    pub op: Option<(usize, usize)>,
}

/// Dropout masks of one training example.
pub struct Masks {
    pub input: Vec<f64>,
    pub hidden: Vec<f64>,
}

impl MlpParams {
    pub fn new(input: usize, hidden: usize, n_ops: usize, dim: usize, rng: &mut ChaCha8Rng) -> MlpParams {
        let w2 = Tensor2::glorot(1, hidden, rng).data;
        MlpParams {
            w1: Tensor2::glorot(hidden, input, rng),
            b1: vec![0.0; hidden],
            w2,
            b2: vec![0.0],
            ops: Tensor2::uniform(n_ops, dim, 0.5 / dim as f64, rng),
        }
    }

    fn materialize(&self, x: &Input) -> Vec<f64> {
        let mut v = x.dense.clone();
        if let Some((at, op)) = x.op {
            let d = self.ops.cols;
            v[at..at + d].copy_from_slice(self.ops.row(op));
        }
        v
    }

    /// Logit of one input, with dropout masks when training.
    pub fn logit(&self, x: &Input, masks: Option<&Masks>) -> f64 {
        let mut v = self.materialize(x);
        if let Some(m) = masks {
            for (a, k) in v.iter_mut().zip(&m.input) {
                *a *= k;
            }
        }
        let mut h = self.w1.affine(&v, &self.b1);
        for (i, a) in h.iter_mut().enumerate() {
            *a = relu(*a) * masks.map_or(1.0, |m| m.hidden[i]);
        }
        dot(&self.w2, &h) + self.b2[0]
    }

    /// BCE loss of one example; accumulates gradients into `g`.
    pub fn backprop(&self, x: &Input, y: f64, masks: Option<&Masks>, g: &mut MlpParams) -> f64 {
        let mut v = self.materialize(x);
        if let Some(m) = masks {
            for (a, k) in v.iter_mut().zip(&m.input) {
                *a *= k;
            }
        }
        let pre = self.w1.affine(&v, &self.b1);
        let h: Vec<f64> =
            pre.iter().enumerate().map(|(i, a)| relu(*a) * masks.map_or(1.0, |m| m.hidden[i])).collect();
        let z = dot(&self.w2, &h) + self.b2[0];
        let (loss, dz) = bce_with_logit(z, y);
        axpy(dz, &h, &mut g.w2);
        g.b2[0] += dz;
        let dpre: Vec<f64> = (0..pre.len())
            .map(|i| if pre[i] > 0.0 { dz * self.w2[i] * masks.map_or(1.0, |m| m.hidden[i]) } else { 0.0 })
            .collect();
        g.w1.add_outer(&dpre, &v);
        axpy(1.0, &dpre, &mut g.b1);
        if let Some((at, op)) = x.op {
            let d = self.ops.cols;
            let mut dv = vec![0.0; v.len()];
            self.w1.matvec_t_acc(&dpre, &mut dv);
            let row = g.ops.row_mut(op);
            for k in 0..d {
                row[k] += dv[at + k] * masks.map_or(1.0, |m| m.input[at + k]);
            }
        }
        loss
    }
}

/// Where the provider of a trained detector comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Binding {
    pub embeddings: Option<String>,
    pub lm: Option<String>,
    pub collapse: Option<crate::lm::CollapseWeights>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorModel {
    pub pattern: Pattern,
    pub mode: ProviderMode,
    pub dim: usize,
    pub threshold: f64,
    pub binding: Binding,
    pub op_names: Vec<String>,
    pub config: DetectorConfig,
    pub params: MlpParams,
    /// Mean training loss per epoch.
    pub epoch_loss: Vec<f64>,
}

/// Input width for a pattern and slot dimension.
pub fn input_width(pattern: Pattern, dim: usize) -> usize {
    pattern.arity() * dim
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct EvalReport {
    pub threshold: f64,
    pub positives: usize,
    pub negatives: usize,
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub accuracy: f64,
    pub recall: f64,
    pub fpr: f64,
    pub skipped: usize,
}

impl EvalReport {
    /// Report from `(probability, is_buggy)` pairs; `strict` selects
    /// `p > threshold` instead of `p ≥ threshold` for flagging.
    pub fn from_predictions(preds: &[(f64, bool)], threshold: f64, strict: bool) -> EvalReport {
        let mut r = EvalReport { threshold, ..EvalReport::default() };
        for &(p, buggy) in preds {
            let flagged = if strict { p > threshold } else { p >= threshold };
            match (buggy, flagged) {
                (true, true) => r.tp += 1,
                (true, false) => r.fn_ += 1,
                (false, true) => r.fp += 1,
                (false, false) => r.tn += 1,
            }
        }
        r.positives = r.tp + r.fn_;
        r.negatives = r.tn + r.fp;
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        r.accuracy = ratio(r.tp + r.tn, r.positives + r.negatives);
        r.recall = ratio(r.tp, r.positives);
        r.fpr = ratio(r.fp, r.negatives);
        r
    }
}

fn label_value(l: Label) -> f64 {
    match l {
        Label::Buggy => 1.0,
        Label::Correct => 0.0,
    }
}

impl DetectorModel {
    fn op_id(&self, op: &str) -> usize {
        self.op_names.iter().position(|o| o == op).unwrap_or(0)
    }

    /// Concatenates slot vectors in slot order.
    pub fn assemble(&self, fv: &FeatureVector) -> Result<Input> {
        if fv.mode != self.mode || fv.dim != self.dim || fv.slots.len() != self.pattern.arity() {
            return Err(Error::ProviderMismatch(format!(
                "detector expects {} features of {}x{}, got {} features of {}x{}",
                self.mode.as_str(),
                self.pattern.arity(),
                self.dim,
                fv.mode.as_str(),
                fv.slots.len(),
                fv.dim
            )));
        }
        assemble_with(fv, |op| self.op_id(op))
    }

    pub fn input_for(&self, inst: &CodeInstance, provider: &dyn FeatureProvider, files: &dyn FileSource) -> Result<Input> {
        if inst.pattern != self.pattern {
            return Err(Error::ProviderMismatch(format!(
                "{} detector given a {} instance",
                self.pattern.as_str(),
                inst.pattern.as_str()
            )));
        }
        self.assemble(&provider.features(inst, files)?)
    }

    pub fn probability(&self, x: &Input) -> f64 {
        sigmoid(self.params.logit(x, None))
    }

    /// Probability that `inst` is buggy; dropout is off.
    pub fn predict(&self, inst: &CodeInstance, provider: &dyn FeatureProvider, files: &dyn FileSource) -> Result<f64> {
        Ok(self.probability(&self.input_for(inst, provider, files)?))
    }

    /// Accuracy on a labelled set at threshold 0.5 (`p ≥ 0.5` is buggy).
    pub fn evaluate(
        &self,
        dataset: &[CodeInstance],
        provider: &dyn FeatureProvider,
        files: &dyn FileSource,
    ) -> Result<EvalReport> {
        let preds = dataset
            .iter()
            .map(|i| Ok((self.predict(i, provider, files)?, i.label == Label::Buggy)))
            .collect::<Result<Vec<_>>>()?;
        Ok(EvalReport::from_predictions(&preds, 0.5, false))
    }

    pub fn to_container(&self) -> Container {
        let header = json!({
            "pattern": self.pattern,
            "mode": self.mode,
            "dim": self.dim,
            "threshold": self.threshold,
            "binding": self.binding,
            "op_names": self.op_names,
            "config": self.config,
            "epoch_loss": self.epoch_loss,
        });
        let mut c = Container::new(DETECTOR_MAGIC, DETECTOR_VERSION, header);
        for p in self.params.params() {
            c.push(encode_f32(p));
        }
        c
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_container().save(path)
    }

    pub fn from_container(c: &Container) -> Result<DetectorModel> {
        c.expect_version(DETECTOR_VERSION)?;
        let h = &c.header;
        let pattern: Pattern = serde_json::from_value(h["pattern"].clone())?;
        let mode: ProviderMode = serde_json::from_value(h["mode"].clone())?;
        let dim = h["dim"].as_u64().ok_or_else(|| Error::Format("detector header lacks dim".into()))? as usize;
        let config: DetectorConfig = serde_json::from_value(h["config"].clone())?;
        let op_names: Vec<String> = serde_json::from_value(h["op_names"].clone())?;
        let mut params = MlpParams {
            w1: Tensor2::zeros(config.hidden, input_width(pattern, dim)),
            b1: vec![0.0; config.hidden],
            w2: vec![0.0; config.hidden],
            b2: vec![0.0],
            ops: Tensor2::zeros(op_names.len(), dim),
        };
        let bufs = params.params_mut();
        if bufs.len() != c.records.len() {
            return Err(Error::Format("detector file has the wrong number of buffers".into()));
        }
        for (i, b) in bufs.into_iter().enumerate() {
            let v = decode_f32(c.record(i)?)?;
            if v.len() != b.len() {
                return Err(Error::Format(format!("detector buffer {i} has {} values, expected {}", v.len(), b.len())));
            }
            b.copy_from_slice(&v);
        }
        Ok(DetectorModel {
            pattern,
            mode,
            dim,
            threshold: h["threshold"].as_f64().unwrap_or(0.5),
            binding: serde_json::from_value(h["binding"].clone()).unwrap_or_default(),
            op_names,
            config,
            params,
            epoch_loss: serde_json::from_value(h["epoch_loss"].clone()).unwrap_or_default(),
        })
    }

    pub fn load(path: &Path) -> Result<DetectorModel> {
        DetectorModel::from_container(&Container::load(path, DETECTOR_MAGIC)?)
    }

    pub fn header_extra(&self) -> Value {
        json!({"pattern": self.pattern, "mode": self.mode})
    }
}

fn assemble_with(fv: &FeatureVector, op_id: impl Fn(&str) -> usize) -> Result<Input> {
    let d = fv.dim;
    let mut dense = Vec::with_capacity(fv.width());
    let mut op = None;
    for s in &fv.slots {
        match s {
            SlotVector::Vector(v) => {
                if v.len() != d {
                    return Err(Error::Shape(format!("slot vector of {} values, expected {d}", v.len())));
                }
                dense.extend_from_slice(v);
            }
            SlotVector::Operator(name) => {
                op = Some((dense.len(), op_id(name)));
                dense.extend(std::iter::repeat_n(0.0, d));
            }
        }
    }
    Ok(Input { dense, op })
}

/// Trains a detector on precomputed feature vectors.
pub fn train_on_features(
    pattern: Pattern,
    mode: ProviderMode,
    dim: usize,
    features: &[(FeatureVector, Label)],
    config: &DetectorConfig,
) -> Result<DetectorModel> {
    if features.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut op_names = vec![OP_UNK.to_string()];
    for (fv, _) in features {
        for s in &fv.slots {
            if let SlotVector::Operator(o) = s {
                if !op_names.contains(o) {
                    op_names.push(o.clone());
                }
            }
        }
    }
    op_names[1..].sort();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let width = input_width(pattern, dim);
    let params = MlpParams::new(width, config.hidden, op_names.len(), dim, &mut rng);
    let mut model = DetectorModel {
        pattern,
        mode,
        dim,
        threshold: 0.5,
        binding: Binding::default(),
        op_names,
        config: config.clone(),
        params,
        epoch_loss: Vec::new(),
    };
    let data: Vec<(Input, f64)> = features
        .iter()
        .map(|(fv, l)| {
            if fv.width() != width {
                return Err(Error::ProviderMismatch(format!("feature width {} for a {width}-wide detector", fv.width())));
            }
            Ok((assemble_with(fv, |o| model.op_id(o))?, label_value(*l)))
        })
        .collect::<Result<_>>()?;
    let mut opt = RmsProp::new(config.lr);
    let mut grads = model.params.zeros_like();
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch.max(1)) {
            grads.zero();
            for &i in batch {
                let masks = Masks {
                    input: dropout_mask(config.dropout, width, &mut rng),
                    hidden: dropout_mask(config.dropout, config.hidden, &mut rng),
                };
                total += model.params.backprop(&data[i].0, data[i].1, Some(&masks), &mut grads);
            }
            let scale = 1.0 / batch.len() as f64;
            for b in grads.params_mut() {
                b.iter_mut().for_each(|v| *v *= scale);
            }
            opt.step(&mut model.params, &grads);
        }
        let mean = total / data.len() as f64;
        if !mean.is_finite() {
            return Err(Error::NonFinite(format!("detector loss in epoch {}", epoch + 1)));
        }
        model.epoch_loss.push(mean);
    }
    for p in model.params.params_mut() {
        round_f32(p);
    }
    Ok(model)
}

/// Computes provider features for every instance of a labelled dataset and
/// trains on them.
pub fn train_detector(
    dataset: &[CodeInstance],
    provider: &dyn FeatureProvider,
    files: &dyn FileSource,
    config: &DetectorConfig,
) -> Result<DetectorModel> {
    let Some(first) = dataset.first() else { return Err(Error::EmptyDataset) };
    let pattern = first.pattern;
    let feats = dataset
        .iter()
        .map(|i| {
            if i.pattern != pattern {
                return Err(Error::InvalidArgument("dataset mixes bug patterns".into()));
            }
            Ok((provider.features(i, files)?, i.label))
        })
        .collect::<Result<Vec<_>>>()?;
    train_on_features(pattern, provider.mode(), provider.dim(), &feats, config)
}

/// Recall and false-positive rate over `(p_buggy, p_fixed)` pairs, flagging
/// strictly above `threshold`.
pub fn real_bug_report(pairs: &[(f64, f64)], threshold: f64, skipped: usize) -> Result<EvalReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let preds: Vec<(f64, bool)> = pairs.iter().flat_map(|&(b, f)| [(b, true), (f, false)]).collect();
    let mut r = EvalReport::from_predictions(&preds, threshold, true);
    r.skipped = skipped;
    Ok(r)
}

/// Scores each `(buggy, fixed)` instance pair with the model.
pub fn evaluate_real_bugs(
    model: &DetectorModel,
    pairs: &[(CodeInstance, CodeInstance)],
    provider: &dyn FeatureProvider,
    files: &dyn FileSource,
    threshold: f64,
    skipped: usize,
) -> Result<EvalReport> {
    let probs = pairs
        .iter()
        .map(|(b, f)| Ok((model.predict(b, provider, files)?, model.predict(f, provider, files)?)))
        .collect::<Result<Vec<_>>>()?;
    real_bug_report(&probs, threshold, skipped)
}
