use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LmConfig, LmModel, LmParams, LM_UNK};
use crate::error::{Error, Result};
use crate::neural::ops::softmax_xent;
use crate::neural::tensor::axpy;
use crate::neural::{Parameterized, RmsProp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean per-prediction negative log-likelihood of each epoch, both
    /// directions pooled.
    pub epoch_nll: Vec<f64>,
    pub tokens: usize,
    pub chunks: usize,
}

/// `<unk>` followed by the `size` most frequent token texts (ties broken
/// lexicographically).
pub fn build_lm_vocab(streams: &[Vec<String>], size: usize) -> Vec<String> {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for s in streams {
        for t in s {
            if t != LM_UNK {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
    }
    let mut entries: Vec<(&str, u64)> = counts.into_iter().collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    std::iter::once(LM_UNK.to_string()).chain(entries.into_iter().take(size).map(|(t, _)| t.to_string())).collect()
}

/// Summed NLL and number of predictions over one chunk: the forward
/// direction predicts each next token, the backward direction each
/// previous one. Accumulates parameter gradients into `grads` when given.
pub fn chunk_loss(model: &LmModel, p: &LmParams, tokens: &[&str], grads: Option<&mut LmParams>) -> (f64, usize) {
    let n = tokens.len();
    if n < 2 {
        return (0.0, 0);
    }
    let f = model.run(p, tokens);
    let ids: Vec<usize> = tokens.iter().map(|t| model.token_id(t)).collect();
    let top = p.fwd.len() - 1;
    let h = model.config.hidden;
    let want_grads = grads.is_some();
    let mut dtop_f = vec![vec![0.0; h]; n];
    let mut dtop_b = vec![vec![0.0; h]; n];
    let mut nll = 0.0;
    let mut soft_grads: Vec<(Vec<f64>, usize, bool)> = Vec::new();
    for k in 0..n - 1 {
        // forward state at k predicts k+1; backward state at reversed index k
        // (position n-1-k) predicts position n-2-k
        for (dir_back, state, target) in [(false, &f.fwd[top].h[k], ids[k + 1]), (true, &f.bwd[top].h[k], ids[n - 2 - k])] {
            let logits = p.softmax_w.affine(state, &p.softmax_b);
            let (l, dl) = softmax_xent(&logits, target);
            nll += l;
            if want_grads {
                let d = if dir_back { &mut dtop_b[k] } else { &mut dtop_f[k] };
                p.softmax_w.matvec_t_acc(&dl, d);
                soft_grads.push((dl, k, dir_back));
            }
        }
    }
    let count = 2 * (n - 1);
    let Some(g) = grads else { return (nll, count) };
    for (dl, k, dir_back) in &soft_grads {
        let state = if *dir_back { &f.bwd[top].h[*k] } else { &f.fwd[top].h[*k] };
        g.softmax_w.add_outer(dl, state);
        axpy(1.0, dl, &mut g.softmax_b);
    }
    let mut dh = dtop_f;
    for j in (0..p.fwd.len()).rev() {
        dh = p.fwd[j].backward(&f.fwd[j], &dh, &mut g.fwd[j]);
    }
    let dx_f = dh;
    let mut dh = dtop_b;
    for j in (0..p.bwd.len()).rev() {
        dh = p.bwd[j].backward(&f.bwd[j], &dh, &mut g.bwd[j]);
    }
    let dx_b = dh;
    let mut du = vec![vec![0.0; f.xs[0].len()]; f.uniq.len()];
    for k in 0..n {
        let u = f.pos_uniq[k];
        axpy(1.0, &dx_f[k], &mut du[u]);
        axpy(1.0, &dx_b[n - 1 - k], &mut du[u]);
    }
    for (tr, d) in f.uniq.iter().zip(&du) {
        p.char.backward(tr, d, &mut g.char);
    }
    (nll, count)
}

fn chunks(streams: &[Vec<String>], seq_len: usize) -> Vec<Vec<&str>> {
    streams
        .iter()
        .flat_map(|s| s.chunks(seq_len).map(|c| c.iter().map(String::as_str).collect::<Vec<_>>()))
        .collect()
}

/// Trains the model on token streams (one per file), each cut into
/// `seq_len` chunks with the recurrent state reset per chunk.
pub fn train_lm(streams: &[Vec<String>], config: &LmConfig) -> Result<(LmModel, TrainReport)> {
    config.validate()?;
    let tokens: usize = streams.iter().map(Vec::len).sum();
    if tokens == 0 {
        return Err(Error::EmptyCorpus);
    }
    let vocab = build_lm_vocab(streams, config.lm_vocab_size);
    let mut model = LmModel::new(config.clone(), vocab)?;
    let all = chunks(streams, config.seq_len);
    let mut order: Vec<usize> = (0..all.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_0f_c4a1);
    let mut opt = RmsProp::new(config.lr).with_clip(config.clip);
    let mut grads = model.params.zeros_like();
    let mut epoch_nll = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let (mut total, mut count) = (0.0, 0usize);
        for batch in order.chunks(config.batch) {
            grads.zero();
            let (mut bl, mut bc) = (0.0, 0usize);
            for &c in batch {
                let (l, n) = chunk_loss(&model, &model.params, &all[c], Some(&mut grads));
                bl += l;
                bc += n;
            }
            if bc == 0 {
                continue;
            }
            if !bl.is_finite() {
                return Err(Error::NonFinite(format!("LM loss in epoch {}", epoch + 1)));
            }
            for b in grads.params_mut() {
                for v in b.iter_mut() {
                    *v /= bc as f64;
                }
            }
            opt.step(&mut model.params, &grads);
            total += bl;
            count += bc;
        }
        let mean = if count > 0 { total / count as f64 } else { 0.0 };
        if !mean.is_finite() || !model.params.all_finite() {
            return Err(Error::NonFinite(format!("LM diverged in epoch {}", epoch + 1)));
        }
        epoch_nll.push(mean);
    }
    model.round_to_storage();
    Ok((model, TrainReport { epoch_nll, tokens, chunks: all.len() }))
}

/// Per-token perplexity, `exp` of the mean NLL over both directions.
pub fn perplexity(model: &LmModel, streams: &[Vec<String>]) -> f64 {
    let (mut total, mut count) = (0.0, 0usize);
    for c in chunks(streams, model.config.seq_len) {
        let (l, n) = chunk_loss(model, &model.params, &c, None);
        total += l;
        count += n;
    }
    if count == 0 {
        return f64::NAN;
    }
    (total / count as f64).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::gradcheck::grad_check_model;
    use crate::neural::CharCnnConfig;

    /// Gradient check of the mean per-prediction NLL, the training objective.
    fn check_mean_nll(m: &LmModel, toks: &[&str]) -> crate::neural::GradReport {
        let mut g = m.params.zeros_like();
        let (_, n) = chunk_loss(m, &m.params, toks, Some(&mut g));
        let mut scaled = g.zeros_like();
        scaled.add_scaled(&g, 1.0 / n as f64);
        grad_check_model(&m.params, |p| chunk_loss(m, p, toks, None).0 / n as f64, &scaled, 1e-5, 1e-4).unwrap()
    }

    fn stream(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn vocab_order_and_unk() {
        let v = build_lm_vocab(&[stream("b a b c")], 2);
        assert_eq!(v, vec![LM_UNK, "b", "a"]);
    }

    #[test]
    fn toy_gradient_check() {
        let config = LmConfig {
            layers: 1,
            hidden: 4,
            char: CharCnnConfig { char_dim: 3, widths: vec![1, 2], filters: vec![2, 3], max_chars: 6 },
            ..LmConfig::default()
        };
        let vocab: Vec<String> = [LM_UNK, "a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        let m = LmModel::new(config, vocab).unwrap();
        let toks = ["a", "c", "zz", "a", "d", "b"];
        let r = check_mean_nll(&m, &toks);
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn two_layer_gradient_check() {
        let config = LmConfig {
            layers: 2,
            hidden: 3,
            char: CharCnnConfig { char_dim: 2, widths: vec![1, 2], filters: vec![2, 2], max_chars: 5 },
            ..LmConfig::default()
        };
        let vocab: Vec<String> = [LM_UNK, "a", "b"].iter().map(|s| s.to_string()).collect();
        let m = LmModel::new(config, vocab).unwrap();
        let toks = ["a", "b", "b", "q"];
        let r = check_mean_nll(&m, &toks);
        assert!(r.passed, "{r:?}");
    }

    fn small_config() -> LmConfig {
        LmConfig {
            layers: 1,
            hidden: 8,
            seq_len: 20,
            batch: 2,
            epochs: 3,
            lr: 0.01,
            char: CharCnnConfig { char_dim: 4, widths: vec![1, 2], filters: vec![4, 4], max_chars: 10 },
            ..LmConfig::default()
        }
    }

    #[test]
    fn loss_decreases_and_is_reproducible() {
        let streams = vec![stream(&"if ( a < b ) { x = y ; } ".repeat(10)), stream(&"f ( a , b ) ; ".repeat(12))];
        let (m1, r1) = train_lm(&streams, &small_config()).unwrap();
        let (m2, r2) = train_lm(&streams, &small_config()).unwrap();
        assert!(r1.epoch_nll.last().unwrap() < &r1.epoch_nll[0], "{:?}", r1.epoch_nll);
        assert_eq!(r1, r2);
        assert_eq!(m1, m2);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(matches!(train_lm(&[vec![]], &small_config()), Err(Error::EmptyCorpus)));
    }
}
