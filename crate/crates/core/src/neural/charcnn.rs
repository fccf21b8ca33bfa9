//! Character-convolution token encoder: byte embeddings, 1-D filters of
//! several widths, max-pool over positions, tanh, linear projection.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{axpy, Tensor2};
use super::Parameterized;

pub const BOW: usize = 256;
pub const EOW: usize = 257;
pub const PAD: usize = 258;
pub const N_CHARS: usize = 259;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharCnnConfig {
    pub char_dim: usize,
    pub widths: Vec<usize>,
    pub filters: Vec<usize>,
    /// Padded length, markers included.
    pub max_chars: usize,
}

impl Default for CharCnnConfig {
    fn default() -> Self {
        CharCnnConfig { char_dim: 16, widths: vec![1, 2, 3, 4], filters: vec![16, 16, 32, 32], max_chars: 50 }
    }
}

impl CharCnnConfig {
    pub fn total_filters(&self) -> usize {
        self.filters.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharCnn {
    pub config: CharCnnConfig,
    pub out_dim: usize,
    pub emb: Tensor2,
    /// One `filters[k] × (widths[k]·char_dim)` bank per width.
    pub banks: Vec<Tensor2>,
    pub bank_b: Vec<Vec<f64>>,
    pub proj: Tensor2,
    pub proj_b: Vec<f64>,
}

/// Forward activations of one token.
#[derive(Debug, Clone)]
pub struct CharTrace {
    ids: Vec<usize>,
    /// Window start of the maximum, per bank and filter.
    argmax: Vec<Vec<usize>>,
    /// tanh of the pooled features.
    act: Vec<f64>,
}

/// `[BOW, bytes.., EOW, PAD..]`, truncated to keep both markers.
pub fn char_ids(text: &str, max_chars: usize) -> Vec<usize> {
    let mut ids = Vec::with_capacity(max_chars);
    ids.push(BOW);
    ids.extend(text.bytes().take(max_chars.saturating_sub(2)).map(usize::from));
    ids.push(EOW);
    ids.resize(max_chars.max(ids.len()), PAD);
    ids
}

impl CharCnn {
    pub fn new<R: Rng + ?Sized>(config: CharCnnConfig, out_dim: usize, rng: &mut R) -> CharCnn {
        let d = config.char_dim;
        let emb = Tensor2::uniform(N_CHARS, d, 0.5, rng);
        let banks = config.widths.iter().zip(&config.filters).map(|(&w, &f)| Tensor2::glorot(f, w * d, rng)).collect();
        let bank_b = config.filters.iter().map(|&f| vec![0.0; f]).collect();
        let proj = Tensor2::glorot(out_dim, config.total_filters(), rng);
        CharCnn { out_dim, emb, banks, bank_b, proj, proj_b: vec![0.0; out_dim], config }
    }

    fn window(&self, ids: &[usize], start: usize, width: usize) -> Vec<f64> {
        let mut v = Vec::with_capacity(width * self.config.char_dim);
        for &c in &ids[start..start + width] {
            v.extend_from_slice(self.emb.row(c));
        }
        v
    }

    pub fn forward(&self, text: &str) -> (Vec<f64>, CharTrace) {
        let ids = char_ids(text, self.config.max_chars);
        // first index from which every position is padding
        let pad_from = ids.iter().rposition(|&c| c != PAD).map_or(0, |p| p + 1);
        let mut argmax = Vec::with_capacity(self.banks.len());
        let mut act = Vec::with_capacity(self.config.total_filters());
        for (k, bank) in self.banks.iter().enumerate() {
            let w = self.config.widths[k];
            let last = ids.len().saturating_sub(w);
            let mut best = vec![f64::NEG_INFINITY; bank.rows];
            let mut best_at = vec![0usize; bank.rows];
            // windows lying wholly in the padding all share one value
            let real_end = last.min(pad_from.saturating_sub(1));
            let mut starts: Vec<usize> = (0..=real_end).collect();
            if pad_from <= last && real_end < pad_from {
                starts.push(pad_from);
            }
            for s in starts {
                let x = self.window(&ids, s, w);
                let z = bank.affine(&x, &self.bank_b[k]);
                for (f, &v) in z.iter().enumerate() {
                    if v > best[f] {
                        best[f] = v;
                        best_at[f] = s;
                    }
                }
            }
            act.extend(best.iter().map(|v| v.tanh()));
            argmax.push(best_at);
        }
        let out = self.proj.affine(&act, &self.proj_b);
        (out, CharTrace { ids, argmax, act })
    }

    pub fn encode(&self, text: &str) -> Vec<f64> {
        self.forward(text).0
    }

    pub fn backward(&self, tr: &CharTrace, dout: &[f64], grads: &mut CharCnn) {
        grads.proj.add_outer(dout, &tr.act);
        axpy(1.0, dout, &mut grads.proj_b);
        let mut dact = vec![0.0; tr.act.len()];
        self.proj.matvec_t_acc(dout, &mut dact);
        let d = self.config.char_dim;
        let mut off = 0;
        for (k, bank) in self.banks.iter().enumerate() {
            let w = self.config.widths[k];
            for f in 0..bank.rows {
                let a = tr.act[off + f];
                let dz = dact[off + f] * (1.0 - a * a);
                if dz == 0.0 {
                    continue;
                }
                let s = tr.argmax[k][f];
                grads.bank_b[k][f] += dz;
                let filt = bank.row(f);
                for j in 0..w {
                    let c = tr.ids[s + j];
                    axpy(dz, self.emb.row(c), &mut grads.banks[k].row_mut(f)[j * d..(j + 1) * d]);
                    axpy(dz, &filt[j * d..(j + 1) * d], grads.emb.row_mut(c));
                }
            }
            off += bank.rows;
        }
    }
}

impl Parameterized for CharCnn {
    fn params(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = vec![&self.emb.data];
        for (b, bb) in self.banks.iter().zip(&self.bank_b) {
            v.push(&b.data);
            v.push(bb);
        }
        v.push(&self.proj.data);
        v.push(&self.proj_b);
        v
    }
    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = vec![&mut self.emb.data];
        for (b, bb) in self.banks.iter_mut().zip(self.bank_b.iter_mut()) {
            v.push(&mut b.data);
            v.push(bb);
        }
        v.push(&mut self.proj.data);
        v.push(&mut self.proj_b);
        v
    }
}
