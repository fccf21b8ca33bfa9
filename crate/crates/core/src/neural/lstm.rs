//! LSTM layer with gate order (input, forget, candidate, output).

use rand::Rng;

use super::ops::sigmoid;
use super::tensor::{axpy, Tensor2};
use super::Parameterized;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    pub input: usize,
    pub hidden: usize,
    /// `4H × (I + H)` acting on `[x; h_prev]`.
    pub w: Tensor2,
    pub b: Vec<f64>,
}

/// Per-step activations kept for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct LstmTrace {
    pub xh: Vec<Vec<f64>>,
    /// `[i, f, g, o]` after their nonlinearities.
    pub gates: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub tanh_c: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
}

impl Lstm {
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Lstm {
        let w = Tensor2::glorot(4 * hidden, input + hidden, rng);
        let mut b = vec![0.0; 4 * hidden];
        b[hidden..2 * hidden].fill(1.0);
        Lstm { input, hidden, w, b }
    }

    fn gates(&self, xh: &[f64]) -> Vec<f64> {
        let h = self.hidden;
        let mut z = self.w.affine(xh, &self.b);
        for (k, v) in z.iter_mut().enumerate() {
            *v = if (2 * h..3 * h).contains(&k) { v.tanh() } else { sigmoid(*v) };
        }
        z
    }

    /// One recurrence step.
    pub fn step(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let h = self.hidden;
        if x.len() != self.input || h_prev.len() != h || c_prev.len() != h {
            return Err(Error::Shape(format!(
                "lstm step: x {} (want {}), h {} and c {} (want {h})",
                x.len(),
                self.input,
                h_prev.len(),
                c_prev.len()
            )));
        }
        let xh = [x, h_prev].concat();
        let g = self.gates(&xh);
        let c: Vec<f64> = (0..h).map(|k| g[h + k] * c_prev[k] + g[k] * g[2 * h + k]).collect();
        let hn = (0..h).map(|k| g[3 * h + k] * c[k].tanh()).collect();
        Ok((hn, c))
    }

    /// Runs the layer over `xs` from a zero state.
    pub fn forward(&self, xs: &[Vec<f64>]) -> LstmTrace {
        let h = self.hidden;
        let mut tr = LstmTrace::default();
        let mut h_prev = vec![0.0; h];
        let mut c_prev = vec![0.0; h];
        for x in xs {
            debug_assert_eq!(x.len(), self.input);
            let mut xh = Vec::with_capacity(self.input + h);
            xh.extend_from_slice(x);
            xh.extend_from_slice(&h_prev);
            let g = self.gates(&xh);
            let c: Vec<f64> = (0..h).map(|k| g[h + k] * c_prev[k] + g[k] * g[2 * h + k]).collect();
            let tc: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
            let hn: Vec<f64> = (0..h).map(|k| g[3 * h + k] * tc[k]).collect();
            tr.xh.push(xh);
            tr.gates.push(g);
            c_prev = c.clone();
            h_prev = hn.clone();
            tr.c.push(c);
            tr.tanh_c.push(tc);
            tr.h.push(hn);
        }
        tr
    }

    /// Backpropagation through time. `dh[t]` is the loss gradient reaching
    /// `h_t` from outside the recurrence. Accumulates into `grads` and
    /// returns the gradient for each input.
    pub fn backward(&self, tr: &LstmTrace, dh: &[Vec<f64>], grads: &mut Lstm) -> Vec<Vec<f64>> {
        let h = self.hidden;
        let n = tr.h.len();
        let mut dxs = vec![Vec::new(); n];
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let zero = vec![0.0; h];
        for t in (0..n).rev() {
            let g = &tr.gates[t];
            let c_prev = if t > 0 { &tr.c[t - 1] } else { &zero };
            let mut dz = vec![0.0; 4 * h];
            for k in 0..h {
                let dhk = dh[t][k] + dh_next[k];
                let (i, f, gg, o) = (g[k], g[h + k], g[2 * h + k], g[3 * h + k]);
                let tc = tr.tanh_c[t][k];
                let dc = dc_next[k] + dhk * o * (1.0 - tc * tc);
                dz[k] = dc * gg * i * (1.0 - i);
                dz[h + k] = dc * c_prev[k] * f * (1.0 - f);
                dz[2 * h + k] = dc * i * (1.0 - gg * gg);
                dz[3 * h + k] = dhk * tc * o * (1.0 - o);
                dc_next[k] = dc * f;
            }
            grads.w.add_outer(&dz, &tr.xh[t]);
            axpy(1.0, &dz, &mut grads.b);
            let mut dxh = vec![0.0; self.input + h];
            self.w.matvec_t_acc(&dz, &mut dxh);
            dh_next.copy_from_slice(&dxh[self.input..]);
            dxh.truncate(self.input);
            dxs[t] = dxh;
        }
        dxs
    }
}

impl Parameterized for Lstm {
    fn params(&self) -> Vec<&[f64]> {
        vec![&self.w.data, &self.b]
    }
    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.w.data, &mut self.b]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::gradcheck::grad_check_model;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weights_give_zero_state() {
        let mut l = Lstm::new(3, 4, &mut ChaCha8Rng::seed_from_u64(0));
        l.zero();
        let (h, c) = l.step(&[1.0, -2.0, 0.5], &[0.0; 4], &[0.0; 4]).unwrap();
        assert!(h.iter().all(|v| *v == 0.0));
        assert!(c.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn forget_bias_starts_at_one() {
        let l = Lstm::new(2, 3, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(&l.b[3..6], &[1.0, 1.0, 1.0]);
        assert!(l.b[..3].iter().chain(&l.b[6..]).all(|v| *v == 0.0));
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let l = Lstm::new(2, 3, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(l.step(&[1.0], &[0.0; 3], &[0.0; 3]), Err(Error::Shape(_))));
    }

    #[test]
    fn hidden_state_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut l = Lstm::new(2, 5, &mut rng);
        for v in &mut l.w.data {
            *v *= 3.0;
        }
        let xs: Vec<Vec<f64>> = (0..20).map(|t| vec![t as f64, -(t as f64)]).collect();
        let tr = l.forward(&xs);
        assert!(tr.h.iter().flatten().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn step_agrees_with_forward() {
        let l = Lstm::new(2, 3, &mut ChaCha8Rng::seed_from_u64(2));
        let xs = vec![vec![0.5, -1.0], vec![1.5, 0.25]];
        let tr = l.forward(&xs);
        let (h1, c1) = l.step(&xs[0], &[0.0; 3], &[0.0; 3]).unwrap();
        let (h2, _) = l.step(&xs[1], &h1, &c1).unwrap();
        assert_eq!(tr.h[1], h2);
    }

    fn seq_loss(l: &Lstm, xs: &[Vec<f64>], targets: &[Vec<f64>]) -> f64 {
        let tr = l.forward(xs);
        tr.h.iter().zip(targets).map(|(h, t)| h.iter().zip(t).map(|(a, b)| 0.5 * (a - b).powi(2)).sum::<f64>()).sum()
    }

    #[test]
    fn bptt_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let l = Lstm::new(3, 4, &mut rng);
        let xs: Vec<Vec<f64>> = (0..3).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let targets: Vec<Vec<f64>> = (0..3).map(|_| (0..4).map(|_| rng.gen_range(-0.5..0.5)).collect()).collect();
        let tr = l.forward(&xs);
        let dh: Vec<Vec<f64>> = tr.h.iter().zip(&targets).map(|(h, t)| h.iter().zip(t).map(|(a, b)| a - b).collect()).collect();
        let mut grads = l.zeros_like();
        let dxs = l.backward(&tr, &dh, &mut grads);
        let report = grad_check_model(&l, |m| seq_loss(m, &xs, &targets), &grads, 1e-5, 1e-4).unwrap();
        assert!(report.passed, "{report:?}");

        // input gradients
        let flat: Vec<f64> = xs.concat();
        let r = crate::neural::grad_check(
            |f| seq_loss(&l, &f.chunks(3).map(|c| c.to_vec()).collect::<Vec<_>>(), &targets),
            &flat,
            &dxs.concat(),
            1e-5,
            1e-4,
        )
        .unwrap();
        assert!(r.passed, "{r:?}");
    }
}
