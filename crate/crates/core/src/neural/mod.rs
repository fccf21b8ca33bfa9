//! Dense math, fixed-architecture layers with hand-written backward passes,
//! and the optimizer and gradient checker used by every trainable model.

pub mod charcnn;
pub mod gradcheck;
pub mod lstm;
pub mod ops;
pub mod rmsprop;
pub mod tensor;

pub use charcnn::{CharCnn, CharCnnConfig};
pub use gradcheck::{grad_check, grad_check_model, GradReport};
pub use lstm::{Lstm, LstmTrace};
pub use rmsprop::RmsProp;
pub use tensor::Tensor2;

/// A model whose parameters are a fixed list of flat buffers. A gradient is
/// represented by a value of the same type.
pub trait Parameterized {
    fn params(&self) -> Vec<&[f64]>;
    fn params_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    fn zero(&mut self) {
        for p in self.params_mut() {
            p.fill(0.0);
        }
    }

    fn zeros_like(&self) -> Self
    where
        Self: Clone,
    {
        let mut z = self.clone();
        z.zero();
        z
    }

    fn flatten(&self) -> Vec<f64> {
        self.params().concat()
    }

    fn set_flat(&mut self, flat: &[f64]) {
        let mut off = 0;
        for p in self.params_mut() {
            p.copy_from_slice(&flat[off..off + p.len()]);
            off += p.len();
        }
    }

    /// `self += alpha * other`, buffer by buffer.
    fn add_scaled(&mut self, other: &Self, alpha: f64) {
        for (p, q) in self.params_mut().into_iter().zip(other.params()) {
            tensor::axpy(alpha, q, p);
        }
    }

    fn sq_norm(&self) -> f64 {
        self.params().iter().map(|p| tensor::dot(p, p)).sum()
    }

    fn all_finite(&self) -> bool {
        self.params().iter().all(|p| p.iter().all(|v| v.is_finite()))
    }
}
