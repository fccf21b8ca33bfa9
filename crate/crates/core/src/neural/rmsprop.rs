use super::Parameterized;

/// RMSProp with an optional global gradient-norm clip.
#[derive(Debug, Clone)]
pub struct RmsProp {
    pub lr: f64,
    pub decay: f64,
    pub eps: f64,
    pub clip: Option<f64>,
    cache: Vec<Vec<f64>>,
}

impl RmsProp {
    pub fn new(lr: f64) -> RmsProp {
        RmsProp { lr, decay: 0.9, eps: 1e-8, clip: None, cache: Vec::new() }
    }

    pub fn with_clip(mut self, clip: f64) -> RmsProp {
        self.clip = Some(clip);
        self
    }

    /// One update of raw buffers: `cache = decay·cache + (1−decay)·g²`,
    /// `p −= lr·g / (√cache + eps)`.
    pub fn update(&mut self, params: Vec<&mut [f64]>, grads: Vec<&[f64]>) {
        if self.cache.is_empty() {
            self.cache = grads.iter().map(|g| vec![0.0; g.len()]).collect();
        }
        let scale = match self.clip {
            Some(c) => {
                let norm = grads.iter().map(|g| super::tensor::dot(g, g)).sum::<f64>().sqrt();
                if norm > c {
                    c / norm
                } else {
                    1.0
                }
            }
            None => 1.0,
        };
        for ((p, g), cache) in params.into_iter().zip(grads).zip(&mut self.cache) {
            debug_assert_eq!(p.len(), g.len());
            for i in 0..p.len() {
                let gi = g[i] * scale;
                cache[i] = self.decay * cache[i] + (1.0 - self.decay) * gi * gi;
                p[i] -= self.lr * gi / (cache[i].sqrt() + self.eps);
            }
        }
    }

    pub fn step<M: Parameterized>(&mut self, model: &mut M, grads: &M) {
        self.update(model.params_mut(), grads.params());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![1.5, -2.0];
        let mut opt = RmsProp::new(0.1);
        opt.update(vec![&mut p], vec![&[0.0, 0.0]]);
        assert_eq!(p, vec![1.5, -2.0]);
    }

    #[test]
    fn first_scalar_step() {
        let mut p = vec![0.0];
        let mut opt = RmsProp::new(0.1);
        opt.update(vec![&mut p], vec![&[1.0]]);
        let expected = 0.1 / (0.1f64.sqrt() + 1e-8);
        assert!((p[0] + expected).abs() < 1e-15);
        assert!((expected - 0.316_227_766).abs() < 1e-6);
    }

    #[test]
    fn quadratic_descends_monotonically() {
        let mut x = vec![3.0];
        let mut opt = RmsProp::new(0.01);
        let mut prev = f64::INFINITY;
        for _ in 0..100 {
            let loss = x[0] * x[0];
            assert!(loss < prev);
            prev = loss;
            let g = [2.0 * x[0]];
            opt.update(vec![&mut x], vec![&g]);
        }
    }
}
