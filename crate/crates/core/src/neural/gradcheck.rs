use super::Parameterized;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradReport {
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub checked: usize,
    pub passed: bool,
}

/// Denominator floor for the relative error, so that gradients that are
/// zero up to round-off do not blow the ratio up.
pub const REL_FLOOR: f64 = 1e-6;

pub fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR)
}

/// Compares `analytic` with central differences of `loss` around `x`.
/// When `stride > 1` only every `stride`-th coordinate is checked.
pub fn grad_check_strided(
    mut loss: impl FnMut(&[f64]) -> f64,
    x: &[f64],
    analytic: &[f64],
    eps: f64,
    tol: f64,
    stride: usize,
) -> Result<GradReport> {
    if x.len() != analytic.len() {
        return Err(Error::Shape(format!("{} parameters but {} gradient entries", x.len(), analytic.len())));
    }
    let mut probe = x.to_vec();
    let mut report = GradReport { max_rel_error: 0.0, worst_index: 0, checked: 0, passed: true };
    for i in (0..x.len()).step_by(stride.max(1)) {
        probe[i] = x[i] + eps;
        let up = loss(&probe);
        probe[i] = x[i] - eps;
        let down = loss(&probe);
        probe[i] = x[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite(format!("loss at coordinate {i}")));
        }
        let numeric = (up - down) / (2.0 * eps);
        let err = rel_error(analytic[i], numeric);
        if err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst_index = i;
        }
        report.checked += 1;
    }
    report.passed = report.max_rel_error < tol;
    Ok(report)
}

pub fn grad_check(loss: impl FnMut(&[f64]) -> f64, x: &[f64], analytic: &[f64], eps: f64, tol: f64) -> Result<GradReport> {
    grad_check_strided(loss, x, analytic, eps, tol, 1)
}

/// Gradient check over every parameter of a model.
pub fn grad_check_model<M: Parameterized + Clone>(
    model: &M,
    loss: impl Fn(&M) -> f64,
    analytic: &M,
    eps: f64,
    tol: f64,
) -> Result<GradReport> {
    let mut probe = model.clone();
    grad_check(
        |flat| {
            probe.set_flat(flat);
            loss(&probe)
        },
        &model.flatten(),
        &analytic.flatten(),
        eps,
        tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_model_is_exact() {
        let w = [0.3, -1.2, 2.0];
        let x = [1.0, 2.0, -0.5];
        let r = grad_check(|w| w.iter().zip(&x).map(|(a, b)| a * b).sum(), &w, &x, 1e-5, 1e-8).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn corrupted_gradient_fails() {
        let w = [0.3, -1.2];
        let r = grad_check(|w| w[0] * w[0] + w[1] * w[1], &w, &[0.6, -2.4 * 1.01], 1e-5, 1e-4).unwrap();
        assert!(!r.passed);
        assert_eq!(r.worst_index, 1);
    }

    #[test]
    fn non_finite_loss_is_an_error() {
        assert!(grad_check(|w| w[0].ln(), &[0.0], &[1.0], 1e-5, 1e-4).is_err());
    }
}
