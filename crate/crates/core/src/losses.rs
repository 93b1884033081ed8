//! The five objective terms and their weighted sum.
//!
//! Adversarial terms operate on patch logits. L1 terms are per-pixel means
//! over the whole batch. Values are accumulated in `f64`; gradient helpers
//! return tensors in the network's scalar type.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Functional form of the two adversarial terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GanMode {
    /// Logistic loss on logits: the discriminator minimizes
    /// `softplus(-d(real)) + softplus(d(fake))`, the generator minimizes
    /// `softplus(-d(fake))`.
    #[default]
    NonSaturating,
    /// Least-squares targets 1 for real and 0 for fake.
    LeastSquares,
}

/// Which player an adversarial loss is computed for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Generator,
    Discriminator,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub adv_clean: f64,
    pub adv_artifact: f64,
    pub recon: f64,
    pub cycle: f64,
    pub art: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { adv_clean: 1.0, adv_artifact: 1.0, recon: 20.0, cycle: 20.0, art: 20.0 }
    }
}

impl LossWeights {
    pub fn zero() -> Self {
        Self { adv_clean: 0.0, adv_artifact: 0.0, recon: 0.0, cycle: 0.0, art: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.adv_clean, self.adv_artifact, self.recon, self.cycle, self.art];
        if all.iter().all(|w| w.is_finite() && *w >= 0.0) {
            Ok(())
        } else {
            Err(crate::error::invalid_arg!("loss weights must be finite and non-negative: {self:?}"))
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            adv_clean: self.adv_clean * s,
            adv_artifact: self.adv_artifact * s,
            recon: self.recon * s,
            cycle: self.cycle * s,
            art: self.art * s,
        }
    }
}

/// Per-term values of one training iteration.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossReport {
    /// Generator-side adversarial loss against `D_I`.
    pub adv_clean: f64,
    /// Generator-side adversarial loss against `D_Ia`.
    pub adv_artifact: f64,
    pub recon: f64,
    pub cycle: f64,
    pub art: f64,
    /// Weighted generator objective.
    pub total: f64,
    /// Discriminator loss of `D_I`.
    pub disc_clean: f64,
    /// Discriminator loss of `D_Ia`.
    pub disc_artifact: f64,
}

impl LossReport {
    pub fn is_finite(&self) -> bool {
        [self.adv_clean, self.adv_artifact, self.recon, self.cycle, self.art, self.total, self.disc_clean, self.disc_artifact]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Numerically stable `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + libm::log1p(libm::exp(-x.abs()))
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

fn check_scores<T: Scalar>(scores: &[T], what: &str) -> Result<()> {
    if scores.is_empty() {
        return Err(crate::error::invalid_arg!("{what} score map is empty"));
    }
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(alloc::format!("{what} scores contain non-finite values")));
    }
    Ok(())
}

fn mean_of<T: Scalar>(xs: &[T], f: impl Fn(f64) -> f64) -> f64 {
    xs.iter().map(|v| f(v.as_f64())).sum::<f64>() / xs.len() as f64
}

/// Adversarial loss from real and fake score maps.
///
/// In the generator role only `fake` is used.
pub fn adv_loss<T: Scalar>(real: &[T], fake: &[T], role: Role, mode: GanMode) -> Result<f64> {
    check_scores(fake, "fake")?;
    match role {
        Role::Generator => Ok(match mode {
            GanMode::NonSaturating => mean_of(fake, |d| softplus(-d)),
            GanMode::LeastSquares => mean_of(fake, |d| (d - 1.0) * (d - 1.0)),
        }),
        Role::Discriminator => {
            check_scores(real, "real")?;
            Ok(match mode {
                GanMode::NonSaturating => mean_of(real, |d| softplus(-d)) + mean_of(fake, softplus),
                GanMode::LeastSquares => mean_of(real, |d| (d - 1.0) * (d - 1.0)) + mean_of(fake, |d| d * d),
            })
        }
    }
}

/// Gradients of [`adv_loss`] with respect to the real and fake scores.
pub fn adv_loss_grad<T: Scalar>(real: &[T], fake: &[T], role: Role, mode: GanMode) -> (Vec<T>, Vec<T>) {
    let nf = fake.len() as f64;
    let nr = real.len().max(1) as f64;
    let map = |xs: &[T], f: &dyn Fn(f64) -> f64| xs.iter().map(|v| T::from_f64(f(v.as_f64()))).collect::<Vec<T>>();
    match (role, mode) {
        (Role::Generator, GanMode::NonSaturating) => (map(real, &|_| 0.0), map(fake, &|d| -sigmoid(-d) / nf)),
        (Role::Generator, GanMode::LeastSquares) => (map(real, &|_| 0.0), map(fake, &|d| 2.0 * (d - 1.0) / nf)),
        (Role::Discriminator, GanMode::NonSaturating) => (map(real, &|d| -sigmoid(-d) / nr), map(fake, &|d| sigmoid(d) / nf)),
        (Role::Discriminator, GanMode::LeastSquares) => (map(real, &|d| 2.0 * (d - 1.0) / nr), map(fake, &|d| 2.0 * d / nf)),
    }
}

/// Adversarial loss of the artifact-free domain: real `y`, fake `G_I(E_Ia(x_a))`.
pub fn adv_loss_clean<T: Scalar>(d_real: &[T], d_fake: &[T], role: Role, mode: GanMode) -> Result<f64> {
    adv_loss(d_real, d_fake, role, mode)
}

/// Adversarial loss of the artifact-affected domain: real `x_a`, fake `G_Ia(E_I(y), E_a(x_a))`.
pub fn adv_loss_artifact<T: Scalar>(d_real: &[T], d_fake: &[T], role: Role, mode: GanMode) -> Result<f64> {
    adv_loss(d_real, d_fake, role, mode)
}

/// Mean absolute difference.
pub fn l1_mean<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    assert_eq!(a.len(), b.len(), "l1: length mismatch");
    if a.is_empty() {
        return 0.0;
    }
    a.iter().zip(b).map(|(&x, &y)| (x.as_f64() - y.as_f64()).abs()).sum::<f64>() / a.len() as f64
}

/// Gradient of `scale * l1_mean(a, b)` with respect to `a`.
pub fn l1_mean_grad<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, scale: f64) -> Tensor<T> {
    let s = T::from_f64(scale / a.len() as f64);
    a.zip_map(b, |x, y| {
        if x > y {
            s
        } else if x < y {
            -s
        } else {
            T::zero()
        }
    })
}

/// Self-reconstruction: `|x̂_a - x_a| + |ŷ - y|`.
pub fn recon_loss<T: Scalar>(x_hat_a: &[T], x_a: &[T], y_hat: &[T], y: &[T]) -> f64 {
    l1_mean(x_hat_a, x_a) + l1_mean(y_hat, y)
}

/// Self-reduction cycle: `|G_I(E_Ia(ŷ_a)) - y|`.
pub fn cycle_loss<T: Scalar>(y_cycled: &[T], y: &[T]) -> f64 {
    l1_mean(y_cycled, y)
}

/// Residual `(x_a - x̂) - (ŷ_a - y)` whose mean magnitude is the artifact-consistency loss.
pub fn artifact_residual<T: Scalar>(x_a: &Tensor<T>, x_hat: &Tensor<T>, y_hat_a: &Tensor<T>, y: &Tensor<T>) -> Tensor<T> {
    let removed = x_a.zip_map(x_hat, |a, b| a - b);
    let added = y_hat_a.zip_map(y, |a, b| a - b);
    removed.zip_map(&added, |a, b| a - b)
}

/// Artifact consistency: `|(x_a - x̂) - (ŷ_a - y)|`.
pub fn artifact_consistency_loss<T: Scalar>(x_a: &[T], x_hat: &[T], y_hat_a: &[T], y: &[T]) -> f64 {
    let n = x_a.len();
    assert!(x_hat.len() == n && y_hat_a.len() == n && y.len() == n, "artifact consistency: length mismatch");
    if n == 0 {
        return 0.0;
    }
    (0..n)
        .map(|i| ((x_a[i].as_f64() - x_hat[i].as_f64()) - (y_hat_a[i].as_f64() - y[i].as_f64())).abs())
        .sum::<f64>()
        / n as f64
}

/// Weighted generator objective from the five term values in `report`.
pub fn total_loss(report: &LossReport, weights: &LossWeights) -> f64 {
    weights.adv_clean * report.adv_clean
        + weights.adv_artifact * report.adv_artifact
        + weights.recon * report.recon
        + weights.cycle * report.cycle
        + weights.art * report.art
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::LN_2;

    #[test]
    fn softplus_is_stable_at_extremes() {
        assert_eq!(softplus(-800.0), 0.0);
        assert_eq!(softplus(800.0), 800.0);
        assert!((softplus(0.0) - LN_2).abs() < 1e-15);
    }

    #[test]
    fn least_squares_zero_scores() {
        let z = [0.0f64; 4];
        assert!((adv_loss(&z, &z, Role::Discriminator, GanMode::LeastSquares).unwrap() - 1.0).abs() < 1e-12);
        assert!((adv_loss(&z, &z, Role::Generator, GanMode::LeastSquares).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn adversarial_gradients_match_finite_differences() {
        let real = [0.3f64, -1.2, 2.0];
        let fake = [-0.7f64, 0.1];
        for mode in [GanMode::NonSaturating, GanMode::LeastSquares] {
            for role in [Role::Generator, Role::Discriminator] {
                let (gr, gf) = adv_loss_grad(&real, &fake, role, mode);
                for i in 0..fake.len() {
                    let (mut p, mut m) = (fake, fake);
                    p[i] += 1e-6;
                    m[i] -= 1e-6;
                    let fd = (adv_loss(&real, &p, role, mode).unwrap() - adv_loss(&real, &m, role, mode).unwrap()) / 2e-6;
                    assert!((fd - gf[i]).abs() < 1e-8, "{role:?} {mode:?} fake {i}");
                }
                for i in 0..real.len() {
                    let (mut p, mut m) = (real, real);
                    p[i] += 1e-6;
                    m[i] -= 1e-6;
                    let fd = (adv_loss(&p, &fake, role, mode).unwrap() - adv_loss(&m, &fake, role, mode).unwrap()) / 2e-6;
                    assert!((fd - gr[i]).abs() < 1e-8, "{role:?} {mode:?} real {i}");
                }
            }
        }
    }

    #[test]
    fn empty_or_non_finite_scores_are_rejected() {
        assert!(matches!(adv_loss::<f64>(&[], &[], Role::Generator, GanMode::NonSaturating), Err(Error::InvalidArgument(_))));
        assert!(matches!(adv_loss(&[f64::NAN], &[0.0], Role::Discriminator, GanMode::NonSaturating), Err(Error::Numeric(_))));
    }

    #[test]
    fn weights_validation() {
        assert!(LossWeights::default().validate().is_ok());
        assert!(LossWeights { recon: -1.0, ..LossWeights::default() }.validate().is_err());
        assert!(LossWeights { art: f64::NAN, ..LossWeights::default() }.validate().is_err());
    }
}
