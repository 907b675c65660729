//! Large-sample Wald test via the delta method.
//!
//! The cell counts are multinomial, so the plug-in probability vector is
//! asymptotically normal with covariance Σ = diag(p) − ppᵀ. A smooth metric φ
//! inherits normality with variance VᵀΣV/n where V = ∇φ(p), giving the
//! z-statistic z = √n(φ̂ − null)/σ, two-sided or one-sided p-values, and the
//! matching confidence interval.

use alloc::vec::Vec;

use crate::metrics::{Metric, MetricError};
use crate::normal::{std_normal_cdf, std_normal_quantile};
use crate::types::{plug_in_probs, CellCounts, ProbVector, Sidedness};

/// Result of a Wald test, before any decision rule is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct WaldOutcome {
    /// Plug-in metric value φ(p̂).
    pub estimate: f64,
    /// Asymptotic σ(S) = √(VᵀΣV).
    pub sigma: f64,
    /// σ/√n.
    pub std_error: f64,
    /// Confidence interval at level 1−α; one-sided intervals carry an
    /// infinite endpoint.
    pub interval: (f64, f64),
    /// Two-sided: 2(1−Φ(|z|)); one-sided: the tested tail's mass.
    pub p_value: f64,
}

/// Errors from the Wald machinery.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WaldError {
    #[error("gradient has {got} entries for a {expected}-cell distribution")]
    ArityMismatch { expected: usize, got: usize },
    /// VᵀΣV fell below −1e-12: the quadratic form is mathematically ≥ 0, so
    /// this signals a bug rather than roundoff.
    #[error("quadratic form V'ΣV = {value} is negative beyond roundoff")]
    NumericalNegative { value: f64 },
    /// σ = 0 while the estimate differs from the null: the normal
    /// approximation collapses and no z-statistic exists.
    #[error("asymptotic sigma is zero but the estimate is off the null")]
    DegenerateSigma,
    #[error("significance level {0} is outside (0, 1)")]
    AlphaOutOfRange(f64),
    #[error("cannot test an empty sample")]
    EmptySample,
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Multinomial covariance Σ = diag(p) − ppᵀ, row-major.
pub fn categorical_covariance(p: &ProbVector) -> Vec<Vec<f64>> {
    let q = p.arity();
    let probs = p.as_slice();
    let mut matrix = Vec::with_capacity(q);
    for i in 0..q {
        let mut row = Vec::with_capacity(q);
        for j in 0..q {
            let diag = if i == j { probs[i] } else { 0.0 };
            row.push(diag - probs[i] * probs[j]);
        }
        matrix.push(row);
    }
    matrix
}

/// σ = √(VᵀΣV), computed as √(Σᵢpᵢvᵢ² − (Σᵢpᵢvᵢ)²) without materializing Σ.
///
/// The quadratic form is a variance and cannot be negative; values in
/// [−1e-12, 0] are clamped to 0 as roundoff, anything lower is an error.
pub fn asymptotic_sigma(p: &ProbVector, grad: &[f64]) -> Result<f64, WaldError> {
    if grad.len() != p.arity() {
        return Err(WaldError::ArityMismatch { expected: p.arity(), got: grad.len() });
    }
    let probs = p.as_slice();
    let mut second_moment = 0.0;
    let mut mean = 0.0;
    for (pi, vi) in probs.iter().zip(grad) {
        second_moment += pi * vi * vi;
        mean += pi * vi;
    }
    let quad = second_moment - mean * mean;
    if quad < -1e-12 {
        return Err(WaldError::NumericalNegative { value: quad });
    }
    Ok(libm::sqrt(quad.max(0.0)))
}

/// Runs the Wald test for `metric` on `counts` at level `alpha`.
///
/// The null value comes from the metric (0 for differences, 1 for ratios).
/// When σ = 0 and the estimate sits exactly on the null, the sample carries
/// no evidence either way: p = 1 with a degenerate interval. When σ = 0 off
/// the null, no z-statistic exists and the call fails with
/// [`WaldError::DegenerateSigma`].
pub fn wald_test(
    counts: &CellCounts,
    metric: &dyn Metric,
    alpha: f64,
    sidedness: Sidedness,
) -> Result<WaldOutcome, WaldError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(WaldError::AlphaOutOfRange(alpha));
    }
    let p = plug_in_probs(counts).map_err(|_| WaldError::EmptySample)?;
    let estimate = metric.value(p.as_slice())?;
    let grad = metric.gradient(p.as_slice())?;
    let sigma = asymptotic_sigma(&p, &grad)?;
    let n = counts.n() as f64;
    let std_error = sigma / libm::sqrt(n);
    let null = metric.null_value();

    if sigma == 0.0 {
        if estimate == null {
            return Ok(WaldOutcome {
                estimate,
                sigma,
                std_error,
                interval: (estimate, estimate),
                p_value: 1.0,
            });
        }
        return Err(WaldError::DegenerateSigma);
    }

    let z = libm::sqrt(n) * (estimate - null) / sigma;
    // std_normal_quantile only fails for arguments outside (0,1), which the
    // alpha check above rules out.
    let (interval, p_value) = match sidedness {
        Sidedness::TwoSided => {
            let half = std_error * std_normal_quantile(1.0 - alpha / 2.0).expect("alpha checked");
            ((estimate - half, estimate + half), 2.0 * std_normal_cdf(-libm::fabs(z)))
        }
        Sidedness::Less => {
            let reach = std_error * std_normal_quantile(1.0 - alpha).expect("alpha checked");
            ((f64::NEG_INFINITY, estimate + reach), std_normal_cdf(z))
        }
        Sidedness::Greater => {
            let reach = std_error * std_normal_quantile(1.0 - alpha).expect("alpha checked");
            ((estimate - reach, f64::INFINITY), std_normal_cdf(-z))
        }
    };
    Ok(WaldOutcome { estimate, sigma, std_error, interval, p_value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{builtin, sp_gradient};
    use crate::types::{MetricId, Reference};
    use alloc::vec;

    fn uniform() -> ProbVector {
        ProbVector::new(vec![0.25, 0.25, 0.25, 0.25]).unwrap()
    }

    fn sp() -> crate::metrics::BuiltinMetric {
        builtin(MetricId::Sp, Reference::Complement)
    }

    #[test]
    fn covariance_uniform_point() {
        let m = categorical_covariance(&uniform());
        for (i, row) in m.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let want = if i == j { 0.1875 } else { -0.0625 };
                assert!((v - want).abs() < 1e-15, "Σ[{i}][{j}] = {v}");
            }
        }
    }

    #[test]
    fn covariance_point_mass_is_zero() {
        let p = ProbVector::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        for row in categorical_covariance(&p) {
            for v in row {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn covariance_rows_sum_to_zero() {
        let p = ProbVector::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        for row in categorical_covariance(&p) {
            let sum: f64 = row.iter().sum();
            assert!(sum.abs() < 1e-15);
        }
    }

    #[test]
    fn sigma_uniform_alternating_gradient() {
        let sigma = asymptotic_sigma(&uniform(), &[1.0, -1.0, -1.0, 1.0]).unwrap();
        assert_eq!(sigma, 1.0);
    }

    #[test]
    fn sigma_zero_gradient_is_zero() {
        let sigma = asymptotic_sigma(&uniform(), &[0.0; 4]).unwrap();
        assert_eq!(sigma, 0.0);
    }

    #[test]
    fn sigma_matches_explicit_quadratic_form() {
        let p = ProbVector::new(vec![0.1, 0.3, 0.3, 0.3]).unwrap();
        let grad = sp_gradient(p.as_slice()).unwrap();
        let matrix = categorical_covariance(&p);
        let mut quad = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                quad += grad[i] * matrix[i][j] * grad[j];
            }
        }
        let direct = asymptotic_sigma(&p, &grad).unwrap();
        assert!((direct - quad.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn sigma_rejects_wrong_arity() {
        assert_eq!(
            asymptotic_sigma(&uniform(), &[1.0, 2.0]).unwrap_err(),
            WaldError::ArityMismatch { expected: 4, got: 2 }
        );
    }

    #[test]
    fn equal_rates_give_p_one() {
        let counts = CellCounts::four(50, 50, 500, 500);
        let out = wald_test(&counts, &sp(), 0.05, Sidedness::TwoSided).unwrap();
        assert_eq!(out.estimate, 0.0);
        assert_eq!(out.p_value, 1.0);
        assert!(out.sigma > 0.0);
    }

    #[test]
    fn strong_disparity_matches_reference_normal() {
        // Recompute z from first principles and take the tail mass from an
        // independently implemented normal distribution.
        let counts = CellCounts::four(10, 90, 500, 500);
        let out = wald_test(&counts, &sp(), 0.05, Sidedness::TwoSided).unwrap();
        assert!((out.estimate - (-0.4)).abs() < 1e-15);

        let n: f64 = 1100.0;
        let z = n.sqrt() * out.estimate / out.sigma;
        let reference = statrs::distribution::Normal::new(0.0, 1.0).unwrap();
        use statrs::distribution::ContinuousCDF;
        let p_ref = 2.0 * reference.cdf(-z.abs());
        assert!((out.p_value - p_ref).abs() < 1e-12);

        let half_ref = (out.sigma / n.sqrt()) * reference.inverse_cdf(0.975);
        assert!((out.interval.0 - (out.estimate - half_ref)).abs() < 1e-8);
        assert!((out.interval.1 - (out.estimate + half_ref)).abs() < 1e-8);
        assert!(out.p_value < 0.05);
    }

    #[test]
    fn quadrupled_counts_halve_the_interval() {
        let base = CellCounts::four(10, 90, 500, 500);
        let scaled = CellCounts::four(40, 360, 2000, 2000);
        let a = wald_test(&base, &sp(), 0.05, Sidedness::TwoSided).unwrap();
        let b = wald_test(&scaled, &sp(), 0.05, Sidedness::TwoSided).unwrap();
        assert_eq!(a.estimate, b.estimate);
        let half_a = (a.interval.1 - a.interval.0) / 2.0;
        let half_b = (b.interval.1 - b.interval.0) / 2.0;
        assert!((half_b - half_a / 2.0).abs() < 1e-12);
    }

    #[test]
    fn smaller_alpha_widens_interval() {
        let counts = CellCounts::four(10, 90, 500, 500);
        let strict = wald_test(&counts, &sp(), 0.01, Sidedness::TwoSided).unwrap();
        let loose = wald_test(&counts, &sp(), 0.05, Sidedness::TwoSided).unwrap();
        assert!(strict.interval.1 - strict.interval.0 > loose.interval.1 - loose.interval.0);
    }

    #[test]
    fn one_sided_less_has_open_lower_end() {
        let counts = CellCounts::four(10, 90, 500, 500);
        let out = wald_test(&counts, &sp(), 0.05, Sidedness::Less).unwrap();
        assert_eq!(out.interval.0, f64::NEG_INFINITY);
        assert!(out.interval.1.is_finite());
        // Deep in the lower tail: Φ(z) is small.
        assert!(out.p_value < 0.05);
        let greater = wald_test(&counts, &sp(), 0.05, Sidedness::Greater).unwrap();
        assert_eq!(greater.interval.1, f64::INFINITY);
        assert!((out.p_value + greater.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sigma_zero_on_null_fails_to_reject() {
        // Every row predicted positive: both rates are 1, SP = 0, σ = 0.
        let counts = CellCounts::four(50, 0, 500, 0);
        let out = wald_test(&counts, &sp(), 0.05, Sidedness::TwoSided).unwrap();
        assert_eq!(out.sigma, 0.0);
        assert_eq!(out.p_value, 1.0);
        assert_eq!(out.interval, (0.0, 0.0));
    }

    #[test]
    fn sigma_zero_off_null_is_degenerate() {
        // Group all-positive, complement all-negative: SP = 1 with σ = 0.
        let counts = CellCounts::four(50, 0, 0, 500);
        assert_eq!(
            wald_test(&counts, &sp(), 0.05, Sidedness::TwoSided).unwrap_err(),
            WaldError::DegenerateSigma
        );
    }

    #[test]
    fn bad_alpha_is_rejected() {
        let counts = CellCounts::four(10, 90, 500, 500);
        assert_eq!(
            wald_test(&counts, &sp(), 0.0, Sidedness::TwoSided).unwrap_err(),
            WaldError::AlphaOutOfRange(0.0)
        );
    }
}
