//! Finite-sample Bayesian test via the conjugate Dirichlet posterior.
//!
//! Multinomial cell counts with a Dirichlet prior give a Dirichlet posterior
//! by conjugacy, so the posterior of any metric φ can be sampled exactly:
//! draw cell probabilities, push them through φ, and summarize the draws with
//! empirical quantiles. The decision rule rejects when the null value falls
//! outside the (1−α) credible interval.

use alloc::vec::Vec;

use crate::metrics::Metric;
use crate::sampling::sample_dirichlet;
use crate::seeding::rng_from_seed;
use crate::types::{CellCounts, Decision, Direction, DirichletError, DirichletParams, Sidedness};

/// Errors from the Bayesian machinery.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BayesError {
    #[error("prior has {prior} weights but the table has {counts} cells")]
    ArityMismatch { prior: usize, counts: usize },
    #[error("draw count {0} is below the minimum of 100")]
    TooFewDraws(usize),
    /// More than 1% of posterior draws landed outside the metric's domain.
    /// With a strictly positive prior this has probability zero for the
    /// built-in metrics, so it signals a misconfigured custom metric.
    #[error("{failures} of {attempted} posterior draws fell outside the metric domain")]
    TooManyGuardFailures { failures: usize, attempted: usize },
    #[error("cannot take a quantile of an empty draw set")]
    EmptyDraws,
    #[error("quantile level {0} is outside (0, 1]")]
    QuantileLevel(f64),
    #[error("significance level {0} is outside (0, 1)")]
    AlphaOutOfRange(f64),
    #[error(transparent)]
    Dirichlet(#[from] DirichletError),
}

/// Posterior concentration: weightsᵢ = priorᵢ + countsᵢ.
pub fn posterior_params(
    counts: &CellCounts,
    prior: &DirichletParams,
) -> Result<DirichletParams, BayesError> {
    if prior.arity() != counts.arity() {
        return Err(BayesError::ArityMismatch { prior: prior.arity(), counts: counts.arity() });
    }
    let weights: Vec<f64> = prior
        .weights()
        .iter()
        .zip(counts.cells())
        .map(|(&w, &c)| w + c as f64)
        .collect();
    Ok(DirichletParams::new(weights)?)
}

/// Monte-Carlo draws of φ under a Dirichlet posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricDraws {
    /// Accepted draw values, in generation order.
    pub values: Vec<f64>,
    /// Attempted draws whose simplex point failed the metric's domain guard.
    pub guard_failures: usize,
}

/// Attempts `k` posterior draws of φ, excluding (and counting) any that fall
/// outside the metric's domain. Deterministic for a fixed seed.
pub fn posterior_metric_draws(
    params: &DirichletParams,
    metric: &dyn Metric,
    k: usize,
    seed: u64,
) -> Result<MetricDraws, BayesError> {
    if k < 100 {
        return Err(BayesError::TooFewDraws(k));
    }
    let mut rng = rng_from_seed(seed);
    let mut values = Vec::with_capacity(k);
    let mut guard_failures = 0usize;
    let allowed = k / 100;
    for _ in 0..k {
        let p = sample_dirichlet(params, &mut rng);
        if !metric.domain_ok(p.as_slice()) {
            guard_failures += 1;
            if guard_failures > allowed {
                return Err(BayesError::TooManyGuardFailures {
                    failures: guard_failures,
                    attempted: k,
                });
            }
            continue;
        }
        // domain_ok vouches for the point, so value() cannot fail here.
        values.push(metric.value(p.as_slice()).expect("guarded draw is in-domain"));
    }
    Ok(MetricDraws { values, guard_failures })
}

/// Empirical quantile per the inf definition: the smallest draw t with
/// (1/K)·#{draws ≤ t} ≥ u, i.e. the ⌈u·K⌉-th order statistic.
///
/// Accepts u ∈ (0, 1]; u = 1 returns the maximum draw.
pub fn empirical_quantile(draws: &[f64], u: f64) -> Result<f64, BayesError> {
    if draws.is_empty() {
        return Err(BayesError::EmptyDraws);
    }
    if !(u > 0.0 && u <= 1.0) {
        return Err(BayesError::QuantileLevel(u));
    }
    let mut sorted = draws.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    Ok(sorted_quantile(&sorted, u))
}

/// ⌈u·K⌉-th order statistic of an already-sorted slice (1-based, clamped).
///
/// The 1e-9 back-off keeps levels like u = 0.4 — which binary floating point
/// stores as slightly more than 2/5 — from spilling into the next rank.
fn sorted_quantile(sorted: &[f64], u: f64) -> f64 {
    let k = sorted.len() as f64;
    let rank = libm::ceil(u * k - 1e-9) as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Posterior summary reported for a Bayesian test.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    /// Draws that entered the summary (attempted minus guard failures).
    pub draws_used: usize,
    /// Monte-Carlo posterior mean of φ.
    pub mean: f64,
    /// Credible interval: order statistics of the draw set.
    pub interval: (f64, f64),
    /// 2·min(P̂[φ < null], P̂[φ > null]), capped at 1.
    pub tail_probability: f64,
    /// Seed the draw stream was initialized from.
    pub seed: u64,
}

/// A Bayesian test outcome: summary plus the interval-based decision.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesOutcome {
    pub summary: PosteriorSummary,
    pub decision: Decision,
    pub direction: Direction,
    pub guard_failures: usize,
}

/// Runs the Bayesian test: posterior draws, credible interval, and the
/// reject-iff-null-outside-interval decision.
///
/// Two-sided intervals are [Q̂(α/2), Q̂(1−α/2)]; one-sided intervals pin one
/// end at the extreme draw and spend all of α on the tested side.
pub fn bayes_test(
    counts: &CellCounts,
    metric: &dyn Metric,
    prior: &DirichletParams,
    k: usize,
    alpha: f64,
    seed: u64,
    sidedness: Sidedness,
) -> Result<BayesOutcome, BayesError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(BayesError::AlphaOutOfRange(alpha));
    }
    let params = posterior_params(counts, prior)?;
    let draws = posterior_metric_draws(&params, metric, k, seed)?;
    if draws.values.is_empty() {
        return Err(BayesError::EmptyDraws);
    }
    let mut sorted = draws.values.clone();
    sorted.sort_unstable_by(f64::total_cmp);
    let used = sorted.len();
    let mean = sorted.iter().sum::<f64>() / used as f64;

    let interval = match sidedness {
        Sidedness::TwoSided => (
            sorted_quantile(&sorted, alpha / 2.0),
            sorted_quantile(&sorted, 1.0 - alpha / 2.0),
        ),
        Sidedness::Less => (sorted[0], sorted_quantile(&sorted, 1.0 - alpha)),
        Sidedness::Greater => (sorted_quantile(&sorted, alpha), sorted[used - 1]),
    };

    let null = metric.null_value();
    let below = sorted.iter().filter(|&&d| d < null).count() as f64 / used as f64;
    let above = sorted.iter().filter(|&&d| d > null).count() as f64 / used as f64;
    let tail_probability = (2.0 * below.min(above)).min(1.0);

    let reject = null < interval.0 || null > interval.1;
    let (decision, direction) = if reject {
        let side = if interval.1 < null { Direction::Disadvantaged } else { Direction::Advantaged };
        (Decision::Reject, side)
    } else {
        (Decision::FailToReject, Direction::None)
    };

    Ok(BayesOutcome {
        summary: PosteriorSummary {
            draws_used: used,
            mean,
            interval,
            tail_probability,
            seed,
        },
        decision,
        direction,
        guard_failures: draws.guard_failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{builtin, Metric, MetricError};
    use crate::types::{MetricId, Reference};
    use alloc::vec;

    fn flat_prior() -> DirichletParams {
        DirichletParams::new(vec![1.0; 4]).unwrap()
    }

    fn sp() -> crate::metrics::BuiltinMetric {
        builtin(MetricId::Sp, Reference::Complement)
    }

    #[test]
    fn posterior_adds_counts_to_prior() {
        let counts = CellCounts::four(3, 7, 40, 60);
        let post = posterior_params(&counts, &flat_prior()).unwrap();
        assert_eq!(post.weights(), &[4.0, 8.0, 41.0, 61.0]);
    }

    #[test]
    fn posterior_with_no_data_is_the_prior() {
        let counts = CellCounts::four(0, 0, 0, 0);
        let post = posterior_params(&counts, &flat_prior()).unwrap();
        assert_eq!(post.weights(), &[1.0; 4]);
    }

    #[test]
    fn posterior_respects_asymmetric_prior() {
        let prior = DirichletParams::new(vec![2.0, 1.0, 1.0, 1.0]).unwrap();
        let counts = CellCounts::four(1, 1, 1, 1);
        let post = posterior_params(&counts, &prior).unwrap();
        assert_eq!(post.weights(), &[3.0, 2.0, 2.0, 2.0]);
    }

    #[test]
    fn posterior_rejects_arity_mismatch() {
        let prior = DirichletParams::new(vec![1.0, 1.0]).unwrap();
        let counts = CellCounts::four(1, 1, 1, 1);
        assert_eq!(
            posterior_params(&counts, &prior).unwrap_err(),
            BayesError::ArityMismatch { prior: 2, counts: 4 }
        );
    }

    #[test]
    fn empirical_quantile_inf_definition() {
        let draws = [-0.3, -0.1, 0.0, 0.2, 0.4];
        assert_eq!(empirical_quantile(&draws, 0.4).unwrap(), -0.1);
        assert_eq!(empirical_quantile(&draws, 1e-12).unwrap(), -0.3);
        assert_eq!(empirical_quantile(&draws, 1.0).unwrap(), 0.4);
        assert_eq!(empirical_quantile(&draws, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn empirical_quantile_handles_unsorted_input() {
        let draws = [0.4, -0.3, 0.2, -0.1, 0.0];
        assert_eq!(empirical_quantile(&draws, 0.4).unwrap(), -0.1);
    }

    #[test]
    fn empirical_quantile_rejects_bad_inputs() {
        assert_eq!(empirical_quantile(&[], 0.5).unwrap_err(), BayesError::EmptyDraws);
        assert_eq!(
            empirical_quantile(&[1.0], 0.0).unwrap_err(),
            BayesError::QuantileLevel(0.0)
        );
        assert_eq!(
            empirical_quantile(&[1.0], 1.5).unwrap_err(),
            BayesError::QuantileLevel(1.5)
        );
    }

    #[test]
    fn symmetric_counts_fail_to_reject() {
        let counts = CellCounts::four(10, 10, 10, 10);
        let out =
            bayes_test(&counts, &sp(), &flat_prior(), 10_000, 0.05, 7, Sidedness::TwoSided)
                .unwrap();
        assert_eq!(out.decision, Decision::FailToReject);
        assert_eq!(out.direction, Direction::None);
        assert!(out.summary.mean.abs() < 0.02, "mean {}", out.summary.mean);
        assert!(out.summary.interval.0 < 0.0 && out.summary.interval.1 > 0.0);
    }

    #[test]
    fn sparse_disparity_rejects_disadvantaged() {
        // Group of 9, all predicted negative, against a 55%-positive majority.
        let counts = CellCounts::four(0, 9, 55, 45);
        let out =
            bayes_test(&counts, &sp(), &flat_prior(), 10_000, 0.05, 11, Sidedness::TwoSided)
                .unwrap();
        assert_eq!(out.decision, Decision::Reject);
        assert_eq!(out.direction, Direction::Disadvantaged);
        assert!(out.summary.interval.1 < 0.0);
        assert!(out.summary.tail_probability < 0.05);
    }

    #[test]
    fn posterior_mean_matches_beta_difference() {
        // Exact posterior of the rate difference for counts (3,7,40,60) with a
        // flat prior: Beta(4,8) − Beta(41,61), mean 4/12 − 41/102.
        let counts = CellCounts::four(3, 7, 40, 60);
        let k = 20_000;
        let out = bayes_test(&counts, &sp(), &flat_prior(), k, 0.05, 13, Sidedness::TwoSided)
            .unwrap();
        let exact = 4.0 / 12.0 - 41.0 / 102.0;
        // 3 MC standard errors with the posterior std bounded by 0.15.
        let band = 3.0 * 0.15 / (k as f64).sqrt();
        assert!(
            (out.summary.mean - exact).abs() < band,
            "mean {} vs exact {exact}",
            out.summary.mean
        );
    }

    #[test]
    fn same_seed_is_bit_identical_different_seed_is_not() {
        let counts = CellCounts::four(3, 7, 40, 60);
        let run = |seed| {
            bayes_test(&counts, &sp(), &flat_prior(), 1_000, 0.05, seed, Sidedness::TwoSided)
                .unwrap()
        };
        assert_eq!(run(42), run(42));
        assert_ne!(run(42).summary.mean, run(43).summary.mean);
    }

    #[test]
    fn draw_vectors_replay_bit_identical() {
        let params = DirichletParams::new(vec![4.0, 8.0, 41.0, 61.0]).unwrap();
        let a = posterior_metric_draws(&params, &sp(), 500, 3).unwrap();
        let b = posterior_metric_draws(&params, &sp(), 500, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.values.len(), 500);
        assert_eq!(a.guard_failures, 0);
    }

    #[test]
    fn intervals_nest_with_alpha() {
        let counts = CellCounts::four(3, 7, 40, 60);
        let tight = bayes_test(&counts, &sp(), &flat_prior(), 10_000, 0.10, 5, Sidedness::TwoSided)
            .unwrap();
        let wide = bayes_test(&counts, &sp(), &flat_prior(), 10_000, 0.01, 5, Sidedness::TwoSided)
            .unwrap();
        assert!(wide.summary.interval.0 <= tight.summary.interval.0);
        assert!(wide.summary.interval.1 >= tight.summary.interval.1);
    }

    #[test]
    fn one_sided_intervals_pin_the_extreme_draw() {
        let counts = CellCounts::four(3, 7, 40, 60);
        let less = bayes_test(&counts, &sp(), &flat_prior(), 5_000, 0.05, 5, Sidedness::Less)
            .unwrap();
        let greater =
            bayes_test(&counts, &sp(), &flat_prior(), 5_000, 0.05, 5, Sidedness::Greater)
                .unwrap();
        // Same seed, same draw set: the pinned ends are the sample extremes.
        assert!(less.summary.interval.0 <= greater.summary.interval.0);
        assert!(greater.summary.interval.1 >= less.summary.interval.1);
        assert!(less.summary.interval.1 < greater.summary.interval.1);
    }

    struct AlwaysOutOfDomain;

    impl Metric for AlwaysOutOfDomain {
        fn name(&self) -> &str {
            "always-out"
        }
        fn null_value(&self) -> f64 {
            0.0
        }
        fn domain_ok(&self, _p: &[f64]) -> bool {
            false
        }
        fn value(&self, _p: &[f64]) -> Result<f64, MetricError> {
            Err(MetricError::DomainGuard)
        }
    }

    #[test]
    fn pervasive_guard_failures_error_out() {
        let params = DirichletParams::new(vec![1.0; 4]).unwrap();
        let err = posterior_metric_draws(&params, &AlwaysOutOfDomain, 1_000, 1).unwrap_err();
        assert!(matches!(err, BayesError::TooManyGuardFailures { attempted: 1_000, .. }));
    }

    #[test]
    fn tiny_draw_count_is_rejected() {
        let params = DirichletParams::new(vec![1.0; 4]).unwrap();
        assert_eq!(
            posterior_metric_draws(&params, &sp(), 99, 1).unwrap_err(),
            BayesError::TooFewDraws(99)
        );
    }
}
