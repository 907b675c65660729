//! Statistical self-validation experiments: type-I error, interval coverage,
//! Bayes↔Wald interval convergence, and CLT quantile checks.
//!
//! Every gate is a 3σ Monte-Carlo band computed from the trial count, so the
//! experiments stay honest at any scale: at the documented reference scale
//! (10⁴ trials) the bands reduce to the familiar [0.04, 0.06]-style windows,
//! and smaller smoke runs get proportionally wider ones instead of flaky
//! failures.

use alloc::vec::Vec;

use crate::bayes::{bayes_test, BayesError};
use crate::engine::{saft_test, EngineError};
use crate::metrics::{builtin, sp_value, MetricError};
use crate::normal::{std_normal_pdf, std_normal_quantile};
use crate::sampling::uniform_open;
use crate::seeding::{derive_indexed_seed, rng_from_seed, Rng};
use crate::types::{
    AuditConfig, CellCounts, Decision, DirichletParams, MetricId, ProbVector, Reference,
    Sidedness,
};
use crate::wald::{wald_test, WaldError};

/// Errors from validation experiments.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ValidationError {
    /// The supplied distribution does not satisfy the null hypothesis, so a
    /// type-I experiment on it would measure power, not size.
    #[error("metric value {0} at the supplied distribution is not the null value")]
    NotNull(f64),
    #[error("experiment needs at least {minimum} trials, got {got}")]
    TooFewTrials { minimum: u32, got: u32 },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Wald(#[from] WaldError),
    #[error(transparent)]
    Bayes(#[from] BayesError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// One multinomial sample of size n: per-individual categorical inversion.
fn sample_cell_counts(p: &ProbVector, n: u64, rng: &mut Rng) -> CellCounts {
    let probs = p.as_slice();
    let mut cells = alloc::vec![0u64; probs.len()];
    for _ in 0..n {
        let u = uniform_open(rng);
        let mut acc = 0.0;
        let mut chosen = probs.len() - 1;
        for (i, &pi) in probs.iter().enumerate() {
            acc += pi;
            if u < acc {
                chosen = i;
                break;
            }
        }
        cells[chosen] += 1;
    }
    CellCounts::from_cells(cells).expect("per-individual tallies sum to n")
}

/// Largest-remainder apportionment of n individuals to cells ∝ proportions.
///
/// Deterministic: remainder ties break toward the lower cell index.
pub fn apportion(proportions: &ProbVector, n: u64) -> Vec<u64> {
    let p = proportions.as_slice();
    let mut cells: Vec<u64> = Vec::with_capacity(p.len());
    let mut remainders: Vec<f64> = Vec::with_capacity(p.len());
    let mut assigned = 0u64;
    for &pi in p {
        let exact = pi * n as f64;
        let base = libm::floor(exact);
        cells.push(base as u64);
        remainders.push(exact - base);
        assigned += base as u64;
    }
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| remainders[b].total_cmp(&remainders[a]).then(a.cmp(&b)));
    let mut leftover = n - assigned;
    for &idx in &order {
        if leftover == 0 {
            break;
        }
        cells[idx] += 1;
        leftover -= 1;
    }
    cells
}

fn default_config(alpha: f64) -> AuditConfig {
    AuditConfig { alpha, ..AuditConfig::default() }
}

/// 3σ binomial band around a target rate, floored at a relative half-width.
///
/// The floor keeps the band from collapsing below the resolution the
/// dispatcher's mixed Wald/Bayes behavior can actually hold.
fn binomial_band(target: f64, trials: u32, floor: f64) -> (f64, f64) {
    let se = libm::sqrt(target * (1.0 - target) / trials as f64);
    let half = (3.0 * se).max(floor);
    (target - half, target + half)
}

/// Result of the type-I error experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Type1Outcome {
    /// Fraction of null-data trials the test rejected.
    pub rejection_rate: f64,
    /// Binomial standard error of that fraction.
    pub std_error: f64,
    pub trials: u32,
    /// Acceptance band: α ± max(3·binomial σ, 0.2α).
    pub band: (f64, f64),
    pub pass: bool,
}

/// Measures the realized false-positive rate on data generated under H₀.
///
/// `true_p` must satisfy the null (statistical parity zero) exactly; each
/// trial draws a multinomial sample of size n from it and runs the
/// size-adaptive test at level α.
pub fn experiment_type1(
    true_p: &ProbVector,
    n: u64,
    trials: u32,
    alpha: f64,
    seed: u64,
) -> Result<Type1Outcome, ValidationError> {
    if trials < 10 {
        return Err(ValidationError::TooFewTrials { minimum: 10, got: trials });
    }
    let metric = builtin(MetricId::Sp, Reference::Complement);
    let value = sp_value(true_p.as_slice())?;
    if libm::fabs(value - 0.0) > 1e-12 {
        return Err(ValidationError::NotNull(value));
    }
    let _ = &metric;
    let config = default_config(alpha);
    let mut rejects = 0u32;
    for trial in 0..trials {
        let mut rng = rng_from_seed(derive_indexed_seed(seed, "type1:sample", trial as u64));
        let counts = sample_cell_counts(true_p, n, &mut rng);
        let test_seed = derive_indexed_seed(seed, "type1:test", trial as u64);
        let result = saft_test(&counts, &config, test_seed)?;
        if result.decision == Decision::Reject {
            rejects += 1;
        }
    }
    let rate = rejects as f64 / trials as f64;
    let band = binomial_band(alpha, trials, 0.2 * alpha);
    Ok(Type1Outcome {
        rejection_rate: rate,
        std_error: libm::sqrt(rate * (1.0 - rate) / trials as f64),
        trials,
        band,
        pass: rate >= band.0 && rate <= band.1,
    })
}

/// Result of the interval-coverage experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageOutcome {
    /// Fraction of intervals containing the true metric value.
    pub coverage: f64,
    /// Trials that produced an interval.
    pub trials_used: u32,
    /// Trials whose sample had an empty group (no interval to check).
    pub no_interval_trials: u32,
    /// Band around 1−α: ±max(3·binomial σ, 0.01) at n ≥ 100, ±0.03 floor
    /// below (finite-sample Bayesian calibration is approximate).
    pub band: (f64, f64),
    /// Whether the band gates `pass`; small-n runs report without gating.
    pub gated: bool,
    pub pass: bool,
}

/// Measures how often the reported interval covers the true metric value.
pub fn experiment_coverage(
    true_p: &ProbVector,
    n: u64,
    trials: u32,
    alpha: f64,
    seed: u64,
) -> Result<CoverageOutcome, ValidationError> {
    if trials < 10 {
        return Err(ValidationError::TooFewTrials { minimum: 10, got: trials });
    }
    let truth = sp_value(true_p.as_slice())?;
    let config = default_config(alpha);
    let mut covered = 0u32;
    let mut used = 0u32;
    let mut skipped = 0u32;
    for trial in 0..trials {
        let mut rng = rng_from_seed(derive_indexed_seed(seed, "coverage:sample", trial as u64));
        let counts = sample_cell_counts(true_p, n, &mut rng);
        let test_seed = derive_indexed_seed(seed, "coverage:test", trial as u64);
        match saft_test(&counts, &config, test_seed)?.interval {
            Some((lo, hi)) => {
                used += 1;
                if lo <= truth && truth <= hi {
                    covered += 1;
                }
            }
            None => skipped += 1,
        }
    }
    let coverage = covered as f64 / used.max(1) as f64;
    let gated = n >= 100;
    let floor = if gated { 0.01 } else { 0.03 };
    let band = binomial_band(1.0 - alpha, used.max(1), floor);
    Ok(CoverageOutcome {
        coverage,
        trials_used: used,
        no_interval_trials: skipped,
        band,
        gated,
        pass: !gated || (coverage >= band.0 && coverage <= band.1),
    })
}

/// One row of the convergence table: both intervals at the same counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n: u64,
    pub counts: CellCounts,
    pub wald_width: f64,
    pub bayes_width: f64,
    /// bayes_width / wald_width; approaches 1 from above as n grows.
    pub ratio: f64,
}

/// Result of the Bayes↔Wald convergence experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceOutcome {
    pub rows: Vec<ConvergenceRow>,
    pub pass: bool,
}

/// Tolerance for "non-increasing within Monte-Carlo noise" across rows.
const CONVERGENCE_SLACK: f64 = 0.02;

/// Compares credible-interval width to Wald CI width at matched counts.
///
/// Counts for each n are apportioned deterministically from `proportions`
/// (largest remainder), so the comparison isolates interval construction
/// from sampling noise. Gates: ratio > 1 at n ≤ 10, within [0.95, 1.05] at
/// n ≥ 10⁴, non-increasing along the row sequence within a small slack.
pub fn experiment_convergence(
    proportions: &ProbVector,
    n_list: &[u64],
    k: usize,
    alpha: f64,
    seed: u64,
) -> Result<ConvergenceOutcome, ValidationError> {
    let metric = builtin(MetricId::Sp, Reference::Complement);
    let prior = DirichletParams::new(alloc::vec![1.0; proportions.arity()])
        .expect("flat prior weights are positive");
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let counts = CellCounts::from_cells(apportion(proportions, n))
            .expect("apportionment sums to n");
        let wald = wald_test(&counts, &metric, alpha, Sidedness::TwoSided)?;
        let bayes_seed = derive_indexed_seed(seed, "convergence", n);
        let bayes = bayes_test(
            &counts,
            &metric,
            &prior,
            k,
            alpha,
            bayes_seed,
            Sidedness::TwoSided,
        )?;
        let wald_width = wald.interval.1 - wald.interval.0;
        let bayes_width = bayes.summary.interval.1 - bayes.summary.interval.0;
        rows.push(ConvergenceRow {
            n,
            counts,
            wald_width,
            bayes_width,
            ratio: bayes_width / wald_width,
        });
    }
    let mut pass = true;
    for row in &rows {
        if row.n <= 10 && row.ratio <= 1.0 {
            pass = false;
        }
        if row.n >= 10_000 && !(0.95..=1.05).contains(&row.ratio) {
            pass = false;
        }
    }
    for pair in rows.windows(2) {
        if pair[1].ratio > pair[0].ratio + CONVERGENCE_SLACK {
            pass = false;
        }
    }
    Ok(ConvergenceOutcome { rows, pass })
}

/// One standardized quantile vs. its normal reference.
#[derive(Debug, Clone, PartialEq)]
pub struct CltQuantile {
    pub level: f64,
    pub empirical: f64,
    pub normal: f64,
    /// 3σ Monte-Carlo half-band for this quantile at this trial count.
    pub band: f64,
    /// Whether this quantile gates `pass` (extremes and median, n ≥ 1000).
    pub gated: bool,
}

/// Result of the CLT quantile experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct CltOutcome {
    pub quantiles: Vec<CltQuantile>,
    /// Trials skipped because the sample degenerated (an empty marginal).
    pub degenerate_trials: u32,
    pub pass: bool,
}

const CLT_LEVELS: [f64; 5] = [0.025, 0.25, 0.5, 0.75, 0.975];

/// Checks that √n(SP_n − SP)/σ is standard normal at the quantile level.
///
/// Standardization uses the true σ from the delta method at `true_p`, so the
/// experiment tests the CLT itself, not the plug-in variance estimate.
pub fn experiment_clt(
    true_p: &ProbVector,
    n: u64,
    trials: u32,
    seed: u64,
) -> Result<CltOutcome, ValidationError> {
    if trials < 100 {
        return Err(ValidationError::TooFewTrials { minimum: 100, got: trials });
    }
    let truth = sp_value(true_p.as_slice())?;
    let sigma = crate::wald::asymptotic_sigma(
        true_p,
        &crate::metrics::sp_gradient(true_p.as_slice())?,
    )?;
    let sqrt_n = libm::sqrt(n as f64);
    let mut draws: Vec<f64> = Vec::with_capacity(trials as usize);
    let mut degenerate = 0u32;
    for trial in 0..trials {
        let mut rng = rng_from_seed(derive_indexed_seed(seed, "clt:sample", trial as u64));
        let counts = sample_cell_counts(true_p, n, &mut rng);
        let p_hat = match crate::types::plug_in_probs(&counts) {
            Ok(p) => p,
            Err(_) => {
                degenerate += 1;
                continue;
            }
        };
        match sp_value(p_hat.as_slice()) {
            Ok(est) => draws.push(sqrt_n * (est - truth) / sigma),
            Err(_) => degenerate += 1,
        }
    }
    draws.sort_unstable_by(f64::total_cmp);
    let used = draws.len() as f64;
    let mut quantiles = Vec::with_capacity(CLT_LEVELS.len());
    let mut pass = true;
    for &level in &CLT_LEVELS {
        let rank = (libm::ceil(level * used - 1e-9) as usize).clamp(1, draws.len());
        let empirical = draws[rank - 1];
        let normal = std_normal_quantile(level).expect("levels are interior");
        // Quantile MC standard error: √(u(1−u)/m) / φ(Φ⁻¹(u)).
        let se = libm::sqrt(level * (1.0 - level) / used) / std_normal_pdf(normal);
        let gated = n >= 1000 && (level == 0.5 || level == 0.025 || level == 0.975);
        if gated && libm::fabs(empirical - normal) > 3.0 * se {
            pass = false;
        }
        quantiles.push(CltQuantile { level, empirical, normal, band: 3.0 * se, gated });
    }
    Ok(CltOutcome { quantiles, degenerate_trials: degenerate, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn null_p() -> ProbVector {
        ProbVector::new(vec![0.05, 0.05, 0.45, 0.45]).unwrap()
    }

    #[test]
    fn apportion_matches_hand_example() {
        let p = ProbVector::new(vec![0.01, 0.09, 0.45, 0.45]).unwrap();
        assert_eq!(apportion(&p, 10), [0, 1, 5, 4]);
        assert_eq!(apportion(&p, 10_000), [100, 900, 4500, 4500]);
    }

    #[test]
    fn apportion_preserves_total_and_breaks_ties_low() {
        let uniform = ProbVector::new(vec![0.25; 4]).unwrap();
        assert_eq!(apportion(&uniform, 7), [2, 2, 2, 1]);
        for n in [0u64, 1, 13, 997] {
            let total: u64 = apportion(&uniform, n).iter().sum();
            assert_eq!(total, n);
        }
    }

    #[test]
    fn sampler_hits_expected_cell_frequencies() {
        let p = ProbVector::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let mut rng = rng_from_seed(1);
        let counts = sample_cell_counts(&p, 200_000, &mut rng);
        for (cell, want) in counts.cells().iter().zip(p.as_slice()) {
            let freq = *cell as f64 / 200_000.0;
            assert!((freq - want).abs() < 0.005, "freq {freq} vs {want}");
        }
    }

    #[test]
    fn type1_requires_a_null_distribution() {
        let skew = ProbVector::new(vec![0.1, 0.3, 0.3, 0.3]).unwrap();
        assert!(matches!(
            experiment_type1(&skew, 100, 100, 0.05, 0).unwrap_err(),
            ValidationError::NotNull(_)
        ));
    }

    #[test]
    fn type1_rate_tracks_alpha_at_smoke_scale() {
        let out = experiment_type1(&null_p(), 2_000, 400, 0.05, 7).unwrap();
        assert!(out.pass, "rate {} outside {:?}", out.rejection_rate, out.band);
        assert!(out.band.0 < 0.05 && out.band.1 > 0.05);
    }

    #[test]
    fn coverage_tracks_confidence_at_smoke_scale() {
        let out = experiment_coverage(&null_p(), 2_000, 400, 0.05, 11).unwrap();
        assert!(out.gated);
        assert!(out.pass, "coverage {} outside {:?}", out.coverage, out.band);
        assert_eq!(out.trials_used, 400);
    }

    #[test]
    fn small_n_coverage_reports_without_gating() {
        let out = experiment_coverage(&null_p(), 50, 200, 0.05, 13).unwrap();
        assert!(!out.gated);
        assert!(out.pass, "ungated runs always pass");
        assert!(out.coverage > 0.8, "coverage {} collapsed entirely", out.coverage);
    }

    #[test]
    fn convergence_ratio_shrinks_toward_one() {
        let p = ProbVector::new(vec![0.01, 0.09, 0.45, 0.45]).unwrap();
        let out =
            experiment_convergence(&p, &[10, 1_000, 10_000], 10_000, 0.05, 3).unwrap();
        assert!(out.pass);
        assert!(out.rows[0].ratio > 1.0, "small-n ratio {}", out.rows[0].ratio);
        assert!(
            (out.rows[2].ratio - 1.0).abs() < 0.05,
            "large-n ratio {}",
            out.rows[2].ratio
        );
    }

    #[test]
    fn clt_quantiles_match_normal_at_smoke_scale() {
        let out = experiment_clt(&null_p(), 2_000, 2_000, 5).unwrap();
        assert!(out.pass);
        assert_eq!(out.degenerate_trials, 0);
        assert_eq!(out.quantiles.len(), 5);
        let median = &out.quantiles[2];
        assert!(median.gated);
        assert!(median.empirical.abs() < median.band);
    }

    #[test]
    fn experiments_are_deterministic() {
        let a = experiment_type1(&null_p(), 500, 100, 0.05, 21).unwrap();
        let b = experiment_type1(&null_p(), 500, 100, 0.05, 21).unwrap();
        assert_eq!(a, b);
        let c = experiment_type1(&null_p(), 500, 100, 0.05, 22).unwrap();
        assert_ne!(a.rejection_rate, c.rejection_rate);
    }

    #[test]
    fn trial_floors_are_enforced() {
        assert!(matches!(
            experiment_type1(&null_p(), 100, 5, 0.05, 0).unwrap_err(),
            ValidationError::TooFewTrials { minimum: 10, got: 5 }
        ));
        assert!(matches!(
            experiment_clt(&null_p(), 100, 50, 0).unwrap_err(),
            ValidationError::TooFewTrials { minimum: 100, got: 50 }
        ));
    }
}
