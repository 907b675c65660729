//! Resolution-limit analysis: how extreme must a small group's outcomes be
//! before the size-adaptive test can reject at level α?
//!
//! For each group size n_S and global negative rate, the group faces a large
//! reference complement of N_ref individuals at exactly that rate. Scanning
//! the group's outcome mix from balanced toward extreme finds the minimal
//! count k* whose test rejects in the requested direction; below-boundary
//! sizes where even the fully extreme group cannot reject are reported as
//! having no power at all.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::engine::{saft_test, EngineError};
use crate::seeding::derive_indexed_seed;
use crate::types::{
    AuditConfig, CellCounts, Decision, Direction, MetricId, Reference, Regime, Sidedness,
};

/// Which disparity side the search targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchDirection {
    /// Group's positive rate below the reference: k counts negatives in S.
    Disadvantaged,
    /// Group's positive rate above the reference: k counts positives in S.
    Advantaged,
}

impl SearchDirection {
    pub fn as_str(self) -> &'static str {
        match self {
            SearchDirection::Disadvantaged => "disadvantaged",
            SearchDirection::Advantaged => "advantaged",
        }
    }
}

/// Parameters of the resolution analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolutionConfig {
    /// Reference complement size N_ref; the group is negligible next to it.
    pub n_ref: u64,
    /// Per-cell support threshold ñ for Wald dispatch.
    pub min_support: u64,
    /// Monte-Carlo draws per Bayesian test; high, because interval endpoints
    /// at the decision edge are what the scan thresholds on.
    pub mc_draws: usize,
    /// Dirichlet prior for the Bayesian branch.
    pub prior_weights: Vec<f64>,
    /// Base seed; every (rate, n_S, direction, k) cell derives its own fixed
    /// stream from it, so scan order cannot influence any outcome.
    pub seed: u64,
    /// Upper bound for the no-power boundary search.
    pub boundary_search_cap: u64,
}

impl Default for ResolutionConfig {
    fn default() -> Self {
        Self {
            n_ref: 100_000,
            min_support: 30,
            mc_draws: 100_000,
            prior_weights: alloc::vec![1.0; 4],
            seed: 0,
            boundary_search_cap: 5_000,
        }
    }
}

/// One cell of the resolution table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolutionPoint {
    pub n_s: u64,
    pub global_negative_rate: f64,
    pub direction: SearchDirection,
    /// k*/n_S: minimal fraction of negatives (disadvantaged) or positives
    /// (advantaged) in S that rejects. `None` when no mix can reject.
    pub min_fraction: Option<f64>,
    /// Regime of the deciding test (at k*, or at the extreme mix when no
    /// mix rejects).
    pub regime: Regime,
}

/// Errors from resolution analysis.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ResolutionError {
    #[error("global negative rate {0} must lie strictly between 0 and 1")]
    InvalidRate(f64),
    #[error("group size must be at least 1")]
    GroupSizeZero,
    #[error("group size range ({lo}, {hi}) is not ascending from at least 1")]
    BadRange { lo: u64, hi: u64 },
    #[error("no group size up to {cap} has rejection power at this rate")]
    BoundaryNotFound { cap: u64 },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

fn audit_config(alpha: f64, config: &ResolutionConfig) -> AuditConfig {
    AuditConfig {
        alpha,
        min_support: config.min_support,
        mc_draws: config.mc_draws,
        prior_weights: config.prior_weights.clone(),
        seed: config.seed,
        metric: MetricId::Sp,
        max_depth: 1,
        reference: Reference::Complement,
        sidedness: Sidedness::TwoSided,
        bh_adjust: false,
    }
}

fn reference_cells(rate: f64, n_ref: u64) -> (u64, u64) {
    let negatives = libm::round(rate * n_ref as f64) as u64;
    (n_ref - negatives, negatives)
}

/// Cell counts for a group with `k` extreme-side outcomes out of `n_s`.
fn scan_counts(n_s: u64, k: u64, direction: SearchDirection, sbar: (u64, u64)) -> CellCounts {
    match direction {
        SearchDirection::Disadvantaged => CellCounts::four(n_s - k, k, sbar.0, sbar.1),
        SearchDirection::Advantaged => CellCounts::four(k, n_s - k, sbar.0, sbar.1),
    }
}

fn scan_seed(base: u64, rate: f64, n_s: u64, direction: SearchDirection, k: u64) -> u64 {
    let label: String =
        format!("resolution:{:016x}:{}:{}", rate.to_bits(), n_s, direction.as_str());
    derive_indexed_seed(base, &label, k)
}

fn rejects_toward(
    counts: &CellCounts,
    config: &AuditConfig,
    seed: u64,
    direction: SearchDirection,
) -> Result<(bool, Regime), EngineError> {
    let result = saft_test(counts, config, seed)?;
    let wanted = match direction {
        SearchDirection::Disadvantaged => Direction::Disadvantaged,
        SearchDirection::Advantaged => Direction::Advantaged,
    };
    Ok((result.decision == Decision::Reject && result.direction == wanted, result.regime))
}

fn validate_rate(rate: f64) -> Result<(), ResolutionError> {
    if !(rate > 0.0 && rate < 1.0) || !rate.is_finite() {
        return Err(ResolutionError::InvalidRate(rate));
    }
    Ok(())
}

fn min_reject_search(
    n_s: u64,
    rate: f64,
    alpha: f64,
    direction: SearchDirection,
    config: &ResolutionConfig,
) -> Result<(Option<u64>, Regime), ResolutionError> {
    validate_rate(rate)?;
    if n_s == 0 {
        return Err(ResolutionError::GroupSizeZero);
    }
    let sbar = reference_cells(rate, config.n_ref);
    let audit = audit_config(alpha, config);
    let test_k = |k: u64| -> Result<(bool, Regime), EngineError> {
        let counts = scan_counts(n_s, k, direction, sbar);
        let seed = scan_seed(config.seed, rate, n_s, direction, k);
        rejects_toward(&counts, &audit, seed, direction)
    };
    // Probe the fully extreme mix first: if even it cannot reject, no mix
    // can (the same dominance convention `no_power_boundary` relies on),
    // so the whole scan is skipped in the no-power zone.
    let (extreme_hit, extreme_regime) = test_k(n_s)?;
    if !extreme_hit {
        return Ok((None, extreme_regime));
    }
    for k in 0..n_s {
        let (hit, regime) = test_k(k)?;
        if hit {
            return Ok((Some(k), regime));
        }
    }
    Ok((Some(n_s), extreme_regime))
}

/// Minimal count k* of extreme-side outcomes in S that rejects at level α in
/// the requested direction, or `None` when even the fully extreme group
/// cannot (no power at this size).
///
/// k counts negatives for the disadvantaged direction and positives for the
/// advantaged one, so k*/n_S is directly the minimum fraction in both cases.
pub fn min_reject_count(
    n_s: u64,
    rate: f64,
    alpha: f64,
    direction: SearchDirection,
    config: &ResolutionConfig,
) -> Result<Option<u64>, ResolutionError> {
    min_reject_search(n_s, rate, alpha, direction, config).map(|(k, _)| k)
}

/// Smallest group size with any rejection power at this rate: the first n_S
/// whose fully extreme outcome mix (k = n_S) rejects.
///
/// Only the extreme mix is tested per size — a mix less extreme than k = n_S
/// cannot reject when the extreme one does not.
pub fn no_power_boundary(
    rate: f64,
    alpha: f64,
    direction: SearchDirection,
    config: &ResolutionConfig,
) -> Result<u64, ResolutionError> {
    validate_rate(rate)?;
    let sbar = reference_cells(rate, config.n_ref);
    let audit = audit_config(alpha, config);
    for n_s in 1..=config.boundary_search_cap {
        let counts = scan_counts(n_s, n_s, direction, sbar);
        let seed = scan_seed(config.seed, rate, n_s, direction, n_s);
        let (hit, _) = rejects_toward(&counts, &audit, seed, direction)?;
        if hit {
            return Ok(n_s);
        }
    }
    Err(ResolutionError::BoundaryNotFound { cap: config.boundary_search_cap })
}

/// One grid cell of the resolution curve. Self-contained and seeded by the
/// point's own identity, so callers may evaluate points in any order (or in
/// parallel) and still reproduce the sequential table exactly.
pub fn resolution_point(
    rate: f64,
    n_s: u64,
    alpha: f64,
    direction: SearchDirection,
    config: &ResolutionConfig,
) -> Result<ResolutionPoint, ResolutionError> {
    let (k_star, regime) = min_reject_search(n_s, rate, alpha, direction, config)?;
    Ok(ResolutionPoint {
        n_s,
        global_negative_rate: rate,
        direction,
        min_fraction: k_star.map(|k| k as f64 / n_s as f64),
        regime,
    })
}

/// Grid evaluation over rates × group sizes, one [`ResolutionPoint`] per
/// cell, rates in input order and sizes ascending.
pub fn resolution_curve(
    rates: &[f64],
    n_range: (u64, u64),
    alpha: f64,
    direction: SearchDirection,
    config: &ResolutionConfig,
) -> Result<Vec<ResolutionPoint>, ResolutionError> {
    let (lo, hi) = n_range;
    if lo < 1 || hi < lo {
        return Err(ResolutionError::BadRange { lo, hi });
    }
    let mut points = Vec::new();
    for &rate in rates {
        for n_s in lo..=hi {
            points.push(resolution_point(rate, n_s, alpha, direction, config)?);
        }
    }
    Ok(points)
}
