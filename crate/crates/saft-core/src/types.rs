//! Domain types shared by every statistical module: subgroup descriptions,
//! contingency counts in the canonical cell order, simplex points, test
//! results, and the audit configuration.

use alloc::string::String;
use alloc::vec::Vec;

/// Number of contingency cells for the built-in group-versus-reference
/// metrics: (positive ∩ S, negative ∩ S, positive ∩ S̄, negative ∩ S̄).
///
/// Every formula in `metrics`, `wald`, and `bayes` assumes this order; it is
/// fixed here once so the gradient components, the covariance matrix, and the
/// posterior weights can never drift apart.
pub const CANONICAL_CELLS: usize = 4;

/// A conjunction of protected-attribute = value conditions identifying an
/// intersectional subgroup S. The complement S̄ is implicit.
///
/// Conditions are stored sorted by attribute name, so two specs built from
/// the same condition set in any order compare equal and hash equally.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubgroupSpec {
    conditions: Vec<(String, String)>,
}

impl SubgroupSpec {
    /// Builds a spec from (attribute, value) pairs, normalizing the order.
    ///
    /// Errors with the offending name if an attribute appears twice, and
    /// rejects an empty condition list (a subgroup needs depth ≥ 1).
    pub fn new<I, A, V>(conditions: I) -> Result<Self, SpecError>
    where
        I: IntoIterator<Item = (A, V)>,
        A: Into<String>,
        V: Into<String>,
    {
        let mut conditions: Vec<(String, String)> = conditions
            .into_iter()
            .map(|(a, v)| (a.into(), v.into()))
            .collect();
        if conditions.is_empty() {
            return Err(SpecError::Empty);
        }
        conditions.sort();
        for pair in conditions.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(SpecError::DuplicateAttribute(pair[0].0.clone()));
            }
        }
        Ok(Self { conditions })
    }

    /// Conditions in canonical (attribute-sorted) order.
    pub fn conditions(&self) -> &[(String, String)] {
        &self.conditions
    }

    /// Number of conditions in the conjunction.
    pub fn depth(&self) -> usize {
        self.conditions.len()
    }

    /// Canonical text form, e.g. `age=A&sex=F`. Stable across runs; used for
    /// display and for deriving per-subgroup random seeds.
    pub fn label(&self) -> String {
        let mut out = String::new();
        for (i, (attr, value)) in self.conditions.iter().enumerate() {
            if i > 0 {
                out.push('&');
            }
            out.push_str(attr);
            out.push('=');
            out.push_str(value);
        }
        out
    }
}

/// Errors constructing a [`SubgroupSpec`].
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpecError {
    #[error("subgroup spec has no conditions")]
    Empty,
    #[error("attribute `{0}` appears more than once in one subgroup spec")]
    DuplicateAttribute(String),
}

/// Contingency counts over q disjoint cells in the canonical order, plus the
/// recorded total n.
///
/// Counts are unsigned by construction, so a negative cell is unrepresentable;
/// validation therefore only has to check the arity and the recorded total.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellCounts {
    counts: Vec<u64>,
    n: u64,
}

impl CellCounts {
    /// Builds counts whose total is computed from the cells.
    pub fn from_cells(counts: Vec<u64>) -> Result<Self, CountsError> {
        let n = counts.iter().sum();
        Self::new(counts, n)
    }

    /// Builds counts with an explicitly recorded total, which must match.
    pub fn new(counts: Vec<u64>, n: u64) -> Result<Self, CountsError> {
        if counts.len() < 2 {
            return Err(CountsError::TooFewCells(counts.len()));
        }
        let sum: u64 = counts.iter().sum();
        if sum != n {
            return Err(CountsError::SumMismatch { stated: n, actual: sum });
        }
        Ok(Self { counts, n })
    }

    /// Convenience constructor for the four canonical cells.
    pub fn four(n1_s: u64, n0_s: u64, n1_sbar: u64, n0_sbar: u64) -> Self {
        let counts = alloc::vec![n1_s, n0_s, n1_sbar, n0_sbar];
        let n = n1_s + n0_s + n1_sbar + n0_sbar;
        Self { counts, n }
    }

    pub fn cells(&self) -> &[u64] {
        &self.counts
    }

    pub fn arity(&self) -> usize {
        self.counts.len()
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Smallest cell count; Algorithm dispatch keys off this.
    pub fn min_cell(&self) -> u64 {
        self.counts.iter().copied().min().unwrap_or(0)
    }

    /// Group size n_S = positives + negatives inside S (first two canonical
    /// cells). Only meaningful for arity-4 counts.
    pub fn group_size(&self) -> u64 {
        self.counts[0] + self.counts[1]
    }
}

/// Errors from [`validate_counts`] / count construction.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CountsError {
    #[error("contingency table needs at least 2 cells, got {0}")]
    TooFewCells(usize),
    #[error("stated total {stated} does not match cell sum {actual}")]
    SumMismatch { stated: u64, actual: u64 },
    #[error("cannot form probabilities from an empty sample (n = 0)")]
    EmptySample,
}

/// Checks the [`CellCounts`] invariants and returns the counts unchanged.
///
/// Exists as a standalone entry point for counts assembled outside the
/// constructors (e.g. deserialized input).
pub fn validate_counts(counts: CellCounts) -> Result<CellCounts, CountsError> {
    CellCounts::new(counts.counts.clone(), counts.n)?;
    Ok(counts)
}

/// A point on the length-q probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector {
    p: Vec<f64>,
}

/// Tolerance on Σpᵢ = 1 for simplex membership.
pub const SIMPLEX_TOL: f64 = 1e-12;

impl ProbVector {
    /// Validates entries in [0,1] summing to 1 within [`SIMPLEX_TOL`].
    pub fn new(p: Vec<f64>) -> Result<Self, ProbVectorError> {
        if p.len() < 2 {
            return Err(ProbVectorError::TooFewEntries(p.len()));
        }
        for (i, &x) in p.iter().enumerate() {
            if !(0.0..=1.0).contains(&x) || !x.is_finite() {
                return Err(ProbVectorError::OutOfRange { index: i, value: x });
            }
        }
        let sum: f64 = p.iter().sum();
        if libm::fabs(sum - 1.0) > SIMPLEX_TOL {
            return Err(ProbVectorError::NotNormalized(sum));
        }
        Ok(Self { p })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    pub fn arity(&self) -> usize {
        self.p.len()
    }
}

/// Errors constructing a [`ProbVector`].
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProbVectorError {
    #[error("probability vector needs at least 2 entries, got {0}")]
    TooFewEntries(usize),
    #[error("entry {index} = {value} is outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("entries sum to {0}, not 1")]
    NotNormalized(f64),
}

/// Plug-in probability estimate pᵢ = countsᵢ / n.
///
/// Errors with `EmptySample` when n = 0 (the degenerate no-data table).
pub fn plug_in_probs(counts: &CellCounts) -> Result<ProbVector, CountsError> {
    if counts.n() == 0 {
        return Err(CountsError::EmptySample);
    }
    let n = counts.n() as f64;
    let p: Vec<f64> = counts.cells().iter().map(|&c| c as f64 / n).collect();
    // Counts divided by their own sum always land on the simplex; any failure
    // here is an internal arithmetic bug, not a data problem.
    Ok(ProbVector::new(p).expect("plug-in probabilities form a simplex point"))
}

/// Dirichlet concentration parameters: a length-q vector of positive weights.
///
/// Serves as both the prior and (after adding counts) the posterior of the
/// cell-probability vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletParams {
    weights: Vec<f64>,
}

impl DirichletParams {
    /// Validates that every weight is positive and finite.
    pub fn new(weights: Vec<f64>) -> Result<Self, DirichletError> {
        if weights.len() < 2 {
            return Err(DirichletError::TooFewWeights(weights.len()));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !(w > 0.0) || !w.is_finite() {
                return Err(DirichletError::NonPositiveWeight { index: i, value: w });
            }
        }
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn arity(&self) -> usize {
        self.weights.len()
    }
}

/// Errors constructing [`DirichletParams`].
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DirichletError {
    #[error("Dirichlet needs at least 2 weights, got {0}")]
    TooFewWeights(usize),
    #[error("Dirichlet weight {index} = {value} must be positive and finite")]
    NonPositiveWeight { index: usize, value: f64 },
}

/// Test outcome decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Reject,
    FailToReject,
    /// The group had no observations; no test was possible.
    NoData,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Reject => "reject",
            Decision::FailToReject => "fail_to_reject",
            Decision::NoData => "no_data",
        }
    }
}

/// Which test produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Wald,
    Bayes,
    NoData,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Wald => "wald",
            Regime::Bayes => "bayes",
            Regime::NoData => "no_data",
        }
    }
}

/// Sign classification of a rejection: which side of the null the interval
/// landed on. `None` whenever the test does not reject.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Interval entirely on the side where S fares worse than the reference
    /// (below 0 for rate differences, below 1 for rate ratios).
    Disadvantaged,
    /// Interval entirely on the favorable side.
    Advantaged,
    None,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Disadvantaged => "disadvantaged",
            Direction::Advantaged => "advantaged",
            Direction::None => "none",
        }
    }
}

/// Sidedness of a test. Two-sided is the default; the one-sided variants ask
/// specifically about the disadvantaged (`Less`) or advantaged (`Greater`)
/// side of the null.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sidedness {
    #[default]
    TwoSided,
    Less,
    Greater,
}

impl Sidedness {
    pub fn as_str(self) -> &'static str {
        match self {
            Sidedness::TwoSided => "two_sided",
            Sidedness::Less => "less",
            Sidedness::Greater => "greater",
        }
    }
}

/// Result of one subgroup test, from either regime.
///
/// Fields that a regime cannot produce are `None`: the Wald branch has a
/// p-value and σ but no posterior tail probability; the Bayesian branch has a
/// tail probability but no p-value; a no-data result has neither, and no
/// estimate or interval at all.
#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub estimate: Option<f64>,
    /// Confidence (Wald) or credible (Bayes) interval. One-sided Wald
    /// intervals carry ±∞ on the open side.
    pub interval: Option<(f64, f64)>,
    pub p_value: Option<f64>,
    pub tail_probability: Option<f64>,
    pub decision: Decision,
    pub regime: Regime,
    pub direction: Direction,
    /// Asymptotic σ(S) from the delta method (Wald regime only).
    pub sigma: Option<f64>,
}

impl TestResult {
    /// The canonical no-data result for an empty group.
    pub fn no_data() -> Self {
        Self {
            estimate: None,
            interval: None,
            p_value: None,
            tail_probability: None,
            decision: Decision::NoData,
            regime: Regime::NoData,
            direction: Direction::None,
            sigma: None,
        }
    }
}

/// Which fairness metric an audit tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MetricId {
    /// Statistical parity: difference of positive-prediction rates.
    #[default]
    Sp,
    /// Equal opportunity: statistical parity restricted to label-1 rows.
    Eo,
    /// Disparate impact: ratio of positive-prediction rates.
    Di,
}

impl MetricId {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricId::Sp => "sp",
            MetricId::Eo => "eo",
            MetricId::Di => "di",
        }
    }
}

/// Reference group the metric compares S against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reference {
    /// The complement S̄ (default).
    #[default]
    Complement,
    /// The whole population including S.
    WholePopulation,
}

impl Reference {
    pub fn as_str(self) -> &'static str {
        match self {
            Reference::Complement => "complement",
            Reference::WholePopulation => "whole_population",
        }
    }
}

/// Configuration for one audit run.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditConfig {
    /// Significance level α.
    pub alpha: f64,
    /// Minimum per-cell support ñ: every cell must reach it for the
    /// large-sample Wald branch to be trusted.
    pub min_support: u64,
    /// Monte-Carlo draw count K for the Bayesian branch.
    pub mc_draws: usize,
    /// Dirichlet prior concentrations in canonical cell order.
    pub prior_weights: Vec<f64>,
    /// Base seed; per-subgroup seeds are derived from it and the subgroup
    /// identity, never from row or execution order.
    pub seed: u64,
    pub metric: MetricId,
    /// Maximum number of conditions per enumerated subgroup.
    pub max_depth: usize,
    pub reference: Reference,
    pub sidedness: Sidedness,
    /// Attach Benjamini-Hochberg adjusted p-values across subgroups.
    pub bh_adjust: bool,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            min_support: 30,
            mc_draws: 10_000,
            prior_weights: alloc::vec![1.0; CANONICAL_CELLS],
            seed: 0,
            metric: MetricId::Sp,
            max_depth: 2,
            reference: Reference::Complement,
            sidedness: Sidedness::TwoSided,
            bh_adjust: false,
        }
    }
}

impl AuditConfig {
    /// Checks the configuration invariants.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(ConfigError::AlphaOutOfRange(self.alpha));
        }
        if self.min_support < 1 {
            return Err(ConfigError::MinSupportZero);
        }
        if self.mc_draws < 100 {
            return Err(ConfigError::TooFewDraws(self.mc_draws));
        }
        if self.prior_weights.len() != CANONICAL_CELLS
            || self.prior_weights.iter().any(|&w| !(w > 0.0) || !w.is_finite())
        {
            return Err(ConfigError::BadPriorWeights);
        }
        if self.max_depth < 1 {
            return Err(ConfigError::DepthZero);
        }
        Ok(())
    }
}

/// Errors from [`AuditConfig::validate`].
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("alpha = {0} must lie strictly between 0 and 1")]
    AlphaOutOfRange(f64),
    #[error("min_support must be at least 1")]
    MinSupportZero,
    #[error("mc_draws = {0} is below the minimum of 100")]
    TooFewDraws(usize),
    #[error("prior weights must be {CANONICAL_CELLS} positive finite values")]
    BadPriorWeights,
    #[error("max_depth must be at least 1")]
    DepthZero,
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn spec_order_is_canonical() {
        let a = SubgroupSpec::new([("sex", "F"), ("age", "25-45")]).unwrap();
        let b = SubgroupSpec::new([("age", "25-45"), ("sex", "F")]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.label(), "age=25-45&sex=F");
        assert_eq!(a.depth(), 2);
    }

    #[test]
    fn spec_rejects_duplicate_attribute() {
        let err = SubgroupSpec::new([("sex", "F"), ("sex", "M")]).unwrap_err();
        assert_eq!(err, SpecError::DuplicateAttribute("sex".into()));
    }

    #[test]
    fn spec_rejects_empty_condition_list() {
        let no_conditions: [(&str, &str); 0] = [];
        assert_eq!(SubgroupSpec::new(no_conditions).unwrap_err(), SpecError::Empty);
    }

    #[test]
    fn validate_counts_accepts_matching_total() {
        let counts = CellCounts::new(vec![1, 2, 3, 4], 10).unwrap();
        assert_eq!(validate_counts(counts.clone()).unwrap(), counts);
    }

    #[test]
    fn validate_counts_accepts_all_zero() {
        // Degenerate but structurally valid; flagged no_data downstream.
        let counts = CellCounts::new(vec![0, 0, 0, 0], 0).unwrap();
        assert_eq!(counts.group_size(), 0);
    }

    #[test]
    fn validate_counts_rejects_sum_mismatch() {
        let err = CellCounts::new(vec![1, 2, 3, 4], 9).unwrap_err();
        assert_eq!(err, CountsError::SumMismatch { stated: 9, actual: 10 });
    }

    #[test]
    fn counts_reject_single_cell() {
        assert_eq!(
            CellCounts::new(vec![5], 5).unwrap_err(),
            CountsError::TooFewCells(1)
        );
    }

    #[test]
    fn plug_in_uniform() {
        let counts = CellCounts::four(25, 25, 25, 25);
        let p = plug_in_probs(&counts).unwrap();
        assert_eq!(p.as_slice(), &[0.25, 0.25, 0.25, 0.25]);
    }

    #[test]
    fn plug_in_division() {
        let counts = CellCounts::new(vec![10, 90, 500, 400], 1000).unwrap();
        let p = plug_in_probs(&counts).unwrap();
        assert_eq!(p.as_slice(), &[0.01, 0.09, 0.5, 0.4]);
    }

    #[test]
    fn plug_in_empty_sample() {
        let counts = CellCounts::four(0, 0, 0, 0);
        assert_eq!(plug_in_probs(&counts).unwrap_err(), CountsError::EmptySample);
    }

    #[test]
    fn prob_vector_rejects_bad_sum() {
        let err = ProbVector::new(vec![0.5, 0.4]).unwrap_err();
        assert_eq!(err, ProbVectorError::NotNormalized(0.9));
    }

    #[test]
    fn prob_vector_rejects_negative_entry() {
        let err = ProbVector::new(vec![-0.1, 0.6, 0.5]).unwrap_err();
        assert!(matches!(err, ProbVectorError::OutOfRange { index: 0, .. }));
    }

    #[test]
    fn default_config_is_valid() {
        AuditConfig::default().validate().unwrap();
    }

    #[test]
    fn config_rejects_bad_alpha() {
        let config = AuditConfig { alpha: 1.0, ..AuditConfig::default() };
        assert_eq!(config.validate().unwrap_err(), ConfigError::AlphaOutOfRange(1.0));
    }

    #[test]
    fn config_rejects_small_draw_count() {
        let config = AuditConfig { mc_draws: 50, ..AuditConfig::default() };
        assert_eq!(config.validate().unwrap_err(), ConfigError::TooFewDraws(50));
    }

    #[test]
    fn config_rejects_nonpositive_prior() {
        let config = AuditConfig {
            prior_weights: vec![1.0, 0.0, 1.0, 1.0],
            ..AuditConfig::default()
        };
        assert_eq!(config.validate().unwrap_err(), ConfigError::BadPriorWeights);
    }
}
