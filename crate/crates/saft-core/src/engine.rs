//! Size-adaptive audit orchestration.
//!
//! Enumerates intersectional subgroups, tabulates each against the dataset,
//! dispatches to the large-sample Wald test when every contingency cell
//! reaches the support threshold ñ and to the Bayesian Monte-Carlo test
//! otherwise, and attaches the fixed-threshold baselines for comparison.
//!
//! Per-subgroup randomness is seeded from (base seed, canonical subgroup
//! label), never from row or execution order, so reports are bit-identical
//! across runs, row shuffles, and parallel schedules.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::bayes::{bayes_test, BayesError};
use crate::dataset::{Dataset, Membership};
use crate::metrics::{builtin, eo_conditioning, Conditioning, Metric, MetricError};
use crate::seeding::derive_seed;
use crate::types::{
    AuditConfig, CellCounts, ConfigError, Decision, Direction, DirichletParams, Regime,
    Sidedness, SpecError, SubgroupSpec, TestResult, CANONICAL_CELLS,
};
use crate::wald::{wald_test, WaldError};

/// Errors from audit orchestration.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("dataset has no rows")]
    NoRows,
    #[error("dataset has no column `{0}`")]
    MissingColumn(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Wald(#[from] WaldError),
    #[error(transparent)]
    Bayes(#[from] BayesError),
}

/// Enumerates every conjunction of 1..=`max_depth` attribute=value conditions
/// (each attribute at most once), in deterministic order: depth first, then
/// lexicographic by the sorted (attribute, value) sequence.
///
/// `max_depth` deeper than the attribute count is clamped — there are no
/// conjunctions beyond one condition per attribute.
pub fn enumerate_subgroups(
    attributes: &[(String, Vec<String>)],
    max_depth: usize,
) -> Result<Vec<SubgroupSpec>, SpecError> {
    let mut sorted: Vec<(&String, Vec<&String>)> = attributes
        .iter()
        .map(|(name, values)| {
            let mut vs: Vec<&String> = values.iter().collect();
            vs.sort();
            (name, vs)
        })
        .collect();
    sorted.sort_by(|a, b| a.0.cmp(b.0));
    for pair in sorted.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(SpecError::DuplicateAttribute(pair[0].0.clone()));
        }
    }

    let n = sorted.len();
    let depth_cap = max_depth.min(n);
    let mut specs = Vec::new();
    let mut combo: Vec<usize> = Vec::new();
    for depth in 1..=depth_cap {
        combo.clear();
        combo.extend(0..depth);
        loop {
            // Odometer over the value choices of the current attribute combo.
            let mut value_idx = alloc::vec![0usize; depth];
            'values: loop {
                let conditions: Vec<(&str, &str)> = combo
                    .iter()
                    .zip(&value_idx)
                    .map(|(&a, &v)| (sorted[a].0.as_str(), sorted[a].1[v].as_str()))
                    .collect();
                specs.push(
                    SubgroupSpec::new(conditions).expect("combination attributes are distinct"),
                );
                for slot in (0..depth).rev() {
                    value_idx[slot] += 1;
                    if value_idx[slot] < sorted[combo[slot]].1.len() {
                        continue 'values;
                    }
                    value_idx[slot] = 0;
                    if slot == 0 {
                        break 'values;
                    }
                }
            }
            // Next lexicographic attribute combination of this size.
            let mut slot = depth;
            loop {
                if slot == 0 {
                    break;
                }
                slot -= 1;
                combo[slot] += 1;
                if combo[slot] <= n - (depth - slot) {
                    for later in slot + 1..depth {
                        combo[later] = combo[later - 1] + 1;
                    }
                    break;
                }
            }
            if combo[0] > n - depth {
                break;
            }
        }
    }
    Ok(specs)
}

/// Tallies a dataset into canonical cell counts for one subgroup.
///
/// Rows matching every condition land in the S cells, rows that definitively
/// mismatch land in S̄, and rows missing a conditioned value are excluded
/// from both. `PositivesOnly` conditioning restricts to label-1 rows first.
pub fn tabulate(
    dataset: &Dataset,
    spec: &SubgroupSpec,
    conditioning: Conditioning,
) -> Result<CellCounts, EngineError> {
    if dataset.n_rows() == 0 {
        return Err(EngineError::NoRows);
    }
    let conditioned;
    let rows = match conditioning {
        Conditioning::All => dataset,
        Conditioning::PositivesOnly => {
            conditioned = eo_conditioning(dataset)?;
            &conditioned
        }
    };

    // Interned conditions: a value absent from the domain matches no row, so
    // such a subgroup tallies (0, 0, n₁, n₀).
    let mut conditions: Vec<(usize, Option<u32>)> = Vec::with_capacity(spec.depth());
    for (attr, value) in spec.conditions() {
        let attr_idx = rows
            .attribute_index(attr)
            .ok_or_else(|| EngineError::MissingColumn(attr.clone()))?;
        conditions.push((attr_idx, rows.value_index(attr_idx, value)));
    }

    let mut cells = [0u64; CANONICAL_CELLS];
    'rows: for row in 0..rows.n_rows() {
        let mut in_group = true;
        for &(attr, want) in &conditions {
            match (rows.interned_value(row, attr), want) {
                (None, _) => continue 'rows,
                (Some(actual), Some(want)) if actual == want => {}
                _ => in_group = false,
            }
        }
        let positive = rows.prediction(row);
        let cell = match (in_group, positive) {
            (true, true) => 0,
            (true, false) => 1,
            (false, true) => 2,
            (false, false) => 3,
        };
        cells[cell] += 1;
    }
    Ok(CellCounts::four(cells[0], cells[1], cells[2], cells[3]))
}

/// Classifies one row of an audit without retallying (used by tests).
pub fn row_membership(dataset: &Dataset, row: usize, spec: &SubgroupSpec) -> Membership {
    let mut conditions = Vec::with_capacity(spec.depth());
    for (attr, value) in spec.conditions() {
        let Some(attr_idx) = dataset.attribute_index(attr) else {
            return Membership::InComplement;
        };
        match dataset.value_index(attr_idx, value) {
            Some(v) => conditions.push((attr_idx, v)),
            None => return Membership::InComplement,
        }
    }
    dataset.membership(row, &conditions)
}

/// The size-adaptive test: Wald when min cell ≥ ñ, Bayesian otherwise,
/// no-data when the group is empty.
///
/// `subgroup_seed` feeds only the Bayesian branch; derive it from the
/// subgroup identity (see [`audit`]) so results are order-independent.
pub fn saft_test(
    counts: &CellCounts,
    config: &AuditConfig,
    subgroup_seed: u64,
) -> Result<TestResult, EngineError> {
    config.validate()?;
    if counts.arity() != CANONICAL_CELLS {
        return Err(EngineError::Metric(MetricError::ArityMismatch {
            expected: CANONICAL_CELLS,
            got: counts.arity(),
        }));
    }
    if counts.group_size() == 0 {
        return Ok(TestResult::no_data());
    }
    let metric = builtin(config.metric, config.reference);

    if counts.min_cell() >= config.min_support {
        let out = wald_test(counts, &metric, config.alpha, config.sidedness)?;
        let reject = out.p_value < config.alpha;
        let direction = if !reject {
            Direction::None
        } else {
            match config.sidedness {
                Sidedness::TwoSided => {
                    if out.estimate < metric.null_value() {
                        Direction::Disadvantaged
                    } else {
                        Direction::Advantaged
                    }
                }
                Sidedness::Less => Direction::Disadvantaged,
                Sidedness::Greater => Direction::Advantaged,
            }
        };
        return Ok(TestResult {
            estimate: Some(out.estimate),
            interval: Some(out.interval),
            p_value: Some(out.p_value),
            tail_probability: None,
            decision: if reject { Decision::Reject } else { Decision::FailToReject },
            regime: Regime::Wald,
            direction,
            sigma: Some(out.sigma),
        });
    }

    let prior = DirichletParams::new(config.prior_weights.clone())
        .expect("config validation guarantees prior weights");
    let out = bayes_test(
        counts,
        &metric,
        &prior,
        config.mc_draws,
        config.alpha,
        subgroup_seed,
        config.sidedness,
    )?;
    Ok(TestResult {
        estimate: Some(out.summary.mean),
        interval: Some(out.summary.interval),
        p_value: None,
        tail_probability: Some(out.summary.tail_probability),
        decision: out.decision,
        regime: Regime::Bayes,
        direction: out.direction,
        sigma: None,
    })
}

/// Fixed thresholds for the baseline parity checks.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineThresholds {
    /// θ_δ: flag when |estimate − null| exceeds it.
    pub theta_delta: f64,
    /// θ_γ: flag when the size-weighted score exceeds it. No conventional
    /// default exists, so it is optional; the score is always reported.
    pub theta_gamma: Option<f64>,
}

impl Default for BaselineThresholds {
    fn default() -> Self {
        Self { theta_delta: 0.1, theta_gamma: None }
    }
}

/// Baseline verdicts for one subgroup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineFlags {
    /// |estimate − null| > θ_δ.
    pub delta_flag: bool,
    /// |estimate − null| · P̂(x ∈ S): the size-weighted disparity.
    pub gamma_score: f64,
    /// gamma_score > θ_γ, when a θ_γ is configured.
    pub gamma_flag: Option<bool>,
}

/// Computes the fixed-threshold baselines from a point estimate.
///
/// `deviation` is |estimate − null| so that ratio metrics (null 1) are scored
/// on the same footing as difference metrics (null 0).
pub fn baseline_flags(
    estimate: f64,
    null_value: f64,
    group_fraction: f64,
    thresholds: &BaselineThresholds,
) -> BaselineFlags {
    let deviation = libm::fabs(estimate - null_value);
    let gamma_score = deviation * group_fraction;
    BaselineFlags {
        delta_flag: deviation > thresholds.theta_delta,
        gamma_score,
        gamma_flag: thresholds.theta_gamma.map(|t| gamma_score > t),
    }
}

/// Why a subgroup produced no test result.
#[derive(Debug, Clone, PartialEq)]
pub enum SkipReason {
    /// No rows matched the subgroup (or all matching rows were excluded).
    NoInstances,
    /// The selected test failed; the message carries the cause.
    TestFailure(String),
}

/// A subgroup that was enumerated but not tested.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedSubgroup {
    pub spec: SubgroupSpec,
    pub reason: SkipReason,
}

/// One audited subgroup: counts, test result, and baseline comparisons.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgroupResult {
    pub spec: SubgroupSpec,
    pub counts: CellCounts,
    /// n_S: rows inside the subgroup.
    pub group_size: u64,
    /// P̂(x ∈ S) among the rows that entered this tabulation.
    pub group_fraction: f64,
    pub test: TestResult,
    pub baselines: BaselineFlags,
    /// Benjamini-Hochberg adjusted p-value (or tail probability), when
    /// adjustment is enabled. Decisions are not re-thresholded.
    pub adjusted_p: Option<f64>,
}

/// Shape summary of the audited dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetDigest {
    /// Rows the audit ran over (after any metric conditioning).
    pub n_rows: usize,
    /// (attribute, cardinality) pairs in dataset column order.
    pub attributes: Vec<(String, usize)>,
    /// Missing protected-value cells among those rows.
    pub missing_cells: u64,
}

/// Complete audit output: every enumerated subgroup appears exactly once,
/// either as a result or as a skip.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub config: AuditConfig,
    pub digest: DatasetDigest,
    pub results: Vec<SubgroupResult>,
    pub skips: Vec<SkippedSubgroup>,
}

/// Runs the full audit: enumerate → tabulate → size-adaptive test →
/// baselines, with optional Benjamini-Hochberg adjustment across subgroups.
///
/// Per-subgroup failures become skips rather than aborting the run.
pub fn audit(
    dataset: &Dataset,
    config: &AuditConfig,
    thresholds: &BaselineThresholds,
) -> Result<AuditReport, EngineError> {
    audit_with_runner(dataset, config, thresholds, |cfg, jobs| {
        jobs.iter().map(|job| saft_test(&job.counts, cfg, job.seed)).collect()
    })
}

/// One prepared unit of per-subgroup work; jobs are independent of each
/// other, so a runner may execute them in any order or in parallel as long
/// as it returns one outcome per job in job order.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgroupJob {
    pub spec: SubgroupSpec,
    pub counts: CellCounts,
    /// Derived from subgroup identity, never from position or schedule.
    pub seed: u64,
}

/// [`audit`] with the test-execution phase delegated to `runner`, which must
/// map each job to its test outcome, preserving order. The report is
/// identical for any faithful runner; this is the hook a std caller uses to
/// run subgroup tests on a thread pool.
pub fn audit_with_runner<F>(
    dataset: &Dataset,
    config: &AuditConfig,
    thresholds: &BaselineThresholds,
    runner: F,
) -> Result<AuditReport, EngineError>
where
    F: FnOnce(&AuditConfig, &[SubgroupJob]) -> Vec<Result<TestResult, EngineError>>,
{
    config.validate()?;
    if dataset.n_rows() == 0 {
        return Err(EngineError::NoRows);
    }
    let metric = builtin(config.metric, config.reference);
    let conditioned;
    let rows = match metric.conditioning() {
        Conditioning::All => dataset,
        Conditioning::PositivesOnly => {
            conditioned = eo_conditioning(dataset)?;
            &conditioned
        }
    };

    let attributes: Vec<(String, Vec<String>)> = rows
        .attribute_names()
        .iter()
        .enumerate()
        .map(|(i, name)| (name.clone(), rows.domain(i).to_vec()))
        .collect();
    let specs = enumerate_subgroups(&attributes, config.max_depth)?;

    let mut jobs = Vec::new();
    let mut skips = Vec::new();
    for spec in specs {
        // Conditioning already happened; tabulate over the prepared rows.
        let counts = match tabulate(rows, &spec, Conditioning::All) {
            Ok(c) => c,
            Err(e) => {
                skips.push(SkippedSubgroup {
                    spec,
                    reason: SkipReason::TestFailure(format!("{e}")),
                });
                continue;
            }
        };
        if counts.group_size() == 0 {
            skips.push(SkippedSubgroup { spec, reason: SkipReason::NoInstances });
            continue;
        }
        let seed = derive_seed(config.seed, &spec.label());
        jobs.push(SubgroupJob { spec, counts, seed });
    }

    let outcomes = runner(config, &jobs);
    assert_eq!(outcomes.len(), jobs.len(), "runner must return one outcome per job");

    let mut results = Vec::new();
    for (job, outcome) in jobs.into_iter().zip(outcomes) {
        let test = match outcome {
            Ok(t) => t,
            Err(e) => {
                skips.push(SkippedSubgroup {
                    spec: job.spec,
                    reason: SkipReason::TestFailure(format!("{e}")),
                });
                continue;
            }
        };
        let group_size = job.counts.group_size();
        let group_fraction = group_size as f64 / job.counts.n() as f64;
        let estimate = test.estimate.expect("tested subgroups have an estimate");
        let baselines = baseline_flags(estimate, metric.null_value(), group_fraction, thresholds);
        results.push(SubgroupResult {
            spec: job.spec,
            counts: job.counts,
            group_size,
            group_fraction,
            test,
            baselines,
            adjusted_p: None,
        });
    }

    if config.bh_adjust {
        apply_bh(&mut results);
    }

    Ok(AuditReport {
        config: config.clone(),
        digest: DatasetDigest {
            n_rows: rows.n_rows(),
            attributes: rows
                .attribute_names()
                .iter()
                .enumerate()
                .map(|(i, name)| (name.clone(), rows.domain(i).len()))
                .collect(),
            missing_cells: rows.missing_cells(),
        },
        results,
        skips,
    })
}

/// Benjamini-Hochberg step-up adjustment over each result's p-value (Wald)
/// or posterior tail probability (Bayes). Fills `adjusted_p`; the original
/// decisions stand.
fn apply_bh(results: &mut [SubgroupResult]) {
    let m = results.len();
    if m == 0 {
        return;
    }
    let mut order: Vec<usize> = (0..m).collect();
    let raw = |r: &SubgroupResult| -> f64 {
        r.test.p_value.or(r.test.tail_probability).expect("tested results carry a p or tail")
    };
    order.sort_by(|&a, &b| raw(&results[a]).total_cmp(&raw(&results[b])));
    let mut running = 1.0f64;
    for (rank, &idx) in order.iter().enumerate().rev() {
        let candidate = raw(&results[idx]) * m as f64 / (rank + 1) as f64;
        running = running.min(candidate).min(1.0);
        results[idx].adjusted_p = Some(running);
    }
}
