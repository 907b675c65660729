//! Size-adaptive fairness auditing.
//!
//! Audits binary classifier predictions for subgroup disparities with a test
//! chosen per subgroup by sample size: an asymptotic Wald test where every
//! contingency cell is well populated, and a seeded Dirichlet–multinomial
//! posterior simulation for the sparse intersectional tail where asymptotics
//! break down. The two regimes agree as n grows, which the validation module
//! checks empirically.
//!
//! The crate is `no_std` (with `alloc`): all statistics, the audit engine,
//! the resolution-limit search, and the self-validation experiments live
//! here. File formats, parallelism, and the command-line interface live in
//! the companion `saft-cli` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bayes;
pub mod dataset;
pub mod engine;
pub mod metrics;
pub mod normal;
pub mod resolution;
pub mod sampling;
pub mod seeding;
pub mod types;
pub mod validation;
pub mod wald;

pub use bayes::{bayes_test, BayesError, BayesOutcome, PosteriorSummary};
pub use dataset::{Dataset, DatasetBuilder, DatasetError, GroupSpec, SyntheticSpec};
pub use engine::{
    audit, audit_with_runner, saft_test, AuditReport, BaselineFlags, BaselineThresholds,
    EngineError, SubgroupJob, SubgroupResult,
};
pub use metrics::{builtin, BuiltinMetric, Metric, MetricError};
pub use resolution::{
    min_reject_count, no_power_boundary, resolution_curve, resolution_point,
    ResolutionConfig, ResolutionError,
    ResolutionPoint, SearchDirection,
};
pub use types::{
    AuditConfig, CellCounts, ConfigError, CountsError, Decision, Direction, DirichletParams,
    MetricId, ProbVector, Reference, Regime, Sidedness, SpecError, SubgroupSpec, TestResult,
    CANONICAL_CELLS,
};
pub use validation::{
    experiment_clt, experiment_convergence, experiment_coverage, experiment_type1,
    CltOutcome, ConvergenceOutcome, CoverageOutcome, Type1Outcome, ValidationError,
};
pub use wald::{wald_test, WaldError, WaldOutcome};
