//! JSON configuration file for audits: dataset schema, test parameters,
//! baseline thresholds, and default output paths. Unknown keys are rejected
//! so typos fail loudly instead of silently reverting to defaults.
//!
//! Precedence everywhere: command-line flags > config file > built-in
//! defaults.

use std::fs;
use std::path::Path;

use saft_core::engine::BaselineThresholds;
use saft_core::types::{AuditConfig, MetricId, Reference, Sidedness};
use serde::Deserialize;

use crate::CliError;

/// Top-level config document.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub schema: Option<SchemaSection>,
    pub audit: AuditSection,
    pub baselines: BaselineSection,
    pub output: OutputSection,
}

/// Which CSV columns hold predictions, labels, and protected attributes.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaSection {
    pub prediction_column: String,
    #[serde(default)]
    pub label_column: Option<String>,
    pub protected_columns: Vec<String>,
}

/// Test parameters; every field optional, falling back to the defaults
/// (α = 0.05, ñ = 30, K = 10⁴, flat prior, two-sided, depth 2).
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditSection {
    pub alpha: Option<f64>,
    pub min_support: Option<u64>,
    pub mc_draws: Option<usize>,
    pub prior_weights: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub metric: Option<String>,
    pub max_depth: Option<usize>,
    pub reference: Option<String>,
    pub sidedness: Option<String>,
    pub bh_adjust: Option<bool>,
}

/// Baseline criteria thresholds: θ_δ for the fixed-threshold check and an
/// optional θ_γ for the size-weighted one.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineSection {
    pub theta_delta: Option<f64>,
    pub theta_gamma: Option<f64>,
}

/// Default output locations; flags override them.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub report: Option<String>,
    pub intervals_plot: Option<String>,
    pub gamma_plot: Option<String>,
}

pub fn load_config(path: &Path) -> Result<ConfigFile, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
}

pub fn parse_metric(name: &str) -> Result<MetricId, CliError> {
    match name {
        "sp" => Ok(MetricId::Sp),
        "eo" => Ok(MetricId::Eo),
        "di" => Ok(MetricId::Di),
        other => Err(CliError::Usage(format!(
            "unknown metric {other:?}; expected sp, eo, or di"
        ))),
    }
}

pub fn parse_reference(name: &str) -> Result<Reference, CliError> {
    match name {
        "complement" => Ok(Reference::Complement),
        "whole_population" => Ok(Reference::WholePopulation),
        other => Err(CliError::Usage(format!(
            "unknown reference {other:?}; expected complement or whole_population"
        ))),
    }
}

pub fn parse_sidedness(name: &str) -> Result<Sidedness, CliError> {
    match name {
        "two_sided" => Ok(Sidedness::TwoSided),
        "less" => Ok(Sidedness::Less),
        "greater" => Ok(Sidedness::Greater),
        other => Err(CliError::Usage(format!(
            "unknown sidedness {other:?}; expected two_sided, less, or greater"
        ))),
    }
}

/// Flag-level overrides for audit parameters, all optional.
#[derive(Debug, Clone, Default)]
pub struct AuditOverrides {
    pub alpha: Option<f64>,
    pub min_support: Option<u64>,
    pub mc_draws: Option<usize>,
    pub seed: Option<u64>,
    pub metric: Option<String>,
    pub max_depth: Option<usize>,
    pub sidedness: Option<String>,
    pub bh_adjust: Option<bool>,
    pub theta_delta: Option<f64>,
    pub theta_gamma: Option<f64>,
}

/// Merges defaults, config file, and flags into the engine's config types.
pub fn resolve_audit_config(
    file: &ConfigFile,
    flags: &AuditOverrides,
) -> Result<(AuditConfig, BaselineThresholds), CliError> {
    let defaults = AuditConfig::default();
    let section = &file.audit;

    let metric_name = flags.metric.clone().or_else(|| section.metric.clone());
    let metric = match metric_name {
        Some(name) => parse_metric(&name)?,
        None => defaults.metric,
    };
    let reference = match &section.reference {
        Some(name) => parse_reference(name)?,
        None => defaults.reference,
    };
    let sidedness_name = flags.sidedness.clone().or_else(|| section.sidedness.clone());
    let sidedness = match sidedness_name {
        Some(name) => parse_sidedness(&name)?,
        None => defaults.sidedness,
    };

    let config = AuditConfig {
        alpha: flags.alpha.or(section.alpha).unwrap_or(defaults.alpha),
        min_support: flags
            .min_support
            .or(section.min_support)
            .unwrap_or(defaults.min_support),
        mc_draws: flags.mc_draws.or(section.mc_draws).unwrap_or(defaults.mc_draws),
        prior_weights: section.prior_weights.clone().unwrap_or(defaults.prior_weights),
        seed: flags.seed.or(section.seed).unwrap_or(defaults.seed),
        metric,
        max_depth: flags.max_depth.or(section.max_depth).unwrap_or(defaults.max_depth),
        reference,
        sidedness,
        bh_adjust: flags.bh_adjust.or(section.bh_adjust).unwrap_or(defaults.bh_adjust),
    };
    config.validate().map_err(|e| CliError::Usage(format!("invalid configuration: {e}")))?;

    let default_thresholds = BaselineThresholds::default();
    let thresholds = BaselineThresholds {
        theta_delta: flags
            .theta_delta
            .or(file.baselines.theta_delta)
            .unwrap_or(default_thresholds.theta_delta),
        theta_gamma: flags.theta_gamma.or(file.baselines.theta_gamma),
    };
    if !(thresholds.theta_delta > 0.0) || !thresholds.theta_delta.is_finite() {
        return Err(CliError::Usage(format!(
            "theta_delta must be positive and finite, got {}",
            thresholds.theta_delta
        )));
    }
    if let Some(g) = thresholds.theta_gamma {
        if !(g > 0.0) || !g.is_finite() {
            return Err(CliError::Usage(format!(
                "theta_gamma must be positive and finite, got {g}"
            )));
        }
    }
    Ok((config, thresholds))
}
