//! The four workflows behind the `saft` binary: audit, resolution,
//! simulate, and validate. Each returns the process exit code: 0 success,
//! 1 validation gate violated, 2 user error, 3 runtime failure.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use saft_core::dataset::{generate_synthetic, GroupSpec, SyntheticSpec};
use saft_core::engine::{audit_with_runner, saft_test};
use saft_core::resolution::{
    resolution_point, ResolutionConfig, ResolutionError, SearchDirection,
};
use saft_core::types::{MetricId, ProbVector};
use saft_core::validation::{
    experiment_clt, experiment_convergence, experiment_coverage, experiment_type1,
};
use serde::Deserialize;

use crate::config::{load_config, AuditOverrides};
use crate::csv_io::{load_csv, write_dataset_file};
use crate::report::{
    emit_plot_data, hard_failures, round_sig12, write_report, PlotKind, PlotSource,
    ReportFormat,
};
use crate::CliError;

// ---------------------------------------------------------------- audit ----

#[derive(Debug, clap::Args)]
pub struct AuditArgs {
    /// Config file (JSON) holding the dataset schema and parameters.
    #[arg(long)]
    pub config: PathBuf,
    /// Input CSV of predictions.
    #[arg(long)]
    pub data: PathBuf,
    /// Report output path (falls back to the config's output.report).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Report format: json or csv. Inferred from the output extension when
    /// omitted (default json).
    #[arg(long)]
    pub format: Option<String>,
    /// Significance level α.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Per-cell support threshold ñ for the asymptotic test.
    #[arg(long)]
    pub min_support: Option<u64>,
    /// Monte-Carlo draws per Bayesian test.
    #[arg(long)]
    pub mc_draws: Option<usize>,
    /// Base seed for all per-subgroup streams.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Metric: sp, eo, or di.
    #[arg(long)]
    pub metric: Option<String>,
    /// Maximum attributes per intersectional subgroup.
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Test sidedness: two_sided, less, or greater.
    #[arg(long)]
    pub sidedness: Option<String>,
    /// Attach Benjamini-Hochberg adjusted p-values.
    #[arg(long)]
    pub bh_adjust: Option<bool>,
    /// Fixed-threshold baseline θ_δ.
    #[arg(long)]
    pub theta_delta: Option<f64>,
    /// Size-weighted baseline θ_γ (off unless set).
    #[arg(long)]
    pub theta_gamma: Option<f64>,
    /// Max concurrent subgroup tests (default: available parallelism;
    /// SAFT_JOBS overrides the default).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Also emit interval plot data to this path.
    #[arg(long)]
    pub intervals_plot: Option<PathBuf>,
    /// Also emit size-vs-γ scatter data to this path.
    #[arg(long)]
    pub gamma_plot: Option<PathBuf>,
}

fn create_out(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn job_count(flag: Option<usize>) -> Option<usize> {
    flag.or_else(|| {
        std::env::var("SAFT_JOBS").ok().and_then(|v| v.parse().ok()).filter(|&n| n > 0)
    })
}

pub fn cmd_audit(args: &AuditArgs) -> Result<i32, CliError> {
    let file = load_config(&args.config)?;
    let schema = file
        .schema
        .as_ref()
        .ok_or_else(|| CliError::Usage("config has no schema section".to_string()))?;
    let overrides = AuditOverrides {
        alpha: args.alpha,
        min_support: args.min_support,
        mc_draws: args.mc_draws,
        seed: args.seed,
        metric: args.metric.clone(),
        max_depth: args.max_depth,
        sidedness: args.sidedness.clone(),
        bh_adjust: args.bh_adjust,
        theta_delta: args.theta_delta,
        theta_gamma: args.theta_gamma,
    };
    let (config, thresholds) = crate::config::resolve_audit_config(&file, &overrides)?;

    let dataset = load_csv(&args.data, schema).map_err(|e| CliError::Usage(e.to_string()))?;
    if config.metric == MetricId::Eo && !dataset.has_labels() {
        return Err(CliError::Usage(
            "metric eo needs ground-truth labels; config schema has no label_column"
                .to_string(),
        ));
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(job_count(args.jobs).unwrap_or(0))
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    let report = pool
        .install(|| {
            audit_with_runner(&dataset, &config, &thresholds, |cfg, jobs| {
                jobs.par_iter().map(|job| saft_test(&job.counts, cfg, job.seed)).collect()
            })
        })
        .map_err(|e| CliError::Runtime(format!("audit failed: {e}")))?;

    let out_path = args
        .out
        .clone()
        .or_else(|| file.output.report.as_ref().map(PathBuf::from))
        .ok_or_else(|| {
            CliError::Usage("no output path: pass --out or set output.report".to_string())
        })?;
    let format = match args.format.as_deref() {
        Some("json") => ReportFormat::Json,
        Some("csv") => ReportFormat::Csv,
        Some(other) => {
            return Err(CliError::Usage(format!(
                "unknown format {other:?}; expected json or csv"
            )))
        }
        None => match out_path.extension().and_then(|e| e.to_str()) {
            Some("csv") => ReportFormat::Csv,
            _ => ReportFormat::Json,
        },
    };
    write_report(&report, format, create_out(&out_path)?)
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    let intervals_path = args
        .intervals_plot
        .clone()
        .or_else(|| file.output.intervals_plot.as_ref().map(PathBuf::from));
    if let Some(path) = intervals_path {
        emit_plot_data(PlotSource::Report(&report), PlotKind::Intervals, create_out(&path)?)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let gamma_path =
        args.gamma_plot.clone().or_else(|| file.output.gamma_plot.as_ref().map(PathBuf::from));
    if let Some(path) = gamma_path {
        emit_plot_data(PlotSource::Report(&report), PlotKind::GammaScatter, create_out(&path)?)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }

    let hard = hard_failures(&report.skips);
    if hard > 0 {
        eprintln!(
            "warning: {hard} subgroup test(s) failed hard; see the skip list in {}",
            out_path.display()
        );
        return Ok(3);
    }
    Ok(0)
}

// ----------------------------------------------------------- resolution ----

#[derive(Debug, clap::Args)]
pub struct ResolutionArgs {
    /// Global negative rates: "start:end:step" or a comma list "0.3,0.5".
    #[arg(long)]
    pub rates: String,
    /// Group-size range "lo:hi" (inclusive).
    #[arg(long, default_value = "1:100")]
    pub n: String,
    /// Significance level α.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// disadvantaged, advantaged, or both.
    #[arg(long, default_value = "disadvantaged")]
    pub direction: String,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
    /// Reference complement size.
    #[arg(long, default_value_t = 100_000)]
    pub n_ref: u64,
    /// Monte-Carlo draws per Bayesian test.
    #[arg(long, default_value_t = 100_000)]
    pub draws: usize,
    /// Per-cell support threshold ñ.
    #[arg(long, default_value_t = 30)]
    pub min_support: u64,
    /// Base seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Max concurrent grid points (default: available parallelism;
    /// SAFT_JOBS overrides the default).
    #[arg(long)]
    pub jobs: Option<usize>,
}

/// Parses "start:end:step" into an inclusive grid, or a comma list.
/// Values are rounded to 12 significant digits so the grid is exact.
fn parse_rates(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = |msg: &str| CliError::Usage(format!("bad --rates {text:?}: {msg}"));
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected start:end:step"));
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| p.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| bad(&e.to_string()))?;
        let (start, end, step) = (nums[0], nums[1], nums[2]);
        if !(step > 0.0) || end < start {
            return Err(bad("need step > 0 and end >= start"));
        }
        let count = ((end - start) / step + 0.5).floor() as usize;
        Ok((0..=count).map(|i| round_sig12(start + i as f64 * step)).collect())
    } else {
        text.split(',')
            .map(|p| p.trim().parse::<f64>().map(round_sig12).map_err(|e| bad(&e.to_string())))
            .collect()
    }
}

fn parse_range(text: &str) -> Result<(u64, u64), CliError> {
    let bad = || CliError::Usage(format!("bad --n {text:?}: expected lo:hi"));
    let (lo, hi) = text.split_once(':').ok_or_else(bad)?;
    let lo = lo.parse().map_err(|_| bad())?;
    let hi = hi.parse().map_err(|_| bad())?;
    Ok((lo, hi))
}

fn parse_directions(text: &str) -> Result<Vec<SearchDirection>, CliError> {
    match text {
        "disadvantaged" => Ok(vec![SearchDirection::Disadvantaged]),
        "advantaged" => Ok(vec![SearchDirection::Advantaged]),
        "both" => Ok(vec![SearchDirection::Disadvantaged, SearchDirection::Advantaged]),
        other => Err(CliError::Usage(format!(
            "unknown direction {other:?}; expected disadvantaged, advantaged, or both"
        ))),
    }
}

fn map_resolution_error(e: ResolutionError) -> CliError {
    match e {
        ResolutionError::Engine(inner) => CliError::Runtime(inner.to_string()),
        user => CliError::Usage(user.to_string()),
    }
}

pub fn cmd_resolution(args: &ResolutionArgs) -> Result<i32, CliError> {
    let rates = parse_rates(&args.rates)?;
    let (lo, hi) = parse_range(&args.n)?;
    if lo < 1 || hi < lo {
        return Err(CliError::Usage(format!("bad --n range {lo}:{hi}: need 1 <= lo <= hi")));
    }
    let directions = parse_directions(&args.direction)?;
    for &rate in &rates {
        if !(rate > 0.0 && rate < 1.0) {
            return Err(CliError::Usage(format!(
                "global negative rate {rate} must lie strictly between 0 and 1"
            )));
        }
    }
    let config = ResolutionConfig {
        n_ref: args.n_ref,
        min_support: args.min_support,
        mc_draws: args.draws,
        seed: args.seed,
        ..ResolutionConfig::default()
    };

    // Each grid point seeds itself from its own identity, so evaluating
    // them in parallel reproduces the sequential table exactly.
    let mut jobs = Vec::new();
    for &direction in &directions {
        for &rate in &rates {
            for n_s in lo..=hi {
                jobs.push((rate, n_s, direction));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(job_count(args.jobs).unwrap_or(0))
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    let outcomes: Vec<_> = pool.install(|| {
        jobs.par_iter()
            .map(|&(rate, n_s, direction)| {
                resolution_point(rate, n_s, args.alpha, direction, &config)
            })
            .collect()
    });
    let points = outcomes
        .into_iter()
        .collect::<Result<Vec<_>, _>>()
        .map_err(map_resolution_error)?;

    emit_plot_data(PlotSource::Curve(&points), PlotKind::Resolution, create_out(&args.out)?)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(0)
}

// ------------------------------------------------------------- simulate ----

#[derive(Debug, clap::Args)]
pub struct SimulateArgs {
    /// Synthetic dataset spec (JSON).
    #[arg(long)]
    pub spec: PathBuf,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
    /// Override the spec's seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    attribute: String,
    groups: Vec<GroupFile>,
    #[serde(default)]
    seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupFile {
    value: String,
    size: u64,
    positive_rate: f64,
    #[serde(default)]
    label_rate: Option<f64>,
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<i32, CliError> {
    let text = std::fs::read_to_string(&args.spec)
        .map_err(|e| CliError::Usage(format!("cannot read spec {}: {e}", args.spec.display())))?;
    let file: SpecFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("bad spec {}: {e}", args.spec.display())))?;
    let spec = SyntheticSpec {
        attribute: file.attribute,
        groups: file
            .groups
            .into_iter()
            .map(|g| GroupSpec {
                value: g.value,
                size: g.size,
                positive_rate: g.positive_rate,
                label_rate: g.label_rate,
            })
            .collect(),
        seed: args.seed.unwrap_or(file.seed),
    };
    let dataset = generate_synthetic(&spec).map_err(|e| CliError::Usage(e.to_string()))?;
    write_dataset_file(&dataset, &args.out).map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(0)
}

// ------------------------------------------------------------- validate ----

#[derive(Debug, clap::Args)]
pub struct ValidateArgs {
    /// Experiment: type1, coverage, convergence, or clt.
    pub experiment: String,
    /// Sample size per trial (or per table row for convergence).
    #[arg(long, default_value_t = 10_000)]
    pub n: u64,
    /// Trial count.
    #[arg(long, default_value_t = 10_000)]
    pub trials: u32,
    /// Significance level α.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Base seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sampling distribution over the four cells.
    #[arg(long, default_value = "0.05,0.05,0.45,0.45")]
    pub probs: String,
    /// Apportionment proportions (convergence experiment).
    #[arg(long, default_value = "0.01,0.09,0.45,0.45")]
    pub proportions: String,
    /// Group sizes for the convergence table.
    #[arg(long = "n-list", default_value = "10,100,1000,10000")]
    pub n_list: String,
    /// Posterior draws per Bayesian interval (convergence experiment).
    #[arg(long, default_value_t = 100_000)]
    pub draws: usize,
    /// Metrics CSV output path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_probs(text: &str, flag: &str) -> Result<ProbVector, CliError> {
    let values: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("bad --{flag} {text:?}: {e}")))?;
    ProbVector::new(values)
        .map_err(|e| CliError::Usage(format!("bad --{flag} {text:?}: {e}")))
}

fn parse_n_list(text: &str) -> Result<Vec<u64>, CliError> {
    text.split(',')
        .map(|p| {
            p.trim()
                .parse::<u64>()
                .map_err(|e| CliError::Usage(format!("bad --n-list {text:?}: {e}")))
        })
        .collect()
}

fn metrics_out(path: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    match path {
        Some(path) => Ok(Box::new(create_out(path)?)),
        None => Ok(Box::new(std::io::stdout().lock())),
    }
}

fn fmt(x: f64) -> String {
    round_sig12(x).to_string()
}

pub fn cmd_validate(args: &ValidateArgs) -> Result<i32, CliError> {
    match args.experiment.as_str() {
        "type1" => validate_type1(args),
        "coverage" => validate_coverage(args),
        "convergence" => validate_convergence(args),
        "clt" => validate_clt(args),
        other => Err(CliError::Usage(format!(
            "unknown experiment {other:?}; expected type1, coverage, convergence, or clt"
        ))),
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn validate_type1(args: &ValidateArgs) -> Result<i32, CliError> {
    let true_p = parse_probs(&args.probs, "probs")?;
    let out = experiment_type1(&true_p, args.n, args.trials, args.alpha, args.seed)
        .map_err(usage)?;
    let mut w = csv_writer(metrics_out(&args.out)?);
    w.write_record([
        "experiment",
        "n",
        "trials",
        "alpha",
        "rejection_rate",
        "std_error",
        "band_lower",
        "band_upper",
        "pass",
    ])
    .and_then(|_| {
        w.write_record(vec![
            "type1".to_string(),
            args.n.to_string(),
            out.trials.to_string(),
            fmt(args.alpha),
            fmt(out.rejection_rate),
            fmt(out.std_error),
            fmt(out.band.0),
            fmt(out.band.1),
            out.pass.to_string(),
        ])
    })
    .and_then(|_| w.flush().map_err(csv::Error::from))
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    if out.pass {
        Ok(0)
    } else {
        Err(CliError::GateFailed(format!(
            "type1 rejection rate {} outside [{}, {}]",
            fmt(out.rejection_rate),
            fmt(out.band.0),
            fmt(out.band.1)
        )))
    }
}

fn validate_coverage(args: &ValidateArgs) -> Result<i32, CliError> {
    let true_p = parse_probs(&args.probs, "probs")?;
    let out = experiment_coverage(&true_p, args.n, args.trials, args.alpha, args.seed)
        .map_err(usage)?;
    let mut w = csv_writer(metrics_out(&args.out)?);
    w.write_record([
        "experiment",
        "n",
        "trials",
        "alpha",
        "coverage",
        "trials_used",
        "no_interval_trials",
        "band_lower",
        "band_upper",
        "gated",
        "pass",
    ])
    .and_then(|_| {
        w.write_record(vec![
            "coverage".to_string(),
            args.n.to_string(),
            args.trials.to_string(),
            fmt(args.alpha),
            fmt(out.coverage),
            out.trials_used.to_string(),
            out.no_interval_trials.to_string(),
            fmt(out.band.0),
            fmt(out.band.1),
            out.gated.to_string(),
            out.pass.to_string(),
        ])
    })
    .and_then(|_| w.flush().map_err(csv::Error::from))
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    if out.pass {
        Ok(0)
    } else {
        Err(CliError::GateFailed(format!(
            "coverage {} outside [{}, {}]",
            fmt(out.coverage),
            fmt(out.band.0),
            fmt(out.band.1)
        )))
    }
}

fn validate_convergence(args: &ValidateArgs) -> Result<i32, CliError> {
    let proportions = parse_probs(&args.proportions, "proportions")?;
    let n_list = parse_n_list(&args.n_list)?;
    let out =
        experiment_convergence(&proportions, &n_list, args.draws, args.alpha, args.seed)
            .map_err(usage)?;
    let mut w = csv_writer(metrics_out(&args.out)?);
    w.write_record(["experiment", "n", "wald_width", "bayes_width", "ratio", "pass"])
        .and_then(|_| {
            for row in &out.rows {
                w.write_record(vec![
                    "convergence".to_string(),
                    row.n.to_string(),
                    fmt(row.wald_width),
                    fmt(row.bayes_width),
                    fmt(row.ratio),
                    out.pass.to_string(),
                ])?;
            }
            w.flush().map_err(csv::Error::from)
        })
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    if out.pass {
        Ok(0)
    } else {
        Err(CliError::GateFailed("convergence ratio gates violated".to_string()))
    }
}

fn validate_clt(args: &ValidateArgs) -> Result<i32, CliError> {
    let true_p = parse_probs(&args.probs, "probs")?;
    let out = experiment_clt(&true_p, args.n, args.trials, args.seed).map_err(usage)?;
    let mut w = csv_writer(metrics_out(&args.out)?);
    w.write_record([
        "experiment",
        "n",
        "trials",
        "level",
        "empirical",
        "normal",
        "band",
        "gated",
        "pass",
    ])
    .and_then(|_| {
        for q in &out.quantiles {
            w.write_record(vec![
                "clt".to_string(),
                args.n.to_string(),
                args.trials.to_string(),
                fmt(q.level),
                fmt(q.empirical),
                fmt(q.normal),
                fmt(q.band),
                q.gated.to_string(),
                out.pass.to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)
    })
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    if out.pass {
        Ok(0)
    } else {
        Err(CliError::GateFailed("clt quantile gates violated".to_string()))
    }
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_triples_expand_inclusively() {
        assert_eq!(
            parse_rates("0.1:0.9:0.1").unwrap(),
            vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
        );
        assert_eq!(parse_rates("0.5:0.5:0.1").unwrap(), vec![0.5]);
    }

    #[test]
    fn rate_lists_parse_directly() {
        assert_eq!(parse_rates("0.3,0.5").unwrap(), vec![0.3, 0.5]);
    }

    #[test]
    fn bad_rate_syntax_is_a_usage_error() {
        assert!(matches!(parse_rates("0.1:0.9").unwrap_err(), CliError::Usage(_)));
        assert!(matches!(parse_rates("a,b").unwrap_err(), CliError::Usage(_)));
        assert!(matches!(parse_rates("0.9:0.1:0.1").unwrap_err(), CliError::Usage(_)));
    }

    #[test]
    fn ranges_parse_as_lo_hi() {
        assert_eq!(parse_range("1:200").unwrap(), (1, 200));
        assert!(matches!(parse_range("5").unwrap_err(), CliError::Usage(_)));
    }

    #[test]
    fn direction_both_expands_to_two_passes() {
        assert_eq!(parse_directions("both").unwrap().len(), 2);
        assert!(parse_directions("sideways").is_err());
    }

    #[test]
    fn prob_vectors_must_sum_to_one() {
        assert!(parse_probs("0.1,0.2,0.3,0.4", "probs").is_ok());
        assert!(matches!(
            parse_probs("0.5,0.5,0.5,0.5", "probs").unwrap_err(),
            CliError::Usage(_)
        ));
    }
}
