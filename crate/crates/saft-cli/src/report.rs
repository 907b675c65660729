//! Report serialization: a JSON document or flat CSV per audit, plus plot
//! data extracts for interval plots, size-vs-score scatters, and resolution
//! curves.
//!
//! Every numeric value is rounded to 12 significant digits before rendering,
//! in both formats, so reports are diff-able across platforms and the two
//! formats carry identical numbers. Non-finite values (one-sided intervals'
//! open endpoints) render as JSON null / empty CSV fields.

use std::io::Write;

use saft_core::engine::{AuditReport, SkipReason, SkippedSubgroup, SubgroupResult};
use saft_core::resolution::ResolutionPoint;
use saft_core::types::{AuditConfig, TestResult};
use serde::Serialize;

/// Version tag embedded in every emitted document.
pub const SCHEMA_VERSION: u32 = 1;

/// Rounds to 12 significant digits; passes zero and non-finite through.
pub fn round_sig12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    // Round-trip through scientific notation with 11 fractional digits:
    // robust at every magnitude, unlike pow-of-ten scaling.
    format!("{x:.11e}").parse().expect("formatted float reparses")
}

/// A finite rounded value, or None for absent/non-finite.
fn score(x: Option<f64>) -> Option<f64> {
    x.and_then(|v| v.is_finite().then(|| round_sig12(v)))
}

/// CSV rendering of an optional numeric: empty field when absent.
fn field(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Config echo at the head of the JSON report.
#[derive(Debug, Serialize)]
struct ConfigEcho {
    alpha: f64,
    min_support: u64,
    mc_draws: usize,
    prior_weights: Vec<f64>,
    seed: u64,
    metric: &'static str,
    max_depth: usize,
    reference: &'static str,
    sidedness: &'static str,
    bh_adjust: bool,
}

impl ConfigEcho {
    fn new(config: &AuditConfig) -> Self {
        Self {
            alpha: config.alpha,
            min_support: config.min_support,
            mc_draws: config.mc_draws,
            prior_weights: config.prior_weights.clone(),
            seed: config.seed,
            metric: config.metric.as_str(),
            max_depth: config.max_depth,
            reference: config.reference.as_str(),
            sidedness: config.sidedness.as_str(),
            bh_adjust: config.bh_adjust,
        }
    }
}

#[derive(Debug, Serialize)]
struct DigestEcho {
    n_rows: usize,
    attributes: Vec<(String, usize)>,
    missing_cells: u64,
}

/// One flat record per tested subgroup.
#[derive(Debug, Serialize)]
pub struct ReportRecord {
    pub subgroup: String,
    pub n_s: u64,
    pub group_fraction: Option<f64>,
    pub n1_s: u64,
    pub n0_s: u64,
    pub n1_ref: u64,
    pub n0_ref: u64,
    pub regime: &'static str,
    pub decision: &'static str,
    pub direction: &'static str,
    pub estimate: Option<f64>,
    pub sigma: Option<f64>,
    pub interval_lower: Option<f64>,
    pub interval_upper: Option<f64>,
    pub p_value: Option<f64>,
    pub tail_probability: Option<f64>,
    pub adjusted_p: Option<f64>,
    pub delta_flag: bool,
    pub gamma_score: Option<f64>,
    pub gamma_flag: Option<bool>,
}

impl ReportRecord {
    fn new(result: &SubgroupResult) -> Self {
        let cells = result.counts.cells();
        let test: &TestResult = &result.test;
        Self {
            subgroup: result.spec.label(),
            n_s: result.group_size,
            group_fraction: score(Some(result.group_fraction)),
            n1_s: cells[0],
            n0_s: cells[1],
            n1_ref: cells[2],
            n0_ref: cells[3],
            regime: test.regime.as_str(),
            decision: test.decision.as_str(),
            direction: test.direction.as_str(),
            estimate: score(test.estimate),
            sigma: score(test.sigma),
            interval_lower: score(test.interval.map(|i| i.0)),
            interval_upper: score(test.interval.map(|i| i.1)),
            p_value: score(test.p_value),
            tail_probability: score(test.tail_probability),
            adjusted_p: score(result.adjusted_p),
            delta_flag: result.baselines.delta_flag,
            gamma_score: score(Some(result.baselines.gamma_score)),
            gamma_flag: result.baselines.gamma_flag,
        }
    }
}

#[derive(Debug, Serialize)]
struct SkipRecord {
    subgroup: String,
    reason: String,
}

fn skip_reason_text(reason: &SkipReason) -> String {
    match reason {
        SkipReason::NoInstances => "no_instances".to_string(),
        SkipReason::TestFailure(message) => format!("test_failure: {message}"),
    }
}

#[derive(Debug, Serialize)]
struct ReportDoc {
    schema_version: u32,
    config: ConfigEcho,
    digest: DigestEcho,
    results: Vec<ReportRecord>,
    skips: Vec<SkipRecord>,
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("report serialization failed: {0}")]
    Json(#[from] serde_json::Error),
    #[error("report write failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("report write failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("plot kind {kind} needs {needs} input")]
    KindMismatch { kind: &'static str, needs: &'static str },
}

/// Output format for the main report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Serializes the full report. JSON is one document (config echo, digest,
/// records, skips); CSV is one row per subgroup with a fixed column order,
/// skipped subgroups appended with only `subgroup` and `skip_reason` set.
pub fn write_report<W: Write>(
    report: &AuditReport,
    format: ReportFormat,
    out: W,
) -> Result<(), ReportError> {
    match format {
        ReportFormat::Json => write_json(report, out),
        ReportFormat::Csv => write_csv(report, out),
    }
}

fn write_json<W: Write>(report: &AuditReport, mut out: W) -> Result<(), ReportError> {
    let doc = ReportDoc {
        schema_version: SCHEMA_VERSION,
        config: ConfigEcho::new(&report.config),
        digest: DigestEcho {
            n_rows: report.digest.n_rows,
            attributes: report.digest.attributes.clone(),
            missing_cells: report.digest.missing_cells,
        },
        results: report.results.iter().map(ReportRecord::new).collect(),
        skips: report
            .skips
            .iter()
            .map(|s| SkipRecord { subgroup: s.spec.label(), reason: skip_reason_text(&s.reason) })
            .collect(),
    };
    serde_json::to_writer_pretty(&mut out, &doc)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub const REPORT_CSV_COLUMNS: [&str; 21] = [
    "subgroup",
    "n_s",
    "group_fraction",
    "n1_s",
    "n0_s",
    "n1_ref",
    "n0_ref",
    "regime",
    "decision",
    "direction",
    "estimate",
    "sigma",
    "interval_lower",
    "interval_upper",
    "p_value",
    "tail_probability",
    "adjusted_p",
    "delta_flag",
    "gamma_score",
    "gamma_flag",
    "skip_reason",
];

fn write_csv<W: Write>(report: &AuditReport, out: W) -> Result<(), ReportError> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    writer.write_record(REPORT_CSV_COLUMNS)?;
    for result in &report.results {
        let r = ReportRecord::new(result);
        writer.write_record(vec![
            r.subgroup.clone(),
            r.n_s.to_string(),
            field(r.group_fraction),
            r.n1_s.to_string(),
            r.n0_s.to_string(),
            r.n1_ref.to_string(),
            r.n0_ref.to_string(),
            r.regime.to_string(),
            r.decision.to_string(),
            r.direction.to_string(),
            field(r.estimate),
            field(r.sigma),
            field(r.interval_lower),
            field(r.interval_upper),
            field(r.p_value),
            field(r.tail_probability),
            field(r.adjusted_p),
            r.delta_flag.to_string(),
            field(r.gamma_score),
            r.gamma_flag.map(|f| f.to_string()).unwrap_or_default(),
            String::new(),
        ])?;
    }
    for skip in &report.skips {
        let mut record = vec![skip.spec.label()];
        record.extend(std::iter::repeat(String::new()).take(REPORT_CSV_COLUMNS.len() - 2));
        record.push(skip_reason_text(&skip.reason));
        writer.write_record(&record)?;
    }
    writer.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// What a plot-data extraction reads from.
#[derive(Debug, Clone, Copy)]
pub enum PlotSource<'a> {
    Report(&'a AuditReport),
    Curve(&'a [ResolutionPoint]),
}

/// Which extract to emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// Per subgroup: estimate and interval endpoints.
    Intervals,
    /// Per subgroup: size against γ score with decision key.
    GammaScatter,
    /// Resolution curve passthrough.
    Resolution,
}

/// Emits one plot-data CSV. `Intervals` and `GammaScatter` need a report;
/// `Resolution` needs a curve table.
pub fn emit_plot_data<W: Write>(
    source: PlotSource<'_>,
    kind: PlotKind,
    out: W,
) -> Result<(), ReportError> {
    match (kind, source) {
        (PlotKind::Intervals, PlotSource::Report(report)) => emit_intervals(report, out),
        (PlotKind::GammaScatter, PlotSource::Report(report)) => emit_gamma(report, out),
        (PlotKind::Resolution, PlotSource::Curve(points)) => emit_resolution(points, out),
        (PlotKind::Resolution, PlotSource::Report(_)) => {
            Err(ReportError::KindMismatch { kind: "resolution", needs: "curve" })
        }
        (PlotKind::Intervals, PlotSource::Curve(_)) => {
            Err(ReportError::KindMismatch { kind: "intervals", needs: "report" })
        }
        (PlotKind::GammaScatter, PlotSource::Curve(_)) => {
            Err(ReportError::KindMismatch { kind: "gamma_scatter", needs: "report" })
        }
    }
}

fn plot_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

fn emit_intervals<W: Write>(report: &AuditReport, out: W) -> Result<(), ReportError> {
    let mut writer = plot_writer(out);
    writer.write_record([
        "subgroup",
        "n_s",
        "estimate",
        "interval_lower",
        "interval_upper",
        "regime",
        "decision",
    ])?;
    for result in &report.results {
        let r = ReportRecord::new(result);
        writer.write_record(vec![
            r.subgroup.clone(),
            r.n_s.to_string(),
            field(r.estimate),
            field(r.interval_lower),
            field(r.interval_upper),
            r.regime.to_string(),
            r.decision.to_string(),
        ])?;
    }
    // Subgroups with no members still plot: a labeled gap with null fields.
    for skip in &report.skips {
        if matches!(skip.reason, SkipReason::NoInstances) {
            writer.write_record(vec![
                skip.spec.label(),
                "0".to_string(),
                String::new(),
                String::new(),
                String::new(),
                "no_data".to_string(),
                "no_data".to_string(),
            ])?;
        }
    }
    writer.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn emit_gamma<W: Write>(report: &AuditReport, out: W) -> Result<(), ReportError> {
    let mut writer = plot_writer(out);
    writer.write_record(["subgroup", "n_s", "group_fraction", "gamma_score", "decision"])?;
    for result in &report.results {
        let r = ReportRecord::new(result);
        writer.write_record(vec![
            r.subgroup.clone(),
            r.n_s.to_string(),
            field(r.group_fraction),
            field(r.gamma_score),
            r.decision.to_string(),
        ])?;
    }
    writer.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn emit_resolution<W: Write>(points: &[ResolutionPoint], out: W) -> Result<(), ReportError> {
    let mut writer = plot_writer(out);
    writer.write_record(["rate", "n_S", "direction", "min_fraction", "regime"])?;
    for point in points {
        writer.write_record(vec![
            round_sig12(point.global_negative_rate).to_string(),
            point.n_s.to_string(),
            point.direction.as_str().to_string(),
            field(point.min_fraction.map(round_sig12)),
            point.regime.as_str().to_string(),
        ])?;
    }
    writer.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Convenience used by skip-list handling in commands.
pub fn hard_failures(skips: &[SkippedSubgroup]) -> usize {
    skips.iter().filter(|s| matches!(s.reason, SkipReason::TestFailure(_))).count()
}
