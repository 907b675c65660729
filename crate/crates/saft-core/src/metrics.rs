//! Fairness metrics as smooth functions φ on the probability simplex.
//!
//! Each metric supplies a value, an analytic gradient ∇φ (the delta-method
//! direction the Wald σ is built from), a domain guard, and its null value
//! (0 for rate differences, 1 for rate ratios). Gradients are hand-derived
//! rather than numeric because σ enters p-values and interval endpoints;
//! a central-difference fallback exists for user-supplied metrics and as the
//! test oracle for the built-in ones.
//!
//! All index arithmetic assumes the canonical cell order
//! (positive ∩ S, negative ∩ S, positive ∩ S̄, negative ∩ S̄).

use alloc::vec::Vec;

use crate::dataset::Dataset;
use crate::types::{MetricId, Reference};

/// Errors from metric evaluation and dataset conditioning.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    /// The point lies outside the metric's domain (a zero marginal or a zero
    /// reference rate); φ or ∇φ is undefined there.
    #[error("metric undefined at this point (zero marginal or reference rate)")]
    DomainGuard,
    #[error("metric expects {expected} cells, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("equal opportunity requires a ground-truth label column")]
    MissingLabels,
    #[error("no rows with label 1: cannot condition for equal opportunity")]
    EmptyConditioned,
}

/// Whether a metric is computed on all rows or on a labeled subpopulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conditioning {
    /// Use every row.
    All,
    /// Use only rows with ground-truth label 1 (equal opportunity).
    PositivesOnly,
}

/// A fairness metric φ with enough structure for both test regimes.
///
/// `value` and `gradient` accept raw slices rather than validated simplex
/// points so that finite-difference probes (which step slightly off the
/// simplex) remain well-defined.
pub trait Metric {
    fn name(&self) -> &str;
    fn arity(&self) -> usize {
        4
    }
    /// The no-disparity value: 0 for differences, 1 for ratios.
    fn null_value(&self) -> f64;
    fn conditioning(&self) -> Conditioning {
        Conditioning::All
    }
    /// True where φ and ∇φ are defined.
    fn domain_ok(&self, p: &[f64]) -> bool;
    fn value(&self, p: &[f64]) -> Result<f64, MetricError>;
    /// Analytic when the implementation provides one; otherwise central
    /// finite differences via [`numeric_gradient`].
    fn gradient(&self, p: &[f64]) -> Result<Vec<f64>, MetricError> {
        numeric_gradient(self, p)
    }
}

/// Central-difference gradient with step h = 1e-6 per coordinate.
///
/// Fallback for user-registered metrics without an analytic derivative, and
/// the agreement oracle for the built-in ones.
pub fn numeric_gradient<M: Metric + ?Sized>(
    metric: &M,
    p: &[f64],
) -> Result<Vec<f64>, MetricError> {
    const H: f64 = 1e-6;
    if !metric.domain_ok(p) {
        return Err(MetricError::DomainGuard);
    }
    let mut grad = Vec::with_capacity(p.len());
    let mut probe = p.to_vec();
    for i in 0..p.len() {
        probe[i] = p[i] + H;
        let hi = metric.value(&probe)?;
        probe[i] = p[i] - H;
        let lo = metric.value(&probe)?;
        probe[i] = p[i];
        grad.push((hi - lo) / (2.0 * H));
    }
    Ok(grad)
}

fn check_arity(p: &[f64]) -> Result<(), MetricError> {
    if p.len() != 4 {
        return Err(MetricError::ArityMismatch { expected: 4, got: p.len() });
    }
    Ok(())
}

/// Statistical parity against the complement:
/// p₁/(p₁+p₂) − p₃/(p₃+p₄). Range [−1, 1], null 0.
pub fn sp_value(p: &[f64]) -> Result<f64, MetricError> {
    check_arity(p)?;
    let (p_s, p_sbar) = (p[0] + p[1], p[2] + p[3]);
    if p_s <= 0.0 || p_sbar <= 0.0 {
        return Err(MetricError::DomainGuard);
    }
    Ok(p[0] / p_s - p[2] / p_sbar)
}

/// Analytic gradient of [`sp_value`] in canonical order:
/// (p₂/p_S², −p₁/p_S², −p₄/p_S̄², p₃/p_S̄²).
pub fn sp_gradient(p: &[f64]) -> Result<Vec<f64>, MetricError> {
    check_arity(p)?;
    let (p_s, p_sbar) = (p[0] + p[1], p[2] + p[3]);
    if p_s <= 0.0 || p_sbar <= 0.0 {
        return Err(MetricError::DomainGuard);
    }
    let s2 = p_s * p_s;
    let b2 = p_sbar * p_sbar;
    Ok(alloc::vec![p[1] / s2, -p[0] / s2, -p[3] / b2, p[2] / b2])
}

/// Disparate impact against the complement:
/// [p₁/(p₁+p₂)] / [p₃/(p₃+p₄)]. Range (0, ∞), null 1.
pub fn di_value(p: &[f64]) -> Result<f64, MetricError> {
    check_arity(p)?;
    let (p_s, p_sbar) = (p[0] + p[1], p[2] + p[3]);
    if p_s <= 0.0 || p_sbar <= 0.0 || p[2] <= 0.0 {
        return Err(MetricError::DomainGuard);
    }
    Ok((p[0] / p_s) / (p[2] / p_sbar))
}

/// Analytic gradient of [`di_value`] in canonical order.
pub fn di_gradient(p: &[f64]) -> Result<Vec<f64>, MetricError> {
    check_arity(p)?;
    let (p_s, p_sbar) = (p[0] + p[1], p[2] + p[3]);
    if p_s <= 0.0 || p_sbar <= 0.0 || p[2] <= 0.0 {
        return Err(MetricError::DomainGuard);
    }
    let r_s = p[0] / p_s;
    let r_sbar = p[2] / p_sbar;
    let s2 = p_s * p_s;
    let b2 = p_sbar * p_sbar;
    Ok(alloc::vec![
        (p[1] / s2) / r_sbar,
        (-p[0] / s2) / r_sbar,
        -r_s * (p[3] / b2) / (r_sbar * r_sbar),
        r_s * (p[2] / b2) / (r_sbar * r_sbar),
    ])
}

/// Statistical parity against the whole population:
/// p₁/(p₁+p₂) − (p₁+p₃).
fn sp_value_whole(p: &[f64]) -> Result<f64, MetricError> {
    check_arity(p)?;
    let p_s = p[0] + p[1];
    if p_s <= 0.0 {
        return Err(MetricError::DomainGuard);
    }
    Ok(p[0] / p_s - (p[0] + p[2]))
}

fn sp_gradient_whole(p: &[f64]) -> Result<Vec<f64>, MetricError> {
    check_arity(p)?;
    let p_s = p[0] + p[1];
    if p_s <= 0.0 {
        return Err(MetricError::DomainGuard);
    }
    let s2 = p_s * p_s;
    Ok(alloc::vec![p[1] / s2 - 1.0, -p[0] / s2, -1.0, 0.0])
}

/// Disparate impact against the whole population:
/// [p₁/(p₁+p₂)] / (p₁+p₃).
fn di_value_whole(p: &[f64]) -> Result<f64, MetricError> {
    check_arity(p)?;
    let p_s = p[0] + p[1];
    let r_pop = p[0] + p[2];
    if p_s <= 0.0 || r_pop <= 0.0 {
        return Err(MetricError::DomainGuard);
    }
    Ok((p[0] / p_s) / r_pop)
}

fn di_gradient_whole(p: &[f64]) -> Result<Vec<f64>, MetricError> {
    check_arity(p)?;
    let p_s = p[0] + p[1];
    let r_pop = p[0] + p[2];
    if p_s <= 0.0 || r_pop <= 0.0 {
        return Err(MetricError::DomainGuard);
    }
    let r_s = p[0] / p_s;
    let s2 = p_s * p_s;
    let pop2 = r_pop * r_pop;
    Ok(alloc::vec![
        (p[1] / s2) / r_pop - r_s / pop2,
        (-p[0] / s2) / r_pop,
        -r_s / pop2,
        0.0,
    ])
}

/// One of the built-in metrics, parameterized by reference-group convention.
///
/// Equal opportunity shares statistical parity's φ and gradient; the only
/// difference is conditioning on label-1 rows, which happens at tabulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuiltinMetric {
    id: MetricId,
    reference: Reference,
}

/// Builds the metric selected by an audit configuration.
pub fn builtin(id: MetricId, reference: Reference) -> BuiltinMetric {
    BuiltinMetric { id, reference }
}

impl Metric for BuiltinMetric {
    fn name(&self) -> &str {
        self.id.as_str()
    }

    fn null_value(&self) -> f64 {
        match self.id {
            MetricId::Sp | MetricId::Eo => 0.0,
            MetricId::Di => 1.0,
        }
    }

    fn conditioning(&self) -> Conditioning {
        match self.id {
            MetricId::Eo => Conditioning::PositivesOnly,
            _ => Conditioning::All,
        }
    }

    fn domain_ok(&self, p: &[f64]) -> bool {
        if p.len() != 4 {
            return false;
        }
        let p_s = p[0] + p[1];
        let p_sbar = p[2] + p[3];
        match (self.id, self.reference) {
            (MetricId::Di, Reference::Complement) => p_s > 0.0 && p_sbar > 0.0 && p[2] > 0.0,
            (MetricId::Di, Reference::WholePopulation) => p_s > 0.0 && p[0] + p[2] > 0.0,
            (_, Reference::Complement) => p_s > 0.0 && p_sbar > 0.0,
            (_, Reference::WholePopulation) => p_s > 0.0,
        }
    }

    fn value(&self, p: &[f64]) -> Result<f64, MetricError> {
        match (self.id, self.reference) {
            (MetricId::Di, Reference::Complement) => di_value(p),
            (MetricId::Di, Reference::WholePopulation) => di_value_whole(p),
            (_, Reference::Complement) => sp_value(p),
            (_, Reference::WholePopulation) => sp_value_whole(p),
        }
    }

    fn gradient(&self, p: &[f64]) -> Result<Vec<f64>, MetricError> {
        match (self.id, self.reference) {
            (MetricId::Di, Reference::Complement) => di_gradient(p),
            (MetricId::Di, Reference::WholePopulation) => di_gradient_whole(p),
            (_, Reference::Complement) => sp_gradient(p),
            (_, Reference::WholePopulation) => sp_gradient_whole(p),
        }
    }
}

/// Restricts a dataset to rows with ground-truth label 1.
///
/// The statistical-parity machinery applied to the filtered rows computes
/// equal opportunity: same φ, same gradient, different population.
pub fn eo_conditioning(dataset: &Dataset) -> Result<Dataset, MetricError> {
    let filtered = dataset.label_positive_rows().ok_or(MetricError::MissingLabels)?;
    if filtered.n_rows() == 0 {
        return Err(MetricError::EmptyConditioned);
    }
    Ok(filtered)
}
