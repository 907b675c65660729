//! Immutable audited dataset: categorical protected attributes, binary
//! predictions, optional binary ground-truth labels.
//!
//! Attribute values are interned to small indices at build time and each
//! value domain is sorted, so subgroup matching is integer comparison and
//! enumeration order never depends on row order. A missing protected value
//! excludes the row from both a subgroup and its complement for any spec that
//! conditions on that attribute; such cells are counted as diagnostics.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::sampling::uniform_open;
use crate::seeding::rng_from_seed;

/// Sentinel index for a missing attribute value.
const MISSING: u32 = u32::MAX;

/// Errors constructing or generating datasets.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DatasetError {
    #[error("dataset needs at least one protected attribute")]
    NoAttributes,
    #[error("attribute name must not be empty")]
    EmptyAttributeName,
    #[error("attribute `{0}` declared more than once")]
    DuplicateAttribute(String),
    #[error("row has {got} values for {expected} attributes")]
    RowArityMismatch { expected: usize, got: usize },
    #[error("attribute values must be non-empty (use a missing marker instead)")]
    EmptyValue,
    #[error("either every row carries a label or none does")]
    MixedLabels,
    #[error("positive rate {0} is outside [0, 1]")]
    RateOutOfRange(f64),
    #[error("synthetic group values must be distinct; `{0}` repeats")]
    DuplicateGroupValue(String),
    #[error("synthetic groups must all set a label rate or none")]
    MixedLabelRates,
}

/// Row classification against a subgroup's conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    InGroup,
    InComplement,
    /// A conditioned attribute is missing for this row: the row belongs to
    /// neither the subgroup nor its complement.
    Excluded,
}

#[derive(Debug)]
enum LabelState {
    Undetermined,
    Labeled(Vec<bool>),
    Unlabeled,
}

/// Incremental dataset constructor; validates rows as they arrive.
#[derive(Debug)]
pub struct DatasetBuilder {
    attribute_names: Vec<String>,
    interners: Vec<BTreeMap<String, u32>>,
    domains: Vec<Vec<String>>,
    values: Vec<u32>,
    predictions: Vec<bool>,
    labels: LabelState,
}

impl DatasetBuilder {
    /// Starts a dataset over the given protected attributes.
    pub fn new<I, S>(attribute_names: I) -> Result<Self, DatasetError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let attribute_names: Vec<String> =
            attribute_names.into_iter().map(Into::into).collect();
        if attribute_names.is_empty() {
            return Err(DatasetError::NoAttributes);
        }
        let mut seen = BTreeMap::new();
        for name in &attribute_names {
            if name.is_empty() {
                return Err(DatasetError::EmptyAttributeName);
            }
            if seen.insert(name.clone(), ()).is_some() {
                return Err(DatasetError::DuplicateAttribute(name.clone()));
            }
        }
        let n = attribute_names.len();
        Ok(Self {
            attribute_names,
            interners: alloc::vec![BTreeMap::new(); n],
            domains: alloc::vec![Vec::new(); n],
            values: Vec::new(),
            predictions: Vec::new(),
            labels: LabelState::Undetermined,
        })
    }

    /// Adds a row whose protected values may be missing (`None`).
    pub fn push_row_opt(
        &mut self,
        values: &[Option<&str>],
        prediction: bool,
        label: Option<bool>,
    ) -> Result<(), DatasetError> {
        if values.len() != self.attribute_names.len() {
            return Err(DatasetError::RowArityMismatch {
                expected: self.attribute_names.len(),
                got: values.len(),
            });
        }
        match (&mut self.labels, label) {
            (LabelState::Undetermined, Some(l)) => self.labels = LabelState::Labeled(alloc::vec![l]),
            (LabelState::Undetermined, None) => self.labels = LabelState::Unlabeled,
            (LabelState::Labeled(ls), Some(l)) => ls.push(l),
            (LabelState::Unlabeled, None) => {}
            _ => return Err(DatasetError::MixedLabels),
        }
        for (i, value) in values.iter().enumerate() {
            let index = match value {
                None => MISSING,
                Some("") => return Err(DatasetError::EmptyValue),
                Some(v) => match self.interners[i].get(*v) {
                    Some(&idx) => idx,
                    None => {
                        let idx = self.domains[i].len() as u32;
                        self.interners[i].insert((*v).to_owned(), idx);
                        self.domains[i].push((*v).to_owned());
                        idx
                    }
                },
            };
            self.values.push(index);
        }
        self.predictions.push(prediction);
        Ok(())
    }

    /// Adds a row with every protected value present.
    pub fn push_row(
        &mut self,
        values: &[&str],
        prediction: bool,
        label: Option<bool>,
    ) -> Result<(), DatasetError> {
        let opt: Vec<Option<&str>> = values.iter().map(|v| Some(*v)).collect();
        self.push_row_opt(&opt, prediction, label)
    }

    /// Seals the dataset: sorts each value domain and remaps row indices so
    /// identical row multisets produce identical datasets.
    pub fn finish(self) -> Dataset {
        let n_attrs = self.attribute_names.len();
        let mut domains = self.domains;
        let mut remaps: Vec<Vec<u32>> = Vec::with_capacity(n_attrs);
        for domain in domains.iter_mut() {
            let mut order: Vec<usize> = (0..domain.len()).collect();
            order.sort_by(|&a, &b| domain[a].cmp(&domain[b]));
            let mut remap = alloc::vec![0u32; domain.len()];
            for (new_idx, &old_idx) in order.iter().enumerate() {
                remap[old_idx] = new_idx as u32;
            }
            domain.sort();
            remaps.push(remap);
        }
        let mut values = self.values;
        for (i, v) in values.iter_mut().enumerate() {
            if *v != MISSING {
                *v = remaps[i % n_attrs][*v as usize];
            }
        }
        Dataset {
            attribute_names: self.attribute_names,
            domains,
            values,
            predictions: self.predictions,
            labels: match self.labels {
                LabelState::Labeled(ls) => Some(ls),
                _ => None,
            },
        }
    }
}

/// An immutable dataset ready for auditing.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    attribute_names: Vec<String>,
    /// Per-attribute value domains, lexicographically sorted.
    domains: Vec<Vec<String>>,
    /// Row-major interned values, stride = attribute count.
    values: Vec<u32>,
    predictions: Vec<bool>,
    labels: Option<Vec<bool>>,
}

impl Dataset {
    pub fn n_rows(&self) -> usize {
        self.predictions.len()
    }

    pub fn attribute_names(&self) -> &[String] {
        &self.attribute_names
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attribute_names.iter().position(|n| n == name)
    }

    /// Sorted value domain of one attribute.
    pub fn domain(&self, attribute: usize) -> &[String] {
        &self.domains[attribute]
    }

    /// Index of `value` within an attribute's sorted domain.
    pub fn value_index(&self, attribute: usize, value: &str) -> Option<u32> {
        self.domains[attribute]
            .binary_search_by(|v| v.as_str().cmp(value))
            .ok()
            .map(|i| i as u32)
    }

    /// A row's value for one attribute, `None` when missing.
    pub fn value_of(&self, row: usize, attribute: usize) -> Option<&str> {
        self.interned_value(row, attribute)
            .map(|idx| self.domains[attribute][idx as usize].as_str())
    }

    /// A row's interned value index for one attribute, `None` when missing.
    pub fn interned_value(&self, row: usize, attribute: usize) -> Option<u32> {
        let idx = self.values[row * self.attribute_names.len() + attribute];
        if idx == MISSING {
            None
        } else {
            Some(idx)
        }
    }

    pub fn prediction(&self, row: usize) -> bool {
        self.predictions[row]
    }

    pub fn has_labels(&self) -> bool {
        self.labels.is_some()
    }

    pub fn label(&self, row: usize) -> Option<bool> {
        self.labels.as_ref().map(|ls| ls[row])
    }

    /// Classifies a row against interned (attribute, value-index) conditions.
    pub fn membership(&self, row: usize, conditions: &[(usize, u32)]) -> Membership {
        let stride = self.attribute_names.len();
        let mut all_match = true;
        for &(attr, value) in conditions {
            let actual = self.values[row * stride + attr];
            if actual == MISSING {
                return Membership::Excluded;
            }
            if actual != value {
                all_match = false;
            }
        }
        if all_match {
            Membership::InGroup
        } else {
            Membership::InComplement
        }
    }

    /// Number of missing protected-value cells across all rows.
    pub fn missing_cells(&self) -> u64 {
        self.values.iter().filter(|&&v| v == MISSING).count() as u64
    }

    /// The label-1 subpopulation, preserving attribute domains; `None` when
    /// the dataset carries no labels.
    pub fn label_positive_rows(&self) -> Option<Dataset> {
        let labels = self.labels.as_ref()?;
        let stride = self.attribute_names.len();
        let mut values = Vec::new();
        let mut predictions = Vec::new();
        let mut kept_labels = Vec::new();
        for (row, &label) in labels.iter().enumerate() {
            if label {
                values.extend_from_slice(&self.values[row * stride..(row + 1) * stride]);
                predictions.push(self.predictions[row]);
                kept_labels.push(true);
            }
        }
        Some(Dataset {
            attribute_names: self.attribute_names.clone(),
            domains: self.domains.clone(),
            values,
            predictions,
            labels: Some(kept_labels),
        })
    }
}

/// One synthetic subgroup: a value of the synthetic attribute, its size, and
/// its Bernoulli prediction rate (and, optionally, ground-truth label rate).
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSpec {
    pub value: String,
    pub size: u64,
    pub positive_rate: f64,
    pub label_rate: Option<f64>,
}

impl GroupSpec {
    pub fn new(value: impl Into<String>, size: u64, positive_rate: f64) -> Self {
        Self { value: value.into(), size, positive_rate, label_rate: None }
    }
}

/// Blueprint for a synthetic dataset over one protected attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub attribute: String,
    pub groups: Vec<GroupSpec>,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.attribute.is_empty() {
            return Err(DatasetError::EmptyAttributeName);
        }
        let mut seen = BTreeMap::new();
        let mut labeled = None;
        for group in &self.groups {
            if group.value.is_empty() {
                return Err(DatasetError::EmptyValue);
            }
            if seen.insert(group.value.clone(), ()).is_some() {
                return Err(DatasetError::DuplicateGroupValue(group.value.clone()));
            }
            for rate in core::iter::once(group.positive_rate).chain(group.label_rate) {
                if !(0.0..=1.0).contains(&rate) || !rate.is_finite() {
                    return Err(DatasetError::RateOutOfRange(rate));
                }
            }
            let has_label = group.label_rate.is_some();
            match labeled {
                None => labeled = Some(has_label),
                Some(l) if l != has_label => return Err(DatasetError::MixedLabelRates),
                _ => {}
            }
        }
        Ok(())
    }
}

/// Draws a dataset from a [`SyntheticSpec`]: rows appear group by group, each
/// prediction an independent Bernoulli draw from one ChaCha stream seeded by
/// the spec. Identical specs produce identical datasets.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset, DatasetError> {
    spec.validate()?;
    let mut builder = DatasetBuilder::new([spec.attribute.clone()])?;
    let mut rng = rng_from_seed(spec.seed);
    for group in &spec.groups {
        for _ in 0..group.size {
            let prediction = uniform_open(&mut rng) < group.positive_rate;
            let label = group.label_rate.map(|r| uniform_open(&mut rng) < r);
            builder.push_row(&[group.value.as_str()], prediction, label)?;
        }
    }
    Ok(builder.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn toy() -> Dataset {
        let mut b = DatasetBuilder::new(["sex", "age"]).unwrap();
        b.push_row(&["M", "young"], true, Some(true)).unwrap();
        b.push_row(&["F", "young"], false, Some(false)).unwrap();
        b.push_row(&["F", "old"], true, Some(true)).unwrap();
        b.push_row(&["M", "old"], false, Some(true)).unwrap();
        b.finish()
    }

    #[test]
    fn domains_are_sorted_regardless_of_arrival_order() {
        let ds = toy();
        assert_eq!(ds.domain(0), ["F", "M"]);
        assert_eq!(ds.domain(1), ["old", "young"]);
        assert_eq!(ds.value_of(0, 0), Some("M"));
        assert_eq!(ds.value_of(1, 0), Some("F"));
        assert_eq!(ds.value_of(3, 1), Some("old"));
    }

    #[test]
    fn membership_classification() {
        let ds = toy();
        let sex = ds.attribute_index("sex").unwrap();
        let f = ds.value_index(sex, "F").unwrap();
        assert_eq!(ds.membership(0, &[(sex, f)]), Membership::InComplement);
        assert_eq!(ds.membership(1, &[(sex, f)]), Membership::InGroup);
    }

    #[test]
    fn missing_values_exclude_rows_and_are_counted() {
        let mut b = DatasetBuilder::new(["sex"]).unwrap();
        b.push_row_opt(&[Some("F")], true, None).unwrap();
        b.push_row_opt(&[None], true, None).unwrap();
        let ds = b.finish();
        assert_eq!(ds.missing_cells(), 1);
        let f = ds.value_index(0, "F").unwrap();
        assert_eq!(ds.membership(1, &[(0, f)]), Membership::Excluded);
        assert_eq!(ds.value_of(1, 0), None);
    }

    #[test]
    fn label_filter_keeps_positive_rows_and_domains() {
        let ds = toy();
        let positives = ds.label_positive_rows().unwrap();
        assert_eq!(positives.n_rows(), 3);
        assert_eq!(positives.domain(0), ["F", "M"]);
        for row in 0..positives.n_rows() {
            assert_eq!(positives.label(row), Some(true));
        }
    }

    #[test]
    fn unlabeled_dataset_has_no_positive_subset() {
        let mut b = DatasetBuilder::new(["sex"]).unwrap();
        b.push_row(&["F"], true, None).unwrap();
        let ds = b.finish();
        assert!(!ds.has_labels());
        assert!(ds.label_positive_rows().is_none());
    }

    #[test]
    fn mixed_labels_are_rejected() {
        let mut b = DatasetBuilder::new(["sex"]).unwrap();
        b.push_row(&["F"], true, Some(true)).unwrap();
        assert_eq!(
            b.push_row(&["M"], false, None).unwrap_err(),
            DatasetError::MixedLabels
        );
    }

    #[test]
    fn row_arity_is_checked() {
        let mut b = DatasetBuilder::new(["sex", "age"]).unwrap();
        assert_eq!(
            b.push_row(&["F"], true, None).unwrap_err(),
            DatasetError::RowArityMismatch { expected: 2, got: 1 }
        );
    }

    #[test]
    fn duplicate_attribute_names_are_rejected() {
        assert_eq!(
            DatasetBuilder::new(["sex", "sex"]).unwrap_err(),
            DatasetError::DuplicateAttribute("sex".into())
        );
    }

    #[test]
    fn row_order_does_not_change_interned_form() {
        let build = |order: &[usize]| {
            let rows = [("M", true), ("F", false), ("F", true)];
            let mut b = DatasetBuilder::new(["sex"]).unwrap();
            for &i in order {
                b.push_row(&[rows[i].0], rows[i].1, None).unwrap();
            }
            b.finish()
        };
        let a = build(&[0, 1, 2]);
        let b = build(&[2, 1, 0]);
        // Same multiset of rows → same domains and same per-value indices.
        assert_eq!(a.domain(0), b.domain(0));
        assert_eq!(a.value_index(0, "F"), b.value_index(0, "F"));
    }

    #[test]
    fn synthetic_rate_converges() {
        let spec = SyntheticSpec {
            attribute: "g".into(),
            groups: vec![GroupSpec::new("a", 100_000, 0.5)],
            seed: 1,
        };
        let ds = generate_synthetic(&spec).unwrap();
        let positives = (0..ds.n_rows()).filter(|&r| ds.prediction(r)).count();
        let rate = positives as f64 / ds.n_rows() as f64;
        assert!((rate - 0.5).abs() < 0.006, "rate {rate}");
    }

    #[test]
    fn synthetic_zero_sizes_give_empty_dataset() {
        let spec = SyntheticSpec {
            attribute: "g".into(),
            groups: vec![GroupSpec::new("a", 0, 0.5), GroupSpec::new("b", 0, 0.1)],
            seed: 1,
        };
        assert_eq!(generate_synthetic(&spec).unwrap().n_rows(), 0);
    }

    #[test]
    fn synthetic_is_deterministic() {
        let spec = SyntheticSpec {
            attribute: "g".into(),
            groups: vec![GroupSpec::new("a", 500, 0.3), GroupSpec::new("b", 500, 0.7)],
            seed: 99,
        };
        assert_eq!(generate_synthetic(&spec).unwrap(), generate_synthetic(&spec).unwrap());
    }

    #[test]
    fn synthetic_rejects_bad_rates_and_duplicates() {
        let bad_rate = SyntheticSpec {
            attribute: "g".into(),
            groups: vec![GroupSpec::new("a", 10, 1.5)],
            seed: 0,
        };
        assert_eq!(bad_rate.validate().unwrap_err(), DatasetError::RateOutOfRange(1.5));
        let dup = SyntheticSpec {
            attribute: "g".into(),
            groups: vec![GroupSpec::new("a", 10, 0.5), GroupSpec::new("a", 10, 0.5)],
            seed: 0,
        };
        assert_eq!(dup.validate().unwrap_err(), DatasetError::DuplicateGroupValue("a".into()));
    }

    #[test]
    fn synthetic_labels_are_all_or_none() {
        let mixed = SyntheticSpec {
            attribute: "g".into(),
            groups: vec![
                GroupSpec { label_rate: Some(0.5), ..GroupSpec::new("a", 10, 0.5) },
                GroupSpec::new("b", 10, 0.5),
            ],
            seed: 0,
        };
        assert_eq!(mixed.validate().unwrap_err(), DatasetError::MixedLabelRates);
    }
}
