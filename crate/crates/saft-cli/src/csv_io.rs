//! CSV dataset ingestion and emission.
//!
//! Predictions and labels are strictly "0"/"1" — no coercion of other
//! truthy spellings, since silently reinterpreting them would corrupt an
//! audit. Missing protected values are allowed: the row is excluded from
//! every test on that attribute and counted in the dataset digest.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use saft_core::dataset::{Dataset, DatasetBuilder, DatasetError};

use crate::config::SchemaSection;

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error("cannot open {path}: {source}")]
    Open {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: file has no data rows")]
    EmptyFile { path: String },
    #[error("column {0:?} not found in CSV header")]
    MissingColumn(String),
    #[error("line {line}: prediction must be \"0\" or \"1\", got {value:?}")]
    BadPredictionValue { line: u64, value: String },
    #[error("line {line}: label must be \"0\" or \"1\", got {value:?}")]
    BadLabelValue { line: u64, value: String },
    #[error("line {line}: row has {got} fields, header has {expected}")]
    RaggedRow { line: u64, got: usize, expected: usize },
    #[error("CSV read error: {0}")]
    Read(#[from] csv::Error),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
}

fn parse_bit(field: &str, line: u64, is_label: bool) -> Result<bool, CsvError> {
    match field {
        "0" => Ok(false),
        "1" => Ok(true),
        other => {
            let value = other.to_string();
            Err(if is_label {
                CsvError::BadLabelValue { line, value }
            } else {
                CsvError::BadPredictionValue { line, value }
            })
        }
    }
}

/// Loads a prediction dataset per the schema. Row diagnostics use 1-based
/// file line numbers (the header is line 1).
pub fn load_csv(path: &Path, schema: &SchemaSection) -> Result<Dataset, CsvError> {
    let file = File::open(path).map_err(|source| CsvError::Open {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(BufReader::new(file));

    let headers = reader.headers()?.clone();
    let column = |name: &str| -> Result<usize, CsvError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CsvError::MissingColumn(name.to_string()))
    };
    let prediction_col = column(&schema.prediction_column)?;
    let label_col = match &schema.label_column {
        Some(name) => Some(column(name)?),
        None => None,
    };
    let protected_cols = schema
        .protected_columns
        .iter()
        .map(|name| column(name))
        .collect::<Result<Vec<_>, _>>()?;

    let mut builder = DatasetBuilder::new(schema.protected_columns.iter().cloned())?;
    let mut rows = 0usize;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != headers.len() {
            return Err(CsvError::RaggedRow {
                line,
                got: record.len(),
                expected: headers.len(),
            });
        }
        let prediction = parse_bit(&record[prediction_col], line, false)?;
        let label = match label_col {
            Some(col) => Some(parse_bit(&record[col], line, true)?),
            None => None,
        };
        let values: Vec<Option<&str>> = protected_cols
            .iter()
            .map(|&col| {
                let field = &record[col];
                if field.is_empty() { None } else { Some(field) }
            })
            .collect();
        builder.push_row_opt(&values, prediction, label)?;
        rows += 1;
    }
    if rows == 0 {
        return Err(CsvError::EmptyFile { path: path.display().to_string() });
    }
    Ok(builder.finish())
}

/// Writes a dataset as CSV: protected attributes in dataset order, then
/// `prediction`, then `label` when present. Missing values become empty
/// fields. Unix newlines; bytes are identical across runs.
pub fn write_dataset_csv<W: Write>(dataset: &Dataset, out: W) -> Result<(), csv::Error> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let mut header: Vec<String> = dataset.attribute_names().to_vec();
    header.push("prediction".to_string());
    if dataset.has_labels() {
        header.push("label".to_string());
    }
    writer.write_record(&header)?;
    let n_attrs = dataset.attribute_names().len();
    for row in 0..dataset.n_rows() {
        let mut record: Vec<String> = Vec::with_capacity(header.len());
        for attr in 0..n_attrs {
            record.push(dataset.value_of(row, attr).unwrap_or("").to_string());
        }
        record.push(if dataset.prediction(row) { "1" } else { "0" }.to_string());
        if dataset.has_labels() {
            let bit = dataset.label(row).expect("labeled dataset has every label");
            record.push(if bit { "1" } else { "0" }.to_string());
        }
        writer.write_record(&record)?;
    }
    writer.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// [`write_dataset_csv`] to a file path.
pub fn write_dataset_file(dataset: &Dataset, path: &Path) -> Result<(), CsvError> {
    let file = File::create(path).map_err(|source| CsvError::Write {
        path: path.display().to_string(),
        source,
    })?;
    let writer = BufWriter::new(file);
    write_dataset_csv(dataset, writer).map_err(CsvError::from)
}
