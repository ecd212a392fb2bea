//! Header-first CSV with numeric feature columns and one label column.

use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use super::{DatasetError, LabeledDataset, Result};
use crate::linalg::Matrix;

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads a CSV whose header names `label_column`; every other column must be
/// numeric. Labels are densified in order of first appearance.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<LabeledDataset> {
    read_csv(open(path.as_ref())?, label_column)
}

pub(crate) fn read_csv<R: Read>(reader: R, label_column: &str) -> Result<LabeledDataset> {
    let mut rdr = ::csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(DatasetError::Empty);
    }
    let label_idx = headers
        .iter()
        .position(|h| h.trim() == label_column)
        .ok_or_else(|| DatasetError::UnknownLabelColumn(label_column.to_string()))?;
    let width = headers.len();
    let dim = width - 1;

    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut names: Vec<String> = Vec::new();
    let mut lookup: HashMap<String, usize> = HashMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(DatasetError::RaggedRow {
                line,
                expected: width,
                found: record.len(),
            });
        }
        for (j, field) in record.iter().enumerate() {
            if j == label_idx {
                let name = field.trim().to_string();
                let next = names.len();
                let idx = *lookup.entry(name.clone()).or_insert(next);
                if idx == next {
                    names.push(name);
                }
                labels.push(idx);
            } else {
                let v: f64 = field.trim().parse().map_err(|_| DatasetError::NonNumeric {
                    line,
                    column: headers[j].to_string(),
                    value: field.to_string(),
                })?;
                data.push(v);
            }
        }
    }
    if labels.is_empty() {
        return Err(DatasetError::Empty);
    }
    let features = Matrix::from_row_major(labels.len(), dim, data)?;
    LabeledDataset::new(features, labels, names)
}

/// Writes `f0..f{d-1},label`; floats use the shortest round-trip form.
pub fn save_csv(data: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut w = ::csv::Writer::from_writer(file);
    let mut header: Vec<String> = (0..data.dim()).map(|j| format!("f{j}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for i in 0..data.len() {
        let mut rec: Vec<String> = data.row(i).iter().map(|v| v.to_string()).collect();
        rec.push(data.label_names()[data.labels()[i]].clone());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}
