//! Data ingestion and the imbalanced-stream experimental protocol.

mod csv;
mod idx;
mod protocol;
mod synthetic;

pub use self::csv::{load_csv, save_csv};
pub use self::idx::{encode_idx_images, encode_idx_labels, load_idx, parse_idx_images, parse_idx_labels};
pub use self::protocol::{build_protocol, ProtocolSplit, StreamProtocol, TestSource};
pub use self::synthetic::{fig1_pool, symmetric_pool, FourierFeatures, FIG1_BANDWIDTH, FIG1_FEATURE_DIM};

use std::collections::HashMap;
use std::path::PathBuf;

use thiserror::Error;

use crate::linalg::{LinalgError, Matrix};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{what}: wrong magic number at byte 0: expected {expected:#010x}, found {found:#010x}")]
    WrongMagic { what: &'static str, expected: u32, found: u32 },
    #[error("{what}: truncated at byte offset {offset}: needed {needed} bytes, file has {available}")]
    Truncated {
        what: &'static str,
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("{what}: {extra} unexpected trailing bytes after offset {offset}")]
    TrailingBytes { what: &'static str, offset: usize, extra: usize },
    #[error("image file holds {images} items (count at byte 4) but label file holds {labels} (count at byte 4)")]
    CountMismatch { images: usize, labels: usize },
    #[error("csv: {0}")]
    Csv(#[from] ::csv::Error),
    #[error("csv line {line}: expected {expected} fields, found {found}")]
    RaggedRow { line: u64, expected: usize, found: usize },
    #[error("csv line {line}, column '{column}': '{value}' is not a number")]
    NonNumeric { line: u64, column: String, value: String },
    #[error("label column '{0}' not found in header")]
    UnknownLabelColumn(String),
    #[error("dataset is empty")]
    Empty,
    #[error("class '{class}' has {available} examples but the protocol needs {needed}")]
    Capacity {
        class: String,
        needed: usize,
        available: usize,
    },
    #[error("unknown class '{0}'")]
    UnknownClass(String),
    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T, E = DatasetError> = std::result::Result<T, E>;

/// Feature matrix plus dense zero-based labels and the original label names.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Matrix,
    labels: Vec<usize>,
    label_names: Vec<String>,
}

impl LabeledDataset {
    pub fn new(features: Matrix, labels: Vec<usize>, label_names: Vec<String>) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(DatasetError::Invalid(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= label_names.len()) {
            return Err(DatasetError::Invalid(format!(
                "label index {bad} outside vocabulary of {}",
                label_names.len()
            )));
        }
        Ok(Self {
            features,
            labels,
            label_names,
        })
    }

    pub fn empty(dim: usize, label_names: Vec<String>) -> Self {
        Self {
            features: Matrix::zeros(0, dim),
            labels: Vec::new(),
            label_names,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.label_names.len()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.label_names.iter().position(|n| n == name)
    }

    /// Row indices grouped by class.
    pub fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.num_classes()];
        for (i, &l) in self.labels.iter().enumerate() {
            groups[l].push(i);
        }
        groups
    }

    pub fn class_counts(&self) -> Vec<usize> {
        self.indices_by_class().iter().map(Vec::len).collect()
    }

    /// Rows at `indices`, in that order, same vocabulary.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        let d = self.dim();
        let mut data = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            data.extend_from_slice(self.features.row(i));
        }
        LabeledDataset {
            features: Matrix::from_row_major(indices.len(), d, data).expect("rows come from a valid matrix"),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            label_names: self.label_names.clone(),
        }
    }

    /// Re-expresses the labels in another vocabulary, matching by name.
    pub fn align_to(&self, names: &[String]) -> Result<LabeledDataset> {
        let lookup: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let remap = self
            .label_names
            .iter()
            .map(|n| lookup.get(n.as_str()).copied())
            .collect::<Vec<_>>();
        let mut labels = Vec::with_capacity(self.len());
        for &l in &self.labels {
            match remap[l] {
                Some(m) => labels.push(m),
                None => return Err(DatasetError::UnknownClass(self.label_names[l].clone())),
            }
        }
        Ok(LabeledDataset {
            features: self.features.clone(),
            labels,
            label_names: names.to_vec(),
        })
    }
}

/// Maps dataset class indices to model class indices in order of first
/// arrival, which is what the incremental classifier requires.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ArrivalEncoder {
    forward: HashMap<usize, usize>,
    reverse: Vec<usize>,
}

impl ArrivalEncoder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Model index for `label`, assigning the next free one on first sight.
    pub fn encode(&mut self, label: usize) -> usize {
        let next = self.reverse.len();
        let idx = *self.forward.entry(label).or_insert(next);
        if idx == next {
            self.reverse.push(label);
        }
        idx
    }

    pub fn get(&self, label: usize) -> Option<usize> {
        self.forward.get(&label).copied()
    }

    /// Dataset label for a model index.
    pub fn decode(&self, index: usize) -> Option<usize> {
        self.reverse.get(index).copied()
    }

    pub fn len(&self) -> usize {
        self.reverse.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reverse.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> LabeledDataset {
        let x = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        LabeledDataset::new(x, vec![0, 1, 0], vec!["a".into(), "b".into()]).unwrap()
    }

    #[test]
    fn construction_checks() {
        let x = Matrix::zeros(2, 1);
        assert!(LabeledDataset::new(x.clone(), vec![0], vec!["a".into()]).is_err());
        assert!(LabeledDataset::new(x, vec![0, 1], vec!["a".into()]).is_err());
    }

    #[test]
    fn grouping_and_subset() {
        let d = toy();
        assert_eq!(d.indices_by_class(), vec![vec![0, 2], vec![1]]);
        assert_eq!(d.class_counts(), vec![2, 1]);
        let s = d.subset(&[2, 1]);
        assert_eq!(s.labels(), &[0, 1]);
        assert_eq!(s.row(0), &[5.0, 6.0]);
        assert_eq!(d.class_index("b"), Some(1));
    }

    #[test]
    fn align_by_name() {
        let d = toy();
        let names: Vec<String> = vec!["b".into(), "c".into(), "a".into()];
        let a = d.align_to(&names).unwrap();
        assert_eq!(a.labels(), &[2, 0, 2]);
        assert!(d.align_to(&["a".to_string()]).is_err());
    }

    #[test]
    fn arrival_encoder() {
        let mut e = ArrivalEncoder::new();
        assert_eq!(e.encode(7), 0);
        assert_eq!(e.encode(3), 1);
        assert_eq!(e.encode(7), 0);
        assert_eq!(e.get(3), Some(1));
        assert_eq!(e.get(4), None);
        assert_eq!(e.decode(1), Some(3));
        assert_eq!(e.len(), 2);
    }
}
