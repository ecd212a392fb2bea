use std::path::{Path, PathBuf};

use irlsc::bayes_oracle::GaussianClasses;
use irlsc::datasets::{load_csv, load_idx, FourierFeatures, LabeledDataset};

use crate::{runtime, usage, CliError, DataArgs};

#[derive(Debug, Clone)]
pub enum Source {
    Fig1 { gamma: f64 },
    Idx { images: PathBuf, labels: PathBuf },
    Csv { path: PathBuf, label_column: String },
}

pub fn check_file(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("input file not found: {}", path.display())))
    }
}

pub fn check_gamma(g: f64) -> Result<(), CliError> {
    if g > 0.0 && g < 1.0 {
        Ok(())
    } else {
        Err(usage(format!("--gamma must lie strictly between 0 and 1, got {g}")))
    }
}

impl DataArgs {
    /// Validates the flags. Files are checked separately by [`Source::check_files`].
    pub fn source(&self) -> Result<Source, CliError> {
        let given = [self.synthetic.is_some(), self.idx_images.is_some() || self.idx_labels.is_some(), self.csv.is_some()];
        match given.iter().filter(|&&g| g).count() {
            0 => return Err(usage("one of --synthetic, --idx-images/--idx-labels or --csv is required")),
            1 => {}
            _ => return Err(usage("--synthetic, --idx-* and --csv are mutually exclusive")),
        }
        if self.synthetic.is_some() {
            check_gamma(self.gamma)?;
            return Ok(Source::Fig1 { gamma: self.gamma });
        }
        if let Some(path) = &self.csv {
            return Ok(Source::Csv {
                path: path.clone(),
                label_column: self.label_column.clone(),
            });
        }
        match (&self.idx_images, &self.idx_labels) {
            (Some(images), Some(labels)) => Ok(Source::Idx {
                images: images.clone(),
                labels: labels.clone(),
            }),
            _ => Err(usage("--idx-images and --idx-labels must be given together")),
        }
    }
}

impl Source {
    pub fn check_files(&self) -> Result<(), CliError> {
        match self {
            Source::Fig1 { .. } => Ok(()),
            Source::Idx { images, labels } => {
                check_file(images)?;
                check_file(labels)
            }
            Source::Csv { path, .. } => check_file(path),
        }
    }

    pub fn is_synthetic(&self) -> bool {
        matches!(self, Source::Fig1 { .. })
    }

    /// Loads file sources; the built-in task draws `n_synthetic` examples.
    pub fn load(&self, n_synthetic: usize, seed: u64) -> Result<LabeledDataset, CliError> {
        match self {
            Source::Fig1 { gamma } => {
                let classes = GaussianClasses::fig1(*gamma).map_err(|e| usage(e.to_string()))?;
                FourierFeatures::fig1()
                    .map_dataset(&classes.sample(n_synthetic, seed))
                    .map_err(runtime)
            }
            Source::Idx { images, labels } => load_idx(images, labels).map_err(runtime),
            Source::Csv { path, label_column } => load_csv(path, label_column).map_err(runtime),
        }
    }
}
