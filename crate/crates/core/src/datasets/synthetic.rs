//! Synthetic Gaussian tasks lifted through random Fourier features.
//!
//! A linear model on raw 2-D coordinates cannot follow the curved Bayes
//! boundary of unequal-variance Gaussians, so the built-in tasks map inputs
//! through `z(x) = sqrt(2/D) cos(Ωx/h + φ)` first. The map is fixed by its
//! seed and is part of the task definition.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{DatasetError, LabeledDataset, Result};
use crate::bayes_oracle::{GaussianClassSpec, GaussianClasses};
use crate::linalg::Matrix;

pub const FIG1_FEATURE_DIM: usize = 64;
pub const FIG1_BANDWIDTH: f64 = 0.5;
const FIG1_FEATURE_SEED: u64 = 0x5EEDF161;

#[derive(Debug, Clone, PartialEq)]
pub struct FourierFeatures {
    input_dim: usize,
    /// `D × input_dim`, already divided by the bandwidth.
    omega: Matrix,
    phase: Vec<f64>,
}

impl FourierFeatures {
    pub fn new(input_dim: usize, output_dim: usize, bandwidth: f64, seed: u64) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 {
            return Err(DatasetError::Invalid("feature map dimensions must be positive".into()));
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(DatasetError::Invalid(format!("bandwidth must be positive, got {bandwidth}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = Vec::with_capacity(output_dim * input_dim);
        for _ in 0..output_dim * input_dim {
            let z: f64 = rng.sample(StandardNormal);
            w.push(z / bandwidth);
        }
        let phase = (0..output_dim)
            .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
            .collect();
        Ok(Self {
            input_dim,
            omega: Matrix::from_row_major(output_dim, input_dim, w)?,
            phase,
        })
    }

    /// The map used by the built-in two-Gaussian task.
    pub fn fig1() -> Self {
        Self::new(2, FIG1_FEATURE_DIM, FIG1_BANDWIDTH, FIG1_FEATURE_SEED).expect("constants are valid")
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.phase.len()
    }

    pub fn map(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.input_dim, "input dimension");
        let scale = (2.0 / self.output_dim() as f64).sqrt();
        self.omega
            .mul_vec(x)
            .expect("dimension checked")
            .iter()
            .zip(&self.phase)
            .map(|(v, p)| scale * (v + p).cos())
            .collect()
    }

    pub fn map_dataset(&self, data: &LabeledDataset) -> Result<LabeledDataset> {
        if data.dim() != self.input_dim {
            return Err(DatasetError::Invalid(format!(
                "feature map expects dimension {}, data has {}",
                self.input_dim,
                data.dim()
            )));
        }
        let mut out = Vec::with_capacity(data.len() * self.output_dim());
        for i in 0..data.len() {
            out.extend(self.map(data.row(i)));
        }
        LabeledDataset::new(
            Matrix::from_row_major(data.len(), self.output_dim(), out)?,
            data.labels().to_vec(),
            data.label_names().to_vec(),
        )
    }
}

/// Draws from `classes` until every class has `per_class_min` examples,
/// then lifts with `features`. Raw coordinates are returned alongside.
fn gaussian_pool(
    classes: &GaussianClasses,
    per_class_min: usize,
    features: &FourierFeatures,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let t = classes.specs().len();
    let mut chunk = (per_class_min * t).max(64);
    let mut round = 0u64;
    loop {
        let raw = classes.sample(chunk, seed.wrapping_add(round));
        if raw.class_counts().iter().all(|&c| c >= per_class_min) {
            let lifted = features.map_dataset(&raw)?;
            return Ok((raw, lifted));
        }
        chunk *= 2;
        round += 1;
        if round > 40 {
            return Err(DatasetError::Invalid("could not fill every class".into()));
        }
    }
}

/// Pool for the two-Gaussian task with `prior(+1) = gamma`, lifted by
/// [`FourierFeatures::fig1`]. Class names are `"1"` and `"-1"`.
///
/// Returns `(raw 2-D points, lifted features)` with identical labels.
pub fn fig1_pool(gamma: f64, per_class_min: usize, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    let classes = GaussianClasses::fig1(gamma).map_err(|e| DatasetError::Invalid(e.to_string()))?;
    gaussian_pool(&classes, per_class_min, &FourierFeatures::fig1(), seed)
}

/// `num_classes` equal-variance Gaussians evenly spaced on a circle with
/// equal priors, so every class has the same geometry up to rotation.
pub fn symmetric_pool(num_classes: usize, per_class_min: usize, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    if num_classes < 2 {
        return Err(DatasetError::Invalid("need at least two classes".into()));
    }
    let specs = (0..num_classes)
        .map(|c| {
            let a = std::f64::consts::TAU * c as f64 / num_classes as f64;
            GaussianClassSpec::new(
                c as i64,
                vec![1.5 * a.cos(), 1.5 * a.sin()],
                0.6,
                1.0 / num_classes as f64,
            )
        })
        .collect::<std::result::Result<Vec<_>, _>>()
        .and_then(GaussianClasses::new)
        .map_err(|e| DatasetError::Invalid(e.to_string()))?;
    gaussian_pool(&specs, per_class_min, &FourierFeatures::fig1(), seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_map_shape_and_determinism() {
        let f = FourierFeatures::fig1();
        assert_eq!(f, FourierFeatures::fig1());
        let z = f.map(&[0.3, -0.2]);
        assert_eq!(z.len(), FIG1_FEATURE_DIM);
        let bound = (2.0 / FIG1_FEATURE_DIM as f64).sqrt();
        assert!(z.iter().all(|v| v.abs() <= bound + 1e-15));
        assert!(FourierFeatures::new(2, 8, 0.0, 1).is_err());
    }

    #[test]
    fn kernel_approximation() {
        // E[z(x)·z(y)] = exp(-|x-y|²/2h²)
        let f = FourierFeatures::new(2, 4000, 1.0, 3).unwrap();
        let (x, y) = ([0.2, 0.1], [0.9, -0.4]);
        let dot: f64 = f.map(&x).iter().zip(f.map(&y)).map(|(a, b)| a * b).sum();
        let expected = (-(0.49f64 + 0.25) / 2.0).exp();
        assert!((dot - expected).abs() < 0.05, "{dot} vs {expected}");
    }

    #[test]
    fn pools() {
        let (raw, lifted) = fig1_pool(0.9, 30, 4).unwrap();
        assert!(raw.class_counts().iter().all(|&c| c >= 30));
        assert_eq!(raw.labels(), lifted.labels());
        assert_eq!(lifted.dim(), FIG1_FEATURE_DIM);
        assert_eq!(lifted.label_names(), &["1".to_string(), "-1".to_string()]);
        let (raw, _) = symmetric_pool(3, 20, 1).unwrap();
        assert_eq!(raw.num_classes(), 3);
        assert!(symmetric_pool(1, 5, 0).is_err());
    }
}
