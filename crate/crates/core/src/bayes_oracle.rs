//! Analytic ground truth for Gaussian class-conditional problems.
//!
//! Each class is an isotropic Gaussian `N(μ, σ² I)` with a prior. From these
//! we get the optimal Bayes rule, its rebalanced counterpart (weights
//! `w(t) = 1 / prior(t)`, which cancels the priors), and the population
//! minimizers of the plain, weighted and coded square losses for the binary
//! `±1` case. All comparisons happen in log space.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::datasets::LabeledDataset;
use crate::linalg::Matrix;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("sigma must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error("prior must lie in (0, 1), got {0}")]
    InvalidPrior(f64),
    #[error("priors sum to {0}, not 1")]
    PriorsDoNotSumToOne(f64),
    #[error("class means have different dimensions")]
    MixedDimensions,
    #[error("at least {0} classes are required")]
    TooFewClasses(usize),
    #[error("expected a point of dimension {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("binary scores need exactly two classes labelled +1 and -1")]
    NotBinary,
    #[error("weights must be positive, one per class")]
    InvalidWeights,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = OracleError> = std::result::Result<T, E>;

const PRIOR_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianClassSpec {
    pub label: i64,
    pub mean: Vec<f64>,
    pub sigma: f64,
    pub prior: f64,
}

impl GaussianClassSpec {
    pub fn new(label: i64, mean: Vec<f64>, sigma: f64, prior: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(OracleError::InvalidSigma(sigma));
        }
        if !(prior > 0.0 && prior < 1.0) {
            return Err(OracleError::InvalidPrior(prior));
        }
        Ok(Self {
            label,
            mean,
            sigma,
            prior,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let sq: f64 = x.iter().zip(&self.mean).map(|(a, m)| (a - m) * (a - m)).sum();
        let var = self.sigma * self.sigma;
        -0.5 * self.dim() as f64 * (2.0 * PI * var).ln() - sq / (2.0 * var)
    }

    /// `(2πσ²)^{-d/2} exp(-‖x-μ‖² / 2σ²)`.
    pub fn density(&self, x: &[f64]) -> f64 {
        self.log_density(x).exp()
    }
}

/// Per-class positive weights, aligned with the class order of a [`GaussianClasses`].
#[derive(Debug, Clone, PartialEq)]
pub struct ClassWeights(Vec<f64>);

impl ClassWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(OracleError::InvalidWeights);
        }
        Ok(Self(weights))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    /// `w(t) = 1 / prior(t)`.
    pub fn inverse_priors(classes: &GaussianClasses) -> Self {
        Self(classes.specs.iter().map(|s| 1.0 / s.prior).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Which decision rule a boundary grid evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecisionRule {
    Standard,
    Rebalanced,
}

/// Axis-aligned 2-D box sampled at cell centres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRegion {
    pub x1: (f64, f64),
    pub x2: (f64, f64),
    pub resolution: (usize, usize),
}

impl GridRegion {
    pub fn square(lo: f64, hi: f64, resolution: usize) -> Self {
        Self {
            x1: (lo, hi),
            x2: (lo, hi),
            resolution: (resolution, resolution),
        }
    }

    fn validate(&self) -> Result<()> {
        let (n1, n2) = self.resolution;
        if n1 == 0 || n2 == 0 {
            return Err(OracleError::InvalidGrid("resolution must be positive".into()));
        }
        if !(self.x1.0 < self.x1.1 && self.x2.0 < self.x2.1) {
            return Err(OracleError::InvalidGrid("box bounds must be increasing".into()));
        }
        Ok(())
    }

    pub fn cell_width(&self) -> (f64, f64) {
        (
            (self.x1.1 - self.x1.0) / self.resolution.0 as f64,
            (self.x2.1 - self.x2.0) / self.resolution.1 as f64,
        )
    }

    /// Cell centres, row-major with `x2` as the slow axis.
    pub fn points(&self) -> Vec<[f64; 2]> {
        let (w1, w2) = self.cell_width();
        let (n1, n2) = self.resolution;
        let mut pts = Vec::with_capacity(n1 * n2);
        for r in 0..n2 {
            let b = self.x2.0 + (r as f64 + 0.5) * w2;
            for c in 0..n1 {
                pts.push([self.x1.0 + (c as f64 + 0.5) * w1, b]);
            }
        }
        pts
    }
}

/// Labels of every grid cell under one rule.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelGrid {
    pub region: GridRegion,
    pub points: Vec<[f64; 2]>,
    pub labels: Vec<i64>,
}

impl LabelGrid {
    /// Fraction of cells whose labels differ from `other`'s.
    pub fn disagreement(&self, other: &LabelGrid) -> f64 {
        let diff = self.labels.iter().zip(&other.labels).filter(|(a, b)| a != b).count();
        diff as f64 / self.labels.len().max(1) as f64
    }
}

/// A validated list of class specs.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianClasses {
    specs: Vec<GaussianClassSpec>,
}

impl GaussianClasses {
    pub fn new(specs: Vec<GaussianClassSpec>) -> Result<Self> {
        if specs.is_empty() {
            return Err(OracleError::TooFewClasses(1));
        }
        let dim = specs[0].dim();
        if specs.iter().any(|s| s.dim() != dim) {
            return Err(OracleError::MixedDimensions);
        }
        let total: f64 = specs.iter().map(|s| s.prior).sum();
        if (total - 1.0).abs() > PRIOR_SUM_TOLERANCE {
            return Err(OracleError::PriorsDoNotSumToOne(total));
        }
        Ok(Self { specs })
    }

    /// The two-Gaussian problem with `μ₁ = (-1, 0)`, `σ₁ = 1`, `μ₋₁ = (1, 0)`,
    /// `σ₋₁ = 0.3` and `prior(+1) = gamma`.
    pub fn fig1(gamma: f64) -> Result<Self> {
        Self::new(vec![
            GaussianClassSpec::new(1, vec![-1.0, 0.0], 1.0, gamma)?,
            GaussianClassSpec::new(-1, vec![1.0, 0.0], 0.3, 1.0 - gamma)?,
        ])
    }

    /// Same class-conditionals, new priors (class order).
    pub fn with_priors(&self, priors: &[f64]) -> Result<Self> {
        if priors.len() != self.specs.len() {
            return Err(OracleError::InvalidWeights);
        }
        let specs = self
            .specs
            .iter()
            .zip(priors)
            .map(|(s, &p)| GaussianClassSpec::new(s.label, s.mean.clone(), s.sigma, p))
            .collect::<Result<Vec<_>>>()?;
        Self::new(specs)
    }

    pub fn specs(&self) -> &[GaussianClassSpec] {
        &self.specs
    }

    pub fn dim(&self) -> usize {
        self.specs[0].dim()
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(OracleError::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    fn argmax_by(&self, x: &[f64], score: impl Fn(&GaussianClassSpec) -> f64) -> Result<i64> {
        if self.specs.len() < 2 {
            return Err(OracleError::TooFewClasses(2));
        }
        self.check_point(x)?;
        let mut best = (0, f64::NEG_INFINITY);
        for (i, s) in self.specs.iter().enumerate() {
            let v = score(s);
            if v > best.1 {
                best = (i, v);
            }
        }
        Ok(self.specs[best.0].label)
    }

    /// Optimal Bayes rule: `argmax_t prior(t)·ρ(x|t)`; ties go to the
    /// earliest spec.
    pub fn bayes_classify(&self, x: &[f64]) -> Result<i64> {
        self.argmax_by(x, |s| s.prior.ln() + s.log_density(x))
    }

    /// Rebalanced rule with `w(t) = 1/prior(t)`: `argmax_t ρ(x|t)`.
    pub fn rebalanced_bayes_classify(&self, x: &[f64]) -> Result<i64> {
        self.argmax_by(x, |s| s.log_density(x))
    }

    pub fn classify(&self, x: &[f64], rule: DecisionRule) -> Result<i64> {
        match rule {
            DecisionRule::Standard => self.bayes_classify(x),
            DecisionRule::Rebalanced => self.rebalanced_bayes_classify(x),
        }
    }

    /// Posterior probabilities in class order, via log-sum-exp.
    pub fn posteriors(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let logs: Vec<f64> = self.specs.iter().map(|s| s.prior.ln() + s.log_density(x)).collect();
        let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = logs.iter().map(|l| (l - m).exp()).sum();
        Ok(logs.iter().map(|l| (l - m).exp() / z).collect())
    }

    fn binary_positions(&self) -> Result<(usize, usize)> {
        if self.specs.len() != 2 {
            return Err(OracleError::NotBinary);
        }
        let pos = self.specs.iter().position(|s| s.label == 1);
        let neg = self.specs.iter().position(|s| s.label == -1);
        match (pos, neg) {
            (Some(p), Some(n)) => Ok((p, n)),
            _ => Err(OracleError::NotBinary),
        }
    }

    /// Minimizer of the population square loss with `±1` targets:
    /// `ρ(1|x) - ρ(-1|x)`.
    pub fn population_ls_score(&self, x: &[f64]) -> Result<f64> {
        let (p, n) = self.binary_positions()?;
        let post = self.posteriors(x)?;
        Ok(post[p] - post[n])
    }

    /// Minimizer of the class-weighted square loss:
    /// `(ρ(1|x)w(1) - ρ(-1|x)w(-1)) / (ρ(1|x)w(1) + ρ(-1|x)w(-1))`.
    pub fn population_weighted_ls_score(&self, weights: &ClassWeights, x: &[f64]) -> Result<f64> {
        let (p, n) = self.binary_positions()?;
        if weights.0.len() != 2 {
            return Err(OracleError::InvalidWeights);
        }
        let post = self.posteriors(x)?;
        let a = post[p] * weights.0[p];
        let b = post[n] * weights.0[n];
        Ok((a - b) / (a + b))
    }

    /// Minimizer of the square loss with coded targets `c(1)`, `-c(-1)`:
    /// `c(1)ρ(1|x) - c(-1)ρ(-1|x)`.
    pub fn population_coded_ls_score(&self, coding: &ClassWeights, x: &[f64]) -> Result<f64> {
        let (p, n) = self.binary_positions()?;
        if coding.0.len() != 2 {
            return Err(OracleError::InvalidWeights);
        }
        let post = self.posteriors(x)?;
        Ok(coding.0[p] * post[p] - coding.0[n] * post[n])
    }

    /// `n` i.i.d. draws; label by prior, then `x ~ N(μ, σ² I)`.
    ///
    /// Dense labels follow class order and the label names are the class labels.
    pub fn sample(&self, n: usize, seed: u64) -> LabeledDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = self.dim();
        let mut data = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut class = self.specs.len() - 1;
            for (i, s) in self.specs.iter().enumerate() {
                acc += s.prior;
                if u < acc {
                    class = i;
                    break;
                }
            }
            let spec = &self.specs[class];
            for &m in &spec.mean {
                let z: f64 = rng.sample(StandardNormal);
                data.push(m + spec.sigma * z);
            }
            labels.push(class);
        }
        let names = self.specs.iter().map(|s| s.label.to_string()).collect();
        LabeledDataset::new(
            Matrix::from_row_major(n, d, data).expect("gaussian draws are finite"),
            labels,
            names,
        )
        .expect("labels index the class list")
    }

    /// Spec-order index of a label value.
    pub fn position_of(&self, label: i64) -> Option<usize> {
        self.specs.iter().position(|s| s.label == label)
    }

    /// Classifies the centre of every cell of a 2-D grid.
    pub fn boundary_grid(&self, region: GridRegion, rule: DecisionRule) -> Result<LabelGrid> {
        region.validate()?;
        if self.dim() != 2 {
            return Err(OracleError::DimensionMismatch {
                expected: 2,
                found: self.dim(),
            });
        }
        let points = region.points();
        let labels = points
            .iter()
            .map(|p| self.classify(p, rule))
            .collect::<Result<Vec<_>>>()?;
        Ok(LabelGrid {
            region,
            points,
            labels,
        })
    }

    /// Writes `x1,x2,label_standard,label_rebalanced`, one row per cell.
    pub fn write_boundary_csv<W: Write>(&self, region: GridRegion, out: W) -> Result<()> {
        let standard = self.boundary_grid(region, DecisionRule::Standard)?;
        let rebalanced = self.boundary_grid(region, DecisionRule::Rebalanced)?;
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| OracleError::Io(e.into());
        w.write_record(["x1", "x2", "label_standard", "label_rebalanced"])
            .map_err(io)?;
        for ((p, s), r) in standard.points.iter().zip(&standard.labels).zip(&rebalanced.labels) {
            w.write_record([p[0].to_string(), p[1].to_string(), s.to_string(), r.to_string()])
                .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}
