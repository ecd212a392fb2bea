//! Incremental regularized least squares classification.
//!
//! [`RlscState`] keeps the Cholesky factor `R` of `A = λI + Σ x xᵀ`, the
//! cross-product `b = Xᵀ Y` and the per-class counts. Each observation costs
//! one rank-one update of `R` plus `O(d)` bookkeeping, whatever the number of
//! examples seen. A previously unseen class is appended on the fly as a zero
//! column of `b`.
//!
//! Weights are produced lazily by [`RlscState::weights`]:
//! `W = A⁻¹ b Γ^α`, with `Γ_tt = k / k_t` the inverse empirical class
//! frequency. `α = 0` is plain recursive RLSC, `α = 1` full recoding.
//!
//! Class labels are dense zero-based indices; a new class must carry the
//! next free index.

mod batch;
mod checkpoint;

pub use batch::{batch_naive, batch_rebalanced, batch_recoded, ClassGramAccumulator};
pub use checkpoint::CHECKPOINT_MAGIC;

use thiserror::Error;

use crate::linalg::{self, LinalgError, Matrix, UpperTriangular};

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("regularization must be positive and finite, got {0}")]
    InvalidLambda(f64),
    #[error("recoding exponent must lie in [0, 1], got {0}")]
    InvalidAlpha(f64),
    #[error("feature dimension must be at least 1")]
    ZeroDimension,
    #[error("expected a feature vector of length {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("class {label} arrived out of order: only {known} classes known, next must be {known}")]
    OutOfOrderClass { label: usize, known: usize },
    #[error("no classes observed yet")]
    NoClasses,
    #[error("class {class} has no examples")]
    ZeroCount { class: usize },
    #[error("empty training data")]
    EmptyData,
    #[error("{features} feature rows but {labels} labels")]
    LabelCountMismatch { features: usize, labels: usize },
    #[error("non-finite feature value at position {0}")]
    NonFiniteFeature(usize),
    #[error("linear algebra failure: {0}")]
    Linalg(#[from] LinalgError),
    #[error("corrupt checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = ClassifierError> = std::result::Result<T, E>;

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(ClassifierError::InvalidLambda(lambda))
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(ClassifierError::InvalidAlpha(alpha))
    }
}

/// Diagonal of `Γ^α` with `Γ_tt = k / counts[t]`.
pub fn recoding_gamma(counts: &[u64], alpha: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    if let Some(class) = counts.iter().position(|&c| c == 0) {
        return Err(ClassifierError::ZeroCount { class });
    }
    let total: u64 = counts.iter().sum();
    Ok(counts
        .iter()
        .map(|&c| (total as f64 / c as f64).powf(alpha))
        .collect())
}

/// One linear scorer per class, stored as the columns of a `d x T` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    w: Matrix,
}

impl WeightMatrix {
    pub fn new(w: Matrix) -> Self {
        Self { w }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.w
    }

    pub fn into_matrix(self) -> Matrix {
        self.w
    }

    pub fn dim(&self) -> usize {
        self.w.rows()
    }

    pub fn num_classes(&self) -> usize {
        self.w.cols()
    }

    /// `Wᵀ x`.
    pub fn decision_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(ClassifierError::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(self.w.transpose_mul_vec(x)?)
    }

    /// Index of the highest score; ties go to the smallest index.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let scores = self.decision_scores(x)?;
        argmax(&scores).ok_or(ClassifierError::NoClasses)
    }

    /// Predicts every row of `x`.
    pub fn predict_rows(&self, x: &Matrix) -> Result<Vec<usize>> {
        (0..x.rows()).map(|i| self.predict(x.row(i))).collect()
    }
}

/// First index of the maximum; `None` for an empty slice.
pub fn argmax(scores: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        match best {
            Some((_, b)) if s <= b => {}
            _ => best = Some((i, s)),
        }
    }
    best.map(|(i, _)| i)
}

/// The live incremental model.
#[derive(Debug, Clone, PartialEq)]
pub struct RlscState {
    lambda: f64,
    alpha: f64,
    dim: usize,
    factor: UpperTriangular,
    cross: Matrix,
    counts: Vec<u64>,
    seen: u64,
}

impl RlscState {
    /// Empty model: `R = √λ I`, no classes.
    pub fn new(dim: usize, lambda: f64, alpha: f64) -> Result<Self> {
        if dim == 0 {
            return Err(ClassifierError::ZeroDimension);
        }
        check_lambda(lambda)?;
        check_alpha(alpha)?;
        Ok(Self {
            lambda,
            alpha,
            dim,
            factor: UpperTriangular::scaled_identity(dim, lambda.sqrt())?,
            cross: Matrix::zeros(dim, 0),
            counts: Vec::new(),
            seen: 0,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn set_alpha(&mut self, alpha: f64) -> Result<()> {
        check_alpha(alpha)?;
        self.alpha = alpha;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Total number of examples observed.
    pub fn seen(&self) -> u64 {
        self.seen
    }

    pub fn factor(&self) -> &UpperTriangular {
        &self.factor
    }

    /// `b = Xᵀ Y`, one column per class.
    pub fn cross(&self) -> &Matrix {
        &self.cross
    }

    /// Observes one labeled example.
    ///
    /// `label` must be a known class or exactly the next unused index.
    pub fn partial_fit(&mut self, x: &[f64], label: usize) -> Result<()> {
        if x.len() != self.dim {
            return Err(ClassifierError::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
            return Err(ClassifierError::NonFiniteFeature(pos));
        }
        let known = self.num_classes();
        if label > known {
            return Err(ClassifierError::OutOfOrderClass { label, known });
        }
        if label == known {
            self.extend_class();
        }
        self.counts[label] += 1;
        for (i, &xi) in x.iter().enumerate() {
            self.cross[(i, label)] += xi;
        }
        self.factor.rank_one_update(x)?;
        self.seen += 1;
        Ok(())
    }

    fn extend_class(&mut self) {
        self.counts.push(0);
        self.cross.push_zero_column();
    }

    /// `W = A⁻¹ b Γ^α` at the state's own `α`.
    pub fn weights(&self) -> Result<WeightMatrix> {
        self.weights_with_alpha(self.alpha)
    }

    /// Same as [`weights`](Self::weights) with a different recoding exponent;
    /// `R` and `b` do not depend on `α`, so one state serves a whole `α` grid.
    pub fn weights_with_alpha(&self, alpha: f64) -> Result<WeightMatrix> {
        if self.counts.is_empty() {
            return Err(ClassifierError::NoClasses);
        }
        let gamma = recoding_gamma(&self.counts, alpha)?;
        let mut w = linalg::spd_solve(&self.factor, &self.cross)?;
        w.scale_columns(&gamma)?;
        Ok(WeightMatrix::new(w))
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        self.weights()?.predict(x)
    }
}
