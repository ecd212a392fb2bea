//! Batch solvers: plain ridge on one-hot targets, its recoded variant, and
//! the inverse-frequency weighted (rebalanced) ridge that has no rank-one
//! incremental form.

use super::{check_alpha, check_lambda, recoding_gamma, ClassifierError, Result, WeightMatrix};
use crate::linalg::{self, accumulate_outer_upper, mirror_upper, Matrix};

fn check_data(x: &Matrix, labels: &[usize]) -> Result<usize> {
    if x.rows() == 0 {
        return Err(ClassifierError::EmptyData);
    }
    if x.rows() != labels.len() {
        return Err(ClassifierError::LabelCountMismatch {
            features: x.rows(),
            labels: labels.len(),
        });
    }
    if x.cols() == 0 {
        return Err(ClassifierError::ZeroDimension);
    }
    Ok(labels.iter().max().map_or(0, |m| m + 1))
}

fn class_counts(labels: &[usize], num_classes: usize) -> Vec<u64> {
    let mut counts = vec![0u64; num_classes];
    for &l in labels {
        counts[l] += 1;
    }
    counts
}

/// Solves `(Xᵀ diag(s) X + λI) W = Xᵀ diag(s) Y` for one-hot `Y` and per-row
/// weights `s`.
fn weighted_ridge(
    x: &Matrix,
    labels: &[usize],
    num_classes: usize,
    lambda: f64,
    row_weight: impl Fn(usize) -> f64,
) -> Result<Matrix> {
    let d = x.cols();
    let mut a = vec![0.0; d * d];
    let mut b = Matrix::zeros(d, num_classes);
    let mut nz = Vec::with_capacity(d);
    for (i, &label) in labels.iter().enumerate() {
        let row = x.row(i);
        let s = row_weight(i);
        nz.clear();
        nz.extend((0..d).filter(|&j| row[j] != 0.0));
        accumulate_outer_upper(&mut a, d, row, &nz, s);
        for &j in &nz {
            b[(j, label)] += s * row[j];
        }
    }
    mirror_upper(&mut a, d);
    for j in 0..d {
        a[j * d + j] += lambda;
    }
    let a = Matrix::from_row_major(d, d, a)?;
    let r = linalg::cholesky(&a)?;
    Ok(linalg::spd_solve(&r, &b)?)
}

/// `W = (XᵀX + λI)⁻¹ XᵀY` with `Y` the one-hot label matrix.
///
/// Classes are `0..=max(labels)`. A class with no rows gets an all-zero
/// column and a logged warning.
pub fn batch_naive(x: &Matrix, labels: &[usize], lambda: f64) -> Result<WeightMatrix> {
    check_lambda(lambda)?;
    let t = check_data(x, labels)?;
    let counts = class_counts(labels, t);
    for (class, _) in counts.iter().enumerate().filter(|(_, &c)| c == 0) {
        log::warn!("class {class} has no training rows; its weight column is zero");
    }
    Ok(WeightMatrix::new(weighted_ridge(x, labels, t, lambda, |_| 1.0)?))
}

/// [`batch_naive`] followed by right multiplication with `Γ^α`,
/// `Γ_tt = n / n_t`.
pub fn batch_recoded(x: &Matrix, labels: &[usize], lambda: f64, alpha: f64) -> Result<WeightMatrix> {
    check_alpha(alpha)?;
    check_lambda(lambda)?;
    let t = check_data(x, labels)?;
    let gamma = recoding_gamma(&class_counts(labels, t), alpha)?;
    let mut w = weighted_ridge(x, labels, t, lambda, |_| 1.0)?;
    w.scale_columns(&gamma)?;
    Ok(WeightMatrix::new(w))
}

/// Rebalanced ridge: every row is weighted by `n / n_t` for its class `t`,
/// `W = (Xᵀ Σ X + λI)⁻¹ Xᵀ Σ Y`.
///
/// With a single class `Σ = I` and this reduces to [`batch_naive`].
pub fn batch_rebalanced(x: &Matrix, labels: &[usize], lambda: f64) -> Result<WeightMatrix> {
    check_lambda(lambda)?;
    let t = check_data(x, labels)?;
    let counts = class_counts(labels, t);
    if let Some(class) = counts.iter().position(|&c| c == 0) {
        return Err(ClassifierError::ZeroCount { class });
    }
    let n = labels.len() as f64;
    let w = weighted_ridge(x, labels, t, lambda, |i| n / counts[labels[i]] as f64)?;
    Ok(WeightMatrix::new(w))
}

/// Per-class second moments, for retraining the rebalanced model at any
/// point of a stream without revisiting the data.
///
/// `Xᵀ Σ X = Σ_t (n / n_t) G_t` where `G_t` is the Gram matrix of class `t`,
/// so keeping `G_t`, the class sums and the counts is enough. Memory is
/// `O(T d²)`; each solve is a fresh `O(d³)` factorization.
#[derive(Debug, Clone)]
pub struct ClassGramAccumulator {
    dim: usize,
    grams: Vec<Vec<f64>>,
    sums: Vec<Vec<f64>>,
    counts: Vec<u64>,
    nonzero: Vec<usize>,
}

impl ClassGramAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            grams: Vec::new(),
            sums: Vec::new(),
            counts: Vec::new(),
            nonzero: Vec::with_capacity(dim),
        }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn add(&mut self, x: &[f64], label: usize) -> Result<()> {
        let d = self.dim;
        if x.len() != d {
            return Err(ClassifierError::DimensionMismatch {
                expected: d,
                found: x.len(),
            });
        }
        while self.counts.len() <= label {
            self.grams.push(vec![0.0; d * d]);
            self.sums.push(vec![0.0; d]);
            self.counts.push(0);
        }
        self.nonzero.clear();
        self.nonzero.extend((0..d).filter(|&j| x[j] != 0.0));
        accumulate_outer_upper(&mut self.grams[label], d, x, &self.nonzero, 1.0);
        for &j in &self.nonzero {
            self.sums[label][j] += x[j];
        }
        self.counts[label] += 1;
        Ok(())
    }

    fn solve(&self, lambda: f64, class_weight: impl Fn(usize) -> f64) -> Result<WeightMatrix> {
        check_lambda(lambda)?;
        let t = self.counts.len();
        if t == 0 {
            return Err(ClassifierError::NoClasses);
        }
        let d = self.dim;
        let mut a = vec![0.0; d * d];
        let mut b = Matrix::zeros(d, t);
        for class in 0..t {
            let w = class_weight(class);
            for (dst, src) in a.iter_mut().zip(&self.grams[class]) {
                *dst += w * src;
            }
            for j in 0..d {
                b[(j, class)] = w * self.sums[class][j];
            }
        }
        mirror_upper(&mut a, d);
        for j in 0..d {
            a[j * d + j] += lambda;
        }
        let r = linalg::cholesky(&Matrix::from_row_major(d, d, a)?)?;
        Ok(WeightMatrix::new(linalg::spd_solve(&r, &b)?))
    }

    /// Rebalanced ridge on everything added so far.
    pub fn solve_rebalanced(&self, lambda: f64) -> Result<WeightMatrix> {
        if let Some(class) = self.counts.iter().position(|&c| c == 0) {
            return Err(ClassifierError::ZeroCount { class });
        }
        let n: u64 = self.counts.iter().sum();
        self.solve(lambda, |t| n as f64 / self.counts[t] as f64)
    }

    /// Plain ridge on everything added so far.
    pub fn solve_naive(&self, lambda: f64) -> Result<WeightMatrix> {
        self.solve(lambda, |_| 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::RlscState;
    use crate::linalg::testutil::{gauss_jordan_inverse, naive_matmul, random_matrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn imbalanced_labels(n: usize, t: usize, seed: u64) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut labels: Vec<usize> = (0..n)
            .map(|i| {
                if i < t {
                    i
                } else if rng.random::<f64>() < 0.7 {
                    0
                } else {
                    rng.random_range(0..t)
                }
            })
            .collect();
        labels[..t].sort_unstable();
        labels
    }

    fn one_hot(labels: &[usize], t: usize) -> Matrix {
        let mut y = Matrix::zeros(labels.len(), t);
        for (i, &l) in labels.iter().enumerate() {
            y[(i, l)] = 1.0;
        }
        y
    }

    /// Direct dense construction of `(Xᵀ Σ X + λI)⁻¹ Xᵀ Σ Y` via an explicit inverse.
    fn dense_rebalanced(x: &Matrix, labels: &[usize], lambda: f64) -> Matrix {
        let t = labels.iter().max().unwrap() + 1;
        let n = labels.len();
        let mut counts = vec![0.0; t];
        for &l in labels {
            counts[l] += 1.0;
        }
        let mut sigma = Matrix::zeros(n, n);
        for (i, &l) in labels.iter().enumerate() {
            sigma[(i, i)] = n as f64 / counts[l];
        }
        let xt = x.transpose();
        let xtsx = naive_matmul(&naive_matmul(&xt, &sigma), x);
        let a = xtsx.add(&Matrix::scaled_identity(x.cols(), lambda)).unwrap();
        let rhs = naive_matmul(&naive_matmul(&xt, &sigma), &one_hot(labels, t));
        naive_matmul(&gauss_jordan_inverse(&a), &rhs)
    }

    #[test]
    fn single_example_by_hand() {
        let x = Matrix::from_rows(&[[1.0, 0.0]]).unwrap();
        let w = batch_naive(&x, &[0], 1.0).unwrap();
        let expected = Matrix::from_rows(&[[0.5], [0.0]]).unwrap();
        assert!(w.matrix().max_abs_diff(&expected).unwrap() <= 1e-15);
    }

    #[test]
    fn huge_lambda_shrinks_to_zero() {
        let x = random_matrix(20, 4, 1);
        let labels = imbalanced_labels(20, 3, 2);
        let w = batch_naive(&x, &labels, 1e12).unwrap();
        assert!(w.matrix().max_abs() < 1e-9);
    }

    #[test]
    fn duplicated_rows_with_doubled_lambda() {
        let x = random_matrix(15, 5, 3);
        let labels = imbalanced_labels(15, 3, 4);
        let mut rows: Vec<Vec<f64>> = (0..15).map(|i| x.row(i).to_vec()).collect();
        rows.extend((0..15).map(|i| x.row(i).to_vec()));
        let x2 = Matrix::from_rows(&rows).unwrap();
        let labels2: Vec<usize> = labels.iter().chain(labels.iter()).copied().collect();
        let w1 = batch_naive(&x, &labels, 0.4).unwrap();
        let w2 = batch_naive(&x2, &labels2, 0.8).unwrap();
        assert!(w1.matrix().max_abs_diff(w2.matrix()).unwrap() < 1e-12);
    }

    #[test]
    fn batch_errors() {
        let x = random_matrix(3, 2, 1);
        assert!(matches!(batch_naive(&Matrix::zeros(0, 2), &[], 1.0), Err(ClassifierError::EmptyData)));
        assert!(matches!(
            batch_naive(&x, &[0, 1], 1.0),
            Err(ClassifierError::LabelCountMismatch { .. })
        ));
        assert!(matches!(batch_naive(&x, &[0, 0, 1], 0.0), Err(ClassifierError::InvalidLambda(_))));
        // class 1 unrepresented: zero column, not an error
        let w = batch_naive(&x, &[0, 2, 0], 1.0).unwrap();
        assert_eq!(w.matrix().column(1), vec![0.0, 0.0]);
        assert!(matches!(batch_recoded(&x, &[0, 2, 0], 1.0, 1.0), Err(ClassifierError::ZeroCount { class: 1 })));
    }

    #[test]
    fn recoded_special_cases() {
        let x = random_matrix(30, 4, 5);
        let labels = imbalanced_labels(30, 3, 6);
        assert_eq!(
            batch_recoded(&x, &labels, 0.3, 0.0).unwrap(),
            batch_naive(&x, &labels, 0.3).unwrap()
        );
        // balanced: Γ = T·I, a uniform scaling that leaves argmax alone
        let balanced: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let naive = batch_naive(&x, &balanced, 0.3).unwrap();
        let recoded = batch_recoded(&x, &balanced, 0.3, 1.0).unwrap();
        assert!(naive.matrix().scale(3.0).max_abs_diff(recoded.matrix()).unwrap() < 1e-12);
        let probe = random_matrix(50, 4, 7);
        assert_eq!(naive.predict_rows(&probe).unwrap(), recoded.predict_rows(&probe).unwrap());
    }

    #[test]
    fn recoded_matches_incremental_replay() {
        let x = random_matrix(60, 6, 8);
        let labels = imbalanced_labels(60, 4, 9);
        for alpha in [0.0, 0.5, 1.0] {
            let mut s = RlscState::new(6, 0.2, alpha).unwrap();
            for (i, &l) in labels.iter().enumerate() {
                s.partial_fit(x.row(i), l).unwrap();
            }
            let inc = s.weights().unwrap();
            let batch = batch_recoded(&x, &labels, 0.2, alpha).unwrap();
            let rel = inc.matrix().sub(batch.matrix()).unwrap().frobenius_norm() / batch.matrix().frobenius_norm();
            assert!(rel <= 1e-8, "alpha {alpha}: {rel}");
        }
    }

    #[test]
    fn rebalanced_matches_dense_formula() {
        for seed in 0..10 {
            let x = random_matrix(25, 5, seed);
            let labels = imbalanced_labels(25, 3, seed + 100);
            let w = batch_rebalanced(&x, &labels, 0.5).unwrap();
            let oracle = dense_rebalanced(&x, &labels, 0.5);
            assert!(w.matrix().max_abs_diff(&oracle).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn rebalanced_balanced_is_naive_with_scaled_lambda() {
        let x = random_matrix(24, 4, 11);
        let balanced: Vec<usize> = (0..24).map(|i| i % 4).collect();
        let rb = batch_rebalanced(&x, &balanced, 0.8).unwrap();
        let nv = batch_naive(&x, &balanced, 0.2).unwrap();
        assert!(rb.matrix().max_abs_diff(nv.matrix()).unwrap() < 1e-12);
        let probe = random_matrix(40, 4, 12);
        assert_eq!(rb.predict_rows(&probe).unwrap(), nv.predict_rows(&probe).unwrap());
    }

    #[test]
    fn rebalanced_single_class_is_naive() {
        let x = random_matrix(10, 3, 13);
        let labels = vec![0; 10];
        assert_eq!(batch_rebalanced(&x, &labels, 1.0).unwrap(), batch_naive(&x, &labels, 1.0).unwrap());
    }

    #[test]
    fn accumulator_agrees_with_batch() {
        let x = random_matrix(40, 5, 14);
        let labels = imbalanced_labels(40, 3, 15);
        let mut acc = ClassGramAccumulator::new(5);
        for (i, &l) in labels.iter().enumerate() {
            acc.add(x.row(i), l).unwrap();
        }
        let rb = acc.solve_rebalanced(0.3).unwrap();
        assert!(rb.matrix().max_abs_diff(batch_rebalanced(&x, &labels, 0.3).unwrap().matrix()).unwrap() < 1e-12);
        let nv = acc.solve_naive(0.3).unwrap();
        assert!(nv.matrix().max_abs_diff(batch_naive(&x, &labels, 0.3).unwrap().matrix()).unwrap() < 1e-12);
        assert!(matches!(
            ClassGramAccumulator::new(2).solve_naive(1.0),
            Err(ClassifierError::NoClasses)
        ));
    }
}
