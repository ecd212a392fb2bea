//! Dense linear-algebra kernel.
//!
//! Everything here is row-major `f64`. The incremental classifier only needs
//! a handful of operations: an upper Cholesky factorization, the classical
//! Givens rank-one update of that factor, and the two triangular solves that
//! together apply `A^{-1}` in `O(d²)` per right-hand side.

use std::fmt;
use std::ops::{Index, IndexMut};

use thiserror::Error;

/// Symmetry tolerance applied (relative to the largest magnitude) before
/// factorizing.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch in {op}: expected {expected}, found {found}")]
    DimensionMismatch {
        op: &'static str,
        expected: String,
        found: String,
    },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric: |a[{i},{j}] - a[{j},{i}]| = {gap:e}")]
    NotSymmetric { i: usize, j: usize, gap: f64 },
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("triangular factor is singular at diagonal entry {index}")]
    Singular { index: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("entry at ({row}, {col}) lies below the diagonal and is nonzero")]
    NotUpperTriangular { row: usize, col: usize },
}

fn mismatch(op: &'static str, expected: impl fmt::Display, found: impl fmt::Display) -> LinalgError {
    LinalgError::DimensionMismatch {
        op,
        expected: expected.to_string(),
        found: found.to_string(),
    }
}

/// Dense row-major matrix with finite entries.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for row in self.data.chunks(self.cols.max(1)).take(self.rows) {
            writeln!(f, "  {:?}", row)?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, scale: f64) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = scale;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in diag.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m
    }

    /// Builds a matrix from row-major entries, rejecting NaN and infinities.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(mismatch("from_row_major", rows * cols, data.len()));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite {
                row: pos / cols.max(1),
                col: pos % cols.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, LinalgError> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(mismatch("from_rows", cols, r.len()));
            }
            data.extend_from_slice(r);
        }
        Self::from_row_major(rows.len(), cols, data)
    }

    /// Column vector (`n x 1`).
    pub fn column_vector(values: &[f64]) -> Result<Self, LinalgError> {
        Self::from_row_major(values.len(), 1, values.to_vec())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols))
            .map(|i| self.data[i * self.cols + i])
            .collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix, LinalgError> {
        if self.cols != other.rows {
            return Err(mismatch(
                "matmul",
                format!("{} rows on the right", self.cols),
                other.rows,
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · v` for a plain vector.
    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if v.len() != self.cols {
            return Err(mismatch("mul_vec", self.cols, v.len()));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    /// `selfᵀ · v` without materializing the transpose.
    pub fn transpose_mul_vec(&self, v: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if v.len() != self.rows {
            return Err(mismatch("transpose_mul_vec", self.rows, v.len()));
        }
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += vi * a;
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix, LinalgError> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix, LinalgError> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    fn zip_with(
        &self,
        other: &Matrix,
        op: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Matrix, LinalgError> {
        if self.shape() != other.shape() {
            return Err(mismatch(
                op,
                format!("{:?}", self.shape()),
                format!("{:?}", other.shape()),
            ));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// Multiplies column `j` by `factors[j]` (right multiplication by a diagonal matrix).
    pub fn scale_columns(&mut self, factors: &[f64]) -> Result<(), LinalgError> {
        if factors.len() != self.cols {
            return Err(mismatch("scale_columns", self.cols, factors.len()));
        }
        for row in self.data.chunks_mut(self.cols.max(1)) {
            for (v, f) in row.iter_mut().zip(factors) {
                *v *= f;
            }
        }
        Ok(())
    }

    /// Appends a column of zeros.
    pub fn push_zero_column(&mut self) {
        let new_cols = self.cols + 1;
        let mut data = Vec::with_capacity(self.rows * new_cols);
        for i in 0..self.rows {
            data.extend_from_slice(self.row(i));
            data.push(0.0);
        }
        self.cols = new_cols;
        self.data = data;
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest absolute entrywise difference; `None` if shapes differ.
    pub fn max_abs_diff(&self, other: &Matrix) -> Option<f64> {
        if self.shape() != other.shape() {
            return None;
        }
        Some(
            self.data
                .iter()
                .zip(&other.data)
                .fold(0.0, |m, (a, b)| m.max((a - b).abs())),
        )
    }

    /// `selfᵀ · self`, skipping zero entries (cheap for sparse rows such as raw pixels).
    pub fn gram(&self) -> Matrix {
        let d = self.cols;
        let mut g = Matrix::zeros(d, d);
        let mut nz = Vec::with_capacity(d);
        for i in 0..self.rows {
            let row = self.row(i);
            nz.clear();
            nz.extend((0..d).filter(|&j| row[j] != 0.0));
            accumulate_outer_upper(&mut g.data, d, row, &nz, 1.0);
        }
        mirror_upper(&mut g.data, d);
        g
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Adds `weight · x xᵀ` into the upper triangle of a `d x d` row-major buffer,
/// visiting only the indices listed in `nonzero`.
pub(crate) fn accumulate_outer_upper(g: &mut [f64], d: usize, x: &[f64], nonzero: &[usize], weight: f64) {
    for (a, &i) in nonzero.iter().enumerate() {
        let xi = weight * x[i];
        let row = &mut g[i * d..(i + 1) * d];
        for &j in &nonzero[a..] {
            row[j] += xi * x[j];
        }
    }
}

/// Copies the upper triangle of a `d x d` row-major buffer onto the lower one.
pub(crate) fn mirror_upper(g: &mut [f64], d: usize) {
    for i in 0..d {
        for j in 0..i {
            g[i * d + j] = g[j * d + i];
        }
    }
}

/// `x · yᵀ`.
pub fn outer(x: &[f64], y: &[f64]) -> Matrix {
    let mut m = Matrix::zeros(x.len(), y.len());
    for (i, &xi) in x.iter().enumerate() {
        for (o, &yj) in m.row_mut(i).iter_mut().zip(y) {
            *o = xi * yj;
        }
    }
    m
}

/// Upper-triangular Cholesky factor `R` (so `A = Rᵀ·R`), stored densely.
#[derive(Clone, PartialEq)]
pub struct UpperTriangular {
    dim: usize,
    data: Vec<f64>,
}

impl fmt::Debug for UpperTriangular {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "UpperTriangular({:?})", self.to_matrix())
    }
}

impl UpperTriangular {
    /// `scale · I`; `scale` must be positive.
    pub fn scaled_identity(dim: usize, scale: f64) -> Result<Self, LinalgError> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(LinalgError::NotPositiveDefinite {
                pivot: 0,
                value: scale,
            });
        }
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = scale;
        }
        Ok(Self { dim, data })
    }

    /// Validates that `m` is square, upper triangular and has a positive diagonal.
    pub fn from_matrix(m: Matrix) -> Result<Self, LinalgError> {
        if !m.is_square() {
            return Err(LinalgError::NotSquare {
                rows: m.rows,
                cols: m.cols,
            });
        }
        let dim = m.rows;
        for i in 0..dim {
            for j in 0..i {
                if m[(i, j)] != 0.0 {
                    return Err(LinalgError::NotUpperTriangular { row: i, col: j });
                }
            }
            let d = m[(i, i)];
            if d <= 0.0 {
                return Err(LinalgError::NotPositiveDefinite { pivot: i, value: d });
            }
        }
        Ok(Self { dim, data: m.data })
    }

    /// Reassembles a factor from raw row-major storage (used by checkpoints).
    pub(crate) fn from_raw(dim: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        Self::from_matrix(Matrix::from_row_major(dim, dim, data)?)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix {
            rows: self.dim,
            cols: self.dim,
            data: self.data.clone(),
        }
    }

    /// Reconstructs `Rᵀ·R`.
    pub fn gram(&self) -> Matrix {
        let n = self.dim;
        let mut a = Matrix::zeros(n, n);
        // Rᵀ R = Σ_k r_k r_kᵀ over rows r_k of R; row k is zero before column k.
        for k in 0..n {
            let rk = self.row(k);
            for i in k..n {
                let rki = rk[i];
                if rki == 0.0 {
                    continue;
                }
                let out = &mut a.data[i * n..(i + 1) * n];
                for j in k..n {
                    out[j] += rki * rk[j];
                }
            }
        }
        a
    }

    /// In-place rank-one update: afterwards `Rᵀ·R` equals the old `Rᵀ·R + x·xᵀ`.
    ///
    /// Classical Givens sweep (LINPACK `dchud` style), `O(d²)` and allocation
    /// free apart from one working copy of `x`.
    pub fn rank_one_update(&mut self, x: &[f64]) -> Result<(), LinalgError> {
        if x.len() != self.dim {
            return Err(mismatch("rank_one_update", self.dim, x.len()));
        }
        let n = self.dim;
        let mut w = x.to_vec();
        for k in 0..n {
            let wk = w[k];
            if wk == 0.0 {
                // identity rotation
                continue;
            }
            let row = &mut self.data[k * n..(k + 1) * n];
            let rkk = row[k];
            let r = rkk.hypot(wk);
            let c = r / rkk;
            let s = wk / rkk;
            row[k] = r;
            for (rkj, wj) in row[k + 1..].iter_mut().zip(&mut w[k + 1..]) {
                *rkj = (*rkj + s * *wj) / c;
                *wj = c * *wj - s * *rkj;
            }
        }
        Ok(())
    }

    fn check_rhs(&self, b: &Matrix, op: &'static str) -> Result<(), LinalgError> {
        if b.rows != self.dim {
            return Err(mismatch(op, format!("{} rows", self.dim), b.rows));
        }
        if let Some(index) = (0..self.dim).find(|&i| self.get(i, i) == 0.0) {
            return Err(LinalgError::Singular { index });
        }
        Ok(())
    }
}

/// Upper Cholesky factorization `A = Rᵀ·R`.
///
/// `A` must be symmetric to [`SYMMETRY_TOLERANCE`] relative to its largest
/// entry; it is symmetrized as `(A + Aᵀ)/2` before factorizing.
pub fn cholesky(a: &Matrix) -> Result<UpperTriangular, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    let n = a.rows;
    let tol = SYMMETRY_TOLERANCE * a.max_abs().max(1.0);
    for i in 0..n {
        for j in i + 1..n {
            let gap = (a[(i, j)] - a[(j, i)]).abs();
            if gap > tol {
                return Err(LinalgError::NotSymmetric { i, j, gap });
            }
        }
    }

    // Right-looking outer-product variant, touching only the upper triangle.
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            w[i * n + j] = 0.5 * (a[(i, j)] + a[(j, i)]);
        }
    }
    for k in 0..n {
        let pivot = w[k * n + k];
        if !(pivot > 0.0) {
            return Err(LinalgError::NotPositiveDefinite { pivot: k, value: pivot });
        }
        let rkk = pivot.sqrt();
        w[k * n + k] = rkk;
        for j in k + 1..n {
            w[k * n + j] /= rkk;
        }
        let (head, tail) = w.split_at_mut((k + 1) * n);
        let rk = &head[k * n..];
        for i in k + 1..n {
            let rki = rk[i];
            if rki == 0.0 {
                continue;
            }
            let row = &mut tail[(i - k - 1) * n..(i - k) * n];
            for j in i..n {
                row[j] -= rki * rk[j];
            }
        }
    }
    Ok(UpperTriangular { dim: n, data: w })
}

/// Returns the factor of `Rᵀ·R + x·xᵀ`, leaving `r` untouched.
pub fn chol_rank_one_update(r: &UpperTriangular, x: &[f64]) -> Result<UpperTriangular, LinalgError> {
    let mut out = r.clone();
    out.rank_one_update(x)?;
    Ok(out)
}

/// Back substitution: solves `R·X = B`.
pub fn solve_upper(r: &UpperTriangular, b: &Matrix) -> Result<Matrix, LinalgError> {
    r.check_rhs(b, "solve_upper")?;
    let n = r.dim;
    let m = b.cols;
    let mut x = b.clone();
    for i in (0..n).rev() {
        let ri = r.row(i);
        let (head, tail) = x.data.split_at_mut((i + 1) * m);
        let xi = &mut head[i * m..];
        for j in i + 1..n {
            let rij = ri[j];
            if rij == 0.0 {
                continue;
            }
            for (v, &xj) in xi.iter_mut().zip(&tail[(j - i - 1) * m..(j - i) * m]) {
                *v -= rij * xj;
            }
        }
        let inv = 1.0 / ri[i];
        for v in xi.iter_mut() {
            *v *= inv;
        }
    }
    Ok(x)
}

/// Forward substitution with the transposed factor: solves `Rᵀ·X = B`.
pub fn solve_lower_transposed(r: &UpperTriangular, b: &Matrix) -> Result<Matrix, LinalgError> {
    r.check_rhs(b, "solve_lower_transposed")?;
    let n = r.dim;
    let m = b.cols;
    let mut x = b.clone();
    for i in 0..n {
        let ri = r.row(i);
        let (head, tail) = x.data.split_at_mut((i + 1) * m);
        let xi = &mut head[i * m..];
        let inv = 1.0 / ri[i];
        for v in xi.iter_mut() {
            *v *= inv;
        }
        // Column i of Rᵀ is row i of R: eliminate x_i from the remaining rows.
        for j in i + 1..n {
            let rij = ri[j];
            if rij == 0.0 {
                continue;
            }
            for (v, &xv) in tail[(j - i - 1) * m..(j - i) * m].iter_mut().zip(xi.iter()) {
                *v -= rij * xv;
            }
        }
    }
    Ok(x)
}

/// Solves `(Rᵀ·R)·X = B` by a forward then a back substitution.
pub fn spd_solve(r: &UpperTriangular, b: &Matrix) -> Result<Matrix, LinalgError> {
    let y = solve_lower_transposed(r, b)?;
    solve_upper(r, &y)
}


#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel_err(a: &Matrix, b: &Matrix) -> f64 {
        a.sub(b).unwrap().frobenius_norm() / b.frobenius_norm().max(1e-300)
    }

    #[test]
    fn cholesky_identity_and_diagonal() {
        let r = cholesky(&Matrix::identity(3)).unwrap();
        assert_eq!(r.to_matrix(), Matrix::identity(3));
        let r = cholesky(&Matrix::from_diag(&[4.0, 9.0])).unwrap();
        assert_eq!(r.to_matrix(), Matrix::from_diag(&[2.0, 3.0]));
    }

    #[test]
    fn cholesky_reconstructs_seeded_spd() {
        let a = random_spd(5, 11);
        let r = cholesky(&a).unwrap();
        assert!(rel_err(&r.gram(), &a) <= 1e-10);
        for i in 0..5 {
            assert!(r.get(i, i) > 0.0);
            for j in 0..i {
                assert_eq!(r.get(i, j), 0.0);
            }
        }
        // gram() agrees with the explicit product
        let rm = r.to_matrix();
        assert!(rel_err(&naive_matmul(&rm.transpose(), &rm), &r.gram()) < 1e-14);
    }

    #[test]
    fn cholesky_rejects_bad_input() {
        assert!(matches!(
            cholesky(&Matrix::zeros(2, 3)),
            Err(LinalgError::NotSquare { .. })
        ));
        let asym = Matrix::from_rows(&[[1.0, 0.5], [0.0, 1.0]]).unwrap();
        assert!(matches!(cholesky(&asym), Err(LinalgError::NotSymmetric { .. })));
        let indefinite = Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap();
        assert!(matches!(
            cholesky(&indefinite),
            Err(LinalgError::NotPositiveDefinite { pivot: 1, .. })
        ));
        // round-off level asymmetry is absorbed
        let nearly = Matrix::from_rows(&[[2.0, 1.0 + 1e-15], [1.0, 2.0]]).unwrap();
        assert!(cholesky(&nearly).is_ok());
    }

    #[test]
    fn matrix_rejects_non_finite() {
        assert!(matches!(
            Matrix::from_row_major(1, 2, vec![1.0, f64::NAN]),
            Err(LinalgError::NonFinite { row: 0, col: 1 })
        ));
        assert!(Matrix::from_row_major(2, 2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn rank_one_update_small_cases() {
        let r = UpperTriangular::scaled_identity(2, 1.0).unwrap();
        assert_eq!(chol_rank_one_update(&r, &[0.0, 0.0]).unwrap(), r);
        let r = UpperTriangular::scaled_identity(1, 1.0).unwrap();
        let up = chol_rank_one_update(&r, &[1.0]).unwrap();
        assert!((up.get(0, 0) - 2f64.sqrt()).abs() < 1e-15);
        assert!(matches!(
            chol_rank_one_update(&r, &[1.0, 2.0]),
            Err(LinalgError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rank_one_update_matches_refactorization() {
        let a = random_spd(6, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
        let updated = chol_rank_one_update(&cholesky(&a).unwrap(), &x).unwrap();
        let direct = cholesky(&a.add(&outer(&x, &x)).unwrap()).unwrap();
        let diff = updated.to_matrix().max_abs_diff(&direct.to_matrix()).unwrap();
        assert!(diff <= 1e-10, "diff {diff}");
    }

    #[test]
    fn triangular_solves_trivial() {
        let b = random_matrix(3, 2, 1);
        let eye = UpperTriangular::scaled_identity(3, 1.0).unwrap();
        assert_eq!(solve_upper(&eye, &b).unwrap(), b);
        assert_eq!(solve_lower_transposed(&eye, &b).unwrap(), b);

        let r = UpperTriangular::from_matrix(Matrix::from_diag(&[2.0, 4.0])).unwrap();
        let rhs = Matrix::column_vector(&[2.0, 4.0]).unwrap();
        let ones = Matrix::column_vector(&[1.0, 1.0]).unwrap();
        assert_eq!(solve_upper(&r, &rhs).unwrap(), ones);
        assert_eq!(solve_lower_transposed(&r, &rhs).unwrap(), ones);
        assert!(solve_upper(&r, &Matrix::zeros(3, 1)).is_err());
    }

    #[test]
    fn triangular_solves_residuals() {
        let r = cholesky(&random_spd(5, 21)).unwrap();
        let rm = r.to_matrix();
        let b = random_matrix(5, 3, 22);
        let x = solve_upper(&r, &b).unwrap();
        let res = naive_matmul(&rm, &x).sub(&b).unwrap().frobenius_norm();
        assert!(res <= 1e-10 * b.frobenius_norm());
        let x = solve_lower_transposed(&r, &b).unwrap();
        let res = naive_matmul(&rm.transpose(), &x).sub(&b).unwrap().frobenius_norm();
        assert!(res <= 1e-10 * b.frobenius_norm());
    }

    #[test]
    fn singular_factor_is_reported() {
        // bypass validation to build a factor with a zero pivot
        let r = UpperTriangular {
            dim: 2,
            data: vec![1.0, 0.0, 0.0, 0.0],
        };
        assert_eq!(
            solve_upper(&r, &Matrix::zeros(2, 1)),
            Err(LinalgError::Singular { index: 1 })
        );
    }

    #[test]
    fn spd_solve_cases() {
        let r = UpperTriangular::scaled_identity(3, 1.0).unwrap();
        let b = random_matrix(3, 1, 5);
        assert_eq!(spd_solve(&r, &b).unwrap(), b);

        let r = cholesky(&Matrix::from_diag(&[2.0, 2.0])).unwrap();
        let x = spd_solve(&r, &Matrix::column_vector(&[4.0, 2.0]).unwrap()).unwrap();
        assert!((x[(0, 0)] - 2.0).abs() < 1e-15 && (x[(1, 0)] - 1.0).abs() < 1e-15);

        let a = random_spd(6, 8);
        let b = random_matrix(6, 2, 9);
        let x = spd_solve(&cholesky(&a).unwrap(), &b).unwrap();
        let oracle = naive_matmul(&gauss_jordan_inverse(&a), &b);
        assert!(x.max_abs_diff(&oracle).unwrap() <= 1e-9);
    }

    #[test]
    fn products() {
        let b = random_matrix(2, 3, 1);
        assert_eq!(Matrix::identity(2).matmul(&b).unwrap(), b);
        assert_eq!(
            outer(&[1.0, 0.0], &[0.0, 1.0]),
            Matrix::from_rows(&[[0.0, 1.0], [0.0, 0.0]]).unwrap()
        );
        let a = random_matrix(4, 3, 2);
        let b = random_matrix(3, 2, 3);
        assert_eq!(a.matmul(&b).unwrap(), naive_matmul(&a, &b));
        assert!(b.matmul(&b).is_err());
        assert_eq!(a.transpose().transpose(), a);
        assert_eq!(a.transpose().shape(), (3, 4));
        let v = [1.0, -2.0, 0.5];
        let col = Matrix::column_vector(&v).unwrap();
        assert_eq!(a.mul_vec(&v).unwrap(), a.matmul(&col).unwrap().into_vec());
        let w = [0.3, 1.0, -1.0, 2.0];
        assert_eq!(
            a.transpose_mul_vec(&w).unwrap(),
            naive_matmul(&a.transpose(), &Matrix::column_vector(&w).unwrap()).into_vec()
        );
    }

    #[test]
    fn push_zero_column_keeps_entries() {
        let mut m = random_matrix(3, 2, 7);
        let before = m.clone();
        m.push_zero_column();
        assert_eq!(m.shape(), (3, 3));
        for i in 0..3 {
            assert_eq!(&m.row(i)[..2], before.row(i));
            assert_eq!(m[(i, 2)], 0.0);
        }
        let mut empty = Matrix::zeros(4, 0);
        empty.push_zero_column();
        assert_eq!(empty, Matrix::zeros(4, 1));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn update_equals_refactorization(n in 1usize..=50, seed in any::<u64>()) {
            let a = random_spd(n, seed);
            let x = random_matrix(1, n, seed ^ 0x5eed).into_vec();
            let up = chol_rank_one_update(&cholesky(&a).unwrap(), &x).unwrap();
            let direct = cholesky(&a.add(&outer(&x, &x)).unwrap()).unwrap();
            prop_assert!(up.to_matrix().max_abs_diff(&direct.to_matrix()).unwrap() <= 1e-10);
        }

        #[test]
        fn factor_gram_is_positive_definite(n in 1usize..=20, seed in any::<u64>()) {
            let r = cholesky(&random_spd(n, seed)).unwrap();
            let a = r.gram();
            let x = random_matrix(n, 1, seed.wrapping_add(1)).into_vec();
            prop_assume!(x.iter().any(|v| *v != 0.0));
            let quad = dot(&x, &a.mul_vec(&x).unwrap());
            prop_assert!(quad > 0.0);
        }

        #[test]
        fn spd_solve_reproduces_rhs(n in 1usize..=20, m in 1usize..=4, seed in any::<u64>()) {
            let r = cholesky(&random_spd(n, seed)).unwrap();
            let b = random_matrix(n, m, seed ^ 1);
            let x = spd_solve(&r, &b).unwrap();
            let back = r.gram().matmul(&x).unwrap();
            prop_assert!(back.max_abs_diff(&b).unwrap() <= 1e-9);
        }
    }
}
