//! Small dense linear-algebra kernel.
//!
//! Everything here works on `Mat` (column-major `f64` storage) and plain
//! `Vec<f64>` vectors. Problem sizes in this crate stay tiny (dimension at
//! most 12, a few dozen columns), so simple O(n^3) algorithms with partial
//! pivoting are both fast enough and easy to audit.

use crate::error::{Error, Result};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Dense matrix, column-major storage: entry `(i, j)` lives at
/// `data[j * rows + i]`.
///
/// Serialized as a row-major array of rows so that JSON files read
/// naturally; an `n x 0` matrix serializes as `n` empty rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Result<Self> {
        let mut m = Mat::zeros(rows, columns.len());
        for (j, col) in columns.iter().enumerate() {
            if col.len() != rows {
                return Err(Error::DimensionMismatch(format!(
                    "column {j} has length {}, expected {rows}",
                    col.len()
                )));
            }
            m.col_mut(j).copy_from_slice(col);
        }
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut m = Mat::zeros(nrows, ncols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != ncols {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has length {}, expected {ncols}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[j * self.rows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[j * self.rows + i] = v;
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self.get(i, j)).collect()
    }

    pub fn push_col(&mut self, col: &[f64]) {
        assert_eq!(col.len(), self.rows, "push_col length mismatch");
        self.data.extend_from_slice(col);
        self.cols += 1;
    }

    /// New matrix keeping the listed columns, in the listed order.
    pub fn select_cols(&self, idx: &[usize]) -> Mat {
        let mut m = Mat::zeros(self.rows, idx.len());
        for (k, &j) in idx.iter().enumerate() {
            m.col_mut(k).copy_from_slice(self.col(j));
        }
        m
    }

    /// New matrix with column `j` removed.
    pub fn delete_col(&self, j: usize) -> Mat {
        let keep: Vec<usize> = (0..self.cols).filter(|&k| k != j).collect();
        self.select_cols(&keep)
    }

    /// New matrix with row `i` removed.
    pub fn delete_row(&self, i: usize) -> Mat {
        let mut m = Mat::zeros(self.rows - 1, self.cols);
        for j in 0..self.cols {
            let mut r = 0;
            for k in 0..self.rows {
                if k != i {
                    m.set(r, j, self.get(k, j));
                    r += 1;
                }
            }
        }
        m
    }

    pub fn transpose(&self) -> Mat {
        let mut m = Mat::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                m.set(j, i, self.get(i, j));
            }
        }
        m
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        let mut y = vec![0.0; self.rows];
        for j in 0..self.cols {
            let c = self.col(j);
            let xj = x[j];
            if xj != 0.0 {
                for i in 0..self.rows {
                    y[i] += c[i] * xj;
                }
            }
        }
        y
    }

    pub fn matmul(&self, other: &Mat) -> Result<Mat> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "matmul {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut m = Mat::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let y = self.matvec(other.col(j));
            m.col_mut(j).copy_from_slice(&y);
        }
        Ok(m)
    }

    pub fn scale(&self, s: f64) -> Mat {
        let mut m = self.clone();
        for v in &mut m.data {
            *v *= s;
        }
        m
    }

    pub fn add(&self, other: &Mat) -> Result<Mat> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch("matrix add".into()));
        }
        let mut m = self.clone();
        for (a, b) in m.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(m)
    }

    /// Operator infinity norm (maximum absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Entrywise absolute value.
    pub fn abs(&self) -> Mat {
        let mut m = self.clone();
        for v in &mut m.data {
            *v = v.abs();
        }
        m
    }

    /// Determinant by LU decomposition with partial pivoting.
    /// The determinant of the empty 0x0 matrix is 1.
    pub fn det(&self) -> f64 {
        assert_eq!(self.rows, self.cols, "det of non-square matrix");
        let n = self.rows;
        if n == 0 {
            return 1.0;
        }
        let mut a = self.clone();
        let mut det = 1.0;
        for k in 0..n {
            let mut piv = k;
            let mut best = a.get(k, k).abs();
            for i in k + 1..n {
                let v = a.get(i, k).abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best == 0.0 {
                return 0.0;
            }
            if piv != k {
                for j in 0..n {
                    let t = a.get(k, j);
                    a.set(k, j, a.get(piv, j));
                    a.set(piv, j, t);
                }
                det = -det;
            }
            let akk = a.get(k, k);
            det *= akk;
            for i in k + 1..n {
                let f = a.get(i, k) / akk;
                if f != 0.0 {
                    for j in k + 1..n {
                        let v = a.get(i, j) - f * a.get(k, j);
                        a.set(i, j, v);
                    }
                }
            }
        }
        det
    }

    /// Solve `self * x = b` (square, LU with partial pivoting).
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(self.rows, self.cols, "solve needs a square matrix");
        assert_eq!(b.len(), self.rows, "solve rhs length mismatch");
        let n = self.rows;
        let mut a = self.clone();
        let mut x = b.to_vec();
        for k in 0..n {
            let mut piv = k;
            let mut best = a.get(k, k).abs();
            for i in k + 1..n {
                let v = a.get(i, k).abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best == 0.0 {
                return Err(Error::RankDeficient("singular matrix in solve".into()));
            }
            if piv != k {
                for j in 0..n {
                    let t = a.get(k, j);
                    a.set(k, j, a.get(piv, j));
                    a.set(piv, j, t);
                }
                x.swap(k, piv);
            }
            let akk = a.get(k, k);
            for i in k + 1..n {
                let f = a.get(i, k) / akk;
                if f != 0.0 {
                    for j in k + 1..n {
                        let v = a.get(i, j) - f * a.get(k, j);
                        a.set(i, j, v);
                    }
                    x[i] -= f * x[k];
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in k + 1..n {
                s -= a.get(k, j) * x[j];
            }
            x[k] = s / a.get(k, k);
        }
        Ok(x)
    }

    /// Solve `self * X = B` column by column.
    pub fn solve_mat(&self, b: &Mat) -> Result<Mat> {
        if b.rows() != self.rows {
            return Err(Error::DimensionMismatch("solve_mat rhs rows".into()));
        }
        let mut x = Mat::zeros(self.rows, b.cols());
        for j in 0..b.cols() {
            let col = self.solve(b.col(j))?;
            x.col_mut(j).copy_from_slice(&col);
        }
        Ok(x)
    }

    /// Numeric rank by column-pivoted Gram–Schmidt.
    ///
    /// A column counts toward the rank while its residual norm exceeds
    /// `tol` times the largest original column norm (with an absolute floor
    /// for all-zero input).
    pub fn rank(&self, tol: f64) -> usize {
        self.pivot_columns(tol).len()
    }

    /// Column indices chosen greedily by largest residual norm, i.e. the
    /// pivot order of a column-pivoted QR. The result length is the numeric
    /// rank. Ties prefer the lower index.
    pub fn pivot_columns(&self, tol: f64) -> Vec<usize> {
        let mut work: Vec<Vec<f64>> = (0..self.cols).map(|j| self.col(j).to_vec()).collect();
        let scale = work
            .iter()
            .map(|c| norm2(c))
            .fold(0.0_f64, f64::max)
            .max(1e-300);
        let threshold = tol * scale;
        let mut chosen: Vec<usize> = Vec::new();
        let mut used = vec![false; self.cols];
        for _ in 0..self.rows.min(self.cols) {
            let mut best_j = None;
            let mut best_norm = threshold;
            for j in 0..self.cols {
                if used[j] {
                    continue;
                }
                let nj = norm2(&work[j]);
                if nj > best_norm {
                    best_norm = nj;
                    best_j = Some(j);
                }
            }
            let Some(jq) = best_j else { break };
            used[jq] = true;
            chosen.push(jq);
            let q: Vec<f64> = {
                let n = norm2(&work[jq]);
                work[jq].iter().map(|v| v / n).collect()
            };
            for j in 0..self.cols {
                if used[j] {
                    continue;
                }
                let d = dot(&q, &work[j]);
                for (w, qi) in work[j].iter_mut().zip(&q) {
                    *w -= d * qi;
                }
            }
        }
        chosen
    }

    /// First `k` columns, scanning left to right, that are numerically
    /// linearly independent. Errors if fewer exist.
    pub fn first_independent_columns(&self, k: usize, tol: f64) -> Result<Vec<usize>> {
        let scale = (0..self.cols)
            .map(|j| norm2(self.col(j)))
            .fold(0.0_f64, f64::max)
            .max(1e-300);
        let threshold = tol * scale;
        let mut basis: Vec<Vec<f64>> = Vec::new();
        let mut chosen = Vec::new();
        for j in 0..self.cols {
            if chosen.len() == k {
                break;
            }
            let mut v = self.col(j).to_vec();
            for q in &basis {
                let d = dot(q, &v);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= d * qi;
                }
            }
            let n = norm2(&v);
            if n > threshold {
                for vi in &mut v {
                    *vi /= n;
                }
                basis.push(v);
                chosen.push(j);
            }
        }
        if chosen.len() < k {
            return Err(Error::RankDeficient(format!(
                "requested {k} independent columns, found {}",
                chosen.len()
            )));
        }
        Ok(chosen)
    }
}

impl Serialize for Mat {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..self.rows).map(|i| self.row(i)).collect();
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Mat {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(deserializer)?;
        Mat::from_rows(&rows).map_err(|e| D::Error::custom(e.to_string()))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `a += s * b`
pub fn axpy(a: &mut [f64], s: f64, b: &[f64]) {
    debug_assert_eq!(a.len(), b.len());
    for (x, y) in a.iter_mut().zip(b) {
        *x += s * y;
    }
}

/// Visit every `k`-subset of `0..n` in lexicographic order.
pub fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        // advance to the next combination
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn det_small() {
        let m = Mat::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert!((m.det() + 2.0).abs() < 1e-12);
        assert_eq!(Mat::zeros(0, 0).det(), 1.0);
        assert!((Mat::identity(5).det() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn solve_roundtrip() {
        let a = Mat::from_rows(&[
            vec![2.0, 1.0, 0.0],
            vec![1.0, 3.0, 1.0],
            vec![0.0, 1.0, 4.0],
        ])
        .unwrap();
        let x = vec![1.0, -2.0, 0.5];
        let b = a.matvec(&x);
        let got = a.solve(&b).unwrap();
        for (u, v) in got.iter().zip(&x) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_and_pivots() {
        let m = Mat::from_columns(3, &[
            vec![1.0, 0.0, 0.0],
            vec![2.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
        ])
        .unwrap();
        assert_eq!(m.rank(1e-9), 2);
        let m2 = Mat::from_columns(2, &[vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let first = m2.first_independent_columns(2, 1e-9).unwrap();
        assert_eq!(first, vec![0, 2]);
    }

    #[test]
    fn serde_row_major() {
        let m = Mat::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, "[[1.0,2.0,3.0],[4.0,5.0,6.0]]");
        let back: Mat = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        // n x 0 survives the roundtrip
        let empty = Mat::zeros(2, 0);
        let s = serde_json::to_string(&empty).unwrap();
        let back: Mat = serde_json::from_str(&s).unwrap();
        assert_eq!(back.rows(), 2);
        assert_eq!(back.cols(), 0);
    }
}
