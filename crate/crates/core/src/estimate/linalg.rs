//! Dense column-major matrices and a Householder QR least-squares solver.

use serde::{Deserialize, Serialize};

/// Column-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_columns(rows: usize, columns: Vec<Vec<f64>>) -> Self {
        let cols = columns.len();
        let mut data = Vec::with_capacity(rows * cols);
        for c in columns {
            assert_eq!(c.len(), rows, "column length mismatch");
            data.extend(c);
        }
        Matrix { rows, cols, data }
    }

    /// Builds from row-major nested slices (test convenience).
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let k = rows.first().map_or(0, Vec::len);
        let mut m = Matrix::zeros(n, k);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), k, "ragged rows");
            for (j, &v) in r.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            for l in 0..self.cols {
                let b = other[(l, j)];
                if b == 0.0 {
                    continue;
                }
                let a = self.col(l);
                let o = out.col_mut(j);
                for i in 0..a.len() {
                    o[i] += a[i] * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len());
        let mut out = vec![0.0; self.rows];
        for (j, &b) in v.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.col(j)) {
                *o += a * b;
            }
        }
        out
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|v| *v *= c);
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[j * self.rows + i]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[j * self.rows + i]
    }
}

/// Householder QR factorization `X = QR`. Reflectors live below the
/// diagonal of `packed`; `r_diag` holds the diagonal of R.
#[derive(Debug, Clone)]
pub struct Qr {
    packed: Matrix,
    betas: Vec<f64>,
    r_diag: Vec<f64>,
    col_norms: Vec<f64>,
}

impl Qr {
    pub fn new(x: &Matrix) -> Qr {
        let (n, k) = (x.rows(), x.cols());
        assert!(n >= k, "QR needs at least as many rows as columns");
        let mut a = x.clone();
        let col_norms = (0..k).map(|j| norm(x.col(j))).collect();
        let mut betas = vec![0.0; k];
        let mut r_diag = vec![0.0; k];
        for j in 0..k {
            let (head, tail) = a.data.split_at_mut((j + 1) * n);
            let v = &mut head[j * n + j..];
            let sigma = norm(v);
            if sigma == 0.0 {
                continue;
            }
            let alpha = if v[0] > 0.0 { -sigma } else { sigma };
            v[0] -= alpha;
            let vtv: f64 = v.iter().map(|x| x * x).sum();
            let beta = if vtv > 0.0 { 2.0 / vtv } else { 0.0 };
            betas[j] = beta;
            r_diag[j] = alpha;
            for l in 0..(k - j - 1) {
                let col = &mut tail[l * n + j..(l + 1) * n];
                let s = beta * dot(v, col);
                if s != 0.0 {
                    for (c, vi) in col.iter_mut().zip(v.iter()) {
                        *c -= s * vi;
                    }
                }
            }
        }
        Qr {
            packed: a,
            betas,
            r_diag,
            col_norms,
        }
    }

    pub fn cols(&self) -> usize {
        self.packed.cols()
    }

    /// Entry `(i, j)` of R for `i <= j`.
    pub fn r(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.r_diag[i]
        } else if i < j {
            self.packed[(i, j)]
        } else {
            0.0
        }
    }

    /// Columns whose component orthogonal to the preceding columns is below
    /// `tol` relative to the column's own norm.
    pub fn deficient_columns(&self, tol: f64) -> Vec<usize> {
        (0..self.cols())
            .filter(|&j| self.r_diag[j].abs() <= tol * self.col_norms[j].max(f64::MIN_POSITIVE))
            .collect()
    }

    /// Applies `Qᵀ` to `y` in place.
    pub fn apply_qt(&self, y: &mut [f64]) {
        let n = self.packed.rows();
        assert_eq!(y.len(), n);
        for j in 0..self.cols() {
            let beta = self.betas[j];
            if beta == 0.0 {
                continue;
            }
            let v = &self.packed.col(j)[j..];
            let s = beta * dot(v, &y[j..]);
            for (yi, vi) in y[j..].iter_mut().zip(v) {
                *yi -= s * vi;
            }
        }
    }

    /// Solves the leading triangular system `R b = c[..k]`.
    pub fn solve_r(&self, c: &[f64]) -> Vec<f64> {
        let k = self.cols();
        let mut b = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = c[i];
            for j in (i + 1)..k {
                s -= self.r(i, j) * b[j];
            }
            b[i] = s / self.r_diag[i];
        }
        b
    }

    /// Least-squares coefficients minimizing `|y - Xb|²`.
    pub fn solve(&self, y: &[f64]) -> Vec<f64> {
        let mut qty = y.to_vec();
        self.apply_qt(&mut qty);
        self.solve_r(&qty)
    }

    /// `R⁻¹`, upper triangular.
    pub fn r_inverse(&self) -> Matrix {
        let k = self.cols();
        let mut inv = Matrix::zeros(k, k);
        for col in 0..k {
            for i in (0..=col).rev() {
                let mut s = if i == col { 1.0 } else { 0.0 };
                for j in (i + 1)..=col {
                    s -= self.r(i, j) * inv[(j, col)];
                }
                inv[(i, col)] = s / self.r_diag[i];
            }
        }
        inv
    }

    /// `(XᵀX)⁻¹ = R⁻¹ R⁻ᵀ`.
    pub fn xtx_inverse(&self) -> Matrix {
        let ri = self.r_inverse();
        ri.matmul(&ri.transpose())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    // scaled to avoid overflow on large-valued columns
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    scale * a.iter().map(|v| (v / scale).powi(2)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_exact_line() {
        let x = Matrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]);
        let qr = Qr::new(&x);
        let b = qr.solve(&[2.0, 4.0, 6.0]);
        assert!((b[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn xtx_inverse_matches_direct() {
        let x = Matrix::from_rows(&[
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![1.0, 3.0],
            vec![1.0, 4.0],
        ]);
        // XᵀX = [[4, 8], [8, 26]], det = 40
        let inv = Qr::new(&x).xtx_inverse();
        let expected = Matrix::from_rows(&[vec![26.0 / 40.0, -8.0 / 40.0], vec![-8.0 / 40.0, 4.0 / 40.0]]);
        assert!(inv.max_abs_diff(&expected) < 1e-14);
    }

    #[test]
    fn flags_duplicate_column() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0, 2.0], vec![1.0, 3.0, 3.0], vec![1.0, 5.0, 5.0], vec![1.0, 1.0, 1.0]]);
        assert_eq!(Qr::new(&x).deficient_columns(1e-10), vec![2]);
    }
}
