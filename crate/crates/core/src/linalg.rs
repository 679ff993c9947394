//! Small dense matrices.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Panics if the rows are ragged.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut s = 0.0;
                for k in 0..self.cols {
                    s += self[(i, k)] * other[(k, j)];
                }
                out[(i, j)] = s;
            }
        }
        Ok(out)
    }

    /// `M v`.
    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if self.cols != v.len() {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} times vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `vᵀ M`.
    pub fn vec_mul(&self, v: &[f64]) -> Result<Vec<f64>> {
        if self.rows != v.len() {
            return Err(Error::ShapeMismatch(format!(
                "vector of length {} times {}x{}",
                v.len(),
                self.rows,
                self.cols
            )));
        }
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &m) in out.iter_mut().zip(self.row(i)) {
                *o += vi * m;
            }
        }
        Ok(out)
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Determinant after every row is scaled to unit max-norm.
    pub fn scaled_det(&self) -> Result<f64> {
        self.require_square()?;
        let mut a = self.clone();
        for i in 0..a.rows {
            let norm = a.row(i).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if norm == 0.0 {
                return Ok(0.0);
            }
            for j in 0..a.cols {
                a[(i, j)] /= norm;
            }
        }
        Ok(a.det_unchecked())
    }

    fn det_unchecked(&self) -> f64 {
        let n = self.rows;
        if n == 2 {
            return self[(0, 0)] * self[(1, 1)] - self[(0, 1)] * self[(1, 0)];
        }
        let mut a = self.clone();
        let mut det = 1.0;
        for c in 0..n {
            let p = (c..n)
                .max_by(|&x, &y| a[(x, c)].abs().total_cmp(&a[(y, c)].abs()))
                .unwrap();
            if a[(p, c)] == 0.0 {
                return 0.0;
            }
            if p != c {
                a.swap_rows(p, c);
                det = -det;
            }
            det *= a[(c, c)];
            for r in c + 1..n {
                let f = a[(r, c)] / a[(c, c)];
                for k in c..n {
                    a[(r, k)] -= f * a[(c, k)];
                }
            }
        }
        det
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    fn require_square(&self) -> Result<()> {
        if self.rows != self.cols {
            return Err(Error::NonSquare { rows: self.rows, cols: self.cols });
        }
        Ok(())
    }

    /// Inverse with a conditioning guard: rejects matrices whose scaled
    /// determinant falls below `1e-12`. 2x2 uses the closed form, larger
    /// sizes Gauss-Jordan with partial pivoting.
    pub fn inverse(&self) -> Result<Matrix> {
        let det = self.scaled_det()?;
        if !(det.abs() >= SINGULAR_THRESHOLD) {
            return Err(Error::Singular { det });
        }
        let n = self.rows;
        if n == 1 {
            return Ok(Matrix::from_rows(&[vec![1.0 / self[(0, 0)]]]));
        }
        if n == 2 {
            let (a, b, c, d) = (self[(0, 0)], self[(0, 1)], self[(1, 0)], self[(1, 1)]);
            let det = a * d - b * c;
            return Ok(Matrix::from_rows(&[
                vec![d / det, -b / det],
                vec![-c / det, a / det],
            ]));
        }
        let mut a = self.clone();
        let mut inv = Matrix::identity(n);
        for c in 0..n {
            let p = (c..n)
                .max_by(|&x, &y| a[(x, c)].abs().total_cmp(&a[(y, c)].abs()))
                .unwrap();
            a.swap_rows(p, c);
            inv.swap_rows(p, c);
            let piv = a[(c, c)];
            for k in 0..n {
                a[(c, k)] /= piv;
                inv[(c, k)] /= piv;
            }
            for r in 0..n {
                if r == c {
                    continue;
                }
                let f = a[(r, c)];
                if f == 0.0 {
                    continue;
                }
                for k in 0..n {
                    a[(r, k)] -= f * a[(c, k)];
                    inv[(r, k)] -= f * inv[(c, k)];
                }
            }
        }
        Ok(inv)
    }
}

pub const SINGULAR_THRESHOLD: f64 = 1e-12;

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r.round()
}
