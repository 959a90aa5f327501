//! Small dense row-major matrices and the symmetric wrapper used by the
//! eigensolvers and factor models.

use std::fmt;
use std::ops::{Index, IndexMut, Mul};

use serde::{Deserialize, Serialize};

use super::NumericsError;

#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
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
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from a row-major slice.
    pub fn from_row_slice(rows: usize, cols: usize, data: &[f64]) -> Result<Self, NumericsError> {
        if data.len() != rows * cols {
            return Err(NumericsError::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self {
            rows,
            cols,
            data: data.to_vec(),
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, NumericsError> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(NumericsError::DimensionMismatch {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_col(&mut self, j: usize, values: &[f64]) {
        for (i, &v) in values.iter().enumerate() {
            self[(i, j)] = v;
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn trace(&self) -> f64 {
        self.diag().iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    pub fn add(&self, other: &Matrix) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Matrix) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// Multiplies each column `j` by `factors[j]`.
    pub fn scale_cols(&self, factors: &[f64]) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] * factors[j])
    }

    /// Multiplies each row `i` by `factors[i]`.
    pub fn scale_rows(&self, factors: &[f64]) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] * factors[i])
    }

    pub fn matmul(&self, other: &Matrix) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "mul_vec dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Result<Self, NumericsError> {
        if !self.is_square() {
            return Err(NumericsError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        for c in 0..n {
            let pivot = (c..n)
                .max_by(|&x, &y| a[(x, c)].abs().total_cmp(&a[(y, c)].abs()))
                .unwrap_or(c);
            if a[(pivot, c)].abs() <= 1e-14 * scale {
                return Err(NumericsError::Singular { column: c });
            }
            if pivot != c {
                for j in 0..n {
                    a.data.swap(pivot * n + j, c * n + j);
                    inv.data.swap(pivot * n + j, c * n + j);
                }
            }
            let p = a[(c, c)];
            for j in 0..n {
                a[(c, j)] /= p;
                inv[(c, j)] /= p;
            }
            for r in 0..n {
                if r == c {
                    continue;
                }
                let f = a[(r, c)];
                if f == 0.0 {
                    continue;
                }
                for j in 0..n {
                    a[(r, j)] -= f * a[(c, j)];
                    inv[(r, j)] -= f * inv[(c, j)];
                }
            }
        }
        Ok(inv)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &Matrix {
    type Output = Matrix;

    fn mul(self, rhs: &Matrix) -> Matrix {
        self.matmul(rhs)
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, " ")?;
            for v in self.row(i) {
                write!(f, " {v:>10.6}")?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// A square matrix whose entries are kept exactly symmetric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Matrix", into = "Matrix")]
pub struct SymMatrix(Matrix);

impl SymMatrix {
    /// Accepts a square matrix that is symmetric up to rounding
    /// (`|a_ij - a_ji| <= 1e-10 * max|a|`) and stores the averaged entries.
    pub fn new(m: Matrix) -> Result<Self, NumericsError> {
        if !m.is_square() {
            return Err(NumericsError::NotSquare {
                rows: m.rows(),
                cols: m.cols(),
            });
        }
        if m.rows() == 0 {
            return Err(NumericsError::Empty);
        }
        if !m.is_finite() {
            return Err(NumericsError::NonFinite);
        }
        let n = m.rows();
        let tol = 1e-10 * m.max_abs().max(1e-300);
        let mut out = m.clone();
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (m[(i, j)], m[(j, i)]);
                if (a - b).abs() > tol {
                    return Err(NumericsError::NotSymmetric { row: i, col: j });
                }
                let avg = 0.5 * (a + b);
                out[(i, j)] = avg;
                out[(j, i)] = avg;
            }
        }
        Ok(Self(out))
    }

    /// Builds from the lower triangle, row `i` holding `i + 1` entries.
    pub fn from_lower<R: AsRef<[f64]>>(lower: &[R]) -> Result<Self, NumericsError> {
        let n = lower.len();
        let mut m = Matrix::zeros(n, n);
        for (i, row) in lower.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != i + 1 {
                return Err(NumericsError::DimensionMismatch {
                    expected: i + 1,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Self::new(m)
    }

    pub fn order(&self) -> usize {
        self.0.rows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// Cholesky factor `L` with `A = L Lᵀ`; fails if not positive definite.
    pub fn cholesky(&self) -> Result<Matrix, NumericsError> {
        let n = self.order();
        let a = &self.0;
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(NumericsError::NotPositiveDefinite);
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(l)
    }
}

impl TryFrom<Matrix> for SymMatrix {
    type Error = NumericsError;

    fn try_from(m: Matrix) -> Result<Self, Self::Error> {
        Self::new(m)
    }
}

impl From<SymMatrix> for Matrix {
    fn from(s: SymMatrix) -> Self {
        s.0
    }
}

impl Index<(usize, usize)> for SymMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}
