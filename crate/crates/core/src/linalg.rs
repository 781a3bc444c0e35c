//! Dense row-major matrices and the handful of kernels the ELM needs.
//!
//! Every reduction runs in a fixed index order, so results are bitwise
//! reproducible. In particular each entry of a Cholesky factor depends
//! only on the leading block that contains it: the factor of a leading
//! principal submatrix is the leading block of the full factor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix")]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Deserialize)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<RawMatrix> for DenseMatrix {
    type Error = Error;

    fn try_from(raw: RawMatrix) -> Result<Self> {
        DenseMatrix::new(raw.rows, raw.cols, raw.data)
    }
}

impl DenseMatrix {
    /// Builds a matrix from a row-major buffer, rejecting NaN and infinities.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "buffer of length {} cannot hold {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols.max(1),
                col: pos % cols.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

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
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

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
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact(0) panics, and a zero-width matrix still has rows.
        (0..self.rows).map(move |r| self.row(r))
    }

    /// Copies the selected rows, in the given order, into a new matrix.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    /// Copies the first `n` columns.
    pub fn leading_cols(&self, n: usize) -> Self {
        assert!(n <= self.cols);
        let mut data = Vec::with_capacity(self.rows * n);
        for r in self.row_iter() {
            data.extend_from_slice(&r[..n]);
        }
        Self {
            rows: self.rows,
            cols: n,
            data,
        }
    }

    /// Copies the leading `rows x cols` block.
    pub fn leading_block(&self, rows: usize, cols: usize) -> Self {
        assert!(rows <= self.rows && cols <= self.cols);
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            data.extend_from_slice(&self.row(r)[..cols]);
        }
        Self { rows, cols, data }
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, k: f64) -> Self {
        self.map(|v| v * k)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!(
                "cannot subtract {:?} from {:?}",
                other.shape(),
                self.shape()
            )));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    /// Adds `v` to every diagonal entry of a square matrix.
    pub fn add_diagonal(&mut self, v: f64) {
        let n = self.rows.min(self.cols);
        for i in 0..n {
            self.data[i * self.cols + i] += v;
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols
            && (0..self.rows)
                .all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }
}

/// `a * b`. Each output entry sums over the shared index in ascending order.
pub fn matmul(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols != b.rows {
        return Err(Error::Shape(format!(
            "matmul {:?} x {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let mut out = DenseMatrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let a_row = a.row(i);
        let o_row = &mut out.data[i * b.cols..(i + 1) * b.cols];
        for (k, &aik) in a_row.iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            for (o, &bkj) in o_row.iter_mut().zip(b.row(k)) {
                *o += aik * bkj;
            }
        }
    }
    Ok(out)
}

/// `aᵀ * b` without materializing the transpose.
pub fn t_matmul(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.rows != b.rows {
        return Err(Error::Shape(format!(
            "t_matmul {:?}ᵀ x {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let mut out = DenseMatrix::zeros(a.cols, b.cols);
    for k in 0..a.rows {
        let b_row = b.row(k);
        for (i, &aki) in a.row(k).iter().enumerate() {
            if aki == 0.0 {
                continue;
            }
            let o_row = &mut out.data[i * b.cols..(i + 1) * b.cols];
            for (o, &bkj) in o_row.iter_mut().zip(b_row) {
                *o += aki * bkj;
            }
        }
    }
    Ok(out)
}

/// `aᵀ * a`, computed on the upper triangle and mirrored.
pub fn gram(a: &DenseMatrix) -> DenseMatrix {
    let n = a.cols;
    let mut out = DenseMatrix::zeros(n, n);
    for k in 0..a.rows {
        let row = a.row(k);
        for i in 0..n {
            let aki = row[i];
            if aki == 0.0 {
                continue;
            }
            let o_row = &mut out.data[i * n..(i + 1) * n];
            for j in i..n {
                o_row[j] += aki * row[j];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            out.data[i * n + j] = out.data[j * n + i];
        }
    }
    out
}

/// Lower-triangular Cholesky factor `l` with `a = l lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DenseMatrix,
}

impl Cholesky {
    pub fn factor(a: &DenseMatrix) -> Result<Self> {
        let n = a.rows;
        if a.cols != n {
            return Err(Error::Shape(format!("cholesky of {:?}", a.shape())));
        }
        let mut l = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = a.get(i, j);
                let (li, lj) = (i * n, j * n);
                for k in 0..j {
                    s -= l.data[li + k] * l.data[lj + k];
                }
                if i == j {
                    if !(s.is_finite() && s > 0.0) {
                        return Err(Error::NotPositiveDefinite { index: i, pivot: s });
                    }
                    l.data[li + i] = s.sqrt();
                } else {
                    l.data[li + j] = s / l.data[lj + j];
                }
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.rows
    }

    pub fn factor_matrix(&self) -> &DenseMatrix {
        &self.l
    }

    pub fn solve(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        self.solve_leading(self.dim(), b)
    }

    /// Solves with the leading `size x size` block of the factored matrix,
    /// which is the factor of the corresponding leading principal submatrix.
    /// `b` must have exactly `size` rows.
    pub fn solve_leading(&self, size: usize, b: &DenseMatrix) -> Result<DenseMatrix> {
        if size > self.dim() || b.rows != size {
            return Err(Error::Shape(format!(
                "solve with leading block {size} of a {0}x{0} factor and rhs {1:?}",
                self.dim(),
                b.shape()
            )));
        }
        let n = self.dim();
        let m = b.cols;
        let l = &self.l.data;
        let mut x = b.clone();
        // forward: l y = b
        for i in 0..size {
            for k in 0..i {
                let lik = l[i * n + k];
                if lik == 0.0 {
                    continue;
                }
                for c in 0..m {
                    x.data[i * m + c] -= lik * x.data[k * m + c];
                }
            }
            let d = l[i * n + i];
            for c in 0..m {
                x.data[i * m + c] /= d;
            }
        }
        // backward: lᵀ x = y
        for i in (0..size).rev() {
            for k in i + 1..size {
                let lki = l[k * n + i];
                if lki == 0.0 {
                    continue;
                }
                for c in 0..m {
                    x.data[i * m + c] -= lki * x.data[k * m + c];
                }
            }
            let d = l[i * n + i];
            for c in 0..m {
                x.data[i * m + c] /= d;
            }
        }
        Ok(x)
    }
}

/// Solves `a x = b` for symmetric positive-definite `a` via Cholesky.
pub fn solve_spd(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.rows != b.rows {
        return Err(Error::Shape(format!(
            "solve {:?} with rhs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Cholesky::factor(a)?.solve(b)
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn inverse(a: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.rows;
    if a.cols != n {
        return Err(Error::Shape(format!("inverse of {:?}", a.shape())));
    }
    let scale = a.max_abs();
    if n > 0 && scale == 0.0 {
        return Err(Error::Singular);
    }
    let tol = scale * n as f64 * f64::EPSILON;
    let mut m = a.clone();
    let mut inv = DenseMatrix::identity(n);
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&x, &y| m.get(x, col).abs().total_cmp(&m.get(y, col).abs()))
            .expect("non-empty pivot range");
        let p = m.get(pivot_row, col);
        if p.abs() <= tol {
            return Err(Error::Singular);
        }
        if pivot_row != col {
            swap_rows(&mut m, pivot_row, col);
            swap_rows(&mut inv, pivot_row, col);
        }
        let inv_p = 1.0 / p;
        m.row_mut(col).iter_mut().for_each(|v| *v *= inv_p);
        inv.row_mut(col).iter_mut().for_each(|v| *v *= inv_p);
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m.get(r, col);
            if f == 0.0 {
                continue;
            }
            for c in 0..n {
                let mv = m.get(col, c);
                let iv = inv.get(col, c);
                m.data[r * n + c] -= f * mv;
                inv.data[r * n + c] -= f * iv;
            }
        }
    }
    Ok(inv)
}

fn swap_rows(m: &mut DenseMatrix, a: usize, b: usize) {
    let cols = m.cols;
    for c in 0..cols {
        m.data.swap(a * cols + c, b * cols + c);
    }
}

/// Moore-Penrose pseudoinverse of a full-rank matrix through its Gram
/// matrix: `(aᵀa)⁻¹aᵀ` when tall, `aᵀ(aaᵀ)⁻¹` when wide. Rank deficiency
/// is reported as [`Error::Singular`].
pub fn pinv(a: &DenseMatrix) -> Result<DenseMatrix> {
    let at = a.transpose();
    if a.rows >= a.cols {
        let g = gram(a);
        matmul(&inverse(&g)?, &at)
    } else {
        let g = gram(&at);
        matmul(&at, &inverse(&g)?)
    }
}
