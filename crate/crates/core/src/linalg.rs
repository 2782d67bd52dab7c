//! Dense row-major matrices with hand-rolled LU and Cholesky factorizations.
//!
//! Everything here is sized for desk-scale control problems (a few hundred
//! states). Products use an `i-k-j` loop order over contiguous rows so the
//! inner loop vectorizes.

use std::fmt::Write as _;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// A dense `rows x cols` matrix of `f64` stored row-major.
#[derive(Clone, Debug, PartialEq)]
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

    pub fn scaled_identity(n: usize, value: f64) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = value;
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

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row vectors; all rows must share a length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    context: "Matrix::from_rows",
                    expected: cols,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "Matrix::from_vec",
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
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

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
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

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch {
                context: "matmul",
                expected: self.cols,
                actual: rhs.rows,
            });
        }
        Ok(self.mul_unchecked(rhs))
    }

    /// Product without the shape check; panics on mismatched shapes.
    pub(crate) fn mul_unchecked(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        let n = rhs.cols;
        for i in 0..self.rows {
            let out_row = &mut out.data[i * n..(i + 1) * n];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let rhs_row = &rhs.data[k * n..(k + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                context: "matvec",
                expected: self.cols,
                actual: x.len(),
            });
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `xᵀ M x` for a square matrix.
    pub fn quadratic_form(&self, x: &[f64]) -> Result<f64> {
        let mx = self.matvec(x)?;
        Ok(x.iter().zip(&mx).map(|(a, b)| a * b).sum())
    }

    fn zip_with(&self, rhs: &Matrix, context: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.rows * self.cols,
                actual: rhs.rows * rhs.cols,
            });
        }
        let data = self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn add(&self, rhs: &Matrix) -> Result<Matrix> {
        self.zip_with(rhs, "add", |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Matrix) -> Result<Matrix> {
        self.zip_with(rhs, "sub", |a, b| a - b)
    }

    pub fn scale(&self, factor: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Induced infinity norm (maximum absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Induced one norm (maximum absolute column sum).
    pub fn norm_one(&self) -> f64 {
        let mut sums = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (s, v) in sums.iter_mut().zip(self.row(i)) {
                *s += v.abs();
            }
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Replaces `M` by `(M + Mᵀ)/2`; the result is exactly symmetric.
    pub fn symmetrize(&mut self) {
        assert!(self.is_square(), "symmetrize needs a square matrix");
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let avg = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = avg;
                self[(j, i)] = avg;
            }
        }
    }

    pub fn symmetric_part(&self) -> Matrix {
        let mut m = self.clone();
        m.symmetrize();
        m
    }

    /// `‖M − Mᵀ‖∞`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            let mut row = 0.0;
            for j in 0..self.cols {
                row += (self[(i, j)] - self[(j, i)]).abs();
            }
            worst = worst.max(row);
        }
        worst
    }

    /// Copies the `rows x cols` block starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Matrix {
        Matrix::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Matrix) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)];
            }
        }
    }

    pub fn lu(&self) -> Result<Lu> {
        Lu::factor(self)
    }

    pub fn inverse(&self) -> Result<Matrix> {
        self.lu()?.inverse()
    }

    /// Solves `self * X = rhs`.
    pub fn solve(&self, rhs: &Matrix) -> Result<Matrix> {
        self.lu()?.solve_matrix(rhs)
    }

    pub fn cholesky(&self) -> Result<Cholesky> {
        Cholesky::factor(self)
    }

    /// Writes the plain-text interchange format: a `rows cols` header, then
    /// one line per row of whitespace-separated decimals.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.rows, self.cols);
        for i in 0..self.rows {
            let line: Vec<String> = self.row(i).iter().map(|v| format!("{v:.16e}")).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    /// Parses the format written by [`Matrix::to_text`]. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn from_text(text: &str) -> Result<Matrix> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "missing `rows cols` header".into(),
        })?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                line: hline,
                message: format!("bad header: {e}"),
            })?;
        if dims.len() != 2 {
            return Err(Error::Parse {
                line: hline,
                message: "header must be `rows cols`".into(),
            });
        }
        let (rows, cols) = (dims[0], dims[1]);
        let mut data = Vec::with_capacity(rows * cols);
        let mut seen = 0;
        for (lineno, line) in lines {
            let row: Vec<f64> = line
                .split_whitespace()
                .map(str::parse::<f64>)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse {
                    line: lineno,
                    message: e.to_string(),
                })?;
            if row.len() != cols {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected {cols} entries, found {}", row.len()),
                });
            }
            if seen == rows {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("more than {rows} rows"),
                });
            }
            data.extend(row);
            seen += 1;
        }
        if seen != rows {
            return Err(Error::Parse {
                line: text.lines().count(),
                message: format!("expected {rows} rows, found {seen}"),
            });
        }
        Matrix::from_vec(rows, cols, data)
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

/// LU factorization with partial (row) pivoting: `P A = L U`.
#[derive(Clone, Debug)]
pub struct Lu {
    factors: Matrix,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    pub fn factor(a: &Matrix) -> Result<Lu> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch {
                context: "LU of non-square matrix",
                expected: a.rows,
                actual: a.cols,
            });
        }
        let n = a.rows;
        let mut f = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let scale = a.max_abs();
        // Pivots below this are treated as exact breakdown.
        let floor = scale * f64::EPSILON * (n.max(1) as f64) * 1e-3;
        for k in 0..n {
            let (p, pmax) =
                (k..n)
                    .map(|i| (i, f[(i, k)].abs()))
                    .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmax <= floor || pmax == 0.0 || !pmax.is_finite() {
                return Err(Error::Singular("zero pivot in LU"));
            }
            if p != k {
                for j in 0..n {
                    f.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = f[(k, k)];
            let (upper, lower) = f.data.split_at_mut((k + 1) * n);
            let pivot_row = &upper[k * n..(k + 1) * n];
            for row in lower.chunks_exact_mut(n) {
                let l = row[k] / pivot;
                row[k] = l;
                if l != 0.0 {
                    for (r, &u) in row[k + 1..].iter_mut().zip(&pivot_row[k + 1..]) {
                        *r -= l * u;
                    }
                }
            }
        }
        Ok(Lu { factors: f, perm, sign })
    }

    pub fn dim(&self) -> usize {
        self.factors.rows
    }

    /// Natural log of `|det A|`.
    pub fn log_abs_det(&self) -> f64 {
        (0..self.dim()).map(|i| self.factors[(i, i)].abs().ln()).sum()
    }

    pub fn det(&self) -> f64 {
        self.sign * (0..self.dim()).map(|i| self.factors[(i, i)]).product::<f64>()
    }

    pub fn solve_vec(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                context: "LU solve",
                expected: n,
                actual: b.len(),
            });
        }
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.factors.row(i);
            let s: f64 = row[..i].iter().zip(&x[..i]).map(|(l, v)| l * v).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = self.factors.row(i);
            let s: f64 = row[i + 1..].iter().zip(&x[i + 1..]).map(|(u, v)| u * v).sum();
            x[i] = (x[i] - s) / row[i];
        }
        Ok(x)
    }

    /// Solves `A X = B` column block at once, working on rows of `B`.
    pub fn solve_matrix(&self, b: &Matrix) -> Result<Matrix> {
        let n = self.dim();
        if b.rows != n {
            return Err(Error::DimensionMismatch {
                context: "LU solve",
                expected: n,
                actual: b.rows,
            });
        }
        let m = b.cols;
        let mut x = Matrix::zeros(n, m);
        for (i, &p) in self.perm.iter().enumerate() {
            x.row_mut(i).copy_from_slice(b.row(p));
        }
        for i in 0..n {
            let (done, rest) = x.data.split_at_mut(i * m);
            let xi = &mut rest[..m];
            for (k, &l) in self.factors.row(i)[..i].iter().enumerate() {
                if l != 0.0 {
                    for (t, &s) in xi.iter_mut().zip(&done[k * m..(k + 1) * m]) {
                        *t -= l * s;
                    }
                }
            }
        }
        for i in (0..n).rev() {
            let (head, tail) = x.data.split_at_mut((i + 1) * m);
            let xi = &mut head[i * m..];
            let row = self.factors.row(i);
            for (k, &u) in row[i + 1..].iter().enumerate() {
                if u != 0.0 {
                    let src = &tail[k * m..(k + 1) * m];
                    for (t, &s) in xi.iter_mut().zip(src) {
                        *t -= u * s;
                    }
                }
            }
            let d = row[i];
            for t in xi.iter_mut() {
                *t /= d;
            }
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<Matrix> {
        self.solve_matrix(&Matrix::identity(self.dim()))
    }
}

/// Cholesky factorization `A = L Lᵀ` of a symmetric positive definite matrix.
#[derive(Clone, Debug)]
pub struct Cholesky {
    lower: Matrix,
}

impl Cholesky {
    pub fn factor(a: &Matrix) -> Result<Cholesky> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch {
                context: "Cholesky of non-square matrix",
                expected: a.rows,
                actual: a.cols,
            });
        }
        let n = a.rows;
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let s: f64 = (0..j).map(|k| l[(j, k)] * l[(j, k)]).sum();
            let d = a[(j, j)] - s;
            if !(d > 0.0) {
                return Err(Error::NotPositiveDefinite("non-positive pivot in Cholesky"));
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in (j + 1)..n {
                let s: f64 = (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum();
                l[(i, j)] = (a[(i, j)] - s) / d;
            }
        }
        Ok(Cholesky { lower: l })
    }

    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    pub fn solve_vec(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.lower.rows;
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                context: "Cholesky solve",
                expected: n,
                actual: b.len(),
            });
        }
        let l = &self.lower;
        let mut y = b.to_vec();
        for i in 0..n {
            let s: f64 = (0..i).map(|k| l[(i, k)] * y[k]).sum();
            y[i] = (y[i] - s) / l[(i, i)];
        }
        for i in (0..n).rev() {
            let s: f64 = ((i + 1)..n).map(|k| l[(k, i)] * y[k]).sum();
            y[i] = (y[i] - s) / l[(i, i)];
        }
        Ok(y)
    }

    pub fn solve_matrix(&self, b: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(b.rows, b.cols);
        for j in 0..b.cols {
            let x = self.solve_vec(&b.column(j))?;
            for (i, v) in x.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        Ok(out)
    }

    pub fn inverse(&self) -> Result<Matrix> {
        self.solve_matrix(&Matrix::identity(self.lower.rows))
    }
}

/// Smallest eigenvalue of a symmetric matrix, from Gershgorin-free bisection
/// on Sylvester inertia (LDLᵀ pivots of `A − t I`).
pub fn min_eigenvalue_symmetric(a: &Matrix) -> f64 {
    let n = a.rows;
    if n == 0 {
        return 0.0;
    }
    let radius = a.norm_inf();
    let (mut lo, mut hi) = (-radius - 1.0, radius + 1.0);
    // Count of eigenvalues strictly below t.
    let count_below = |t: f64| -> usize {
        let mut m = a.clone();
        for i in 0..n {
            m[(i, i)] -= t;
        }
        let mut negatives = 0;
        for k in 0..n {
            let mut d = m[(k, k)];
            if d == 0.0 {
                d = -f64::EPSILON * (radius + 1.0);
            }
            if d < 0.0 {
                negatives += 1;
            }
            for i in (k + 1)..n {
                let f = m[(i, k)] / d;
                if f != 0.0 {
                    for j in (k + 1)..n {
                        let v = m[(k, j)];
                        m[(i, j)] -= f * v;
                    }
                }
            }
        }
        negatives
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if count_below(mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-14 * (radius + 1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: &Matrix, b: &Matrix, tol: f64) -> bool {
        a.sub(b).unwrap().max_abs() <= tol
    }

    #[test]
    fn lu_identity_and_permutation() {
        let i3 = Matrix::identity(3);
        assert_eq!(i3.inverse().unwrap(), i3);
        let p = Matrix::from_rows(&[vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]]).unwrap();
        let inv = p.inverse().unwrap();
        assert_eq!(inv, p.transpose());
        assert_eq!(p.lu().unwrap().det(), 1.0);
    }

    #[test]
    fn lu_solves_general_system() {
        let a = Matrix::from_rows(&[vec![2.0, 1.0, 1.0], vec![4.0, -6.0, 0.0], vec![-2.0, 7.0, 2.0]]).unwrap();
        let x = a.lu().unwrap().solve_vec(&[5.0, -2.0, 9.0]).unwrap();
        for (got, want) in x.iter().zip([1.0, 1.0, 2.0]) {
            assert!((got - want).abs() < 1e-14);
        }
        let inv = a.inverse().unwrap();
        assert!(approx(&a.matmul(&inv).unwrap(), &Matrix::identity(3), 1e-14));
        assert!((a.lu().unwrap().det() - (-16.0)).abs() < 1e-12);
    }

    #[test]
    fn lu_rejects_singular() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(a.lu(), Err(Error::Singular(_))));
        assert!(matches!(Matrix::zeros(2, 2).lu(), Err(Error::Singular(_))));
    }

    #[test]
    fn cholesky_roundtrip() {
        let a = Matrix::from_rows(&[vec![4.0, 2.0, 0.0], vec![2.0, 5.0, 1.0], vec![0.0, 1.0, 3.0]]).unwrap();
        let c = a.cholesky().unwrap();
        let l = c.lower();
        assert!(approx(&l.matmul(&l.transpose()).unwrap(), &a, 1e-14));
        assert!(approx(
            &a.matmul(&c.inverse().unwrap()).unwrap(),
            &Matrix::identity(3),
            1e-14
        ));
        let not_pd = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(not_pd.cholesky(), Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn min_eigenvalue_of_known_spectrum() {
        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        assert!((min_eigenvalue_symmetric(&a) - 1.0).abs() < 1e-12);
        let d = Matrix::from_diag(&[3.0, -0.5, 7.0]);
        assert!((min_eigenvalue_symmetric(&d) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn text_format_roundtrip_and_errors() {
        let m = Matrix::from_rows(&[vec![1.5, -2.0], vec![1e-300, 3.0]]).unwrap();
        let back = Matrix::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
        assert!(matches!(
            Matrix::from_text("2 2\n1 2\n3\n"),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(Matrix::from_text("2 2\n1 2\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn symmetrize_is_exact() {
        let mut m = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.000001, 1.0]]).unwrap();
        m.symmetrize();
        assert_eq!(m.asymmetry(), 0.0);
    }
}
