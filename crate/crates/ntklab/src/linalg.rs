//! Dense real linear algebra and spectral primitives.
//!
//! Everything downstream (kernel matrices, NTK blocks, bound checkers) runs on
//! the two types defined here: the row-major [`Matrix`] and the sorted
//! eigensystem [`Spectrum`]. The eigensolver is cyclic Jacobi; at the sizes
//! this crate works with (a few hundred rows at most) robustness and
//! orthonormal eigenvectors matter more than asymptotic speed.
//!
//! Matrices are immutable values once built, so they can be shared across
//! threads freely; none of the operations below mutate their inputs.

use thiserror::Error;

/// Default cap on the number of entries a Kronecker product may allocate.
pub const DEFAULT_KRON_CAP: usize = 4_000_000;

/// Hard cap on Jacobi sweeps before reporting non-convergence.
const MAX_JACOBI_SWEEPS: usize = 100;

/// Off-diagonal Frobenius convergence threshold, relative to the input norm.
const JACOBI_THRESHOLD: f64 = 1e-12;

/// Errors from dense linear-algebra operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not square: {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },
    #[error("asymmetry {deviation:.3e} exceeds tolerance {limit:.3e}")]
    AsymmetricBeyondTol { deviation: f64, limit: f64 },
    #[error("Jacobi eigensolver did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("result would hold {requested} entries, cap is {cap}")]
    SizeOverflow { requested: usize, cap: usize },
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },
    #[error("linear solve failed: matrix numerically singular despite ridge")]
    SolveFailure,
    #[error("ridge parameter must be positive, got {sigma}")]
    InvalidRidge { sigma: f64 },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("CSV parse error at line {line}: {message}")]
    Csv { line: usize, message: String },
}

fn dim_err(context: impl Into<String>) -> LinalgError {
    LinalgError::DimensionMismatch {
        context: context.into(),
    }
}

/// Dense row-major matrix of `f64`. Entries are finite by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major entries, rejecting NaN/Inf values.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(dim_err(format!(
                "{} entries for a {}x{} matrix",
                data.len(),
                rows,
                cols
            )));
        }
        for (idx, v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(LinalgError::NonFinite {
                    row: idx / cols.max(1),
                    col: idx % cols.max(1),
                });
            }
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
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds a matrix by evaluating `f(i, j)` at every position.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let v = f(i, j);
                debug_assert!(v.is_finite(), "non-finite entry at ({i}, {j})");
                data.push(v);
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(dim_err("ragged rows"));
        }
        Self::new(r, c, rows.concat())
    }

    /// Single-column matrix holding `v`.
    pub fn column_vector(v: &[f64]) -> Self {
        Self::from_fn(v.len(), 1, |i, _| v[i])
    }

    /// Single-row matrix holding `v`.
    pub fn row_vector(v: &[f64]) -> Self {
        Self::from_fn(1, v.len(), |_, j| v[j])
    }

    pub fn diagonal(entries: &[f64]) -> Self {
        Self::from_fn(entries.len(), entries.len(), |i, j| {
            if i == j {
                entries[i]
            } else {
                0.0
            }
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    /// Row `i` as a slice.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Matrix product `self * other`. Panics on dimension mismatch; callers
    /// that accept external input validate dimensions first.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, other.rows,
            "matmul: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += aik * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "mul_vec length mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j) + other.get(i, j))
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j) - other.get(i, j))
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix::from_fn(self.rows, self.cols, |i, j| s * self.get(i, j))
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `||M - M^T||_F`, zero for exactly symmetric matrices.
    pub fn sym_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut acc = 0.0;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let d = self.get(i, j) - self.get(j, i);
                acc += 2.0 * d * d;
            }
        }
        acc.sqrt()
    }

    /// Symmetrized copy `(M + M^T) / 2`.
    pub fn symmetrized(&self) -> Matrix {
        assert!(self.is_square());
        Matrix::from_fn(self.rows, self.cols, |i, j| {
            0.5 * (self.get(i, j) + self.get(j, i))
        })
    }

    /// Serializes as CSV: one row per line, no header, 17 significant digits
    /// so values round-trip exactly.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.rows {
            let line: Vec<String> = self.row(i).iter().map(|v| fmt_float(*v)).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Matrix, LinalgError> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut row = Vec::new();
            for field in line.split(',') {
                let v: f64 = field.trim().parse().map_err(|e| LinalgError::Csv {
                    line: lineno + 1,
                    message: format!("{e}: {field:?}"),
                })?;
                row.push(v);
            }
            rows.push(row);
        }
        Matrix::from_rows(&rows)
    }
}

/// Formats a float in scientific notation with 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Eigensystem of a symmetric matrix, eigenvalues sorted descending.
#[derive(Debug, Clone)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    eigenvectors: Option<Matrix>,
    residual: f64,
}

impl Spectrum {
    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Orthonormal eigenvectors as columns, aligned with `eigenvalues`.
    pub fn eigenvectors(&self) -> Option<&Matrix> {
        self.eigenvectors.as_ref()
    }

    /// Max over eigenpairs of `||Mv - lambda v||_2`.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_min(&self) -> f64 {
        *self.eigenvalues.last().unwrap()
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// The input must be square and symmetric within `tol * ||m||_F`; inputs
/// inside the tolerance are symmetrized as `(M + M^T)/2` before
/// decomposition, anything beyond it is an error rather than a silent fix.
pub fn sym_eig(m: &Matrix, tol: f64) -> Result<Spectrum, LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::NonSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let norm = m.frob_norm();
    let deviation = m.sym_deviation();
    if deviation > tol * norm {
        return Err(LinalgError::AsymmetricBeyondTol {
            deviation,
            limit: tol * norm,
        });
    }

    let n = m.rows();
    let sym = m.symmetrized();
    let mut a = sym.clone();
    let mut v = Matrix::identity(n);
    let threshold = JACOBI_THRESHOLD * norm;

    let mut converged = n < 2;
    for _sweep in 0..MAX_JACOBI_SWEEPS {
        if converged {
            break;
        }
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += 2.0 * a.get(p, q) * a.get(p, q);
            }
        }
        if off.sqrt() <= threshold {
            converged = true;
            break;
        }
        for p in 0..(n - 1) {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = if theta.abs() > 1e12 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // A <- G^T A G with the Givens rotation G in the (p, q) plane.
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    if !converged {
        // Final check: the last sweep may have pushed us under the threshold.
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += 2.0 * a.get(p, q) * a.get(p, q);
            }
        }
        if off.sqrt() > threshold {
            return Err(LinalgError::NoConvergence {
                sweeps: MAX_JACOBI_SWEEPS,
            });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(j, j).partial_cmp(&a.get(i, i)).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a.get(i, i)).collect();
    let vectors = Matrix::from_fn(n, n, |i, j| v.get(i, order[j]));

    let mut residual: f64 = 0.0;
    for (j, &lambda) in eigenvalues.iter().enumerate() {
        let col = vectors.column(j);
        let mv = sym.mul_vec(&col);
        let r: f64 = mv
            .iter()
            .zip(&col)
            .map(|(m_i, v_i)| {
                let d = m_i - lambda * v_i;
                d * d
            })
            .sum::<f64>()
            .sqrt();
        residual = residual.max(r);
    }

    Ok(Spectrum {
        eigenvalues,
        eigenvectors: Some(vectors),
        residual,
    })
}

/// Kronecker product with the default element cap.
pub fn kron(a: &Matrix, b: &Matrix) -> Result<Matrix, LinalgError> {
    kron_capped(a, b, DEFAULT_KRON_CAP)
}

/// Kronecker product `a (x) b`: block (i, j) equals `a[i,j] * b`.
pub fn kron_capped(a: &Matrix, b: &Matrix, cap: usize) -> Result<Matrix, LinalgError> {
    let rows = a
        .rows()
        .checked_mul(b.rows())
        .ok_or(LinalgError::SizeOverflow {
            requested: usize::MAX,
            cap,
        })?;
    let cols = a
        .cols()
        .checked_mul(b.cols())
        .ok_or(LinalgError::SizeOverflow {
            requested: usize::MAX,
            cap,
        })?;
    let requested = rows.checked_mul(cols).ok_or(LinalgError::SizeOverflow {
        requested: usize::MAX,
        cap,
    })?;
    if requested > cap {
        return Err(LinalgError::SizeOverflow { requested, cap });
    }
    Ok(Matrix::from_fn(rows, cols, |i, j| {
        a.get(i / b.rows(), j / b.cols()) * b.get(i % b.rows(), j % b.cols())
    }))
}

/// Solves `(k + sigma I) X = rhs` by Cholesky factorization.
pub fn ridge_solve(k: &Matrix, rhs: &Matrix, sigma: f64) -> Result<Matrix, LinalgError> {
    if !k.is_square() {
        return Err(LinalgError::NonSquare {
            rows: k.rows(),
            cols: k.cols(),
        });
    }
    if rhs.rows() != k.rows() {
        return Err(dim_err(format!(
            "rhs has {} rows, kernel is {}x{}",
            rhs.rows(),
            k.rows(),
            k.cols()
        )));
    }
    if sigma <= 0.0 || !sigma.is_finite() {
        return Err(LinalgError::InvalidRidge { sigma });
    }
    let n = k.rows();
    let mut a = k.symmetrized();
    for i in 0..n {
        a.set(i, i, a.get(i, i) + sigma);
    }
    let chol = cholesky(&a)?;
    let mut out = Matrix::zeros(n, rhs.cols());
    for j in 0..rhs.cols() {
        let x = cholesky_solve(&chol, &rhs.column(j));
        for i in 0..n {
            out.set(i, j, x[i]);
        }
    }
    Ok(out)
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
fn cholesky(a: &Matrix) -> Result<Matrix, LinalgError> {
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a.get(i, j);
            for k in 0..j {
                sum -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return Err(LinalgError::SolveFailure);
                }
                l.set(i, j, sum.sqrt());
            } else {
                l.set(i, j, sum / l.get(j, j));
            }
        }
    }
    Ok(l)
}

fn cholesky_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l.get(i, k) * y[k];
        }
        y[i] = sum / l.get(i, i);
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in (i + 1)..n {
            sum -= l.get(k, i) * x[k];
        }
        x[i] = sum / l.get(i, i);
    }
    x
}

/// Positive-semidefiniteness check: `(is_psd, min_eigenvalue)`.
///
/// `is_psd` is true iff the smallest eigenvalue is at least
/// `-tol * max(1, lambda_max)`.
pub fn psd_check(m: &Matrix, tol: f64) -> Result<(bool, f64), LinalgError> {
    let spectrum = sym_eig(m, tol)?;
    let min_eig = spectrum.lambda_min();
    let scale = spectrum.lambda_max().max(1.0);
    Ok((min_eig >= -tol * scale, min_eig))
}

/// Sum of the absolute values of all entries.
pub fn abs_entry_sum(m: &Matrix) -> f64 {
    m.data().iter().map(|v| v.abs()).sum()
}
