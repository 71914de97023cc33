//! Dense real/complex matrix kernel.
//!
//! Everything in this toolkit operates on small dense matrices (a few
//! dozen rows at most), so the kernel favors simplicity and verifiable
//! numerics over asymptotic speed: LU with partial pivoting, cyclic
//! Jacobi for symmetric eigenproblems, Hessenberg + Francis double-shift
//! QR for general spectra, and scaling-and-squaring Pade for the matrix
//! exponential.

mod complex;
mod eig;
mod expm;

pub use complex::{transfer_gain_at, CMatrix};
pub use eig::ComplexSpectrum;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix entries must be finite")]
    NonFinite,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("empty (0x0) matrices are not admitted")]
    Empty,
    #[error("matrix is singular or ill-conditioned (estimated condition {0:.3e})")]
    IllConditioned(f64),
    #[error("eigenvalue iteration failed to converge")]
    NoConvergence,
    #[error("repeated eigenvalues (minimal gap {gap:.3e} below threshold {threshold:.3e})")]
    RepeatedEigenvalues { gap: f64, threshold: f64 },
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Dense real matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(d: &[f64]) -> Matrix {
        let mut m = Matrix::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from row-major nested slices, validating shape and
    /// finiteness.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(LinalgError::Empty);
        }
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(LinalgError::DimensionMismatch(format!(
                    "ragged rows: expected {} columns, got {}",
                    cols,
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Matrix::from_vec(rows.len(), cols, data)
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Matrix> {
        if rows == 0 || cols == 0 {
            return Err(LinalgError::Empty);
        }
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch(format!(
                "{}x{} matrix needs {} entries, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Matrix {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn scalar(v: f64) -> Matrix {
        Matrix { rows: 1, cols: 1, data: vec![v] }
    }

    /// Column vector from a slice.
    pub fn col_vec(v: &[f64]) -> Matrix {
        Matrix { rows: v.len(), cols: 1, data: v.to_vec() }
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

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if (self[(i, j)] - self[(j, i)]).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Extracts the block with rows `r0..r0+nr` and columns `c0..c0+nc`.
    pub fn block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Matrix {
        assert!(r0 + nr <= self.rows && c0 + nc <= self.cols, "block out of range");
        Matrix::from_fn(nr, nc, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &Matrix) {
        assert!(r0 + b.rows <= self.rows && c0 + b.cols <= self.cols, "block out of range");
        for i in 0..b.rows {
            for j in 0..b.cols {
                self[(r0 + i, c0 + j)] = b[(i, j)];
            }
        }
    }

    /// Assembles a matrix from a grid of equally-shaped blocks.
    pub fn from_blocks(grid: &[Vec<Matrix>]) -> Matrix {
        assert!(!grid.is_empty() && !grid[0].is_empty());
        let br = grid[0][0].rows;
        let bc = grid[0][0].cols;
        let mut out = Matrix::zeros(br * grid.len(), bc * grid[0].len());
        for (bi, row) in grid.iter().enumerate() {
            for (bj, b) in row.iter().enumerate() {
                assert!(b.rows == br && b.cols == bc, "inconsistent block shapes");
                out.set_block(bi * br, bj * bc, b);
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest singular value, computed as sqrt(lambda_max(A^T A)).
    pub fn spectral_norm(&self) -> f64 {
        if self.data.iter().all(|&v| v == 0.0) {
            return 0.0;
        }
        // Gram matrix of the thinner orientation keeps the Jacobi sweep small.
        let g = if self.rows >= self.cols {
            self.transpose() * self
        } else {
            self * &self.transpose()
        };
        let (vals, _) = sym_eig(&g);
        vals.last().copied().unwrap_or(0.0).max(0.0).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> f64 {
        let mut best = 0.0_f64;
        for j in 0..self.cols {
            let s: f64 = (0..self.rows).map(|i| self[(i, j)].abs()).sum();
            best = best.max(s);
        }
        best
    }

    /// Euclidean norm of a row or column vector.
    pub fn vec_norm(&self) -> f64 {
        assert!(self.rows == 1 || self.cols == 1, "vec_norm expects a vector");
        self.frobenius_norm()
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

macro_rules! impl_bin_op {
    ($trait:ident, $fn:ident, $op:tt) => {
        impl std::ops::$trait<&Matrix> for &Matrix {
            type Output = Matrix;
            fn $fn(self, rhs: &Matrix) -> Matrix {
                assert!(
                    self.rows == rhs.rows && self.cols == rhs.cols,
                    "shape mismatch: {}x{} vs {}x{}",
                    self.rows, self.cols, rhs.rows, rhs.cols
                );
                Matrix {
                    rows: self.rows,
                    cols: self.cols,
                    data: self
                        .data
                        .iter()
                        .zip(rhs.data.iter())
                        .map(|(a, b)| a $op b)
                        .collect(),
                }
            }
        }
        impl std::ops::$trait<Matrix> for Matrix {
            type Output = Matrix;
            fn $fn(self, rhs: Matrix) -> Matrix {
                (&self).$fn(&rhs)
            }
        }
    };
}

impl_bin_op!(Add, add, +);
impl_bin_op!(Sub, sub, -);

impl std::ops::Mul<&Matrix> for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        assert!(
            self.cols == rhs.rows,
            "matmul shape mismatch: {}x{} times {}x{}",
            self.rows,
            self.cols,
            rhs.rows,
            rhs.cols
        );
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }
}

impl std::ops::Mul<Matrix> for Matrix {
    type Output = Matrix;
    fn mul(self, rhs: Matrix) -> Matrix {
        &self * &rhs
    }
}

impl std::ops::Mul<&Matrix> for Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        &self * rhs
    }
}

impl std::ops::Mul<Matrix> for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: Matrix) -> Matrix {
        self * &rhs
    }
}

impl std::ops::Neg for &Matrix {
    type Output = Matrix;
    fn neg(self) -> Matrix {
        self.scale(-1.0)
    }
}

/// Kronecker product, (rA*rB) x (cA*cB).
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.rows * b.rows, a.cols * b.cols);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let s = a[(i, j)];
            if s == 0.0 {
                continue;
            }
            for k in 0..b.rows {
                for l in 0..b.cols {
                    out[(i * b.rows + k, j * b.cols + l)] = s * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Blockwise Khatri-Rao masking: `k` is read as an NxN grid of
/// (k.rows/N)x(k.cols/N) blocks and block (i,j) of the result is
/// `mask[(i,j)] * K_ij`.
pub fn khatri_rao(k: &Matrix, mask: &Matrix) -> Result<Matrix> {
    if !mask.is_square() {
        return Err(LinalgError::NotSquare { rows: mask.rows, cols: mask.cols });
    }
    let n_blocks = mask.rows;
    if k.rows % n_blocks != 0 || k.cols % n_blocks != 0 {
        return Err(LinalgError::DimensionMismatch(format!(
            "{}x{} matrix does not partition into {n_blocks}x{n_blocks} blocks",
            k.rows, k.cols
        )));
    }
    let bn = k.rows / n_blocks;
    let bp = k.cols / n_blocks;
    let mut out = Matrix::zeros(k.rows, k.cols);
    for i in 0..n_blocks {
        for j in 0..n_blocks {
            let m = mask[(i, j)];
            if m == 0.0 {
                continue;
            }
            for r in 0..bn {
                for c in 0..bp {
                    out[(i * bn + r, j * bp + c)] = m * k[(i * bn + r, j * bp + c)];
                }
            }
        }
    }
    Ok(out)
}

/// LU factorization with partial pivoting.
struct Lu {
    lu: Matrix,
    piv: Vec<usize>,
    sign_swaps: usize,
}

fn lu_factor(a: &Matrix) -> Result<Lu> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare { rows: a.rows, cols: a.cols });
    }
    let n = a.rows;
    let mut lu = a.clone();
    let mut piv: Vec<usize> = (0..n).collect();
    let mut swaps = 0;
    for k in 0..n {
        let mut p = k;
        let mut max = lu[(k, k)].abs();
        for i in (k + 1)..n {
            if lu[(i, k)].abs() > max {
                max = lu[(i, k)].abs();
                p = i;
            }
        }
        if max == 0.0 {
            return Err(LinalgError::IllConditioned(f64::INFINITY));
        }
        if p != k {
            for j in 0..n {
                let t = lu[(k, j)];
                lu[(k, j)] = lu[(p, j)];
                lu[(p, j)] = t;
            }
            piv.swap(k, p);
            swaps += 1;
        }
        let pivot = lu[(k, k)];
        for i in (k + 1)..n {
            let f = lu[(i, k)] / pivot;
            lu[(i, k)] = f;
            for j in (k + 1)..n {
                lu[(i, j)] -= f * lu[(k, j)];
            }
        }
    }
    Ok(Lu { lu, piv, sign_swaps: swaps })
}

impl Lu {
    fn solve(&self, b: &Matrix) -> Matrix {
        let n = self.lu.rows;
        assert_eq!(b.rows, n, "rhs row mismatch");
        let mut x = Matrix::zeros(n, b.cols);
        for i in 0..n {
            for j in 0..b.cols {
                x[(i, j)] = b[(self.piv[i], j)];
            }
        }
        for k in 0..n {
            for i in (k + 1)..n {
                let f = self.lu[(i, k)];
                for j in 0..b.cols {
                    x[(i, j)] -= f * x[(k, j)];
                }
            }
        }
        for k in (0..n).rev() {
            let d = self.lu[(k, k)];
            for j in 0..b.cols {
                x[(k, j)] /= d;
            }
            for i in 0..k {
                let f = self.lu[(i, k)];
                for j in 0..b.cols {
                    x[(i, j)] -= f * x[(k, j)];
                }
            }
        }
        x
    }

    fn det(&self) -> f64 {
        let mut d = if self.sign_swaps % 2 == 0 { 1.0 } else { -1.0 };
        for i in 0..self.lu.rows {
            d *= self.lu[(i, i)];
        }
        d
    }
}

const MAX_CONDITION: f64 = 1e12;

/// Solves A X = B, rejecting systems with estimated condition above 1e12.
pub fn solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.rows != b.rows {
        return Err(LinalgError::DimensionMismatch(format!(
            "lhs has {} rows, rhs has {}",
            a.rows, b.rows
        )));
    }
    let lu = lu_factor(a)?;
    let inv = lu.solve(&Matrix::identity(a.rows));
    let cond = a.spectral_norm() * inv.spectral_norm();
    if !cond.is_finite() || cond > MAX_CONDITION {
        return Err(LinalgError::IllConditioned(cond));
    }
    Ok(lu.solve(b))
}

pub fn inverse(a: &Matrix) -> Result<Matrix> {
    solve(a, &Matrix::identity(a.rows))
}

pub fn determinant(a: &Matrix) -> Result<f64> {
    match lu_factor(a) {
        Ok(lu) => Ok(lu.det()),
        Err(LinalgError::IllConditioned(_)) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// Cholesky factor L with A = L L^T, or None if A is not positive definite.
pub fn cholesky(a: &Matrix) -> Option<Matrix> {
    if !a.is_square() {
        return None;
    }
    let n = a.rows;
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[(i, i)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Some(l)
}

/// Forward substitution: solves L X = B for lower-triangular L.
pub fn solve_lower(l: &Matrix, b: &Matrix) -> Matrix {
    let n = l.rows;
    let mut x = b.clone();
    for k in 0..n {
        for j in 0..b.cols {
            x[(k, j)] /= l[(k, k)];
        }
        for i in (k + 1)..n {
            let f = l[(i, k)];
            for j in 0..b.cols {
                x[(i, j)] -= f * x[(k, j)];
            }
        }
    }
    x
}

/// Symmetric eigendecomposition by cyclic Jacobi; eigenvalues ascending,
/// columns of the second result are the matching orthonormal eigenvectors.
pub fn sym_eig(s: &Matrix) -> (Vec<f64>, Matrix) {
    assert!(s.is_square(), "sym_eig expects a square matrix");
    let n = s.rows;
    let mut a = s.clone();
    // Symmetrize defensively; callers pass exactly-symmetric data.
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
    let mut v = Matrix::identity(n);
    let scale = a.max_abs().max(1e-300);
    for _sweep in 0..64 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off.sqrt() <= 1e-14 * scale * n as f64 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sgn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sgn * akq;
                    a[(k, q)] = sgn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sgn * aqk;
                    a[(q, k)] = sgn * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sgn * vkq;
                    v[(k, q)] = sgn * vkp + c * vkq;
                }
            }
        }
    }
    let mut pairs: Vec<(f64, usize)> = (0..n).map(|i| (a[(i, i)], i)).collect();
    pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let vals: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let vecs = Matrix::from_fn(n, n, |i, j| v[(i, pairs[j].1)]);
    (vals, vecs)
}

/// Max real part of the spectrum.
pub fn spectral_abscissa(a: &Matrix) -> Result<f64> {
    let spec = eig::eig(a, false)?;
    Ok(spec
        .eigenvalues
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Logarithmic norm mu(A) = lambda_max(A + A^T) / 2.
pub fn log_norm(a: &Matrix) -> Result<f64> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare { rows: a.rows, cols: a.cols });
    }
    let s = a + &a.transpose();
    let (vals, _) = sym_eig(&s);
    Ok(vals.last().copied().unwrap() / 2.0)
}

/// Eigenvector-matrix conditioning |X| |X^-1| with unit-norm columns.
///
/// Requires distinct eigenvalues (gap above 1e-8 |A|); the returned value is
/// a valid constant for the bound |exp(At)| <= kappa exp(alpha(A) t).
pub fn jordan_condition(a: &Matrix) -> Result<f64> {
    let norm_a = a.spectral_norm();
    let spec = eig::eig(a, true)?;
    let n = spec.eigenvalues.len();
    let threshold = 1e-8 * norm_a.max(1e-30);
    let mut min_gap = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            let gap = (spec.eigenvalues[i] - spec.eigenvalues[j]).norm();
            min_gap = min_gap.min(gap);
        }
    }
    if n > 1 && min_gap <= threshold {
        return Err(LinalgError::RepeatedEigenvalues { gap: min_gap, threshold });
    }
    let x = spec.eigenvectors.as_ref().expect("eigenvectors requested");
    let xinv = x.inverse()?;
    Ok(x.spectral_norm() * xinv.spectral_norm())
}

/// Full eigendecomposition; eigenvectors optional, unit-norm columns.
pub fn eig(a: &Matrix, with_vectors: bool) -> Result<ComplexSpectrum> {
    eig::eig(a, with_vectors)
}

/// Matrix exponential exp(A t).
pub fn expm(a: &Matrix, t: f64) -> Result<Matrix> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare { rows: a.rows, cols: a.cols });
    }
    if !t.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    Ok(expm::expm_scaled(&a.scale(t)))
}
