//! Minimal dense complex-matrix support: products, LU solve, and the
//! spectral norm through the real embedding [[Re,-Im],[Im,Re]].

use num_complex::Complex64;

use super::{LinalgError, Matrix, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> CMatrix {
        CMatrix { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> CMatrix {
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> CMatrix {
        let mut m = CMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn from_real(a: &Matrix) -> CMatrix {
        CMatrix::from_fn(a.rows(), a.cols(), |i, j| Complex64::new(a[(i, j)], 0.0))
    }

    pub fn from_parts(re: &Matrix, im: &Matrix) -> CMatrix {
        assert!(re.rows() == im.rows() && re.cols() == im.cols());
        CMatrix::from_fn(re.rows(), re.cols(), |i, j| Complex64::new(re[(i, j)], im[(i, j)]))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn mul(&self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, rhs.rows, "complex matmul shape mismatch");
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    let v = out.get(i, j) + a * rhs.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> CMatrix {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn sub(&self, rhs: &CMatrix) -> CMatrix {
        assert!(self.rows == rhs.rows && self.cols == rhs.cols);
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(rhs.data.iter()).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn normalize_column(&mut self, j: usize) {
        let norm: f64 = (0..self.rows).map(|i| self.get(i, j).norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            for i in 0..self.rows {
                let v = self.get(i, j) / norm;
                self.set(i, j, v);
            }
        }
    }

    /// Real embedding [[Re, -Im], [Im, Re]]; shares the singular values of
    /// the complex matrix (each with doubled multiplicity).
    pub fn real_embedding(&self) -> Matrix {
        let mut out = Matrix::zeros(2 * self.rows, 2 * self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let v = self.get(i, j);
                out[(i, j)] = v.re;
                out[(i, j + self.cols)] = -v.im;
                out[(i + self.rows, j)] = v.im;
                out[(i + self.rows, j + self.cols)] = v.re;
            }
        }
        out
    }

    pub fn spectral_norm(&self) -> f64 {
        self.real_embedding().spectral_norm()
    }

    /// LU solve with partial pivoting; A X = B.
    pub fn solve(&self, b: &CMatrix) -> Result<CMatrix> {
        assert!(self.rows == self.cols, "complex solve expects square lhs");
        assert_eq!(self.rows, b.rows, "rhs row mismatch");
        let n = self.rows;
        let mut lu = self.clone();
        let mut x = b.clone();
        for k in 0..n {
            let mut p = k;
            let mut max = lu.get(k, k).norm();
            for i in (k + 1)..n {
                if lu.get(i, k).norm() > max {
                    max = lu.get(i, k).norm();
                    p = i;
                }
            }
            if max == 0.0 {
                return Err(LinalgError::IllConditioned(f64::INFINITY));
            }
            if p != k {
                for j in 0..n {
                    let t = lu.get(k, j);
                    lu.set(k, j, lu.get(p, j));
                    lu.set(p, j, t);
                }
                for j in 0..x.cols {
                    let t = x.get(k, j);
                    x.set(k, j, x.get(p, j));
                    x.set(p, j, t);
                }
            }
            let piv = lu.get(k, k);
            for i in (k + 1)..n {
                let f = lu.get(i, k) / piv;
                lu.set(i, k, f);
                for j in (k + 1)..n {
                    let v = lu.get(i, j) - f * lu.get(k, j);
                    lu.set(i, j, v);
                }
                for j in 0..x.cols {
                    let v = x.get(i, j) - f * x.get(k, j);
                    x.set(i, j, v);
                }
            }
        }
        for k in (0..n).rev() {
            let d = lu.get(k, k);
            for j in 0..x.cols {
                let v = x.get(k, j) / d;
                x.set(k, j, v);
            }
            for i in 0..k {
                let f = lu.get(i, k);
                for j in 0..x.cols {
                    let v = x.get(i, j) - f * x.get(k, j);
                    x.set(i, j, v);
                }
            }
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<CMatrix> {
        self.solve(&CMatrix::identity(self.rows))
    }
}

/// sigma_max of C (jw I - A)^-1 B + D at a single frequency.
pub fn transfer_gain_at(a: &Matrix, b: &Matrix, c: &Matrix, d: Option<&Matrix>, omega: f64) -> Result<f64> {
    let n = a.rows();
    let jw = Complex64::new(0.0, omega);
    let m = CMatrix::from_fn(n, n, |i, j| {
        let diag = if i == j { jw } else { Complex64::new(0.0, 0.0) };
        diag - Complex64::new(a[(i, j)], 0.0)
    });
    let x = m.solve(&CMatrix::from_real(b))?;
    let mut t = CMatrix::from_real(c).mul(&x);
    if let Some(d) = d {
        for i in 0..t.rows() {
            for j in 0..t.cols() {
                let v = t.get(i, j) + Complex64::new(d[(i, j)], 0.0);
                t.set(i, j, v);
            }
        }
    }
    Ok(t.spectral_norm())
}
