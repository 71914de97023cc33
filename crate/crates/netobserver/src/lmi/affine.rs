//! Affine matrix expressions over a registry of scalar-indexed matrix
//! variables. Constraints are assembled symbolically, so affinity in the
//! declared variables holds by construction.

use std::collections::BTreeMap;

use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarShape {
    /// Symmetric d x d, packed as the upper triangle (row-major).
    Sym(usize),
    Rect(usize, usize),
    Scalar,
}

impl VarShape {
    fn scalar_count(&self) -> usize {
        match *self {
            VarShape::Sym(d) => d * (d + 1) / 2,
            VarShape::Rect(r, c) => r * c,
            VarShape::Scalar => 1,
        }
    }

    fn dims(&self) -> (usize, usize) {
        match *self {
            VarShape::Sym(d) => (d, d),
            VarShape::Rect(r, c) => (r, c),
            VarShape::Scalar => (1, 1),
        }
    }
}

/// Handle to a registered matrix variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatVar(pub(crate) usize);

#[derive(Debug, Clone)]
struct VarEntry {
    name: String,
    shape: VarShape,
    offset: usize,
}

/// Registry mapping matrix variables onto a flat scalar vector.
#[derive(Debug, Clone, Default)]
pub struct VarRegistry {
    entries: Vec<VarEntry>,
    total: usize,
}

impl VarRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, shape: VarShape) -> MatVar {
        let entry = VarEntry { name: name.to_string(), shape, offset: self.total };
        self.total += shape.scalar_count();
        self.entries.push(entry);
        MatVar(self.entries.len() - 1)
    }

    pub fn sym(&mut self, name: &str, d: usize) -> MatVar {
        self.add(name, VarShape::Sym(d))
    }

    pub fn rect(&mut self, name: &str, rows: usize, cols: usize) -> MatVar {
        self.add(name, VarShape::Rect(rows, cols))
    }

    pub fn scalar(&mut self, name: &str) -> MatVar {
        self.add(name, VarShape::Scalar)
    }

    pub fn scalar_count(&self) -> usize {
        self.total
    }

    pub fn name(&self, var: MatVar) -> &str {
        &self.entries[var.0].name
    }

    pub fn shape(&self, var: MatVar) -> VarShape {
        self.entries[var.0].shape
    }

    /// Materializes a variable from the flat assignment.
    pub fn value(&self, var: MatVar, x: &[f64]) -> Matrix {
        let entry = &self.entries[var.0];
        let (r, c) = entry.shape.dims();
        let mut m = Matrix::zeros(r, c);
        match entry.shape {
            VarShape::Sym(d) => {
                let mut k = entry.offset;
                for i in 0..d {
                    for j in i..d {
                        m[(i, j)] = x[k];
                        m[(j, i)] = x[k];
                        k += 1;
                    }
                }
            }
            VarShape::Rect(rows, cols) => {
                for i in 0..rows {
                    for j in 0..cols {
                        m[(i, j)] = x[entry.offset + i * cols + j];
                    }
                }
            }
            VarShape::Scalar => m[(0, 0)] = x[entry.offset],
        }
        m
    }

    /// Writes a matrix value into the flat assignment (used for warm
    /// starts).
    pub fn assign(&self, var: MatVar, value: &Matrix, x: &mut [f64]) {
        let entry = &self.entries[var.0];
        match entry.shape {
            VarShape::Sym(d) => {
                let mut k = entry.offset;
                for i in 0..d {
                    for j in i..d {
                        x[k] = 0.5 * (value[(i, j)] + value[(j, i)]);
                        k += 1;
                    }
                }
            }
            VarShape::Rect(rows, cols) => {
                for i in 0..rows {
                    for j in 0..cols {
                        x[entry.offset + i * cols + j] = value[(i, j)];
                    }
                }
            }
            VarShape::Scalar => x[entry.offset] = value[(0, 0)],
        }
    }
}

/// Matrix-valued affine function of the scalar assignment:
/// `constant + sum_k x_k coeff_k`.
#[derive(Debug, Clone)]
pub struct AffineMat {
    rows: usize,
    cols: usize,
    constant: Matrix,
    coeffs: BTreeMap<usize, Matrix>,
}

impl AffineMat {
    pub fn constant(m: Matrix) -> Self {
        AffineMat { rows: m.rows(), cols: m.cols(), constant: m, coeffs: BTreeMap::new() }
    }

    pub fn zero(rows: usize, cols: usize) -> Self {
        AffineMat::constant(Matrix::zeros(rows, cols))
    }

    /// The expression representing a registered variable.
    pub fn var(reg: &VarRegistry, var: MatVar) -> Self {
        let entry_shape = reg.shape(var);
        let (rows, cols) = entry_shape.dims();
        let offset = reg.entries[var.0].offset;
        let mut coeffs = BTreeMap::new();
        match entry_shape {
            VarShape::Sym(d) => {
                let mut k = offset;
                for i in 0..d {
                    for j in i..d {
                        let mut unit = Matrix::zeros(d, d);
                        unit[(i, j)] = 1.0;
                        unit[(j, i)] = 1.0;
                        coeffs.insert(k, unit);
                        k += 1;
                    }
                }
            }
            VarShape::Rect(r, c) => {
                for i in 0..r {
                    for j in 0..c {
                        let mut unit = Matrix::zeros(r, c);
                        unit[(i, j)] = 1.0;
                        coeffs.insert(offset + i * c + j, unit);
                    }
                }
            }
            VarShape::Scalar => {
                coeffs.insert(offset, Matrix::identity(1));
            }
        }
        AffineMat { rows, cols, constant: Matrix::zeros(rows, cols), coeffs }
    }

    /// `x * M` for a scalar variable and a constant matrix.
    pub fn scalar_times(reg: &VarRegistry, var: MatVar, m: &Matrix) -> Self {
        assert!(matches!(reg.shape(var), VarShape::Scalar), "scalar_times needs a scalar variable");
        let offset = reg.entries[var.0].offset;
        let mut coeffs = BTreeMap::new();
        coeffs.insert(offset, m.clone());
        AffineMat {
            rows: m.rows(),
            cols: m.cols(),
            constant: Matrix::zeros(m.rows(), m.cols()),
            coeffs,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn var_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.coeffs.keys().copied()
    }

    pub fn coeff(&self, scalar_index: usize) -> Option<&Matrix> {
        self.coeffs.get(&scalar_index)
    }

    pub fn add(&self, other: &AffineMat) -> AffineMat {
        assert!(self.rows == other.rows && self.cols == other.cols, "affine add shape mismatch");
        let mut out = self.clone();
        out.constant = &out.constant + &other.constant;
        for (&k, m) in &other.coeffs {
            match out.coeffs.get_mut(&k) {
                Some(existing) => *existing = &*existing + m,
                None => {
                    out.coeffs.insert(k, m.clone());
                }
            }
        }
        out
    }

    pub fn sub(&self, other: &AffineMat) -> AffineMat {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> AffineMat {
        AffineMat {
            rows: self.rows,
            cols: self.cols,
            constant: self.constant.scale(s),
            coeffs: self.coeffs.iter().map(|(&k, m)| (k, m.scale(s))).collect(),
        }
    }

    pub fn transpose(&self) -> AffineMat {
        AffineMat {
            rows: self.cols,
            cols: self.rows,
            constant: self.constant.transpose(),
            coeffs: self.coeffs.iter().map(|(&k, m)| (k, m.transpose())).collect(),
        }
    }

    /// `m * self`.
    pub fn lmul(&self, m: &Matrix) -> AffineMat {
        AffineMat {
            rows: m.rows(),
            cols: self.cols,
            constant: m * &self.constant,
            coeffs: self.coeffs.iter().map(|(&k, c)| (k, m * c)).collect(),
        }
    }

    /// `self * m`.
    pub fn rmul(&self, m: &Matrix) -> AffineMat {
        AffineMat {
            rows: self.rows,
            cols: m.cols(),
            constant: &self.constant * m,
            coeffs: self.coeffs.iter().map(|(&k, c)| (k, c * m)).collect(),
        }
    }

    /// `self + self^T`.
    pub fn sym(&self) -> AffineMat {
        self.add(&self.transpose())
    }

    /// Embeds this expression as a block of a larger zero expression.
    pub fn embed(&self, rows: usize, cols: usize, r0: usize, c0: usize) -> AffineMat {
        assert!(r0 + self.rows <= rows && c0 + self.cols <= cols, "embed out of range");
        let embed_one = |m: &Matrix| {
            let mut out = Matrix::zeros(rows, cols);
            out.set_block(r0, c0, m);
            out
        };
        AffineMat {
            rows,
            cols,
            constant: embed_one(&self.constant),
            coeffs: self.coeffs.iter().map(|(&k, m)| (k, embed_one(m))).collect(),
        }
    }

    /// Assembles a block expression; block (i, j) heights/widths are taken
    /// from the first column/row and must be consistent.
    pub fn block(grid: &[Vec<AffineMat>]) -> AffineMat {
        assert!(!grid.is_empty() && !grid[0].is_empty());
        let heights: Vec<usize> = grid.iter().map(|row| row[0].rows).collect();
        let widths: Vec<usize> = grid[0].iter().map(|b| b.cols).collect();
        let total_r: usize = heights.iter().sum();
        let total_c: usize = widths.iter().sum();
        let mut out = AffineMat::zero(total_r, total_c);
        let mut r0 = 0;
        for (bi, row) in grid.iter().enumerate() {
            assert_eq!(row.len(), widths.len(), "ragged block grid");
            let mut c0 = 0;
            for (bj, b) in row.iter().enumerate() {
                assert!(
                    b.rows == heights[bi] && b.cols == widths[bj],
                    "block ({bi},{bj}) is {}x{}, expected {}x{}",
                    b.rows,
                    b.cols,
                    heights[bi],
                    widths[bj]
                );
                out = out.add(&b.embed(total_r, total_c, r0, c0));
                c0 += widths[bj];
            }
            r0 += heights[bi];
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> Matrix {
        let mut out = self.constant.clone();
        for (&k, m) in &self.coeffs {
            if x[k] != 0.0 {
                out = &out + &m.scale(x[k]);
            }
        }
        out
    }
}

/// He(A, X) = A^T X + X^T A for a constant A and an affine X.
pub fn he(a: &Matrix, x: &AffineMat) -> AffineMat {
    x.lmul(&a.transpose()).add(&x.transpose().rmul(a))
}
