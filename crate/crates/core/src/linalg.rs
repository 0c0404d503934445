//! Small dense matrices for element-local algebra and a sparse symmetric
//! pattern with a Cholesky solver for the global Newton systems.

use crate::real::Real;
use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMat};
use faer::{Mat, Side};
use std::collections::BTreeSet;
use std::ops::{Index, IndexMut};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is singular to working precision (pivot {0})")]
    Singular(usize),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("sparse factorization failed: {0}")]
    Factorization(String),
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DMat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> DMat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
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

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let orow = other.row(k);
                let dst = out.row_mut(i);
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    /// `selfᵀ · other`.
    pub fn tr_matmul(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows, "tr_matmul dimension mismatch");
        let mut out = Self::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let arow = self.row(k);
            let brow = other.row(k);
            for (i, &a) in arow.iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                let dst = out.row_mut(i);
                for (d, &b) in dst.iter_mut().zip(brow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.rows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.cols);
        for (i, yi) in y.iter_mut().enumerate().take(self.rows) {
            *yi = crate::real::dot(self.row(i), x);
        }
    }

    /// `y += selfᵀ x`.
    pub fn tr_mul_vec_add(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.rows);
        for (i, &xi) in x.iter().enumerate() {
            if xi == T::zero() {
                continue;
            }
            for (yj, &a) in y.iter_mut().zip(self.row(i)) {
                *yj += a * xi;
            }
        }
    }

    pub fn scale(&mut self, s: T) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn lu(&self) -> Result<Lu<T>, LinalgError> {
        Lu::new(self)
    }

    /// Solves `self · X = rhs` for a full right-hand side matrix.
    pub fn solve(&self, rhs: &Self) -> Result<Self, LinalgError> {
        Ok(self.lu()?.solve_mat(rhs))
    }
}

impl<T> Index<(usize, usize)> for DMat<T> {
    type Output = T;

    #[inline(always)]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for DMat<T> {
    #[inline(always)]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// LU factorization with partial pivoting.
#[derive(Clone, Debug)]
pub struct Lu<T> {
    lu: DMat<T>,
    perm: Vec<usize>,
}

impl<T: Real> Lu<T> {
    fn new(a: &DMat<T>) -> Result<Self, LinalgError> {
        assert_eq!(a.rows, a.cols, "LU needs a square matrix");
        let n = a.rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.max_abs().max(T::min_positive_value());
        for k in 0..n {
            let mut piv = k;
            let mut best = lu[(k, k)].abs();
            for i in k + 1..n {
                let v = lu[(i, k)].abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best <= scale * T::epsilon() * T::lit(16.0) {
                return Err(LinalgError::Singular(k));
            }
            if piv != k {
                perm.swap(piv, k);
                for j in 0..n {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(piv, j)];
                    lu[(piv, j)] = t;
                }
            }
            let d = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                if f != T::zero() {
                    for j in k + 1..n {
                        let u = lu[(k, j)];
                        lu[(i, j)] -= f * u;
                    }
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve_vec(&self, b: &[T]) -> Vec<T> {
        let n = self.lu.rows;
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    pub fn solve_mat(&self, rhs: &DMat<T>) -> DMat<T> {
        let mut out = DMat::zeros(rhs.rows, rhs.cols);
        let mut col = vec![T::zero(); rhs.rows];
        for j in 0..rhs.cols {
            for i in 0..rhs.rows {
                col[i] = rhs[(i, j)];
            }
            let x = self.solve_vec(&col);
            for i in 0..rhs.rows {
                out[(i, j)] = x[i];
            }
        }
        out
    }
}

/// Upper-triangular compressed-column pattern of a symmetric matrix, built
/// from element cliques. Each clique stores, for every local pair `(a, b)`,
/// the slot in the value array (or `usize::MAX` when either index is
/// constrained).
#[derive(Clone, Debug)]
pub struct SymmetricPattern {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    clique_slots: Vec<Vec<usize>>,
}

pub const NONE: usize = usize::MAX;

impl SymmetricPattern {
    /// `cliques[e]` lists reduced indices (or [`NONE`]) of the unknowns coupled
    /// by element `e`.
    pub fn from_cliques(n: usize, cliques: &[Vec<usize>]) -> Self {
        let mut cols: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for c in cliques {
            for &a in c {
                if a == NONE {
                    continue;
                }
                for &b in c {
                    if b == NONE {
                        continue;
                    }
                    if a <= b {
                        cols[b].insert(a);
                    }
                }
            }
        }
        for (j, col) in cols.iter_mut().enumerate() {
            col.insert(j);
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for col in &cols {
            row_idx.extend(col.iter().copied());
            col_ptr.push(row_idx.len());
        }
        let mut pattern = Self {
            n,
            col_ptr,
            row_idx,
            clique_slots: Vec::new(),
        };
        pattern.clique_slots = cliques
            .iter()
            .map(|c| {
                let mut slots = Vec::with_capacity(c.len() * c.len());
                for &a in c {
                    for &b in c {
                        slots.push(if a == NONE || b == NONE {
                            NONE
                        } else {
                            pattern.slot(a.min(b), a.max(b))
                        });
                    }
                }
                slots
            })
            .collect();
        pattern
    }

    fn slot(&self, row: usize, col: usize) -> usize {
        let range = self.col_ptr[col]..self.col_ptr[col + 1];
        let pos = self.row_idx[range.clone()]
            .binary_search(&row)
            .expect("entry outside pattern");
        range.start + pos
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    /// Adds a dense local block (row-major, `len × len`) for clique `e`.
    /// Off-diagonal local pairs are visited twice, so only the entries with
    /// `a <= b` in the reduced numbering are accumulated.
    pub fn add_local<T: Real>(&self, values: &mut [T], e: usize, clique: &[usize], local: &[T]) {
        let slots = &self.clique_slots[e];
        let len = clique.len();
        debug_assert_eq!(slots.len(), len * len);
        for a in 0..len {
            let ga = clique[a];
            if ga == NONE {
                continue;
            }
            for b in 0..len {
                let gb = clique[b];
                if gb == NONE || ga > gb {
                    continue;
                }
                values[slots[a * len + b]] += local[a * len + b];
            }
        }
    }

    /// `y = A x` using the stored upper triangle.
    pub fn sym_mul<T: Real>(&self, values: &[T], x: &[T], y: &mut [T]) {
        for v in y.iter_mut() {
            *v = T::zero();
        }
        for j in 0..self.n {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let i = self.row_idx[p];
                let a = values[p];
                y[i] += a * x[j];
                if i != j {
                    y[j] += a * x[i];
                }
            }
        }
    }
}

/// Cholesky solver whose symbolic analysis (fill-reducing ordering and
/// elimination tree) is computed once per pattern.
pub struct CholeskySolver {
    symbolic: SymbolicSparseColMat<usize>,
    analysis: SymbolicLlt<usize>,
}

pub struct CholeskyFactor {
    llt: Llt<usize, f64>,
}

impl CholeskySolver {
    pub fn new(pattern: &SymmetricPattern) -> Result<Self, LinalgError> {
        let symbolic = SymbolicSparseColMat::new_checked(
            pattern.n,
            pattern.n,
            pattern.col_ptr.clone(),
            None,
            pattern.row_idx.clone(),
        );
        let analysis = SymbolicLlt::try_new(symbolic.as_ref(), Side::Upper)
            .map_err(|e| LinalgError::Factorization(format!("{e:?}")))?;
        Ok(Self { symbolic, analysis })
    }

    pub fn factor<T: Real>(&self, values: &[T]) -> Result<CholeskyFactor, LinalgError> {
        let vals: Vec<f64> = values.iter().map(|v| v.as_f64()).collect();
        let mat = SparseColMatRef::new(self.symbolic.as_ref(), &vals);
        match Llt::try_new_with_symbolic(self.analysis.clone(), mat, Side::Upper) {
            Ok(llt) => Ok(CholeskyFactor { llt }),
            Err(faer::sparse::linalg::LltError::Numeric(_)) => {
                Err(LinalgError::NotPositiveDefinite)
            }
            Err(e) => Err(LinalgError::Factorization(format!("{e:?}"))),
        }
    }
}

impl CholeskyFactor {
    pub fn solve<T: Real>(&self, b: &[T]) -> Vec<T> {
        let n = b.len();
        let mut rhs = Mat::<f64>::from_fn(n, 1, |i, _| b[i].as_f64());
        self.llt.solve_in_place(rhs.as_mut());
        (0..n).map(|i| T::lit(rhs[(i, 0)])).collect()
    }
}
