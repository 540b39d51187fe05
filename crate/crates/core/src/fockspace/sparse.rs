//! Compressed sparse row operators over complex amplitudes.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Tolerance used when a builder asserts hermiticity.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Square sparse complex matrix in CSR layout.
///
/// Entries are stored row by row with strictly increasing column indices.
/// `hermitian` is a promise made by the builder and verified on request by
/// [`SparseOperator::is_hermitian`].
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
    hermitian: bool,
}

impl SparseOperator {
    /// Assembles an operator from `(row, col, value)` triplets. Duplicates are
    /// summed; summed entries with magnitude `<= drop_tol` are discarded
    /// (exact zeros are always dropped).
    pub fn from_triplets(
        dim: usize,
        triplets: impl IntoIterator<Item = (usize, usize, C64)>,
        drop_tol: f64,
    ) -> Result<Self> {
        let mut trips: Vec<(usize, usize, C64)> = triplets.into_iter().collect();
        for &(r, c, _) in &trips {
            if r >= dim || c >= dim {
                return Err(Error::arg(format!(
                    "triplet ({r}, {c}) outside dimension {dim}"
                )));
            }
        }
        trips.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(trips.len());
        let mut vals = Vec::with_capacity(trips.len());
        let mut iter = trips.into_iter().peekable();
        while let Some((r, c, mut v)) = iter.next() {
            while let Some(&(r2, c2, v2)) = iter.peek() {
                if r2 == r && c2 == c {
                    v += v2;
                    iter.next();
                } else {
                    break;
                }
            }
            if v.norm() > drop_tol && v != C64::new(0.0, 0.0) {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
            }
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self {
            dim,
            row_ptr,
            cols,
            vals,
            hermitian: false,
        })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            row_ptr: vec![0; dim + 1],
            cols: Vec::new(),
            vals: Vec::new(),
            hermitian: true,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim])
    }

    /// Real diagonal operator; flagged hermitian.
    pub fn diagonal(values: &[f64]) -> Self {
        let trips = values
            .iter()
            .enumerate()
            .map(|(i, &v)| (i, i, C64::new(v, 0.0)));
        let mut op = Self::from_triplets(values.len(), trips, 0.0)
            .expect("diagonal indices are in range");
        op.hermitian = true;
        op
    }

    pub fn from_dense(m: &DMatrix<C64>, drop_tol: f64) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::arg("dense matrix is not square"));
        }
        let n = m.nrows();
        let trips = (0..n).flat_map(|r| (0..n).map(move |c| (r, c, m[(r, c)])));
        Self::from_triplets(n, trips, drop_tol)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn hermitian(&self) -> bool {
        self.hermitian
    }

    /// Marks the operator hermitian after checking it to [`HERMITIAN_TOL`].
    pub fn into_hermitian(mut self) -> Result<Self> {
        if !self.is_hermitian(HERMITIAN_TOL) {
            return Err(Error::Numerical(
                "operator flagged hermitian fails the hermiticity check".into(),
            ));
        }
        self.hermitian = true;
        Ok(self)
    }

    pub(crate) fn with_hermitian_flag(mut self, flag: bool) -> Self {
        self.hermitian = flag;
        self
    }

    /// Stored entries of row `r` as `(col, value)` pairs.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.dim];
        self.apply_into(x, &mut y);
        y
    }

    pub fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *yr = acc;
        }
    }

    /// `y += alpha * A x`.
    pub fn apply_add(&self, alpha: C64, x: &[C64], y: &mut [C64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *yr += alpha * acc;
        }
    }

    /// `⟨x|A|x⟩` without normalization.
    pub fn expectation(&self, x: &[C64]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (r, xr) in x.iter().enumerate() {
            let mut row = C64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                row += self.vals[k] * x[self.cols[k]];
            }
            acc += xr.conj() * row;
        }
        acc
    }

    /// Left multiplication of a column-major dense matrix: `out = A M`.
    pub fn mul_dense(&self, m: &DMatrix<C64>) -> DMatrix<C64> {
        assert_eq!(m.nrows(), self.dim);
        let mut out = DMatrix::zeros(self.dim, m.ncols());
        for c in 0..m.ncols() {
            let col = m.column(c);
            let src = col.as_slice();
            let mut dst = out.column_mut(c);
            self.apply_into(src, dst.as_mut_slice());
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        let trips = self.triplets().map(|(r, c, v)| (c, r, v.conj()));
        let op = Self::from_triplets(self.dim, trips, 0.0).expect("same dimension");
        op.with_hermitian_flag(self.hermitian)
    }

    pub fn scale(&self, alpha: C64) -> Self {
        let mut op = self.clone();
        for v in &mut op.vals {
            *v *= alpha;
        }
        op.hermitian = self.hermitian && alpha.im == 0.0;
        op
    }

    /// Real-weighted linear combination `Σ wᵢ Aᵢ`; the result is hermitian
    /// when every term is.
    pub fn combine(dim: usize, terms: &[(C64, &SparseOperator)]) -> Result<Self> {
        let mut trips = Vec::new();
        let mut hermitian = true;
        for (w, op) in terms {
            if op.dim != dim {
                return Err(Error::arg(format!(
                    "operator dimension {} does not match {dim}",
                    op.dim
                )));
            }
            hermitian &= op.hermitian && w.im == 0.0;
            trips.extend(op.triplets().map(|(r, c, v)| (r, c, *w * v)));
        }
        Ok(Self::from_triplets(dim, trips, 0.0)?.with_hermitian_flag(hermitian))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let one = C64::new(1.0, 0.0);
        Self::combine(self.dim, &[(one, self), (one, other)])
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::arg("dimension mismatch in operator product"));
        }
        let mut trips = Vec::new();
        for r in 0..self.dim {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    trips.push((r, c, a * b));
                }
            }
        }
        Self::from_triplets(self.dim, trips, 0.0)
    }

    /// `[A, B] = AB - BA`.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        let ab = self.matmul(other)?;
        let ba = other.matmul(self)?;
        Self::combine(
            self.dim,
            &[(C64::new(1.0, 0.0), &ab), (C64::new(-1.0, 0.0), &ba)],
        )
    }

    /// `A ⊗ B` with `A` as the slow index.
    pub fn kron(&self, other: &Self) -> Self {
        let n = other.dim;
        let mut trips = Vec::with_capacity(self.nnz() * other.nnz());
        for (r, c, v) in self.triplets() {
            for (r2, c2, v2) in other.triplets() {
                trips.push((r * n + r2, c * n + c2, v * v2));
            }
        }
        Self::from_triplets(self.dim * n, trips, 0.0)
            .expect("in range")
            .with_hermitian_flag(self.hermitian && other.hermitian)
    }

    /// `A ⊗ I_n` with the first factor as the slow index.
    pub fn kron_identity(&self, n: usize) -> Self {
        let trips = self
            .triplets()
            .flat_map(|(r, c, v)| (0..n).map(move |k| (r * n + k, c * n + k, v)));
        Self::from_triplets(self.dim * n, trips, 0.0)
            .expect("in range")
            .with_hermitian_flag(self.hermitian)
    }

    /// `I_n ⊗ A` with the identity as the slow index.
    pub fn identity_kron(&self, n: usize) -> Self {
        let d = self.dim;
        let trips = (0..n)
            .flat_map(|k| self.triplets().map(move |(r, c, v)| (k * d + r, k * d + c, v)));
        Self::from_triplets(d * n, trips, 0.0)
            .expect("in range")
            .with_hermitian_flag(self.hermitian)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }

    /// `max |A - A†| <= tol`.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.triplets()
            .all(|(r, c, v)| (v - self.get(c, r).conj()).norm() <= tol)
    }

    /// True when every stored entry has magnitude `<= tol`.
    pub fn is_zero(&self, tol: f64) -> bool {
        self.vals.iter().all(|v| v.norm() <= tol)
    }

    /// Diagonal entries as a dense vector.
    pub fn diagonal_values(&self) -> Vec<C64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }
}
