//! Row-compressed sparse operators, dense Cholesky coarse solves and a few
//! vector kernels shared by the solver modules.

use std::io::Write;

use crate::error::{Error, Result};

/// Sparse matrix in compressed-row storage. Column indices within a row are
/// strictly increasing. Symmetric operators keep both triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

/// Accumulates `(row, col, value)` entries; duplicates are summed on build.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    pub fn build(self) -> SparseOperator {
        SparseOperator::from_triplets(self.nrows, self.ncols, self.entries)
    }
}

impl SparseOperator {
    /// Builds from triplets. Entries are summed in their order of appearance
    /// within each `(row, col)` slot, so the result is deterministic.
    pub fn from_triplets(nrows: usize, ncols: usize, mut entries: Vec<(usize, usize, f64)>) -> Self {
        // stable sort keeps insertion order of duplicates
        entries.sort_by_key(|e| (e.0, e.1));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut b = TripletBuilder::new(nrows, ncols);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    b.push(i, j, v);
                }
            }
        }
        b.build()
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `y = A x`, rows accumulated left to right.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ncols {
            return Err(Error::DimensionMismatch {
                expected: self.ncols,
                found: x.len(),
            });
        }
        let mut y = vec![0.0; self.nrows];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    /// Unchecked `y = A x` for internal hot loops.
    #[inline]
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            let mut s = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                s += v * x[*c];
            }
            *yi = s;
        }
    }

    /// `y = A^T x`.
    pub fn spmv_transpose(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.nrows {
            return Err(Error::DimensionMismatch {
                expected: self.nrows,
                found: x.len(),
            });
        }
        let mut y = vec![0.0; self.ncols];
        self.spmv_transpose_into(x, &mut y);
        Ok(y)
    }

    #[inline]
    pub fn spmv_transpose_into(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (i, xi) in x.iter().enumerate() {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                y[*c] += v * xi;
            }
        }
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                let k = next[*c];
                indices[k] = i;
                values[k] = *v;
                next[*c] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            indptr,
            indices,
            values,
        }
    }

    /// Sparse product `self * other` (row-wise Gustavson accumulation).
    pub fn matmul(&self, other: &SparseOperator) -> Result<Self> {
        if self.ncols != other.nrows {
            return Err(Error::DimensionMismatch {
                expected: self.ncols,
                found: other.nrows,
            });
        }
        let n = other.ncols;
        let mut marker = vec![usize::MAX; n];
        let mut acc = vec![0.0; n];
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        indptr.push(0);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        let mut row_cols: Vec<usize> = Vec::new();
        for i in 0..self.nrows {
            row_cols.clear();
            let (acols, avals) = self.row(i);
            for (k, a) in acols.iter().zip(avals) {
                let (bcols, bvals) = other.row(*k);
                for (j, b) in bcols.iter().zip(bvals) {
                    if marker[*j] != i {
                        marker[*j] = i;
                        acc[*j] = 0.0;
                        row_cols.push(*j);
                    }
                    acc[*j] += a * b;
                }
            }
            row_cols.sort_unstable();
            for &j in &row_cols {
                indices.push(j);
                values.push(acc[j]);
            }
            indptr.push(indices.len());
        }
        Ok(Self {
            nrows: self.nrows,
            ncols: n,
            indptr,
            indices,
            values,
        })
    }

    /// `self + scale * other`.
    pub fn add_scaled(&self, other: &SparseOperator, scale: f64) -> Result<Self> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::DimensionMismatch {
                expected: self.nrows,
                found: other.nrows,
            });
        }
        let mut b = TripletBuilder::with_capacity(self.nrows, self.ncols, self.nnz() + other.nnz());
        for i in 0..self.nrows {
            let (c, v) = self.row(i);
            for (j, a) in c.iter().zip(v) {
                b.push(i, *j, *a);
            }
            let (c, v) = other.row(i);
            for (j, a) in c.iter().zip(v) {
                b.push(i, *j, scale * a);
            }
        }
        Ok(b.build())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows).map(|i| self.row(i).1.iter().sum()).collect()
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let t = self.transpose();
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows {
            let (ca, va) = self.row(i);
            let (cb, vb) = t.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ca.len() || q < cb.len() {
                let (x, y);
                if q >= cb.len() || (p < ca.len() && ca[p] < cb[q]) {
                    x = va[p];
                    y = 0.0;
                    p += 1;
                } else if p >= ca.len() || cb[q] < ca[p] {
                    x = 0.0;
                    y = vb[q];
                    q += 1;
                } else {
                    x = va[p];
                    y = vb[q];
                    p += 1;
                    q += 1;
                }
                worst = worst.max((x - y).abs());
            }
        }
        worst
    }

    /// `max|A_ij - A_ji| <= tol * max|A|`.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.asymmetry() <= tol * self.max_abs()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in d.iter_mut().enumerate() {
            let (c, v) = self.row(i);
            for (j, a) in c.iter().zip(v) {
                row[*j] = *a;
            }
        }
        d
    }

    /// Debug export: header `nrows ncols nnz`, then one `i j v` line per entry.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for i in 0..self.nrows {
            let (c, v) = self.row(i);
            for (j, a) in c.iter().zip(v) {
                writeln!(w, "{} {} {:.16e}", i, j, a)?;
            }
        }
        Ok(())
    }
}

/// Galerkin product `P^T A P`.
pub fn triple_product(p: &SparseOperator, a: &SparseOperator) -> Result<SparseOperator> {
    if a.nrows() != p.nrows() || a.ncols() != p.nrows() {
        return Err(Error::DimensionMismatch {
            expected: p.nrows(),
            found: a.ncols(),
        });
    }
    let ap = a.matmul(p)?;
    p.transpose().matmul(&ap)
}

/// Dense Cholesky factorization for small SPD systems. A semi-definite matrix
/// with a known one-dimensional kernel `k` is handled through the rank-one
/// update `A + s k k^T / |k|^2`, which leaves solutions of compatible systems
/// unchanged and makes the matrix definite.
#[derive(Debug, Clone)]
pub struct DenseFactorization {
    n: usize,
    lower: Vec<f64>,
    kernel: Option<Vec<f64>>,
}

impl DenseFactorization {
    pub fn new(a: &SparseOperator, kernel: Option<&[f64]>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: a.ncols(),
            });
        }
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            let (c, v) = a.row(i);
            for (j, x) in c.iter().zip(v) {
                m[i * n + j] = *x;
            }
        }
        let kernel = match kernel {
            Some(k) => {
                if k.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        found: k.len(),
                    });
                }
                let kk = dot(k, k);
                if kk == 0.0 {
                    return Err(Error::InvalidArgument("zero kernel vector".into()));
                }
                let shift = a.diagonal().iter().fold(0.0f64, |s, d| s.max(d.abs())).max(1.0) / kk;
                for i in 0..n {
                    for j in 0..n {
                        m[i * n + j] += shift * k[i] * k[j];
                    }
                }
                Some(k.to_vec())
            }
            None => None,
        };
        let scale = (0..n).fold(0.0f64, |s, i| s.max(m[i * n + i].abs()));
        for j in 0..n {
            let mut d = m[j * n + j];
            for k in 0..j {
                d -= m[j * n + k] * m[j * n + k];
            }
            if !(d > 1e-14 * scale) {
                return Err(Error::NonPositivePivot { row: j, value: d });
            }
            let d = d.sqrt();
            m[j * n + j] = d;
            for i in j + 1..n {
                let mut s = m[i * n + j];
                for k in 0..j {
                    s -= m[i * n + k] * m[j * n + k];
                }
                m[i * n + j] = s / d;
            }
        }
        Ok(Self { n, lower: m, kernel })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b`. With a kernel, `b` is first made orthogonal to it and
    /// the returned representative satisfies `k^T x = 0`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = b.to_vec();
        if let Some(k) = &self.kernel {
            let s = dot(k, &x) / dot(k, k);
            axpy(-s, k, &mut x);
        }
        let l = &self.lower;
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= l[i * n + k] * x[k];
            }
            x[i] = s / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= l[k * n + i] * x[k];
            }
            x[i] = s / l[i * n + i];
        }
        if let Some(k) = &self.kernel {
            let s = dot(k, &x) / dot(k, k);
            axpy(-s, k, &mut x);
        }
        x
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
