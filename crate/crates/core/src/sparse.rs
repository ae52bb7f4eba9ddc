//! Compressed-row complex sparse matrices and the small set of kernels the
//! solvers rely on.
//!
//! Every kernel accumulates in a fixed order (stored column order for
//! [`SparseComplexMatrix::spmv`], row-major scan order for
//! [`SparseComplexMatrix::transpose_apply`]) so that results are bitwise
//! reproducible and a block-diagonal batch produces exactly the same numbers
//! per block as the unbatched matrix.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SparseError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("index ({row}, {col}) out of bounds for {n_rows}x{n_cols} matrix")]
    IndexOutOfBounds {
        row: usize,
        col: usize,
        n_rows: usize,
        n_cols: usize,
    },
    #[error("block_diag needs at least one block")]
    EmptyBlockList,
    #[error("block {index} is {n_rows}x{n_cols}, expected a square block")]
    NonSquareBlock {
        index: usize,
        n_rows: usize,
        n_cols: usize,
    },
    #[error("matrix is singular to working precision (pivot {pivot:e} at column {column})")]
    Singular { column: usize, pivot: f64 },
    #[error("invalid compressed-row structure: {0}")]
    InvalidStructure(&'static str),
}

/// Coordinate-format accumulator. Duplicate coordinates are summed when the
/// matrix is built, which is how parallel branches between the same bus pair
/// merge into one admittance entry.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<(usize, usize, Complex64)>,
}

impl TripletBuilder {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(n_rows: usize, n_cols: usize, capacity: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            entries: Vec::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: Complex64) -> Result<(), SparseError> {
        if row >= self.n_rows || col >= self.n_cols {
            return Err(SparseError::IndexOutOfBounds {
                row,
                col,
                n_rows: self.n_rows,
                n_cols: self.n_cols,
            });
        }
        self.entries.push((row, col, value));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sorts by (row, col) and sums duplicates. Insertion order decides the
    /// summation order of duplicates (stable sort).
    pub fn build(mut self) -> SparseComplexMatrix {
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_offsets = vec![0usize; self.n_rows + 1];
        let mut col_indices = Vec::with_capacity(self.entries.len());
        let mut values: Vec<Complex64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().expect("duplicate follows an entry") += v;
            } else {
                col_indices.push(c);
                values.push(v);
                row_offsets[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..self.n_rows {
            row_offsets[r + 1] += row_offsets[r];
        }
        SparseComplexMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_offsets,
            col_indices,
            values,
        }
    }
}

/// Complex matrix in compressed-row layout with strictly increasing column
/// indices in every row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseComplexMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<Complex64>,
}

impl SparseComplexMatrix {
    /// Builds a matrix from raw compressed-row arrays after checking every
    /// structural invariant.
    pub fn from_csr(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<Complex64>,
    ) -> Result<Self, SparseError> {
        if row_offsets.len() != n_rows + 1 {
            return Err(SparseError::InvalidStructure("row_offsets length must be n_rows + 1"));
        }
        if row_offsets[0] != 0 {
            return Err(SparseError::InvalidStructure("row_offsets[0] must be 0"));
        }
        if row_offsets[n_rows] != col_indices.len() || values.len() != col_indices.len() {
            return Err(SparseError::InvalidStructure("row_offsets[n_rows] must equal nnz"));
        }
        for r in 0..n_rows {
            let (start, end) = (row_offsets[r], row_offsets[r + 1]);
            if start > end {
                return Err(SparseError::InvalidStructure("row_offsets must be non-decreasing"));
            }
            let cols = &col_indices[start..end];
            if cols.iter().any(|&c| c >= n_cols) {
                return Err(SparseError::InvalidStructure("column index out of range"));
            }
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(SparseError::InvalidStructure(
                    "columns must be strictly increasing within a row",
                ));
            }
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![Complex64::new(1.0, 0.0); n],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Column indices and values of one row.
    pub fn row(&self, r: usize) -> (&[usize], &[Complex64]) {
        let (start, end) = (self.row_offsets[r], self.row_offsets[r + 1]);
        (&self.col_indices[start..end], &self.values[start..end])
    }

    /// Stored value at `(r, c)`, zero when the entry is structurally absent.
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// Iterates stored entries in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.n_rows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn spmv(&self, x: &[Complex64]) -> Result<Vec<Complex64>, SparseError> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.n_rows];
        self.spmv_into(x, &mut y)?;
        Ok(y)
    }

    /// `y = A x`, summing each row in stored column order.
    pub fn spmv_into(&self, x: &[Complex64], y: &mut [Complex64]) -> Result<(), SparseError> {
        check_len(self.n_cols, x.len())?;
        check_len(self.n_rows, y.len())?;
        for (out, bounds) in y.iter_mut().zip(self.row_offsets.windows(2)) {
            let cols = &self.col_indices[bounds[0]..bounds[1]];
            let vals = &self.values[bounds[0]..bounds[1]];
            let mut acc = Complex64::new(0.0, 0.0);
            for (&c, &v) in cols.iter().zip(vals) {
                acc += v * x[c];
            }
            *out = acc;
        }
        Ok(())
    }

    pub fn transpose_apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>, SparseError> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.n_cols];
        self.transpose_apply_into(x, &mut y)?;
        Ok(y)
    }

    /// `y = Aᵀ x` by scattering rows; the transpose is never materialized.
    pub fn transpose_apply_into(
        &self,
        x: &[Complex64],
        y: &mut [Complex64],
    ) -> Result<(), SparseError> {
        check_len(self.n_rows, x.len())?;
        check_len(self.n_cols, y.len())?;
        y.fill(Complex64::new(0.0, 0.0));
        for (&xr, bounds) in x.iter().zip(self.row_offsets.windows(2)) {
            let cols = &self.col_indices[bounds[0]..bounds[1]];
            let vals = &self.values[bounds[0]..bounds[1]];
            for (&c, &v) in cols.iter().zip(vals) {
                y[c] += v * xr;
            }
        }
        Ok(())
    }

    /// Dense row-major copy. Test and debugging helper only.
    pub fn to_dense(&self) -> Vec<Vec<Complex64>> {
        let mut dense = vec![vec![Complex64::new(0.0, 0.0); self.n_cols]; self.n_rows];
        for (r, c, v) in self.triplets() {
            dense[r][c] = v;
        }
        dense
    }
}

fn check_len(expected: usize, got: usize) -> Result<(), SparseError> {
    if expected == got {
        Ok(())
    } else {
        Err(SparseError::DimensionMismatch { expected, got })
    }
}

/// Places square blocks along the diagonal, block `k` offset by the sum of
/// the preceding block dimensions.
pub fn block_diag(blocks: &[&SparseComplexMatrix]) -> Result<SparseComplexMatrix, SparseError> {
    if blocks.is_empty() {
        return Err(SparseError::EmptyBlockList);
    }
    for (index, b) in blocks.iter().enumerate() {
        if b.n_rows != b.n_cols {
            return Err(SparseError::NonSquareBlock {
                index,
                n_rows: b.n_rows,
                n_cols: b.n_cols,
            });
        }
    }
    let n: usize = blocks.iter().map(|b| b.n_rows).sum();
    let nnz: usize = blocks.iter().map(|b| b.nnz()).sum();
    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut col_indices = Vec::with_capacity(nnz);
    let mut values = Vec::with_capacity(nnz);
    row_offsets.push(0);
    let mut offset = 0;
    for b in blocks {
        let base = col_indices.len();
        row_offsets.extend(b.row_offsets[1..].iter().map(|&o| o + base));
        col_indices.extend(b.col_indices.iter().map(|&c| c + offset));
        values.extend_from_slice(&b.values);
        offset += b.n_rows;
    }
    Ok(SparseComplexMatrix {
        n_rows: n,
        n_cols: n,
        row_offsets,
        col_indices,
        values,
    })
}

/// Row-major dense real matrix, used as the Newton-Raphson linear-solve
/// workspace.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseRealMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl DenseRealMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn from_row_major(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Result<Self, SparseError> {
        check_len(n_rows * n_cols, data.len())?;
        Ok(Self { n_rows, n_cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>, SparseError> {
        check_len(self.n_cols, x.len())?;
        Ok(self
            .data
            .chunks_exact(self.n_cols.max(1))
            .take(self.n_rows)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `Aᵀ x`.
    pub fn transpose_mul_vec(&self, x: &[f64]) -> Result<Vec<f64>, SparseError> {
        check_len(self.n_rows, x.len())?;
        let mut y = vec![0.0; self.n_cols];
        for (r, &xr) in x.iter().enumerate() {
            let row = &self.data[r * self.n_cols..(r + 1) * self.n_cols];
            for (out, a) in y.iter_mut().zip(row) {
                *out += a * xr;
            }
        }
        Ok(y)
    }
}

impl std::ops::Index<(usize, usize)> for DenseRealMatrix {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.n_cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseRealMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.n_cols + c]
    }
}

/// Solves `A x = b` by LU factorization with partial pivoting. `A` is
/// consumed as the factorization workspace.
pub fn dense_lu_solve(mut a: DenseRealMatrix, b: &[f64]) -> Result<Vec<f64>, SparseError> {
    if a.n_rows != a.n_cols {
        return Err(SparseError::DimensionMismatch {
            expected: a.n_rows,
            got: a.n_cols,
        });
    }
    let n = a.n_rows;
    check_len(n, b.len())?;
    let scale = a.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = 1e-14 * scale;
    let mut x = b.to_vec();

    for k in 0..n {
        let (p, pivot) = (k..n)
            .map(|r| (r, a[(r, k)].abs()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if !(pivot > floor) || pivot == 0.0 {
            return Err(SparseError::Singular { column: k, pivot });
        }
        if p != k {
            for c in 0..n {
                a.data.swap(k * n + c, p * n + c);
            }
            x.swap(k, p);
        }
        let diag = a[(k, k)];
        for r in k + 1..n {
            let factor = a[(r, k)] / diag;
            if factor == 0.0 {
                continue;
            }
            a[(r, k)] = factor;
            let (upper, lower) = a.data.split_at_mut(r * n);
            let pivot_row = &upper[k * n + k + 1..k * n + n];
            let row = &mut lower[k + 1..n];
            for (dst, src) in row.iter_mut().zip(pivot_row) {
                *dst -= factor * src;
            }
            x[r] -= factor * x[k];
        }
    }
    for k in (0..n).rev() {
        let row = &a.data[k * n..(k + 1) * n];
        let mut acc = x[k];
        for c in k + 1..n {
            acc -= row[c] * x[c];
        }
        x[k] = acc / row[k];
    }
    Ok(x)
}
