//! Compressed sparse row storage and an envelope (skyline) Cholesky
//! factorization ordered by reverse Cuthill-McKee.

use crate::scalar::Real;
use nalgebra::{DMatrix, DVector};
use std::collections::VecDeque;

/// Coordinate-format accumulator. Duplicate entries are summed on conversion.
#[derive(Clone, Debug)]
pub struct Triplets<T> {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<(usize, usize, T)>,
}

impl<T: Real> Triplets<T> {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: T) {
        debug_assert!(row < self.n_rows && col < self.n_cols);
        self.entries.push((row, col, value));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn into_csr(self) -> CsrMatrix<T> {
        CsrMatrix::from_triplets(self)
    }
}

/// Real sparse matrix in CSR form with sorted, unique column indices per row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T> {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            row_ptr: vec![0; n_rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let mut m = Self::identity(diag.len());
        m.values.copy_from_slice(diag);
        m
    }

    pub fn from_triplets(t: Triplets<T>) -> Self {
        let Triplets {
            n_rows,
            n_cols,
            mut entries,
        } = t;
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<T> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.n_rows
    }

    pub fn ncols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates `(col, value)` over one row.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[a..b]
            .iter()
            .copied()
            .zip(self.values[a..b].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.col_idx[a..b].binary_search(&j) {
            Ok(k) => self.values[a + k],
            Err(_) => T::zero(),
        }
    }

    /// Iterates all stored `(row, col, value)` triples.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.n_rows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn mul_vec(&self, x: &DVector<T>) -> DVector<T> {
        assert_eq!(x.len(), self.n_cols);
        DVector::from_fn(self.n_rows, |i, _| {
            let mut s = T::zero();
            for (j, v) in self.row(i) {
                s += v * x[j];
            }
            s
        })
    }

    /// `A * X` for a dense block `X`.
    pub fn mul_dense(&self, x: &DMatrix<T>) -> DMatrix<T> {
        assert_eq!(x.nrows(), self.n_cols);
        let mut out = DMatrix::zeros(self.n_rows, x.ncols());
        for c in 0..x.ncols() {
            for i in 0..self.n_rows {
                let mut s = T::zero();
                for (j, v) in self.row(i) {
                    s += v * x[(j, c)];
                }
                out[(i, c)] = s;
            }
        }
        out
    }

    /// `xᵀ A x`.
    pub fn quad_form(&self, x: &DVector<T>) -> T {
        let mut s = T::zero();
        for i in 0..self.n_rows {
            let mut r = T::zero();
            for (j, v) in self.row(i) {
                r += v * x[j];
            }
            s += x[i] * r;
        }
        s
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &DVector<T>, y: &DVector<T>) -> T {
        x.dot(&self.mul_vec(y))
    }

    pub fn transpose(&self) -> Self {
        let mut t = Triplets::new(self.n_cols, self.n_rows);
        for (i, j, v) in self.iter() {
            t.push(j, i, v);
        }
        t.into_csr()
    }

    /// `alpha * self + beta * other`.
    pub fn add_scaled(&self, alpha: T, other: &Self, beta: T) -> Self {
        assert_eq!((self.n_rows, self.n_cols), (other.n_rows, other.n_cols));
        let mut t = Triplets::new(self.n_rows, self.n_cols);
        for (i, j, v) in self.iter() {
            t.push(i, j, alpha * v);
        }
        for (i, j, v) in other.iter() {
            t.push(i, j, beta * v);
        }
        t.into_csr()
    }

    pub fn scale(&self, alpha: T) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.n_cols, other.n_rows);
        let mut t = Triplets::new(self.n_rows, other.n_cols);
        let mut acc = vec![T::zero(); other.n_cols];
        let mut mark = vec![usize::MAX; other.n_cols];
        let mut touched = Vec::new();
        for i in 0..self.n_rows {
            touched.clear();
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = T::zero();
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            for &j in &touched {
                t.push(i, j, acc[j]);
            }
        }
        t.into_csr()
    }

    /// Keeps only the listed rows and columns, in the given order.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut col_map = vec![usize::MAX; self.n_cols];
        for (k, &c) in cols.iter().enumerate() {
            col_map[c] = k;
        }
        let mut t = Triplets::new(rows.len(), cols.len());
        for (ri, &r) in rows.iter().enumerate() {
            for (c, v) in self.row(r) {
                if col_map[c] != usize::MAX {
                    t.push(ri, col_map[c], v);
                }
            }
        }
        t.into_csr()
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        let mut d = DMatrix::zeros(self.n_rows, self.n_cols);
        for (i, j, v) in self.iter() {
            d[(i, j)] += v;
        }
        d
    }

    pub fn max_abs(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |m, v| if v.abs() > m { v.abs() } else { m })
    }

    /// Largest `|A_ij - A_ji|` relative to the largest entry.
    pub fn symmetry_defect(&self) -> T {
        if self.n_rows != self.n_cols {
            return T::max_value().unwrap_or_else(T::one);
        }
        let scale = self.max_abs();
        if scale == T::zero() {
            return T::zero();
        }
        let mut worst = T::zero();
        for (i, j, v) in self.iter() {
            let d = (v - self.get(j, i)).abs();
            if d > worst {
                worst = d;
            }
        }
        worst / scale
    }

    /// Symmetric permutation `P A Pᵀ` where `perm[new] = old`.
    pub fn permute_symmetric(&self, perm: &[usize]) -> Self {
        let n = self.n_rows;
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut t = Triplets::new(n, n);
        for (i, j, v) in self.iter() {
            t.push(inv[i], inv[j], v);
        }
        t.into_csr()
    }
}

/// Reverse Cuthill-McKee ordering of the symmetric sparsity graph.
/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee<T: Real>(a: &CsrMatrix<T>) -> Vec<usize> {
    let n = a.nrows();
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).filter(|&(j, _)| j != i).count()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut seeds: Vec<usize> = (0..n).collect();
    seeds.sort_by_key(|&i| (degree[i], i));
    let mut nbrs = Vec::new();
    for &seed in &seeds {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(a, seed, &degree);
        let mut queue = VecDeque::new();
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            nbrs.clear();
            nbrs.extend(a.row(v).map(|(j, _)| j).filter(|&j| !visited[j]));
            nbrs.sort_by_key(|&j| (degree[j], j));
            for &j in &nbrs {
                visited[j] = true;
                queue.push_back(j);
            }
        }
    }
    order.reverse();
    order
}

fn pseudo_peripheral<T: Real>(a: &CsrMatrix<T>, seed: usize, degree: &[usize]) -> usize {
    let mut current = seed;
    let mut best_ecc = 0;
    for _ in 0..8 {
        let levels = bfs_levels(a, current);
        let ecc = *levels.iter().filter(|&&l| l != usize::MAX).max().unwrap_or(&0);
        if ecc <= best_ecc && best_ecc > 0 {
            break;
        }
        best_ecc = ecc;
        let far = (0..levels.len())
            .filter(|&i| levels[i] == ecc)
            .min_by_key(|&i| (degree[i], i))
            .unwrap_or(current);
        if far == current {
            break;
        }
        current = far;
    }
    current
}

fn bfs_levels<T: Real>(a: &CsrMatrix<T>, start: usize) -> Vec<usize> {
    let mut level = vec![usize::MAX; a.nrows()];
    let mut queue = VecDeque::new();
    level[start] = 0;
    queue.push_back(start);
    while let Some(v) = queue.pop_front() {
        for (j, _) in a.row(v) {
            if level[j] == usize::MAX {
                level[j] = level[v] + 1;
                queue.push_back(j);
            }
        }
    }
    level
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FactorError {
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("zero pivot at {pivot} in LDLᵀ factorization")]
    ZeroPivot { pivot: usize },
}

/// Row-oriented envelope storage of a lower triangular factor.
#[derive(Clone, Debug)]
struct Envelope<T> {
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> Envelope<T> {
    fn from_lower(a: &CsrMatrix<T>) -> Self {
        let n = a.nrows();
        let first: Vec<usize> = (0..n)
            .map(|i| a.row(i).map(|(j, _)| j).filter(|&j| j <= i).min().unwrap_or(i))
            .collect();
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            start.push(start[i] + (i - first[i] + 1));
        }
        let mut data = vec![T::zero(); start[n]];
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j <= i {
                    data[start[i] + j - first[i]] += v;
                }
            }
        }
        Self { first, start, data }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> T {
        self.data[self.start[i] + j - self.first[i]]
    }

    fn row_slice(&self, i: usize, lo: usize, hi: usize) -> &[T] {
        let base = self.start[i] - self.first[i];
        &self.data[base + lo..base + hi]
    }
}

#[inline]
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut s = T::zero();
    for (x, y) in a.iter().zip(b) {
        s += *x * *y;
    }
    s
}

/// Envelope Cholesky `P A Pᵀ = L Lᵀ` of a sparse symmetric positive definite matrix.
#[derive(Clone, Debug)]
pub struct SparseCholesky<T> {
    perm: Vec<usize>,
    env: Envelope<T>,
}

impl<T: Real> SparseCholesky<T> {
    pub fn factor(a: &CsrMatrix<T>) -> Result<Self, FactorError> {
        let perm = reverse_cuthill_mckee(a);
        Self::factor_with_ordering(a, perm)
    }

    pub fn factor_with_ordering(a: &CsrMatrix<T>, perm: Vec<usize>) -> Result<Self, FactorError> {
        let pa = a.permute_symmetric(&perm);
        let mut env = Envelope::from_lower(&pa);
        let n = pa.nrows();
        for i in 0..n {
            let fi = env.first[i];
            for j in fi..=i {
                let fj = env.first[j];
                let lo = fi.max(fj);
                let s = env.at(i, j) - dot(env.row_slice(i, lo, j), env.row_slice(j, lo, j));
                let idx = env.start[i] + j - fi;
                if j < i {
                    env.data[idx] = s / env.at(j, j);
                } else {
                    if s <= T::zero() || !s.is_finite() {
                        return Err(FactorError::NotPositiveDefinite {
                            pivot: i,
                            value: crate::scalar::to_f64(s),
                        });
                    }
                    env.data[idx] = s.sqrt();
                }
            }
        }
        Ok(Self { perm, env })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn solve(&self, b: &DVector<T>) -> DVector<T> {
        let n = self.dim();
        let mut y: Vec<T> = self.perm.iter().map(|&old| b[old]).collect();
        // L y = b
        for i in 0..n {
            let fi = self.env.first[i];
            let s = y[i] - dot(self.env.row_slice(i, fi, i), &y[fi..i]);
            y[i] = s / self.env.at(i, i);
        }
        // Lᵀ x = y
        for i in (0..n).rev() {
            let xi = y[i] / self.env.at(i, i);
            y[i] = xi;
            let fi = self.env.first[i];
            for j in fi..i {
                let l = self.env.at(i, j);
                y[j] -= l * xi;
            }
        }
        let mut x = DVector::zeros(n);
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

/// Counts negative pivots of an unpivoted envelope `LDLᵀ` factorization.
/// By Sylvester's law of inertia this equals the number of negative
/// eigenvalues of the symmetric matrix, provided no pivot vanishes.
pub fn negative_inertia<T: Real>(a: &CsrMatrix<T>) -> Result<usize, FactorError> {
    let perm = reverse_cuthill_mckee(a);
    let pa = a.permute_symmetric(&perm);
    let mut env = Envelope::from_lower(&pa);
    let n = pa.nrows();
    let scale = pa.max_abs();
    let tiny = scale * T::eps() * crate::scalar::lit(16.0);
    let mut d = vec![T::zero(); n];
    let mut negatives = 0;
    let mut work: Vec<T> = Vec::new();
    for i in 0..n {
        let fi = env.first[i];
        // work[k] = L[i][k] * d[k] for k in fi..i, computed progressively
        work.clear();
        work.resize(i - fi, T::zero());
        for j in fi..i {
            let fj = env.first[j];
            let lo = fi.max(fj);
            let mut s = env.at(i, j);
            for k in lo..j {
                s -= work[k - fi] * env.at(j, k);
            }
            // s = L[i][j] * d[j]
            work[j - fi] = s;
            let idx = env.start[i] + j - fi;
            env.data[idx] = s / d[j];
        }
        let mut dii = env.at(i, i);
        for k in fi..i {
            dii -= work[k - fi] * env.at(i, k);
        }
        if dii.abs() <= tiny {
            return Err(FactorError::ZeroPivot { pivot: i });
        }
        if dii < T::zero() {
            negatives += 1;
        }
        d[i] = dii;
        let idx = env.start[i] + i - fi;
        env.data[idx] = dii;
    }
    Ok(negatives)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize, shift: f64) -> CsrMatrix<f64> {
        let mut t = Triplets::new(n, n);
        for i in 0..n {
            t.push(i, i, 2.0 + shift);
            if i + 1 < n {
                t.push(i, i + 1, -1.0);
                t.push(i + 1, i, -1.0);
            }
        }
        t.into_csr()
    }

    #[test]
    fn duplicates_are_summed() {
        let mut t = Triplets::new(2, 2);
        t.push(0, 0, 1.0);
        t.push(0, 0, 2.5);
        t.push(1, 0, -1.0);
        let m = t.into_csr();
        assert_eq!(m.get(0, 0), 3.5);
        assert_eq!(m.get(1, 0), -1.0);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn cholesky_solves_shuffled_system() {
        let a = laplacian_1d(40, 0.1);
        // scramble numbering so RCM has work to do
        let perm: Vec<usize> = (0..40).map(|i| (i * 17) % 40).collect();
        let a = a.permute_symmetric(&perm);
        let chol = SparseCholesky::factor(&a).unwrap();
        let x_true = DVector::from_fn(40, |i, _| (i as f64).sin());
        let b = a.mul_vec(&x_true);
        let x = chol.solve(&b);
        assert!((x - x_true).norm() < 1e-10);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = laplacian_1d(10, -1.0);
        assert!(matches!(
            SparseCholesky::factor(&a),
            Err(FactorError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn inertia_matches_dense_eigenvalues() {
        let a = laplacian_1d(30, -0.5);
        let eig = a.to_dense().symmetric_eigen();
        let dense_neg = eig.eigenvalues.iter().filter(|&&l| l < 0.0).count();
        assert_eq!(negative_inertia(&a).unwrap(), dense_neg);
        assert!(dense_neg > 0);
    }

    #[test]
    fn matmul_matches_dense() {
        let a = laplacian_1d(6, 0.0);
        let mut t = Triplets::new(6, 3);
        t.push(0, 0, 1.0);
        t.push(3, 1, 2.0);
        t.push(5, 2, -1.0);
        t.push(2, 2, 4.0);
        let b = t.into_csr();
        let dense = a.to_dense() * b.to_dense();
        assert!((a.matmul(&b).to_dense() - dense).norm() < 1e-14);
        assert!((b.transpose().to_dense() - b.to_dense().transpose()).norm() == 0.0);
    }
}
