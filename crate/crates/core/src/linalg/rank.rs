//! Rank of sparse integer matrices (chain-complex boundary maps).
//!
//! Two independent routes: exact fraction-free column reduction over the
//! integers, and a floating point route (dense SVD for small matrices,
//! magnitude-thresholded column reduction otherwise).

use nalgebra::DMatrix;

/// Sparse integer matrix stored by columns; each column is a sorted list of
/// `(row, value)` pairs with nonzero values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntMatrix {
    pub n_rows: usize,
    pub columns: Vec<Vec<(usize, i64)>>,
}

impl IntMatrix {
    pub fn new(n_rows: usize) -> Self {
        Self {
            n_rows,
            columns: Vec::new(),
        }
    }

    pub fn push_column(&mut self, mut col: Vec<(usize, i64)>) {
        col.retain(|&(_, v)| v != 0);
        col.sort_unstable_by_key(|&(r, _)| r);
        // merge duplicate rows
        let mut merged: Vec<(usize, i64)> = Vec::with_capacity(col.len());
        for (r, v) in col {
            match merged.last_mut() {
                Some((lr, lv)) if *lr == r => *lv += v,
                _ => merged.push((r, v)),
            }
        }
        merged.retain(|&(_, v)| v != 0);
        debug_assert!(merged.iter().all(|&(r, _)| r < self.n_rows));
        self.columns.push(merged);
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn nnz(&self) -> usize {
        self.columns.iter().map(Vec::len).sum()
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hstack(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.n_rows, other.n_rows);
        let mut out = self.clone();
        out.columns.extend(other.columns.iter().cloned());
        out
    }

    /// Keeps the listed rows (renumbered in order) and all columns.
    pub fn select_rows(&self, rows: &[usize]) -> IntMatrix {
        let mut map = vec![usize::MAX; self.n_rows];
        for (k, &r) in rows.iter().enumerate() {
            map[r] = k;
        }
        IntMatrix {
            n_rows: rows.len(),
            columns: self
                .columns
                .iter()
                .map(|c| {
                    c.iter()
                        .filter(|(r, _)| map[*r] != usize::MAX)
                        .map(|&(r, v)| (map[r], v))
                        .collect()
                })
                .collect(),
        }
    }

    /// Keeps the listed columns in order.
    pub fn select_columns(&self, cols: &[usize]) -> IntMatrix {
        IntMatrix {
            n_rows: self.n_rows,
            columns: cols.iter().map(|&c| self.columns[c].clone()).collect(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n_rows, self.n_cols());
        for (j, col) in self.columns.iter().enumerate() {
            for &(i, v) in col {
                d[(i, j)] = v as f64;
            }
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RankError {
    #[error("integer overflow during exact row reduction")]
    Overflow,
}

fn gcd(mut a: i64, mut b: i64) -> i64 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Exact rank by fraction-free column reduction keyed on the lowest row
/// index ("low" pivots). Columns are kept primitive (content 1).
pub fn integer_rank(m: &IntMatrix) -> Result<usize, RankError> {
    let mut pivot_of_low: Vec<Option<usize>> = vec![None; m.n_rows];
    let mut reduced: Vec<Vec<(usize, i64)>> = Vec::with_capacity(m.n_cols());
    let mut rank = 0;
    for col in &m.columns {
        let mut c = col.clone();
        while let Some(&(low, lv)) = c.last() {
            match pivot_of_low[low] {
                None => {
                    pivot_of_low[low] = Some(reduced.len());
                    rank += 1;
                    break;
                }
                Some(p) => {
                    let pc = &reduced[p];
                    let pv = pc.last().expect("pivot column nonempty").1;
                    let g = gcd(lv, pv);
                    let (a, b) = (pv / g, lv / g);
                    // c <- a*c - b*pc
                    c = combine_int(&c, a, pc, b)?;
                    let content = c.iter().fold(0, |acc, &(_, v)| gcd(acc, v));
                    if content > 1 {
                        c.iter_mut().for_each(|(_, v)| *v /= content);
                    }
                }
            }
        }
        reduced.push(c);
    }
    Ok(rank)
}

fn combine_int(c: &[(usize, i64)], a: i64, p: &[(usize, i64)], b: i64) -> Result<Vec<(usize, i64)>, RankError> {
    let mut out = Vec::with_capacity(c.len() + p.len());
    let (mut i, mut j) = (0, 0);
    while i < c.len() || j < p.len() {
        let (r, v) = if j >= p.len() || (i < c.len() && c[i].0 < p[j].0) {
            let v = c[i].1.checked_mul(a).ok_or(RankError::Overflow)?;
            i += 1;
            (c[i - 1].0, v)
        } else if i >= c.len() || p[j].0 < c[i].0 {
            let v = p[j].1.checked_mul(-b).ok_or(RankError::Overflow)?;
            j += 1;
            (p[j - 1].0, v)
        } else {
            let x = c[i].1.checked_mul(a).ok_or(RankError::Overflow)?;
            let y = p[j].1.checked_mul(b).ok_or(RankError::Overflow)?;
            let v = x.checked_sub(y).ok_or(RankError::Overflow)?;
            let r = c[i].0;
            i += 1;
            j += 1;
            (r, v)
        };
        if v != 0 {
            out.push((r, v));
        }
    }
    Ok(out)
}

/// Matrices with at most this many entries use the dense SVD route.
pub const DENSE_SVD_LIMIT: usize = 250_000;

/// Numerical rank with a relative singular-value cutoff.
pub fn float_rank(m: &IntMatrix, rel_cutoff: f64) -> usize {
    if m.n_rows == 0 || m.n_cols() == 0 {
        return 0;
    }
    if m.n_rows * m.n_cols() <= DENSE_SVD_LIMIT {
        let d = m.to_dense();
        let sv = d.singular_values();
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        if smax == 0.0 {
            return 0;
        }
        return sv.iter().filter(|&&s| s > rel_cutoff * smax).count();
    }
    float_column_reduction_rank(m, rel_cutoff)
}

fn float_column_reduction_rank(m: &IntMatrix, rel_cutoff: f64) -> usize {
    let scale = m
        .columns
        .iter()
        .flat_map(|c| c.iter().map(|&(_, v)| (v as f64).abs()))
        .fold(0.0, f64::max);
    let tol = rel_cutoff * scale.max(1.0);
    let mut pivot_of_low: Vec<Option<usize>> = vec![None; m.n_rows];
    let mut reduced: Vec<Vec<(usize, f64)>> = Vec::with_capacity(m.n_cols());
    let mut rank = 0;
    for col in &m.columns {
        let mut c: Vec<(usize, f64)> = col.iter().map(|&(r, v)| (r, v as f64)).collect();
        loop {
            c.retain(|&(_, v)| v.abs() > tol);
            let Some(&(low, lv)) = c.last() else { break };
            match pivot_of_low[low] {
                None => {
                    pivot_of_low[low] = Some(reduced.len());
                    rank += 1;
                    break;
                }
                Some(p) => {
                    let pc = &reduced[p];
                    let pv = pc.last().expect("pivot column nonempty").1;
                    let f = lv / pv;
                    let mut out = Vec::with_capacity(c.len() + pc.len());
                    let (mut i, mut j) = (0, 0);
                    while i < c.len() || j < pc.len() {
                        if j >= pc.len() || (i < c.len() && c[i].0 < pc[j].0) {
                            out.push(c[i]);
                            i += 1;
                        } else if i >= c.len() || pc[j].0 < c[i].0 {
                            out.push((pc[j].0, -f * pc[j].1));
                            j += 1;
                        } else {
                            out.push((c[i].0, c[i].1 - f * pc[j].1));
                            i += 1;
                            j += 1;
                        }
                    }
                    // the pivot entry cancels exactly by construction
                    if let Some(last) = out.last_mut() {
                        if last.0 == low {
                            last.1 = 0.0;
                        }
                    }
                    c = out;
                }
            }
        }
        reduced.push(c);
    }
    rank
}
