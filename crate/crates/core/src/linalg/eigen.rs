//! Generalized symmetric eigensolvers for pencils `A x = λ B x` with `B`
//! symmetric positive definite.
//!
//! Two routes are provided: a dense reduction through the Cholesky factor of
//! `B` (the reference route for small problems), and a block shift-invert
//! Krylov method with Rayleigh-Ritz extraction on `A` for large sparse
//! problems. The shift is always placed below the lowest eigenvalue so that
//! `A - σB` can be factored by sparse Cholesky.

use super::sparse::{CsrMatrix, FactorError, SparseCholesky};
use crate::scalar::{lit, to_f64, Real};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EigenError {
    #[error("mass matrix is not positive definite: {0}")]
    MassNotPositiveDefinite(FactorError),
    #[error("eigensolver did not converge after {iterations} operator applications (worst residual {worst_residual:e}, {converged}/{wanted} pairs converged)")]
    NoConvergence {
        iterations: usize,
        worst_residual: f64,
        converged: usize,
        wanted: usize,
    },
    #[error("could not find a shift below the spectrum after {attempts} attempts")]
    ShiftSearchFailed { attempts: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Lowest eigenpairs of a pencil, eigenvalues ascending, eigenvectors as
/// `B`-orthonormal columns.
#[derive(Debug, Clone)]
pub struct EigenPairs<T: Real> {
    pub values: Vec<T>,
    pub vectors: DMatrix<T>,
}

/// Diagnostics of the iterative route.
#[derive(Debug, Clone, Default, Serialize, PartialEq)]
pub struct KrylovDiagnostics {
    pub shift: f64,
    pub factorizations: usize,
    pub operator_applications: usize,
    pub restarts: usize,
    pub max_residual: f64,
}

/// Options of the block shift-invert solver.
#[derive(Debug, Clone)]
pub struct KrylovOptions {
    pub block_size: usize,
    pub max_basis: usize,
    pub max_restarts: usize,
    pub tolerance: f64,
    pub seed: u64,
    /// Shift known to lie below the spectrum. Skips the shift search when
    /// `A - σB` factors; otherwise the search runs as usual.
    pub shift: Option<f64>,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self {
            block_size: 4,
            max_basis: 0,
            max_restarts: 60,
            tolerance: 1e-9,
            seed: 0x5eed_f00d,
            shift: None,
        }
    }
}

/// Dense route: reduce to a standard problem with the Cholesky factor of `B`.
pub fn dense_generalized<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>, m: usize) -> Result<EigenPairs<T>, EigenError> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || b.ncols() != n {
        return Err(EigenError::Dimension(format!(
            "pencil shapes {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let chol = b
        .clone()
        .cholesky()
        .ok_or(EigenError::MassNotPositiveDefinite(FactorError::NotPositiveDefinite {
            pivot: 0,
            value: f64::NAN,
        }))?;
    let l = chol.l();
    // C = L⁻¹ A L⁻ᵀ
    let y = l.solve_lower_triangular(a).expect("cholesky factor is invertible");
    let c = l
        .solve_lower_triangular(&y.transpose())
        .expect("cholesky factor is invertible");
    let c = (&c + c.transpose()) * lit::<T>(0.5);
    let eig = c.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .partial_cmp(&eig.eigenvalues[j])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let take = m.min(n);
    let values: Vec<T> = order[..take].iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut z = DMatrix::zeros(n, take);
    for (col, &i) in order[..take].iter().enumerate() {
        z.set_column(col, &eig.eigenvectors.column(i));
    }
    let lt = l.transpose();
    let vectors = lt.solve_upper_triangular(&z).expect("cholesky factor is invertible");
    Ok(EigenPairs { values, vectors })
}

/// Finds a shift strictly below the spectrum of `(A, B)` together with the
/// Cholesky factor of `A - σB`.
fn shift_below_spectrum<T: Real>(
    a: &CsrMatrix<T>,
    b: &CsrMatrix<T>,
    diag: &mut KrylovDiagnostics,
) -> Result<(T, SparseCholesky<T>), EigenError> {
    // λ₁ ≤ min_i A_ii / B_ii (Rayleigh quotient of a unit vector), so the
    // bracket [lo, hi] is walked down from that bound and then bisected.
    let mut hi = T::max_value().unwrap_or_else(T::one);
    for i in 0..a.nrows() {
        let bii = b.get(i, i);
        if bii > T::zero() {
            let q = a.get(i, i) / bii;
            if q < hi {
                hi = q;
            }
        }
    }
    let mut step = hi.abs().max(T::one());
    let mut found: Option<(T, SparseCholesky<T>)> = None;
    for _ in 0..60 {
        let lo = hi - step;
        diag.factorizations += 1;
        match SparseCholesky::factor(&a.add_scaled(T::one(), b, -lo)) {
            Ok(f) => {
                found = Some((lo, f));
                break;
            }
            Err(_) => {
                hi = lo;
                step *= lit(4.0);
            }
        }
    }
    let (mut lo, mut f) = found.ok_or(EigenError::ShiftSearchFailed { attempts: 60 })?;
    for _ in 0..48 {
        if hi - lo <= lit::<T>(1e-2) * lo.abs().max(T::one()) {
            break;
        }
        let mid = (lo + hi) * lit(0.5);
        diag.factorizations += 1;
        match SparseCholesky::factor(&a.add_scaled(T::one(), b, -mid)) {
            Ok(g) => {
                lo = mid;
                f = g;
            }
            Err(_) => hi = mid,
        }
    }
    // Back off so A - σB stays comfortably nonsingular.
    let back = lo - (hi - lo) * lit(2.0);
    diag.factorizations += 1;
    if let Ok(g) = SparseCholesky::factor(&a.add_scaled(T::one(), b, -back)) {
        lo = back;
        f = g;
    }
    Ok((lo, f))
}

fn b_orthonormalize_against<T: Real>(w: &mut DVector<T>, basis: &[DVector<T>], b_basis: &[DVector<T>]) {
    for _ in 0..2 {
        for (v, bv) in basis.iter().zip(b_basis) {
            let c = bv.dot(w);
            w.axpy(-c, v, T::one());
        }
    }
}

/// Block shift-invert Krylov solver for the `m` lowest eigenpairs of
/// `A x = λ B x`, with `A` symmetric and `B` symmetric positive definite.
pub fn shift_invert_lowest<T: Real>(
    a: &CsrMatrix<T>,
    b: &CsrMatrix<T>,
    m: usize,
    opts: &KrylovOptions,
) -> Result<(EigenPairs<T>, KrylovDiagnostics), EigenError> {
    shift_invert_lowest_deflated(a, b, m, opts, &DMatrix::zeros(a.nrows(), 0))
}

/// Like [`shift_invert_lowest`], restricted to the `B`-orthogonal complement
/// of the columns of `deflate`. The returned values are the stationary values
/// of the Rayleigh quotient on that complement, lowest first.
pub fn shift_invert_lowest_deflated<T: Real>(
    a: &CsrMatrix<T>,
    b: &CsrMatrix<T>,
    m: usize,
    opts: &KrylovOptions,
    deflate: &DMatrix<T>,
) -> Result<(EigenPairs<T>, KrylovDiagnostics), EigenError> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || b.ncols() != n {
        return Err(EigenError::Dimension("pencil must be square".into()));
    }
    if deflate.nrows() != n {
        return Err(EigenError::Dimension(format!(
            "deflation block has {} rows, pencil has {n}",
            deflate.nrows()
        )));
    }
    // B-orthonormal copy of the deflation block
    let mut defl: Vec<DVector<T>> = Vec::new();
    let mut b_defl: Vec<DVector<T>> = Vec::new();
    for j in 0..deflate.ncols() {
        let mut w = deflate.column(j).into_owned();
        b_orthonormalize_against(&mut w, &defl, &b_defl);
        let bw = b.mul_vec(&w);
        let nrm2 = w.dot(&bw);
        if nrm2 > T::zero() {
            let nrm = nrm2.sqrt();
            defl.push(w / nrm);
            b_defl.push(bw / nrm);
        }
    }
    let n_free = n - defl.len();
    let m = m.min(n_free);
    let mut diag = KrylovDiagnostics::default();
    if m == 0 {
        return Ok((
            EigenPairs {
                values: vec![],
                vectors: DMatrix::zeros(n, 0),
            },
            diag,
        ));
    }
    let given = opts.shift.and_then(|s| {
        diag.factorizations += 1;
        SparseCholesky::factor(&a.add_scaled(T::one(), b, -lit::<T>(s)))
            .ok()
            .map(|f| (lit::<T>(s), f))
    });
    let (sigma, factor) = match given {
        Some(found) => found,
        None => shift_below_spectrum(a, b, &mut diag)?,
    };
    diag.shift = to_f64(sigma);
    let block = opts.block_size.max(1).min(n_free.max(1));
    let max_basis = if opts.max_basis == 0 {
        (3 * m + 6 * block).max(m + 40)
    } else {
        opts.max_basis
    }
    .min(n_free);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let op = |x: &DVector<T>, diag: &mut KrylovDiagnostics| {
        diag.operator_applications += 1;
        factor.solve(&b.mul_vec(x))
    };

    let mut basis: Vec<DVector<T>> = Vec::new();
    let mut b_basis: Vec<DVector<T>> = Vec::new();
    let mut a_basis: Vec<DVector<T>> = Vec::new();

    let push = |mut w: DVector<T>,
                basis: &mut Vec<DVector<T>>,
                b_basis: &mut Vec<DVector<T>>,
                a_basis: &mut Vec<DVector<T>>|
     -> bool {
        let before = w.norm();
        b_orthonormalize_against(&mut w, &defl, &b_defl);
        b_orthonormalize_against(&mut w, basis, b_basis);
        let bw = b.mul_vec(&w);
        let nrm2 = w.dot(&bw);
        if nrm2 <= T::zero() || nrm2.sqrt() <= before * lit(1e-10) {
            return false;
        }
        let nrm = nrm2.sqrt();
        let w = w / nrm;
        let bw = bw / nrm;
        a_basis.push(a.mul_vec(&w));
        b_basis.push(bw);
        basis.push(w);
        true
    };

    let random_vec = |rng: &mut ChaCha8Rng| DVector::from_fn(n, |_, _| lit::<T>(rng.gen::<f64>() - 0.5));

    // Seed block.
    let mut frontier: Vec<DVector<T>> = Vec::new();
    while frontier.len() < block {
        let v = op(&random_vec(&mut rng), &mut diag);
        if push(v, &mut basis, &mut b_basis, &mut a_basis) {
            frontier.push(basis.last().unwrap().clone());
        } else if basis.len() >= n_free {
            break;
        }
    }

    let mut worst;
    let mut converged_count;
    loop {
        // Expand the Krylov space by one block.
        let mut next = Vec::new();
        for v in &frontier {
            if basis.len() >= max_basis {
                break;
            }
            let w = op(v, &mut diag);
            if push(w, &mut basis, &mut b_basis, &mut a_basis) {
                next.push(basis.last().unwrap().clone());
            }
        }
        // Replace lost directions with fresh random ones.
        while next.len() < frontier.len().min(block) && basis.len() < max_basis {
            let w = op(&random_vec(&mut rng), &mut diag);
            if push(w, &mut basis, &mut b_basis, &mut a_basis) {
                next.push(basis.last().unwrap().clone());
            } else {
                break;
            }
        }
        frontier = next;
        let k = basis.len();
        if k < m + block && k < n_free && !frontier.is_empty() {
            continue;
        }

        // Rayleigh-Ritz on A over span(basis).
        let (ritz_vals, ritz_vecs, ritz_b, ritz_a) = rayleigh_ritz(&basis, &b_basis, &a_basis);
        let mut residuals = Vec::with_capacity(m);
        let mut converged = Vec::with_capacity(m);
        for i in 0..m.min(k) {
            let mut r = &ritz_a[i] - &ritz_b[i] * ritz_vals[i];
            for (v, bv) in defl.iter().zip(&b_defl) {
                let c = v.dot(&r);
                r.axpy(-c, bv, T::one());
            }
            // Residual of the shift-inverted operator: (A - sigma B)^-1 r is the
            // B-norm distance of x from its image, which is insensitive to the
            // high-frequency rounding noise that dominates |r| on fine meshes.
            let mut s = factor.solve(&r);
            b_orthonormalize_against(&mut s, &defl, &b_defl);
            let res = to_f64(s.dot(&b.mul_vec(&s)).max(T::zero()).sqrt());
            let target = opts.tolerance.max(1e3 * to_f64(T::eps()));
            residuals.push(res);
            converged.push(res < target);
        }
        worst = residuals.iter().cloned().fold(0.0, f64::max);
        converged_count = converged.iter().filter(|&&c| c).count();
        let all_converged = k >= m && converged_count == m;
        if all_converged || k >= n_free {
            diag.max_residual = worst;
            let keep = m.min(k);
            let mut vectors = DMatrix::zeros(n, keep);
            for i in 0..keep {
                vectors.set_column(i, &ritz_vecs[i]);
            }
            return Ok((
                EigenPairs {
                    values: ritz_vals[..keep].to_vec(),
                    vectors,
                },
                diag,
            ));
        }
        if k >= max_basis || frontier.is_empty() {
            if diag.restarts >= opts.max_restarts {
                break;
            }
            diag.restarts += 1;
            // Thick restart: keep the best Ritz vectors, continue from the
            // unconverged ones.
            let keep = (m + block).min(k.saturating_sub(block)).max(m.min(k));
            basis = ritz_vecs[..keep].to_vec();
            b_basis = ritz_b[..keep].to_vec();
            a_basis = ritz_a[..keep].to_vec();
            frontier = (0..m.min(keep))
                .filter(|&i| !converged.get(i).copied().unwrap_or(false))
                .take(block)
                .map(|i| basis[i].clone())
                .collect();
            if frontier.is_empty() {
                frontier = basis[..block.min(keep)].to_vec();
            }
        }
    }
    Err(EigenError::NoConvergence {
        iterations: diag.operator_applications,
        worst_residual: worst,
        converged: converged_count,
        wanted: m,
    })
}

type RitzOutput<T> = (Vec<T>, Vec<DVector<T>>, Vec<DVector<T>>, Vec<DVector<T>>);

fn rayleigh_ritz<T: Real>(basis: &[DVector<T>], b_basis: &[DVector<T>], a_basis: &[DVector<T>]) -> RitzOutput<T> {
    let k = basis.len();
    let mut h = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let v = basis[i].dot(&a_basis[j]);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .partial_cmp(&eig.eigenvalues[j])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let combine = |src: &[DVector<T>], col: usize| {
        let mut out = DVector::zeros(src[0].len());
        for (j, s) in src.iter().enumerate() {
            out.axpy(eig.eigenvectors[(j, col)], s, T::one());
        }
        out
    };
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = order.iter().map(|&i| combine(basis, i)).collect();
    let bvecs = order.iter().map(|&i| combine(b_basis, i)).collect();
    let avecs = order.iter().map(|&i| combine(a_basis, i)).collect();
    (vals, vecs, bvecs, avecs)
}

/// Relative residual `‖A x - λ B x‖ / ‖B x‖`.
pub fn relative_residual<T: Real>(a: &CsrMatrix<T>, b: &CsrMatrix<T>, lambda: T, x: &DVector<T>) -> T {
    let bx = b.mul_vec(x);
    let r = a.mul_vec(x) - &bx * lambda;
    r.norm() / bx.norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sparse::Triplets;

    /// 1D Neumann Laplacian with consistent P1 mass on [0, 1].
    fn pencil(n: usize) -> (CsrMatrix<f64>, CsrMatrix<f64>) {
        let h = 1.0 / (n - 1) as f64;
        let mut a = Triplets::new(n, n);
        let mut b = Triplets::new(n, n);
        for e in 0..n - 1 {
            let (i, j) = (e, e + 1);
            for (p, q, ka, kb) in [(i, i, 1.0, 2.0), (j, j, 1.0, 2.0), (i, j, -1.0, 1.0), (j, i, -1.0, 1.0)] {
                a.push(p, q, ka / h);
                b.push(p, q, kb * h / 6.0);
            }
        }
        (a.into_csr(), b.into_csr())
    }

    #[test]
    fn dense_and_krylov_agree_on_neumann_laplacian() {
        let (a, b) = pencil(120);
        let dense = dense_generalized(&a.to_dense(), &b.to_dense(), 8).unwrap();
        let (it, diag) = shift_invert_lowest(&a, &b, 8, &KrylovOptions::default()).unwrap();
        assert!(diag.shift < 0.0);
        for k in 0..8 {
            let scale = dense.values[k].abs().max(1.0);
            assert!(
                (dense.values[k] - it.values[k]).abs() < 1e-8 * scale,
                "{k}: {} vs {}",
                dense.values[k],
                it.values[k]
            );
        }
        // λ₁ = 0 with constant eigenvector
        assert!(dense.values[0].abs() < 1e-10);
        let v = dense.vectors.column(0);
        let spread = v.max() - v.min();
        assert!(spread < 1e-8);
    }

    #[test]
    fn dense_eigenvectors_are_b_orthonormal() {
        let (a, b) = pencil(30);
        let p = dense_generalized(&a.to_dense(), &b.to_dense(), 5).unwrap();
        let g = p.vectors.transpose() * b.to_dense() * &p.vectors;
        assert!((g - DMatrix::identity(5, 5)).norm() < 1e-10);
    }

    #[test]
    fn krylov_resolves_degenerate_pairs() {
        // Two decoupled copies produce exact double eigenvalues.
        let (a1, b1) = pencil(40);
        let n = 40;
        let mut ta = Triplets::new(2 * n, 2 * n);
        let mut tb = Triplets::new(2 * n, 2 * n);
        for (i, j, v) in a1.iter() {
            ta.push(i, j, v);
            ta.push(i + n, j + n, v);
        }
        for (i, j, v) in b1.iter() {
            tb.push(i, j, v);
            tb.push(i + n, j + n, v);
        }
        let (a, b) = (ta.into_csr(), tb.into_csr());
        let (it, _) = shift_invert_lowest(&a, &b, 6, &KrylovOptions::default()).unwrap();
        for pair in it.values.chunks(2) {
            assert!((pair[0] - pair[1]).abs() < 1e-8 * pair[1].abs().max(1.0));
        }
    }

    #[test]
    fn deflation_skips_the_given_eigenvectors() {
        let (a, b) = pencil(60);
        let dense = dense_generalized(&a.to_dense(), &b.to_dense(), 6).unwrap();
        let phi = dense.vectors.columns(0, 3).into_owned();
        let (it, _) = shift_invert_lowest_deflated(&a, &b, 2, &KrylovOptions::default(), &phi).unwrap();
        for k in 0..2 {
            assert!((it.values[k] - dense.values[k + 3]).abs() < 1e-8 * dense.values[k + 3]);
        }
        let overlap = phi.transpose() * b.to_dense() * &it.vectors;
        assert!(overlap.norm() < 1e-10);
    }
}
