//! Oracles shared by the integration tests.
#![allow(dead_code)]

use fbms_core::mesh::TriSurfaceMesh;
use nalgebra::{DVector, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Degree-5 seven-point rule on the reference triangle: barycentric
/// coordinates and weights summing to one.
fn seven_point_rule() -> Vec<([f64; 3], f64)> {
    let s15 = 15f64.sqrt();
    let a1 = (6.0 - s15) / 21.0;
    let a2 = (6.0 + s15) / 21.0;
    let w1 = (155.0 - s15) / 1200.0;
    let w2 = (155.0 + s15) / 1200.0;
    let mut rule = vec![([1.0 / 3.0; 3], 9.0 / 40.0)];
    for (a, w) in [(a1, w1), (a2, w2)] {
        let b = 1.0 - 2.0 * a;
        rule.push(([b, a, a], w));
        rule.push(([a, b, a], w));
        rule.push(([a, a, b], w));
    }
    rule
}

/// `Q(φ, φ)` by direct quadrature of the piecewise-linear integrand: the
/// gradient of the linear interpolant from the 2×2 metric of each triangle,
/// the potential term with the seven-point rule, and the boundary term with
/// two-point Gauss on each boundary edge.
pub fn direct_quadrature(mesh: &TriSurfaceMesh<f64>, a_squared: &[f64], robin: &[f64], phi: &DVector<f64>) -> f64 {
    let rule = seven_point_rule();
    let mut total = 0.0;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let c = mesh.corners(t);
        let e1 = c[1] - c[0];
        let e2 = c[2] - c[0];
        // grad φ = a e1 + b e2 with ⟨grad φ, e1⟩ = φ1 − φ0 and ⟨grad φ, e2⟩ = φ2 − φ0
        let (g11, g12, g22) = (e1.dot(&e1), e1.dot(&e2), e2.dot(&e2));
        let det = g11 * g22 - g12 * g12;
        let (d1, d2) = (phi[tri[1]] - phi[tri[0]], phi[tri[2]] - phi[tri[0]]);
        let a = (g22 * d1 - g12 * d2) / det;
        let b = (g11 * d2 - g12 * d1) / det;
        let grad: Vector3<f64> = e1 * a + e2 * b;
        let area = 0.5 * det.sqrt();
        let mut pot = 0.0;
        for (l, w) in &rule {
            let f: f64 = (0..3).map(|k| l[k] * phi[tri[k]]).sum();
            let s: f64 = (0..3).map(|k| l[k] * a_squared[tri[k]]).sum();
            pot += w * s * f * f;
        }
        total += area * (grad.norm_squared() - pot);
    }
    let g = 0.5 / 3f64.sqrt();
    for (a, b) in mesh.directed_boundary_edges() {
        let len = (mesh.vertices()[b] - mesh.vertices()[a]).norm();
        for s in [0.5 - g, 0.5 + g] {
            let f = phi[a] * (1.0 - s) + phi[b] * s;
            let r = robin[a] * (1.0 - s) + robin[b] * s;
            total -= 0.5 * len * r * f * f;
        }
    }
    total
}

/// `I₀` and `I₁` by their power series.
fn bessel_i01(x: f64) -> (f64, f64) {
    let (mut i0, mut i1) = (0.0, 0.0);
    let mut term0 = 1.0;
    let mut term1 = x / 2.0;
    for k in 0..60 {
        i0 += term0;
        i1 += term1;
        let kf = k as f64;
        term0 *= (x / 2.0).powi(2) / ((kf + 1.0) * (kf + 1.0));
        term1 *= (x / 2.0).powi(2) / ((kf + 1.0) * (kf + 2.0));
    }
    (i0, i1)
}

/// Lowest eigenvalue of `−Δφ = λφ` on the unit disk with `∂_r φ = φ`:
/// `φ = I₀(kr)` with `k I₁(k) = I₀(k)` and `λ = −k²`.
pub fn disk_robin_eigenvalue() -> f64 {
    let f = |k: f64| {
        let (i0, i1) = bessel_i01(k);
        k * i1 - i0
    };
    let (mut lo, mut hi) = (0.5, 3.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let k = 0.5 * (lo + hi);
    -k * k
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vector(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
}

/// Random permutation with `perm[new] = old`.
pub fn random_permutation(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}
