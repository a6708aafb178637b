//! Small reference triangulations: a fan disk, a planar annulus and a
//! punctured torus.

use super::TriSurfaceMesh;
use nalgebra::Point3;

fn p(x: f64, y: f64, z: f64) -> Point3<f64> {
    Point3::new(x, y, z)
}

/// Fan disk around the origin with `n` rim vertices.
pub fn fan_disk(n: usize) -> TriSurfaceMesh<f64> {
    let mut v = vec![p(0.0, 0.0, 0.0)];
    for i in 0..n {
        let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
        v.push(p(a.cos(), a.sin(), 0.0));
    }
    let t = (0..n).map(|i| [0, 1 + i, 1 + (i + 1) % n]).collect();
    TriSurfaceMesh::build(v, t).expect("reference triangulation is valid")
}

/// Planar annulus with `n` angular and `m` radial subdivisions.
pub fn annulus(n: usize, m: usize, r0: f64, r1: f64) -> TriSurfaceMesh<f64> {
    let mut v = Vec::new();
    for j in 0..=m {
        let r = r0 + (r1 - r0) * j as f64 / m as f64;
        for i in 0..n {
            let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            v.push(p(r * a.cos(), r * a.sin(), 0.0));
        }
    }
    let id = |i: usize, j: usize| j * n + (i % n);
    let mut t = Vec::new();
    for j in 0..m {
        for i in 0..n {
            t.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            t.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    TriSurfaceMesh::build(v, t).expect("reference triangulation is valid")
}

/// Flat square torus grid `n x n` embedded in ℝ³ as a standard torus.
pub fn torus_triangles(n: usize) -> (Vec<Point3<f64>>, Vec<[usize; 3]>) {
    let (big, small) = (2.0, 0.7);
    let mut v = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let u = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            let w = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
            v.push(p(
                (big + small * w.cos()) * u.cos(),
                (big + small * w.cos()) * u.sin(),
                small * w.sin(),
            ));
        }
    }
    let id = |i: usize, j: usize| (j % n) * n + (i % n);
    let mut t = Vec::new();
    for j in 0..n {
        for i in 0..n {
            t.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            t.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    (v, t)
}

/// Torus with one triangle removed: genus 1, one boundary component.
pub fn punctured_torus(n: usize) -> TriSurfaceMesh<f64> {
    let (v, mut t) = torus_triangles(n);
    t.remove(0);
    TriSurfaceMesh::build(v, t).expect("reference triangulation is valid")
}
