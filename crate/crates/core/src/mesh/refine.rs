//! Uniform 1-to-4 subdivision with optional projection of new vertices.

use super::{MeshError, TriSurfaceMesh};
use crate::scalar::{lit, Real};
use nalgebra::Point3;
use std::collections::HashMap;

/// Moves freshly inserted midpoints back onto the underlying surface.
pub trait Reprojector<T: Real> {
    /// Projection for midpoints of interior edges.
    fn project_interior(&self, p: &Point3<T>) -> Result<Point3<T>, MeshError>;

    /// Projection for midpoints of boundary edges. Defaults to the interior
    /// projection.
    fn project_boundary(&self, p: &Point3<T>) -> Result<Point3<T>, MeshError> {
        self.project_interior(p)
    }
}

/// Splits each triangle into four at its edge midpoints. Original vertices
/// keep their indices and positions; midpoint of edge `e` becomes vertex
/// `n_vertices + e`.
pub fn refine<T: Real>(
    mesh: &TriSurfaceMesh<T>,
    projector: Option<&dyn Reprojector<T>>,
) -> Result<TriSurfaceMesh<T>, MeshError> {
    let nv = mesh.n_vertices();
    let mut vertices = mesh.vertices().to_vec();
    let mut mid: HashMap<(usize, usize), usize> = HashMap::with_capacity(mesh.n_edges());
    for (e, edge) in mesh.edges().iter().enumerate() {
        let [a, b] = edge.v;
        let m = Point3::from((mesh.vertices()[a].coords + mesh.vertices()[b].coords) * lit::<T>(0.5));
        let m = match projector {
            Some(p) if edge.is_boundary() => p.project_boundary(&m)?,
            Some(p) => p.project_interior(&m)?,
            None => m,
        };
        vertices.push(m);
        mid.insert((a, b), nv + e);
    }
    let m = |a: usize, b: usize| mid[&(a.min(b), a.max(b))];
    let mut triangles = Vec::with_capacity(4 * mesh.n_triangles());
    for &[a, b, c] in mesh.triangles() {
        let (ab, bc, ca) = (m(a, b), m(b, c), m(c, a));
        triangles.push([a, ab, ca]);
        triangles.push([ab, b, bc]);
        triangles.push([ca, bc, c]);
        triangles.push([ab, bc, ca]);
    }
    TriSurfaceMesh::build(vertices, triangles)
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::super::topology;
    use super::*;

    struct UnitCircleRim;

    impl Reprojector<f64> for UnitCircleRim {
        fn project_interior(&self, p: &Point3<f64>) -> Result<Point3<f64>, MeshError> {
            Ok(*p)
        }
        fn project_boundary(&self, p: &Point3<f64>) -> Result<Point3<f64>, MeshError> {
            let r = (p.x * p.x + p.y * p.y).sqrt();
            Ok(Point3::new(p.x / r, p.y / r, p.z))
        }
    }

    #[test]
    fn counts_and_topology_are_preserved() {
        let m = annulus(8, 2, 0.5, 1.0);
        let r = refine(&m, None).unwrap();
        assert_eq!(r.n_vertices(), m.n_vertices() + m.n_edges());
        assert_eq!(r.n_triangles(), 4 * m.n_triangles());
        assert_eq!(r.n_edges(), 2 * m.n_edges() + 3 * m.n_triangles());
        assert_eq!(topology(&r).unwrap(), topology(&m).unwrap());
        assert_eq!(r.reoriented_triangles(), 0);
        assert!((r.total_area() - m.total_area()).abs() < 1e-12);
    }

    #[test]
    fn boundary_midpoints_are_projected() {
        let m = fan_disk(6);
        let r = refine(&m, Some(&UnitCircleRim)).unwrap();
        for l in r.boundary_loops() {
            for &v in l {
                let q = r.vertices()[v];
                assert!(((q.x * q.x + q.y * q.y).sqrt() - 1.0).abs() < 1e-14);
            }
        }
        assert_eq!(r.boundary_loops()[0].len(), 12);
    }
}
