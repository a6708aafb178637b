//! Per-vertex geometric fields of a surface: normals, `|A|²`, Gauss
//! curvature, and the geodesic curvature and conormal of the boundary.
//!
//! Exemplar surfaces supply these analytically. For arbitrary meshes they are
//! estimated: `|A|²` by a local quadric fit, Gauss curvature by angle defect
//! over the mixed area, and boundary curvature by turning angles divided by
//! the dual boundary length.

use crate::ambient::orthogonal_unit;
use crate::mesh::TriSurfaceMesh;
use crate::scalar::{lit, Real};
use nalgebra::{DMatrix, DVector, Matrix2, Rotation3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldAccuracy {
    Analytic,
    /// Discrete estimates; reports flag these as low accuracy.
    Estimated,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FieldError {
    #[error("field '{name}' has {found} entries, mesh has {expected} vertices")]
    MissingField {
        name: &'static str,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Clone)]
pub struct GeometricFields<T: Real> {
    pub a_squared: Vec<T>,
    pub normals: Vec<Vector3<T>>,
    pub gauss_curvature: Vec<T>,
    /// Geodesic curvature `H^{∂M}` of the boundary with respect to the
    /// outward conormal; zero at interior vertices.
    pub boundary_curvature: Vec<T>,
    /// Outward unit conormal at boundary vertices; zero at interior vertices.
    pub conormals: Vec<Vector3<T>>,
    pub accuracy: FieldAccuracy,
}

impl<T: Real> GeometricFields<T> {
    pub fn check(&self, mesh: &TriSurfaceMesh<T>) -> Result<(), FieldError> {
        let n = mesh.n_vertices();
        for (name, len) in [
            ("a_squared", self.a_squared.len()),
            ("normals", self.normals.len()),
            ("gauss_curvature", self.gauss_curvature.len()),
            ("boundary_curvature", self.boundary_curvature.len()),
            ("conormals", self.conormals.len()),
        ] {
            if len != n {
                return Err(FieldError::MissingField {
                    name,
                    expected: n,
                    found: len,
                });
            }
        }
        Ok(())
    }

    /// Discrete estimates from the mesh alone.
    pub fn estimate(mesh: &TriSurfaceMesh<T>) -> Self {
        let normals = mesh.vertex_normals().to_vec();
        let fits = quadric_fits(mesh);
        let mut gauss = angle_defect_curvature(mesh);
        for v in 0..mesh.n_vertices() {
            if mesh.is_boundary_vertex(v) {
                gauss[v] = fits[v].gauss;
            }
        }
        Self {
            a_squared: fits.iter().map(|f| f.a_squared).collect(),
            normals,
            gauss_curvature: gauss,
            boundary_curvature: turning_angle_curvature(mesh),
            conormals: mesh.vertex_conormals(),
            accuracy: FieldAccuracy::Estimated,
        }
    }

    /// Estimated fields with `|A|²` replaced by user-supplied values.
    pub fn estimate_with_a_squared(mesh: &TriSurfaceMesh<T>, a_squared: Vec<T>) -> Self {
        Self {
            a_squared,
            ..Self::estimate(mesh)
        }
    }

    /// Fields of the rigidly rotated surface.
    pub fn rotated(&self, r: &Rotation3<T>) -> Self {
        Self {
            normals: self.normals.iter().map(|n| r * n).collect(),
            conormals: self.conormals.iter().map(|n| r * n).collect(),
            ..self.clone()
        }
    }

    /// Fields after relabeling vertices with `perm[new] = old`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        fn pick<X: Copy>(v: &[X], perm: &[usize]) -> Vec<X> {
            perm.iter().map(|&o| v[o]).collect()
        }
        Self {
            a_squared: pick(&self.a_squared, perm),
            normals: pick(&self.normals, perm),
            gauss_curvature: pick(&self.gauss_curvature, perm),
            boundary_curvature: pick(&self.boundary_curvature, perm),
            conormals: pick(&self.conormals, perm),
            accuracy: self.accuracy,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct QuadricFit<T> {
    a_squared: T,
    gauss: T,
}

/// Least-squares fit of a height function `h = a x² + b xy + c y² + d x + e y`
/// over the one-ring (two-ring when the one-ring is too small) in the tangent
/// frame of each vertex, evaluated at the vertex.
fn quadric_fits<T: Real>(mesh: &TriSurfaceMesh<T>) -> Vec<QuadricFit<T>> {
    let nb = mesh.vertex_neighbors();
    let verts = mesh.vertices();
    (0..mesh.n_vertices())
        .map(|v| {
            let mut ring: Vec<usize> = nb[v].clone();
            if ring.len() < 7 {
                let mut two: Vec<usize> = ring.iter().flat_map(|&u| nb[u].iter().copied()).collect();
                two.extend(ring.iter().copied());
                two.sort_unstable();
                two.dedup();
                two.retain(|&u| u != v);
                ring = two;
            }
            let n = mesh.vertex_normals()[v];
            let e1 = orthogonal_unit(&n);
            let e2 = n.cross(&e1);
            let rows = ring.len();
            let mut a = DMatrix::zeros(rows, 5);
            let mut rhs = DVector::zeros(rows);
            for (k, &u) in ring.iter().enumerate() {
                let d = verts[u] - verts[v];
                let (x, y, h) = (d.dot(&e1), d.dot(&e2), d.dot(&n));
                a[(k, 0)] = x * x;
                a[(k, 1)] = x * y;
                a[(k, 2)] = y * y;
                a[(k, 3)] = x;
                a[(k, 4)] = y;
                rhs[k] = h;
            }
            let coef = a
                .svd(true, true)
                .solve(&rhs, T::eps() * lit(1e3))
                .unwrap_or_else(|_| DVector::zeros(5));
            let grad = Vector2::new(coef[3], coef[4]);
            let hess = Matrix2::new(coef[0] * lit(2.0), coef[1], coef[1], coef[2] * lit(2.0));
            let w = (T::one() + grad.norm_squared()).sqrt();
            let first = Matrix2::identity() + grad * grad.transpose();
            let second = hess / w;
            let shape = first.try_inverse().unwrap_or_else(Matrix2::identity) * second;
            QuadricFit {
                a_squared: (shape * shape).trace(),
                gauss: shape.determinant(),
            }
        })
        .collect()
}

/// Mixed (Voronoi, with the obtuse-triangle fallback) area of each vertex.
pub fn mixed_areas<T: Real>(mesh: &TriSurfaceMesh<T>) -> Vec<T> {
    let mut area = vec![T::zero(); mesh.n_vertices()];
    let half_pi = lit::<T>(std::f64::consts::FRAC_PI_2);
    for t in 0..mesh.n_triangles() {
        let tri = mesh.triangles()[t];
        let p = mesh.corners(t);
        let at = mesh.triangle_area(t);
        let angles: [T; 3] = std::array::from_fn(|k| mesh.corner_angle(t, k));
        let obtuse = angles.iter().position(|&a| a > half_pi);
        for k in 0..3 {
            area[tri[k]] += match obtuse {
                Some(o) if o == k => at * lit(0.5),
                Some(_) => at * lit(0.25),
                None => {
                    let (i, j) = ((k + 1) % 3, (k + 2) % 3);
                    // edges k–i and k–j weighted by the cotangent of the opposite angle
                    let eij = (p[i] - p[k]).norm_squared() / angles[j].tan();
                    let eik = (p[j] - p[k]).norm_squared() / angles[i].tan();
                    (eij + eik) * lit(0.125)
                }
            };
        }
    }
    area
}

/// `(2π − Σ angles) / mixed area` at interior vertices, zero on the boundary.
pub fn angle_defect_curvature<T: Real>(mesh: &TriSurfaceMesh<T>) -> Vec<T> {
    let mut sum = vec![T::zero(); mesh.n_vertices()];
    for t in 0..mesh.n_triangles() {
        for k in 0..3 {
            sum[mesh.triangles()[t][k]] += mesh.corner_angle(t, k);
        }
    }
    let areas = mixed_areas(mesh);
    (0..mesh.n_vertices())
        .map(|v| {
            if mesh.is_boundary_vertex(v) {
                T::zero()
            } else {
                (T::two_pi() - sum[v]) / areas[v]
            }
        })
        .collect()
}

/// `(π − Σ angles) / (half the adjacent boundary edge lengths)` at boundary
/// vertices, zero in the interior.
pub fn turning_angle_curvature<T: Real>(mesh: &TriSurfaceMesh<T>) -> Vec<T> {
    let mut sum = vec![T::zero(); mesh.n_vertices()];
    for t in 0..mesh.n_triangles() {
        for k in 0..3 {
            sum[mesh.triangles()[t][k]] += mesh.corner_angle(t, k);
        }
    }
    let mut dual = vec![T::zero(); mesh.n_vertices()];
    for (a, b) in mesh.directed_boundary_edges() {
        let l = (mesh.vertices()[b] - mesh.vertices()[a]).norm() * lit(0.5);
        dual[a] += l;
        dual[b] += l;
    }
    (0..mesh.n_vertices())
        .map(|v| {
            if mesh.is_boundary_vertex(v) {
                (T::pi() - sum[v]) / dual[v]
            } else {
                T::zero()
            }
        })
        .collect()
}
