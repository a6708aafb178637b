//! Exact free boundary minimal surfaces in the unit ball: the equatorial disk
//! and the critical catenoid.

use crate::ambient::AmbientDomain;
use crate::geometry::{FieldAccuracy, GeometricFields};
use crate::mesh::{MeshError, Reprojector, TriSurfaceMesh};
use crate::scalar::{from_usize, lit, Real};
use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

/// Smallest accepted sampling resolution.
pub const MIN_RESOLUTION: usize = 4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExemplarError {
    #[error("resolution {0} is below the minimum of {MIN_RESOLUTION}")]
    ResolutionTooLow(usize),
    #[error("unknown exemplar '{0}' (expected disk or catenoid)")]
    UnknownExemplar(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExemplarKind {
    EquatorialDisk,
    CriticalCatenoid,
}

/// A known free boundary minimal surface with its analytic geometry.
///
/// Parameters are `(ρ, θ)` for the disk and `(t, θ)` for the catenoid; `θ`
/// is periodic.
#[derive(Debug, Clone)]
pub struct ExemplarSurface<T: Real> {
    kind: ExemplarKind,
    domain: AmbientDomain<T>,
    /// Catenoid half height in the parameter `t`; 1 for the disk radius.
    t0: T,
    /// Catenoid scale; 1 for the disk.
    scale: T,
}

/// A sampled exemplar mesh with its analytic per-vertex fields.
#[derive(Debug, Clone)]
pub struct SampledSurface<T: Real> {
    pub mesh: TriSurfaceMesh<T>,
    pub fields: GeometricFields<T>,
}

/// Root of `t · tanh t = 1` on `[1, 2]` by bisection.
pub fn catenoid_t0<T: Real>() -> T {
    let f = |t: T| t * t.tanh() - T::one();
    let (mut lo, mut hi) = (T::one(), lit::<T>(2.0));
    for _ in 0..200 {
        let mid = (lo + hi) * lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) * lit(0.5)
}

impl<T: Real> ExemplarSurface<T> {
    pub fn equatorial_disk() -> Self {
        Self {
            kind: ExemplarKind::EquatorialDisk,
            domain: AmbientDomain::unit_ball(),
            t0: T::one(),
            scale: T::one(),
        }
    }

    pub fn critical_catenoid() -> Self {
        let t0 = catenoid_t0::<T>();
        let scale = T::one() / (t0.cosh() * t0.cosh() + t0 * t0).sqrt();
        Self {
            kind: ExemplarKind::CriticalCatenoid,
            domain: AmbientDomain::unit_ball(),
            t0,
            scale,
        }
    }

    /// `"disk"` or `"catenoid"`.
    pub fn by_name(name: &str) -> Result<Self, ExemplarError> {
        match name {
            "disk" => Ok(Self::equatorial_disk()),
            "catenoid" => Ok(Self::critical_catenoid()),
            other => Err(ExemplarError::UnknownExemplar(other.to_string())),
        }
    }

    /// The same surface paired with another ambient domain. The surface is
    /// then in general no longer free boundary; used to exercise hypothesis
    /// gating.
    pub fn with_domain(mut self, domain: AmbientDomain<T>) -> Self {
        self.domain = domain;
        self
    }

    pub fn kind(&self) -> ExemplarKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ExemplarKind::EquatorialDisk => "disk",
            ExemplarKind::CriticalCatenoid => "catenoid",
        }
    }

    pub fn domain(&self) -> &AmbientDomain<T> {
        &self.domain
    }

    /// `(genus, boundary components)`.
    pub fn topology(&self) -> (usize, usize) {
        match self.kind {
            ExemplarKind::EquatorialDisk => (0, 1),
            ExemplarKind::CriticalCatenoid => (0, 2),
        }
    }

    /// Catenoid half height `t₀` (1 for the disk).
    pub fn t0(&self) -> T {
        self.t0
    }

    /// Catenoid scale `c` (1 for the disk).
    pub fn scale(&self) -> T {
        self.scale
    }

    /// Ranges of the first parameter; the second is `θ ∈ [0, 2π)`.
    pub fn parameter_range(&self) -> (T, T) {
        match self.kind {
            ExemplarKind::EquatorialDisk => (T::zero(), T::one()),
            ExemplarKind::CriticalCatenoid => (-self.t0, self.t0),
        }
    }

    pub fn position(&self, u: T, theta: T) -> Point3<T> {
        let (s, c) = theta.sin_cos();
        match self.kind {
            ExemplarKind::EquatorialDisk => Point3::new(u * c, u * s, T::zero()),
            ExemplarKind::CriticalCatenoid => {
                let ch = u.cosh();
                Point3::new(self.scale * ch * c, self.scale * ch * s, self.scale * u)
            }
        }
    }

    /// Unit normal `X_u × X_θ / |X_u × X_θ|`.
    pub fn normal(&self, u: T, theta: T) -> Vector3<T> {
        match self.kind {
            ExemplarKind::EquatorialDisk => Vector3::z(),
            ExemplarKind::CriticalCatenoid => {
                let (s, c) = theta.sin_cos();
                Vector3::new(-c, -s, u.sinh()) / u.cosh()
            }
        }
    }

    /// Squared norm of the second fundamental form.
    pub fn a_squared(&self, u: T) -> T {
        match self.kind {
            ExemplarKind::EquatorialDisk => T::zero(),
            ExemplarKind::CriticalCatenoid => {
                let ch2 = u.cosh() * u.cosh();
                lit::<T>(2.0) / (self.scale * self.scale * ch2 * ch2)
            }
        }
    }

    /// Gauss curvature `−|A|²/2` of a minimal surface.
    pub fn gauss_curvature(&self, u: T) -> T {
        -self.a_squared(u) * lit(0.5)
    }

    /// Geodesic curvature of the boundary circles with respect to the outward
    /// conormal.
    pub fn boundary_curvature(&self) -> T {
        match self.kind {
            ExemplarKind::EquatorialDisk => T::one(),
            ExemplarKind::CriticalCatenoid => {
                let ch = self.t0.cosh();
                self.t0.sinh() / (self.scale * ch * ch)
            }
        }
    }

    /// Outward unit conormal at a boundary parameter.
    pub fn conormal(&self, u: T, theta: T) -> Vector3<T> {
        let (s, c) = theta.sin_cos();
        match self.kind {
            ExemplarKind::EquatorialDisk => Vector3::new(c, s, T::zero()),
            ExemplarKind::CriticalCatenoid => {
                let sign = if u > T::zero() { T::one() } else { -T::one() };
                Vector3::new(u.sinh() * c, u.sinh() * s, T::one()) * (sign / u.cosh())
            }
        }
    }

    /// Parameters of a point on (or near) the surface.
    pub fn parameters_of(&self, p: &Point3<T>) -> (T, T) {
        let theta = p.y.atan2(p.x);
        match self.kind {
            ExemplarKind::EquatorialDisk => ((p.x * p.x + p.y * p.y).sqrt().min(T::one()), theta),
            ExemplarKind::CriticalCatenoid => ((p.z / self.scale).max(-self.t0).min(self.t0), theta),
        }
    }

    /// Whether parameter `u` lies on the boundary.
    pub fn is_boundary_parameter(&self, u: T) -> bool {
        match self.kind {
            ExemplarKind::EquatorialDisk => u == T::one(),
            ExemplarKind::CriticalCatenoid => u.abs() == self.t0,
        }
    }

    /// Structured mesh of the parameter rectangle: `resolution` points around
    /// each circle and `resolution / 4` bands in the other direction. The
    /// θ-seam is identified and the disk center is a single apex vertex.
    pub fn sample_mesh(&self, resolution: usize) -> Result<SampledSurface<T>, ExemplarError> {
        if resolution < MIN_RESOLUTION {
            return Err(ExemplarError::ResolutionTooLow(resolution));
        }
        let n = resolution;
        let bands = (resolution / 4).max(1);
        let theta = |i: usize| T::two_pi() * from_usize::<T>(i % n) / from_usize::<T>(n);
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        match self.kind {
            ExemplarKind::EquatorialDisk => {
                vertices.push(Point3::origin());
                for j in 1..=bands {
                    let rho = from_usize::<T>(j) / from_usize::<T>(bands);
                    for i in 0..n {
                        vertices.push(self.position(rho, theta(i)));
                    }
                }
                let id = |i: usize, j: usize| 1 + (j - 1) * n + i % n;
                for i in 0..n {
                    triangles.push([0, id(i, 1), id(i + 1, 1)]);
                }
                for j in 1..bands {
                    for i in 0..n {
                        triangles.push([id(i, j), id(i, j + 1), id(i + 1, j + 1)]);
                        triangles.push([id(i, j), id(i + 1, j + 1), id(i + 1, j)]);
                    }
                }
            }
            ExemplarKind::CriticalCatenoid => {
                for j in 0..=bands {
                    let t = if j == bands {
                        self.t0
                    } else {
                        -self.t0 + self.t0 * lit::<T>(2.0) * from_usize::<T>(j) / from_usize::<T>(bands)
                    };
                    for i in 0..n {
                        vertices.push(self.position(t, theta(i)));
                    }
                }
                let id = |i: usize, j: usize| j * n + i % n;
                for j in 0..bands {
                    for i in 0..n {
                        triangles.push([id(i, j), id(i, j + 1), id(i + 1, j + 1)]);
                        triangles.push([id(i, j), id(i + 1, j + 1), id(i + 1, j)]);
                    }
                }
            }
        }
        let mesh = TriSurfaceMesh::build(vertices, triangles)?;
        let fields = self.fields(&mesh);
        Ok(SampledSurface { mesh, fields })
    }

    /// Analytic fields at the mesh vertices, evaluated at the parameters of
    /// each vertex position.
    pub fn fields(&self, mesh: &TriSurfaceMesh<T>) -> GeometricFields<T> {
        let params: Vec<(T, T)> = mesh.vertices().iter().map(|p| self.parameters_of(p)).collect();
        let kb = self.boundary_curvature();
        GeometricFields {
            a_squared: params.iter().map(|&(u, _)| self.a_squared(u)).collect(),
            normals: params.iter().map(|&(u, th)| self.normal(u, th)).collect(),
            gauss_curvature: params.iter().map(|&(u, _)| self.gauss_curvature(u)).collect(),
            boundary_curvature: (0..mesh.n_vertices())
                .map(|v| if mesh.is_boundary_vertex(v) { kb } else { T::zero() })
                .collect(),
            conormals: (0..mesh.n_vertices())
                .map(|v| {
                    if mesh.is_boundary_vertex(v) {
                        let (u, th) = params[v];
                        self.conormal(u, th)
                    } else {
                        Vector3::zeros()
                    }
                })
                .collect(),
            accuracy: FieldAccuracy::Analytic,
        }
    }

    /// Mesh refined `levels` times with new vertices projected onto the
    /// surface, together with re-evaluated analytic fields.
    pub fn refined(&self, base: &TriSurfaceMesh<T>, levels: usize) -> Result<SampledSurface<T>, ExemplarError> {
        let mut mesh = base.clone();
        for _ in 0..levels {
            mesh = crate::mesh::refine(&mesh, Some(self))?;
        }
        let fields = self.fields(&mesh);
        Ok(SampledSurface { mesh, fields })
    }
}

impl<T: Real> Reprojector<T> for ExemplarSurface<T> {
    fn project_interior(&self, p: &Point3<T>) -> Result<Point3<T>, MeshError> {
        let (u, th) = self.parameters_of(p);
        Ok(self.position(u, th))
    }

    fn project_boundary(&self, p: &Point3<T>) -> Result<Point3<T>, MeshError> {
        let (u, th) = self.parameters_of(p);
        let u = match self.kind {
            ExemplarKind::EquatorialDisk => T::one(),
            ExemplarKind::CriticalCatenoid if u >= T::zero() => self.t0,
            ExemplarKind::CriticalCatenoid => -self.t0,
        };
        Ok(self.position(u, th))
    }
}
