//! Ambient domains `Ω = {F ≤ 0} ⊂ ℝ³` given by smooth level-set functions.
//!
//! The outward normal of `∂Ω` is `∇F/|∇F|`, and the second fundamental form
//! is taken with respect to it, so convex domains have `II ≥ 0`.

use crate::mesh::{MeshError, Reprojector, TriSurfaceMesh};
use crate::scalar::{lit, to_f64, Real};
use nalgebra::{Matrix2, Matrix3, Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Debug;
use std::sync::Arc;

/// Points with `|F| / |∇F|` below this fraction of the bounding radius count
/// as lying on `∂Ω`.
pub const ON_BOUNDARY_TOLERANCE: f64 = 1e-6;

/// Margin used when turning sampled curvature minima into flags.
pub const CONVEXITY_MARGIN: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AmbientError {
    #[error("point is not on the domain boundary (distance estimate {distance:e}, tolerance {tolerance:e})")]
    NotOnBoundary { distance: f64, tolerance: f64 },
    #[error("level-set gradient vanishes at ({x}, {y}, {z})")]
    DegenerateGradient { x: f64, y: f64, z: f64 },
    #[error("boundary sampling failed: {hits} of {wanted} rays reached the boundary")]
    SamplingFailed { hits: usize, wanted: usize },
    #[error("unknown domain '{0}' (expected ball, cylinder, ellipsoid, torus or rounded-cube)")]
    UnknownDomain(String),
    #[error("invalid domain parameter: {0}")]
    InvalidParameter(String),
}

/// Smooth level-set function with analytic first and second derivatives.
pub trait LevelSet<T: Real>: Send + Sync + Debug {
    fn value(&self, p: &Point3<T>) -> T;
    fn gradient(&self, p: &Point3<T>) -> Vector3<T>;
    fn hessian(&self, p: &Point3<T>) -> Matrix3<T>;
}

/// `|x|² − r²`.
#[derive(Debug, Clone, Copy)]
pub struct Ball<T> {
    pub radius: T,
}

impl<T: Real> LevelSet<T> for Ball<T> {
    fn value(&self, p: &Point3<T>) -> T {
        p.coords.norm_squared() - self.radius * self.radius
    }
    fn gradient(&self, p: &Point3<T>) -> Vector3<T> {
        p.coords * lit::<T>(2.0)
    }
    fn hessian(&self, _: &Point3<T>) -> Matrix3<T> {
        Matrix3::identity() * lit::<T>(2.0)
    }
}

/// Infinite solid cylinder around the z axis, `x² + y² − R²`.
#[derive(Debug, Clone, Copy)]
pub struct Cylinder<T> {
    pub radius: T,
}

impl<T: Real> LevelSet<T> for Cylinder<T> {
    fn value(&self, p: &Point3<T>) -> T {
        p.x * p.x + p.y * p.y - self.radius * self.radius
    }
    fn gradient(&self, p: &Point3<T>) -> Vector3<T> {
        Vector3::new(p.x, p.y, T::zero()) * lit::<T>(2.0)
    }
    fn hessian(&self, _: &Point3<T>) -> Matrix3<T> {
        Matrix3::from_diagonal(&Vector3::new(lit(2.0), lit(2.0), T::zero()))
    }
}

/// `x²/a² + y²/b² + z²/c² − 1`.
#[derive(Debug, Clone, Copy)]
pub struct Ellipsoid<T> {
    pub semi_axes: Vector3<T>,
}

impl<T: Real> Ellipsoid<T> {
    fn inv_sq(&self) -> Vector3<T> {
        self.semi_axes.map(|a| T::one() / (a * a))
    }
}

impl<T: Real> LevelSet<T> for Ellipsoid<T> {
    fn value(&self, p: &Point3<T>) -> T {
        p.coords.component_mul(&p.coords).dot(&self.inv_sq()) - T::one()
    }
    fn gradient(&self, p: &Point3<T>) -> Vector3<T> {
        p.coords.component_mul(&self.inv_sq()) * lit::<T>(2.0)
    }
    fn hessian(&self, _: &Point3<T>) -> Matrix3<T> {
        Matrix3::from_diagonal(&(self.inv_sq() * lit::<T>(2.0)))
    }
}

/// Solid torus around the z axis, `(√(x²+y²) − R)² + z² − ρ²`. Its boundary
/// has negative mean curvature along the inner equator when `ρ > R/2`.
#[derive(Debug, Clone, Copy)]
pub struct Torus<T> {
    pub major: T,
    pub minor: T,
}

impl<T: Real> LevelSet<T> for Torus<T> {
    fn value(&self, p: &Point3<T>) -> T {
        let s = (p.x * p.x + p.y * p.y).sqrt() - self.major;
        s * s + p.z * p.z - self.minor * self.minor
    }
    fn gradient(&self, p: &Point3<T>) -> Vector3<T> {
        let s = (p.x * p.x + p.y * p.y).sqrt();
        let f = lit::<T>(2.0) * (T::one() - self.major / s);
        Vector3::new(f * p.x, f * p.y, lit::<T>(2.0) * p.z)
    }
    fn hessian(&self, p: &Point3<T>) -> Matrix3<T> {
        let two = lit::<T>(2.0);
        let s = (p.x * p.x + p.y * p.y).sqrt();
        let k = two * self.major / (s * s * s);
        let d = two * (T::one() - self.major / s);
        Matrix3::new(
            d + k * p.x * p.x,
            k * p.x * p.y,
            T::zero(),
            k * p.x * p.y,
            d + k * p.y * p.y,
            T::zero(),
            T::zero(),
            T::zero(),
            two,
        )
    }
}

/// Cube with rounded edges, `Σᵢ ((|xᵢ| − a)₊)⁴ − (h − a)⁴`, whose faces
/// `|xᵢ| = h` contain flat patches. Convex, but only weakly mean convex.
#[derive(Debug, Clone, Copy)]
pub struct RoundedCube<T> {
    pub core: T,
    pub half_width: T,
}

impl<T: Real> LevelSet<T> for RoundedCube<T> {
    fn value(&self, p: &Point3<T>) -> T {
        let f = |s: T| (s.abs() - self.core).max(T::zero()).powi(4);
        f(p.x) + f(p.y) + f(p.z) - (self.half_width - self.core).powi(4)
    }
    fn gradient(&self, p: &Point3<T>) -> Vector3<T> {
        let g = |s: T| {
            let u = (s.abs() - self.core).max(T::zero());
            lit::<T>(4.0) * u * u * u * s.signum()
        };
        Vector3::new(g(p.x), g(p.y), g(p.z))
    }
    fn hessian(&self, p: &Point3<T>) -> Matrix3<T> {
        let h = |s: T| {
            let u = (s.abs() - self.core).max(T::zero());
            lit::<T>(12.0) * u * u
        };
        Matrix3::from_diagonal(&Vector3::new(h(p.x), h(p.y), h(p.z)))
    }
}

/// Convexity classification flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvexityFlags {
    pub strictly_convex: bool,
    pub strictly_two_convex: bool,
    pub strictly_mean_convex: bool,
    pub weakly_mean_convex: bool,
}

impl ConvexityFlags {
    pub const ALL: Self = Self {
        strictly_convex: true,
        strictly_two_convex: true,
        strictly_mean_convex: true,
        weakly_mean_convex: true,
    };

    pub const NONE: Self = Self {
        strictly_convex: false,
        strictly_two_convex: false,
        strictly_mean_convex: false,
        weakly_mean_convex: false,
    };

    /// `convex ⇒ two-convex ⇒ mean convex ⇒ weakly mean convex`.
    pub fn is_consistent(&self) -> bool {
        (!self.strictly_convex || self.strictly_two_convex)
            && (!self.strictly_two_convex || self.strictly_mean_convex)
            && (!self.strictly_mean_convex || self.weakly_mean_convex)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagSource {
    Sampled,
    AnalyticCertificate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub min_mean_curvature: f64,
    pub min_pair_sum: f64,
    pub min_principal_curvature: f64,
    pub sample_count: usize,
    pub margin: f64,
    pub sampled_flags: ConvexityFlags,
    /// Flags used downstream: the analytic certificate when the domain has
    /// one, otherwise the sampled flags.
    pub flags: ConvexityFlags,
    pub source: FlagSource,
}

/// Boundary geometry at a point of `∂Ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryGeometry<T: Real> {
    pub normal: Vector3<T>,
    /// Orthonormal basis of the tangent plane, `e1 × e2 = normal`.
    pub tangent_basis: [Vector3<T>; 2],
    /// Second fundamental form in `tangent_basis`.
    pub second_fundamental_form: Matrix2<T>,
    /// Principal curvatures, ascending.
    pub principal_curvatures: [T; 2],
    pub mean_curvature: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeBoundaryResidual {
    /// Largest `|F| / (|∇F| · bounding radius)` over boundary vertices.
    pub max_onboundary_gap: f64,
    /// Largest `|1 − ⟨ν_M, ν_Ω⟩|` over boundary vertices.
    pub max_orthogonality_gap: f64,
}

#[derive(Debug, Clone)]
pub struct AmbientDomain<T: Real> {
    name: String,
    level: Arc<dyn LevelSet<T>>,
    bounding_radius: T,
    interior_point: Point3<T>,
    certificate: Option<ConvexityFlags>,
}

/// Any unit vector orthogonal to `n`.
pub(crate) fn orthogonal_unit<T: Real>(n: &Vector3<T>) -> Vector3<T> {
    let a = if n.x.abs() <= n.y.abs() && n.x.abs() <= n.z.abs() {
        Vector3::x()
    } else if n.y.abs() <= n.z.abs() {
        Vector3::y()
    } else {
        Vector3::z()
    };
    n.cross(&a).normalize()
}

impl<T: Real> AmbientDomain<T> {
    pub fn new(
        name: impl Into<String>,
        level: Arc<dyn LevelSet<T>>,
        bounding_radius: T,
        interior_point: Point3<T>,
        certificate: Option<ConvexityFlags>,
    ) -> Self {
        Self {
            name: name.into(),
            level,
            bounding_radius,
            interior_point,
            certificate,
        }
    }

    pub fn ball(radius: T) -> Self {
        Self::new(
            format!("ball r={radius}"),
            Arc::new(Ball { radius }),
            radius,
            Point3::origin(),
            Some(ConvexityFlags::ALL),
        )
    }

    pub fn unit_ball() -> Self {
        Self::ball(T::one())
    }

    pub fn cylinder(radius: T) -> Self {
        Self::new(
            format!("cylinder r={radius}"),
            Arc::new(Cylinder { radius }),
            radius,
            Point3::origin(),
            // one principal curvature vanishes; at n = 2 the only pair-sum is H
            Some(ConvexityFlags {
                strictly_convex: false,
                ..ConvexityFlags::ALL
            }),
        )
    }

    pub fn ellipsoid(a: T, b: T, c: T) -> Self {
        Self::new(
            format!("ellipsoid {a},{b},{c}"),
            Arc::new(Ellipsoid {
                semi_axes: Vector3::new(a, b, c),
            }),
            a.max(b).max(c),
            Point3::origin(),
            Some(ConvexityFlags::ALL),
        )
    }

    pub fn torus(major: T, minor: T) -> Self {
        // mean curvature is smallest on the inner equator
        let h_min = minor.recip() - (major - minor).recip();
        let certificate = ConvexityFlags {
            strictly_convex: false,
            strictly_two_convex: h_min > T::zero(),
            strictly_mean_convex: h_min > T::zero(),
            weakly_mean_convex: h_min >= T::zero(),
        };
        Self::new(
            format!("torus R={major} r={minor}"),
            Arc::new(Torus { major, minor }),
            major + minor,
            Point3::new(major, T::zero(), T::zero()),
            Some(certificate),
        )
    }

    pub fn rounded_cube(core: T, half_width: T) -> Self {
        Self::new(
            format!("rounded-cube a={core} h={half_width}"),
            Arc::new(RoundedCube { core, half_width }),
            half_width * lit(3.0f64.sqrt()),
            Point3::origin(),
            Some(ConvexityFlags {
                weakly_mean_convex: true,
                ..ConvexityFlags::NONE
            }),
        )
    }

    /// Parses a registry entry such as `"ball r=1"`, `"cylinder r=2"`,
    /// `"ellipsoid 2,1,1"`, `"torus R=1.5 r=1"` or `"rounded-cube a=0.5 h=1"`.
    pub fn from_spec(spec: &str) -> Result<Self, AmbientError> {
        let mut words = spec.split_whitespace();
        let kind = words.next().unwrap_or("");
        let mut named: Vec<(String, f64)> = Vec::new();
        let mut positional: Vec<f64> = Vec::new();
        for w in words.flat_map(|w| w.split(',')).filter(|w| !w.is_empty()) {
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| AmbientError::InvalidParameter(format!("'{s}' in '{spec}'")))
            };
            match w.split_once('=') {
                Some((k, v)) => named.push((k.to_string(), num(v)?)),
                None => positional.push(num(w)?),
            }
        }
        let get = |key: &str, idx: usize, default: Option<f64>| -> Result<f64, AmbientError> {
            named
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| *v)
                .or_else(|| positional.get(idx).copied())
                .or(default)
                .ok_or_else(|| AmbientError::InvalidParameter(format!("missing '{key}' in '{spec}'")))
        };
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(lit::<T>(v))
            } else {
                Err(AmbientError::InvalidParameter(format!(
                    "{what} must be positive, got {v}"
                )))
            }
        };
        match kind {
            "ball" => Ok(Self::ball(positive(get("r", 0, Some(1.0))?, "radius")?)),
            "cylinder" => Ok(Self::cylinder(positive(get("r", 0, Some(1.0))?, "radius")?)),
            "ellipsoid" => Ok(Self::ellipsoid(
                positive(get("a", 0, None)?, "a")?,
                positive(get("b", 1, None)?, "b")?,
                positive(get("c", 2, None)?, "c")?,
            )),
            "torus" => {
                let major = positive(get("R", 0, Some(1.5))?, "R")?;
                let minor = positive(get("r", 1, Some(1.0))?, "r")?;
                if minor >= major {
                    return Err(AmbientError::InvalidParameter("torus needs r < R".into()));
                }
                Ok(Self::torus(major, minor))
            }
            "rounded-cube" => {
                let core = positive(get("a", 0, Some(0.5))?, "a")?;
                let half = positive(get("h", 1, Some(1.0))?, "h")?;
                if half <= core {
                    return Err(AmbientError::InvalidParameter("rounded-cube needs h > a".into()));
                }
                Ok(Self::rounded_cube(core, half))
            }
            _ => Err(AmbientError::UnknownDomain(spec.to_string())),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn bounding_radius(&self) -> T {
        self.bounding_radius
    }

    pub fn interior_point(&self) -> Point3<T> {
        self.interior_point
    }

    pub fn certificate(&self) -> Option<ConvexityFlags> {
        self.certificate
    }

    pub fn level_value(&self, p: &Point3<T>) -> T {
        self.level.value(p)
    }

    pub fn level_gradient(&self, p: &Point3<T>) -> Vector3<T> {
        self.level.gradient(p)
    }

    pub fn level_hessian(&self, p: &Point3<T>) -> Matrix3<T> {
        self.level.hessian(p)
    }

    pub fn contains(&self, p: &Point3<T>) -> bool {
        self.level.value(p) <= T::zero()
    }

    /// First-order distance estimate `|F| / |∇F|` relative to the bounding
    /// radius.
    pub fn boundary_gap(&self, p: &Point3<T>) -> T {
        let g = self.level.gradient(p).norm();
        if g > T::zero() {
            self.level.value(p).abs() / g / self.bounding_radius
        } else {
            T::max_value().unwrap_or_else(T::one)
        }
    }

    fn gradient_checked(&self, p: &Point3<T>) -> Result<Vector3<T>, AmbientError> {
        let g = self.level.gradient(p);
        let n = g.norm();
        if !(n > T::eps() * self.bounding_radius.recip()) {
            return Err(AmbientError::DegenerateGradient {
                x: to_f64(p.x),
                y: to_f64(p.y),
                z: to_f64(p.z),
            });
        }
        Ok(g)
    }

    /// Outward unit normal `∇F/|∇F|` (no on-boundary check).
    pub fn outward_normal(&self, p: &Point3<T>) -> Result<Vector3<T>, AmbientError> {
        Ok(self.gradient_checked(p)?.normalize())
    }

    /// `II(v, w) = ⟨P v, Hess F · P w⟩ / |∇F|` with `P` the projection onto
    /// the tangent plane of the level set through `p`.
    pub fn second_fundamental_form(&self, p: &Point3<T>, v: &Vector3<T>, w: &Vector3<T>) -> Result<T, AmbientError> {
        let g = self.gradient_checked(p)?;
        let gn = g.norm();
        let n = g / gn;
        let pv = v - n * n.dot(v);
        let pw = w - n * n.dot(w);
        Ok(pv.dot(&(self.level.hessian(p) * pw)) / gn)
    }

    /// Mean curvature `tr II` of the level set through `p`.
    pub fn mean_curvature(&self, p: &Point3<T>) -> Result<T, AmbientError> {
        let g = self.gradient_checked(p)?;
        let gn = g.norm();
        let n = g / gn;
        let h = self.level.hessian(p);
        Ok((h.trace() - n.dot(&(h * n))) / gn)
    }

    /// Outward normal, second fundamental form and mean curvature at a point
    /// of `∂Ω`.
    pub fn boundary_geometry(&self, p: &Point3<T>) -> Result<BoundaryGeometry<T>, AmbientError> {
        self.boundary_geometry_with_tolerance(p, lit(ON_BOUNDARY_TOLERANCE))
    }

    pub fn boundary_geometry_with_tolerance(
        &self,
        p: &Point3<T>,
        tolerance: T,
    ) -> Result<BoundaryGeometry<T>, AmbientError> {
        let g = self.gradient_checked(p)?;
        let gap = self.boundary_gap(p);
        if !(gap <= tolerance) {
            return Err(AmbientError::NotOnBoundary {
                distance: to_f64(gap),
                tolerance: to_f64(tolerance),
            });
        }
        let gn = g.norm();
        let normal = g / gn;
        let e1 = orthogonal_unit(&normal);
        let e2 = normal.cross(&e1);
        let h = self.level.hessian(p) / gn;
        let ii = Matrix2::new(
            e1.dot(&(h * e1)),
            e1.dot(&(h * e2)),
            e2.dot(&(h * e1)),
            e2.dot(&(h * e2)),
        );
        let ii = (ii + ii.transpose()) * lit::<T>(0.5);
        let mean = ii[(0, 0)] + ii[(1, 1)];
        let half = mean * lit(0.5);
        let skew = (ii[(0, 0)] - ii[(1, 1)]) * lit(0.5);
        let disc = (skew * skew + ii[(0, 1)] * ii[(0, 1)]).sqrt();
        Ok(BoundaryGeometry {
            normal,
            tangent_basis: [e1, e2],
            second_fundamental_form: ii,
            principal_curvatures: [half - disc, half + disc],
            mean_curvature: mean,
        })
    }

    /// Newton projection along the gradient onto `{F = 0}`.
    pub fn project_to_boundary(&self, p: &Point3<T>) -> Result<Point3<T>, AmbientError> {
        let mut q = *p;
        let tol = T::eps() * lit(16.0);
        for _ in 0..60 {
            let g = self.gradient_checked(&q)?;
            let f = self.level.value(&q);
            let step = g * (f / g.norm_squared());
            q -= step;
            if step.norm() <= tol * self.bounding_radius {
                return Ok(q);
            }
        }
        Err(AmbientError::NotOnBoundary {
            distance: to_f64(self.boundary_gap(&q)),
            tolerance: to_f64(tol),
        })
    }

    /// Boundary points hit by `n_samples` seeded random rays from the
    /// interior point (doubling march, then bisection).
    pub fn sample_boundary(&self, n_samples: usize, seed: u64) -> Result<Vec<Point3<T>>, AmbientError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = self.bounding_radius;
        let p0 = self.interior_point;
        let mut out = Vec::with_capacity(n_samples);
        let max_attempts = 4 * n_samples + 16;
        for _ in 0..max_attempts {
            if out.len() == n_samples {
                break;
            }
            let d = loop {
                let v = Vector3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                );
                let n2: f64 = v.norm_squared();
                if n2 > 1e-4 && n2 <= 1.0 {
                    break v.map(lit::<T>).normalize();
                }
            };
            let mut lo = T::zero();
            let mut hi = r * lit(0.125);
            let limit = r * lit(64.0);
            while self.level.value(&(p0 + d * hi)) <= T::zero() && hi < limit {
                lo = hi;
                hi *= lit(2.0);
            }
            if self.level.value(&(p0 + d * hi)) <= T::zero() {
                continue;
            }
            for _ in 0..200 {
                let mid = (lo + hi) * lit(0.5);
                if mid <= lo || mid >= hi {
                    break;
                }
                if self.level.value(&(p0 + d * mid)) <= T::zero() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.push(p0 + d * ((lo + hi) * lit(0.5)));
        }
        if out.len() < n_samples {
            return Err(AmbientError::SamplingFailed {
                hits: out.len(),
                wanted: n_samples,
            });
        }
        Ok(out)
    }

    /// Sampled curvature minima and convexity flags. An analytic certificate,
    /// when present, overrides the sampled flags.
    pub fn classify_convexity(&self, n_samples: usize, seed: u64) -> Result<ConvexityReport, AmbientError> {
        let points = self.sample_boundary(n_samples, seed)?;
        let mut min_h = f64::INFINITY;
        let mut min_pair = f64::INFINITY;
        let mut min_k = f64::INFINITY;
        // bisection leaves points within rounding of ∂Ω
        let tol = lit::<T>(1e-8);
        for p in &points {
            let g = self.boundary_geometry_with_tolerance(p, tol)?;
            let [k1, k2] = g.principal_curvatures.map(to_f64);
            min_h = min_h.min(to_f64(g.mean_curvature));
            // at n = 2 the only pair of eigenvalues sums to H
            min_pair = min_pair.min(k1 + k2);
            min_k = min_k.min(k1);
        }
        let m = CONVEXITY_MARGIN;
        let sampled = ConvexityFlags {
            strictly_convex: min_k > m,
            strictly_two_convex: min_pair > m,
            strictly_mean_convex: min_h > m,
            weakly_mean_convex: min_h >= -m,
        };
        let (flags, source) = match self.certificate {
            Some(c) => (c, FlagSource::AnalyticCertificate),
            None => (sampled, FlagSource::Sampled),
        };
        Ok(ConvexityReport {
            min_mean_curvature: min_h,
            min_pair_sum: min_pair,
            min_principal_curvature: min_k,
            sample_count: points.len(),
            margin: m,
            sampled_flags: sampled,
            flags,
            source,
        })
    }

    /// On-boundary and orthogonality gaps with the discrete vertex conormals
    /// of the mesh.
    pub fn free_boundary_residual(&self, mesh: &TriSurfaceMesh<T>) -> FreeBoundaryResidual {
        self.free_boundary_residual_with_conormals(mesh, &mesh.vertex_conormals())
    }

    /// Same as [`Self::free_boundary_residual`] with caller-supplied
    /// conormals (for instance analytic ones).
    pub fn free_boundary_residual_with_conormals(
        &self,
        mesh: &TriSurfaceMesh<T>,
        conormals: &[Vector3<T>],
    ) -> FreeBoundaryResidual {
        let mut on = 0.0f64;
        let mut orth = 0.0f64;
        for v in (0..mesh.n_vertices()).filter(|&v| mesh.is_boundary_vertex(v)) {
            let p = mesh.vertices()[v];
            on = on.max(to_f64(self.boundary_gap(&p)));
            let gap = match self.outward_normal(&p) {
                Ok(nu) => to_f64((T::one() - conormals[v].dot(&nu)).abs()),
                Err(_) => f64::INFINITY,
            };
            orth = orth.max(gap);
        }
        FreeBoundaryResidual {
            max_onboundary_gap: on,
            max_orthogonality_gap: orth,
        }
    }
}

impl<T: Real> Reprojector<T> for AmbientDomain<T> {
    fn project_interior(&self, p: &Point3<T>) -> Result<Point3<T>, MeshError> {
        Ok(*p)
    }

    fn project_boundary(&self, p: &Point3<T>) -> Result<Point3<T>, MeshError> {
        self.project_to_boundary(p)
            .map_err(|e| MeshError::ProjectionFailed(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    type D = AmbientDomain<f64>;

    /// Central-difference gradient and Hessian of the level function.
    fn fd_derivatives(d: &D, p: &Point3<f64>) -> (Vector3<f64>, Matrix3<f64>) {
        let h = 1e-4;
        let e = [Vector3::x(), Vector3::y(), Vector3::z()];
        let f = |q: Point3<f64>| d.level_value(&q);
        let g = Vector3::from_fn(|i, _| (f(p + e[i] * h) - f(p - e[i] * h)) / (2.0 * h));
        let hess = Matrix3::from_fn(|i, j| {
            (f(p + e[i] * h + e[j] * h) - f(p + e[i] * h - e[j] * h) - f(p - e[i] * h + e[j] * h)
                + f(p - e[i] * h - e[j] * h))
                / (4.0 * h * h)
        });
        (g, hess)
    }

    fn fd_mean_curvature(d: &D, p: &Point3<f64>) -> f64 {
        let (g, h) = fd_derivatives(d, p);
        let n = g.normalize();
        (h.trace() - n.dot(&(h * n))) / g.norm()
    }

    #[test]
    fn unit_ball_pole() {
        let g = D::unit_ball().boundary_geometry(&Point3::new(0.0, 0.0, 1.0)).unwrap();
        assert!((g.normal - Vector3::z()).norm() < 1e-15);
        assert!((g.second_fundamental_form - Matrix2::identity()).norm() < 1e-15);
        assert_eq!(g.mean_curvature, 2.0);
    }

    #[test]
    fn cylinder_curvatures() {
        let d = D::cylinder(2.0);
        let g = d.boundary_geometry(&Point3::new(2.0, 0.0, 0.0)).unwrap();
        assert!((g.principal_curvatures[0]).abs() < 1e-15);
        assert!((g.principal_curvatures[1] - 0.5).abs() < 1e-15);
        assert!((g.mean_curvature - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ellipsoid_tip_matches_finite_differences() {
        let d = D::ellipsoid(2.0, 1.0, 1.0);
        let p = Point3::new(2.0, 0.0, 0.0);
        let g = d.boundary_geometry(&p).unwrap();
        // principal curvatures a/b² = 2 at the tip of the long axis
        assert!((g.mean_curvature - 4.0).abs() < 1e-12);
        assert!((g.mean_curvature - fd_mean_curvature(&d, &p)).abs() < 1e-6);
    }

    #[test]
    fn off_boundary_points_are_rejected() {
        let d = D::unit_ball();
        assert!(matches!(
            d.boundary_geometry(&Point3::new(0.0, 0.0, 0.5)),
            Err(AmbientError::NotOnBoundary { .. })
        ));
        assert!(matches!(
            d.outward_normal(&Point3::origin()),
            Err(AmbientError::DegenerateGradient { .. })
        ));
    }

    #[test]
    fn analytic_derivatives_match_finite_differences_on_samples() {
        for d in [
            D::unit_ball(),
            D::ball(1.7),
            D::cylinder(0.8),
            D::ellipsoid(2.0, 1.0, 0.5),
            D::torus(1.5, 1.0),
            D::rounded_cube(0.5, 1.0),
        ] {
            for p in d.sample_boundary(40, 7).unwrap() {
                let (g_fd, h_fd) = fd_derivatives(&d, &p);
                let scale = d.level_gradient(&p).norm().max(1.0);
                assert!((d.level_gradient(&p) - g_fd).norm() < 1e-6 * scale, "{}", d.name());
                assert!((d.level_hessian(&p) - h_fd).norm() < 1e-5 * scale, "{}", d.name());
                let h = d.boundary_geometry_with_tolerance(&p, 1e-8).unwrap().mean_curvature;
                assert!(
                    (h - fd_mean_curvature(&d, &p)).abs() < 1e-6 * h.abs().max(1.0),
                    "{}",
                    d.name()
                );
            }
        }
    }

    #[test]
    fn ball_and_cylinder_classification() {
        let ball = D::unit_ball().classify_convexity(200, 1).unwrap();
        assert!(ball.sampled_flags.strictly_convex);
        assert!((ball.min_principal_curvature - 1.0).abs() < 1e-9);
        let cyl = D::cylinder(1.0).classify_convexity(200, 1).unwrap();
        assert!(cyl.sampled_flags.strictly_mean_convex);
        assert!(!cyl.sampled_flags.strictly_convex);
        assert!(cyl.sampled_flags.strictly_two_convex);
        assert_eq!(cyl.flags, cyl.sampled_flags);
    }

    #[test]
    fn flat_faces_are_only_weakly_mean_convex() {
        let r = D::rounded_cube(0.5, 1.0).classify_convexity(400, 3).unwrap();
        assert!(r.min_mean_curvature.abs() < 1e-12);
        assert!(r.sampled_flags.weakly_mean_convex);
        assert!(!r.sampled_flags.strictly_mean_convex);
        assert_eq!(r.flags, r.sampled_flags);
    }

    #[test]
    fn torus_inner_equator_is_not_mean_convex() {
        let d = D::torus(1.5, 1.0);
        let g = d.boundary_geometry(&Point3::new(0.5, 0.0, 0.0)).unwrap();
        assert!((g.mean_curvature + 1.0).abs() < 1e-12);
        let r = d.classify_convexity(400, 5).unwrap();
        assert!(r.min_mean_curvature < 0.0);
        assert_eq!(r.sampled_flags, ConvexityFlags::NONE);
        assert_eq!(r.flags, r.sampled_flags);
    }

    #[test]
    fn registry_parses_specs() {
        assert_eq!(D::from_spec("ball r=1").unwrap().bounding_radius(), 1.0);
        assert_eq!(D::from_spec("cylinder r=2").unwrap().bounding_radius(), 2.0);
        assert_eq!(D::from_spec("ellipsoid 2,1,1").unwrap().bounding_radius(), 2.0);
        assert!(D::from_spec("ellipsoid a=2,b=1,c=3").is_ok());
        assert!(D::from_spec("torus R=1.5 r=1").is_ok());
        assert!(matches!(D::from_spec("cube"), Err(AmbientError::UnknownDomain(_))));
        assert!(matches!(
            D::from_spec("ball r=-1"),
            Err(AmbientError::InvalidParameter(_))
        ));
    }

    #[test]
    fn newton_projection_lands_on_boundary() {
        let d = D::ellipsoid(2.0, 1.0, 0.5);
        let q = d.project_to_boundary(&Point3::new(1.0, 0.7, 0.2)).unwrap();
        assert!(d.level_value(&q).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn ball_second_fundamental_form_is_the_metric(
            theta in 0.0..std::f64::consts::PI,
            phi in 0.0..std::f64::consts::TAU,
            a in -1.0..1.0f64,
            b in -1.0..1.0f64,
        ) {
            let d = D::unit_ball();
            let p = Point3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
            let g = d.boundary_geometry(&p).unwrap();
            let v = g.tangent_basis[0] * a + g.tangent_basis[1] * b;
            prop_assume!(v.norm() > 1e-3);
            let ii = d.second_fundamental_form(&p, &v, &v).unwrap();
            prop_assert!((ii - v.norm_squared()).abs() < 1e-10 * v.norm_squared());
        }

        #[test]
        fn report_flags_respect_implications(seed in 0u64..50) {
            for d in [D::unit_ball(), D::cylinder(1.0), D::torus(1.5, 1.0), D::rounded_cube(0.5, 1.0)] {
                let r = d.classify_convexity(30, seed).unwrap();
                prop_assert!(r.sampled_flags.is_consistent());
                prop_assert!(r.flags.is_consistent());
            }
        }
    }
}
