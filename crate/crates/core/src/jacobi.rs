//! Piecewise-linear discretization of the index form
//!
//! ```text
//! Q(φ, φ) = ∫_M |∇φ|² − |A|² φ² dμ − ∫_{∂M} II^{∂Ω}(N, N) φ² dσ
//! ```
//!
//! of a free boundary minimal surface in a Euclidean domain, and the Robin
//! eigenproblem whose negative eigenvalues count the Morse index.

use crate::ambient::{AmbientDomain, AmbientError};
use crate::exemplars::{ExemplarSurface, SampledSurface};
use crate::geometry::{FieldError, GeometricFields};
use crate::linalg::{
    dense_generalized, negative_inertia, shift_invert_lowest, shift_invert_lowest_deflated, CsrMatrix, EigenError,
    KrylovDiagnostics, KrylovOptions, Triplets,
};
use crate::mesh::{refine, MeshError, TriSurfaceMesh};
use crate::scalar::{lit, to_f64, Real};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Meshes with fewer vertices are always solved densely in `Auto` mode.
pub const DENSE_VERTEX_LIMIT: usize = 2000;

/// Relative size of the band around zero treated as "not negative".
pub const ZERO_THRESHOLD_FACTOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum JacobiError {
    #[error(transparent)]
    MissingField(#[from] FieldError),
    #[error("triangle {triangle} has nonpositive area")]
    NegativeTriangleArea { triangle: usize },
    #[error("field '{name}' has {found} entries, mesh has {expected} vertices")]
    FieldLength {
        name: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("eigensolver failed: {0}")]
    SolverNoConvergence(#[from] EigenError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Ambient(#[from] AmbientError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Sparse matrices of the discrete index form. `jacobi = stiffness −
/// potential`, and `Q(φ, φ) = φᵀ (jacobi − robin) φ`.
#[derive(Debug, Clone)]
pub struct QuadraticFormAssembly<T: Real> {
    pub stiffness: CsrMatrix<T>,
    pub potential: CsrMatrix<T>,
    pub jacobi: CsrMatrix<T>,
    pub robin: CsrMatrix<T>,
    pub mass: CsrMatrix<T>,
    /// `∫_{∂M} φ ψ dσ`, used for boundary integrals of nodal fields.
    pub boundary_mass: CsrMatrix<T>,
}

impl<T: Real> QuadraticFormAssembly<T> {
    pub fn dim(&self) -> usize {
        self.mass.nrows()
    }

    /// `S − R`, the matrix of the index form.
    pub fn index_form(&self) -> CsrMatrix<T> {
        self.jacobi.add_scaled(T::one(), &self.robin, -T::one())
    }

    pub fn quadratic_form(&self, phi: &DVector<T>) -> T {
        self.jacobi.quad_form(phi) - self.robin.quad_form(phi)
    }

    pub fn l2_inner(&self, phi: &DVector<T>, psi: &DVector<T>) -> T {
        self.mass.bilinear(phi, psi)
    }
}

/// Assembles the index form with P1 elements. `potential` is `|A|²` per
/// vertex; `robin` is `II^{∂Ω}(N, N)` per vertex (only boundary values are
/// used). Stiffness uses cotangent weights; mass is the exact consistent
/// mass; the potential term integrates the product of three linear
/// functions exactly; the Robin term uses Simpson's rule on boundary edges,
/// which is exact for its cubic integrand.
pub fn assemble<T: Real>(
    mesh: &TriSurfaceMesh<T>,
    potential: &[T],
    robin: &[T],
) -> Result<QuadraticFormAssembly<T>, JacobiError> {
    let n = mesh.n_vertices();
    for (name, len) in [("potential", potential.len()), ("robin", robin.len())] {
        if len != n {
            return Err(JacobiError::FieldLength {
                name,
                expected: n,
                found: len,
            });
        }
    }
    let mut k = Triplets::new(n, n);
    let mut p = Triplets::new(n, n);
    let mut m = Triplets::new(n, n);
    let half = lit::<T>(0.5);
    for t in 0..mesh.n_triangles() {
        let area = mesh.triangle_area(t);
        if !(area > T::zero()) {
            return Err(JacobiError::NegativeTriangleArea { triangle: t });
        }
        let tri = mesh.triangles()[t];
        let c = mesh.corners(t);
        for corner in 0..3 {
            // edge opposite to `corner`
            let (i, j) = (tri[(corner + 1) % 3], tri[(corner + 2) % 3]);
            let u = c[(corner + 1) % 3] - c[corner];
            let w = c[(corner + 2) % 3] - c[corner];
            let cot = u.dot(&w) / u.cross(&w).norm();
            let wgt = cot * half;
            k.push(i, j, -wgt);
            k.push(j, i, -wgt);
            k.push(i, i, wgt);
            k.push(j, j, wgt);
        }
        let f = tri.map(|v| potential[v]);
        for a in 0..3 {
            for b in 0..3 {
                let (ia, ib) = (tri[a], tri[b]);
                if a == b {
                    m.push(ia, ib, area / lit(6.0));
                    let others = f[(a + 1) % 3] + f[(a + 2) % 3];
                    p.push(ia, ib, area * (f[a] / lit(10.0) + others / lit(30.0)));
                } else {
                    m.push(ia, ib, area / lit(12.0));
                    let third = f[3 - a - b];
                    p.push(ia, ib, area * ((f[a] + f[b]) / lit(30.0) + third / lit(60.0)));
                }
            }
        }
    }
    let mut r = Triplets::new(n, n);
    let mut bm = Triplets::new(n, n);
    for (a, b) in mesh.directed_boundary_edges() {
        let len = (mesh.vertices()[b] - mesh.vertices()[a]).norm();
        let sixth = len / lit(6.0);
        let gm = (robin[a] + robin[b]) * half;
        r.push(a, a, sixth * (robin[a] + gm));
        r.push(b, b, sixth * (robin[b] + gm));
        r.push(a, b, sixth * gm);
        r.push(b, a, sixth * gm);
        bm.push(a, a, sixth * lit(2.0));
        bm.push(b, b, sixth * lit(2.0));
        bm.push(a, b, sixth);
        bm.push(b, a, sixth);
    }
    let stiffness = k.into_csr();
    let potential = p.into_csr();
    let jacobi = stiffness.add_scaled(T::one(), &potential, -T::one());
    Ok(QuadraticFormAssembly {
        stiffness,
        potential,
        jacobi,
        robin: r.into_csr(),
        mass: m.into_csr(),
        boundary_mass: bm.into_csr(),
    })
}

/// `II^{∂Ω}(N, N)` at boundary vertices, zero elsewhere.
pub fn robin_coefficients<T: Real>(
    mesh: &TriSurfaceMesh<T>,
    fields: &GeometricFields<T>,
    domain: &AmbientDomain<T>,
) -> Result<Vec<T>, JacobiError> {
    fields.check(mesh)?;
    (0..mesh.n_vertices())
        .map(|v| {
            if mesh.is_boundary_vertex(v) {
                let n = fields.normals[v];
                Ok(domain.second_fundamental_form(&mesh.vertices()[v], &n, &n)?)
            } else {
                Ok(T::zero())
            }
        })
        .collect()
}

/// Assembly with `|A|²` from the fields and the Robin coefficient from the
/// domain.
pub fn assemble_surface<T: Real>(
    mesh: &TriSurfaceMesh<T>,
    fields: &GeometricFields<T>,
    domain: &AmbientDomain<T>,
) -> Result<QuadraticFormAssembly<T>, JacobiError> {
    let robin = robin_coefficients(mesh, fields, domain)?;
    assemble(mesh, &fields.a_squared, &robin)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SolverMode {
    Dense,
    Iterative,
    /// Dense below [`DENSE_VERTEX_LIMIT`] vertices, iterative otherwise.
    #[default]
    Auto,
}

impl SolverMode {
    pub fn resolve(self, n: usize) -> SolverMode {
        match self {
            SolverMode::Auto if n < DENSE_VERTEX_LIMIT => SolverMode::Dense,
            SolverMode::Auto => SolverMode::Iterative,
            other => other,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpectralResult<T: Real> {
    /// Lowest eigenvalues, ascending.
    pub eigenvalues: Vec<T>,
    /// Mass-orthonormal eigenvectors as columns.
    pub eigenvectors: DMatrix<T>,
    /// Eigenvalues below `−zero_threshold`.
    pub negative_count: usize,
    pub zero_threshold: T,
    pub mode: SolverMode,
    /// True when every computed eigenvalue is negative, so the true count
    /// may be larger.
    pub saturated: bool,
    /// Largest relative residual `‖(S−R)φ − λMφ‖ / ‖Mφ‖`.
    pub max_residual: f64,
    /// `‖ΦᵀMΦ − I‖_max`.
    pub gram_defect: f64,
    /// Negative inertia of `S − R + zero_threshold·M`, an independent count
    /// of eigenvalues below `−zero_threshold` (absent if the factorization
    /// met a zero pivot).
    pub inertia_count: Option<usize>,
    pub krylov: Option<KrylovDiagnostics>,
}

/// First `m` eigenpairs of `(S − R) φ = λ M φ`.
pub fn solve_spectrum<T: Real>(
    assembly: &QuadraticFormAssembly<T>,
    m: usize,
    mode: SolverMode,
) -> Result<SpectralResult<T>, JacobiError> {
    if m == 0 {
        return Err(JacobiError::InvalidArgument("m must be at least 1".into()));
    }
    let n = assembly.dim();
    let a = assembly.index_form();
    let mode = mode.resolve(n);
    let (pairs, krylov) = match mode {
        SolverMode::Dense => (dense_generalized(&a.to_dense(), &assembly.mass.to_dense(), m)?, None),
        _ => {
            let (p, d) = shift_invert_lowest(&a, &assembly.mass, m, &KrylovOptions::default())?;
            (p, Some(d))
        }
    };
    let scale = pairs.values.iter().fold(T::zero(), |s, v| s.max(v.abs()));
    let thr = scale * lit(ZERO_THRESHOLD_FACTOR);
    let negative_count = pairs.values.iter().filter(|&&v| v < -thr).count();
    let mut max_residual = 0.0f64;
    for (k, &lambda) in pairs.values.iter().enumerate() {
        let x = pairs.vectors.column(k).into_owned();
        let mx = assembly.mass.mul_vec(&x);
        let r = a.mul_vec(&x) - &mx * lambda;
        max_residual = max_residual.max(to_f64(r.norm() / mx.norm()));
    }
    let gram = pairs.vectors.transpose() * assembly.mass.mul_dense(&pairs.vectors);
    let gram_defect = to_f64(
        (gram - DMatrix::identity(pairs.values.len(), pairs.values.len()))
            .abs()
            .max(),
    );
    let inertia_count = negative_inertia(&a.add_scaled(T::one(), &assembly.mass, thr)).ok();
    Ok(SpectralResult {
        saturated: negative_count == pairs.values.len() && pairs.values.len() < n,
        eigenvalues: pairs.values,
        eigenvectors: pairs.vectors,
        negative_count,
        zero_threshold: thr,
        mode,
        max_residual,
        gram_defect,
        inertia_count,
        krylov,
    })
}

/// Like [`solve_spectrum`], doubling `m` until the negative count is no
/// longer saturated.
pub fn solve_spectrum_unsaturated<T: Real>(
    assembly: &QuadraticFormAssembly<T>,
    m: usize,
    mode: SolverMode,
) -> Result<SpectralResult<T>, JacobiError> {
    let mut m = m.max(1);
    loop {
        let res = solve_spectrum(assembly, m, mode)?;
        if !res.saturated || m >= assembly.dim() {
            return Ok(res);
        }
        m = (2 * m).min(assembly.dim());
    }
}

/// Minimum of the Rayleigh quotient `φᵀ(S−R)φ / φᵀMφ` over the
/// `M`-orthogonal complement of the first `k` computed eigenvectors.
pub fn rayleigh_min_orthogonal<T: Real>(
    assembly: &QuadraticFormAssembly<T>,
    spectrum: &SpectralResult<T>,
    k: usize,
) -> Result<T, JacobiError> {
    if k >= spectrum.eigenvalues.len() {
        return Err(JacobiError::InvalidArgument(format!(
            "k = {k} but only {} eigenpairs were computed",
            spectrum.eigenvalues.len()
        )));
    }
    rayleigh_min_orthogonal_to(assembly, &spectrum.eigenvectors.columns(0, k).into_owned())
}

/// Minimum of the Rayleigh quotient over the `M`-orthogonal complement of
/// the columns of `block`.
pub fn rayleigh_min_orthogonal_to<T: Real>(
    assembly: &QuadraticFormAssembly<T>,
    block: &DMatrix<T>,
) -> Result<T, JacobiError> {
    let (pairs, _) = shift_invert_lowest_deflated(
        &assembly.index_form(),
        &assembly.mass,
        1,
        &KrylovOptions::default(),
        block,
    )?;
    pairs
        .values
        .first()
        .copied()
        .ok_or_else(|| JacobiError::InvalidArgument("complement is empty".into()))
}

/// Where refined meshes and their fields come from.
#[derive(Debug, Clone)]
pub enum SurfaceSource<'a, T: Real> {
    /// Analytic re-evaluation and projection onto the exact surface.
    Exemplar(&'a ExemplarSurface<T>),
    /// A user mesh: boundary midpoints are projected onto `∂Ω`, `|A|²` is
    /// interpolated from the supplied values (or estimated when absent), the
    /// remaining fields are estimated.
    Mesh {
        domain: &'a AmbientDomain<T>,
        a_squared: Option<Vec<T>>,
    },
}

impl<T: Real> SurfaceSource<'_, T> {
    pub fn domain(&self) -> &AmbientDomain<T> {
        match self {
            SurfaceSource::Exemplar(e) => e.domain(),
            SurfaceSource::Mesh { domain, .. } => domain,
        }
    }
}

/// The base mesh and its successive midpoint refinements with fields.
pub fn refinement_hierarchy<T: Real>(
    base: &TriSurfaceMesh<T>,
    source: &SurfaceSource<'_, T>,
    refinements: usize,
) -> Result<Vec<SampledSurface<T>>, JacobiError> {
    let mut out = Vec::with_capacity(refinements + 1);
    let mut mesh = base.clone();
    let mut a2 = match source {
        SurfaceSource::Mesh { a_squared: Some(a), .. } => {
            if a.len() != base.n_vertices() {
                return Err(JacobiError::FieldLength {
                    name: "a_squared",
                    expected: base.n_vertices(),
                    found: a.len(),
                });
            }
            Some(a.clone())
        }
        _ => None,
    };
    for level in 0..=refinements {
        if level > 0 {
            let next = match source {
                SurfaceSource::Exemplar(e) => refine(&mesh, Some(*e))?,
                SurfaceSource::Mesh { domain, .. } => refine(&mesh, Some(*domain))?,
            };
            if let Some(a) = &mut a2 {
                // midpoint of edge e is vertex n + e
                let extra: Vec<T> = mesh
                    .edges()
                    .iter()
                    .map(|e| (a[e.v[0]] + a[e.v[1]]) * lit(0.5))
                    .collect();
                a.extend(extra);
            }
            mesh = next;
        }
        let fields = match source {
            SurfaceSource::Exemplar(e) => e.fields(&mesh),
            SurfaceSource::Mesh { .. } => match &a2 {
                Some(a) => GeometricFields::estimate_with_a_squared(&mesh, a.clone()),
                None => GeometricFields::estimate(&mesh),
            },
        };
        out.push(SampledSurface {
            mesh: mesh.clone(),
            fields,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelIndex {
    pub refinement: usize,
    pub vertices: usize,
    pub negative_count: usize,
    pub inertia_count: Option<usize>,
    pub zero_threshold: f64,
    pub lowest_eigenvalues: Vec<f64>,
    pub mode: SolverMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub levels: Vec<LevelIndex>,
    /// Whether the two finest levels agree (trivially true for one level).
    pub stable: bool,
    /// Whether eigen-solver and inertia counts agree at every level where
    /// the inertia was available.
    pub inertia_consistent: bool,
    /// Eigenvalues of the two finest levels that stay negative after
    /// Richardson extrapolation in `h²`, counting only those whose
    /// extrapolated value lies below the extrapolation error. Discrete
    /// approximations of zero modes (Jacobi fields of ambient isometries)
    /// converge from below and are negative at every level; this count
    /// separates them from eigenvalues that are negative in the limit.
    /// Absent with a single level.
    pub resolved_count: Option<usize>,
}

/// Number of eigenvalues negative in the `h²` extrapolation of a coarse and
/// a fine level related by one midpoint refinement.
pub fn resolved_negative_count(coarse: &[f64], fine: &[f64], zero_threshold: f64) -> usize {
    coarse
        .iter()
        .zip(fine)
        .filter(|(&c, &f)| {
            let extrapolated = (4.0 * f - c) / 3.0;
            let error = (f - extrapolated).abs();
            extrapolated < -error.max(zero_threshold)
        })
        .count()
}

/// Negative counts at every refinement level; the index is the count at the
/// finest level.
pub fn morse_index<T: Real>(
    base: &TriSurfaceMesh<T>,
    source: &SurfaceSource<'_, T>,
    refinements: usize,
    m: usize,
    mode: SolverMode,
) -> Result<(usize, StabilityReport), JacobiError> {
    let levels = refinement_hierarchy(base, source, refinements)?;
    let mut out = Vec::with_capacity(levels.len());
    for (r, s) in levels.iter().enumerate() {
        let asm = assemble_surface(&s.mesh, &s.fields, source.domain())?;
        let spec = solve_spectrum_unsaturated(&asm, m, mode)?;
        out.push(LevelIndex::from_spectrum(r, s.mesh.n_vertices(), &spec));
    }
    let report = StabilityReport::from_levels(out);
    Ok((report.index(), report))
}

impl LevelIndex {
    pub fn from_spectrum<T: Real>(refinement: usize, vertices: usize, spec: &SpectralResult<T>) -> Self {
        Self {
            refinement,
            vertices,
            negative_count: spec.negative_count,
            inertia_count: spec.inertia_count,
            zero_threshold: to_f64(spec.zero_threshold),
            lowest_eigenvalues: spec.eigenvalues.iter().map(|&v| to_f64(v)).collect(),
            mode: spec.mode,
        }
    }
}

impl StabilityReport {
    /// Stability and resolved count of a hierarchy, coarsest level first.
    pub fn from_levels(levels: Vec<LevelIndex>) -> Self {
        let stable = match levels.len() {
            0 | 1 => true,
            k => levels[k - 1].negative_count == levels[k - 2].negative_count,
        };
        let inertia_consistent = levels
            .iter()
            .all(|l| l.inertia_count.map_or(true, |c| c == l.negative_count));
        let resolved_count = match levels.len() {
            0 | 1 => None,
            k => Some(resolved_negative_count(
                &levels[k - 2].lowest_eigenvalues,
                &levels[k - 1].lowest_eigenvalues,
                levels[k - 1].zero_threshold,
            )),
        };
        Self {
            levels,
            stable,
            inertia_consistent,
            resolved_count,
        }
    }

    /// Negative count at the finest level.
    pub fn index(&self) -> usize {
        self.levels.last().map_or(0, |l| l.negative_count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::TriSurfaceMesh;
    use nalgebra::Point3;

    fn disk(res: usize) -> (SampledSurface<f64>, ExemplarSurface<f64>) {
        let e = ExemplarSurface::equatorial_disk();
        (e.sample_mesh(res).unwrap(), e)
    }

    #[test]
    fn constant_function_on_flat_disk_gives_minus_perimeter() {
        let (s, _) = disk(32);
        let n = s.mesh.n_vertices();
        let asm = assemble(&s.mesh, &vec![0.0; n], &vec![1.0; n]).unwrap();
        let one = DVector::from_element(n, 1.0);
        let perimeter = s.mesh.loop_length(0);
        assert!((asm.quadratic_form(&one) + perimeter).abs() < 1e-12);
        assert!((perimeter - std::f64::consts::TAU).abs() < 0.02);
    }

    #[test]
    fn equilateral_triangle_stiffness() {
        let h = 3f64.sqrt() / 2.0;
        let m = TriSurfaceMesh::build(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.5, h, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let asm = assemble(&m, &[0.0; 3], &[0.0; 3]).unwrap();
        let s = asm.stiffness.to_dense();
        let cot60 = 1.0 / 3f64.sqrt();
        for i in 0..3 {
            assert!(s.row(i).sum().abs() < 1e-15);
            assert!((s[(i, i)] - cot60).abs() < 1e-15);
            for j in 0..3 {
                if i != j {
                    assert!((s[(i, j)] + cot60 / 2.0).abs() < 1e-15);
                }
            }
        }
        assert!(asm.robin.nnz() == 0 || asm.robin.max_abs() == 0.0);
    }

    #[test]
    fn matrices_are_symmetric_and_robin_lives_on_the_boundary() {
        let e = ExemplarSurface::<f64>::critical_catenoid();
        let s = e.sample_mesh(16).unwrap();
        let asm = assemble_surface(&s.mesh, &s.fields, e.domain()).unwrap();
        for mat in [&asm.stiffness, &asm.potential, &asm.robin, &asm.mass] {
            assert!(mat.symmetry_defect() <= 1e-14 * mat.max_abs());
        }
        for (i, j, v) in asm.robin.iter() {
            if v != 0.0 {
                assert!(s.mesh.is_boundary_vertex(i) && s.mesh.is_boundary_vertex(j));
            }
        }
    }

    #[test]
    fn neumann_laplacian_has_constant_kernel() {
        let (s, _) = disk(12);
        let n = s.mesh.n_vertices();
        let asm = assemble(&s.mesh, &vec![0.0; n], &vec![0.0; n]).unwrap();
        let spec = solve_spectrum(&asm, 3, SolverMode::Dense).unwrap();
        assert!(spec.eigenvalues[0].abs() < 1e-10);
        assert_eq!(spec.negative_count, 0);
        let v = spec.eigenvectors.column(0);
        assert!(v.max() - v.min() < 1e-8);
    }

    #[test]
    fn disk_has_index_one() {
        let (s, e) = disk(16);
        let asm = assemble_surface(&s.mesh, &s.fields, e.domain()).unwrap();
        let spec = solve_spectrum(&asm, 6, SolverMode::Dense).unwrap();
        assert_eq!(spec.negative_count, 1, "{:?}", spec.eigenvalues);
        assert_eq!(spec.inertia_count, Some(1));
        assert!(spec.max_residual < 1e-8);
        assert!(spec.gram_defect < 1e-8);
    }

    #[test]
    fn rayleigh_minimum_on_complement() {
        let (s, e) = disk(12);
        let asm = assemble_surface(&s.mesh, &s.fields, e.domain()).unwrap();
        let spec = solve_spectrum(&asm, 5, SolverMode::Dense).unwrap();
        for k in 0..3 {
            let v = rayleigh_min_orthogonal(&asm, &spec, k).unwrap();
            let l = spec.eigenvalues[k];
            assert!((v - l).abs() < 1e-8 * l.abs().max(1.0), "k={k}: {v} vs {l}");
        }
    }

    #[test]
    fn user_mesh_hierarchy_interpolates_a_squared() {
        let e = ExemplarSurface::<f64>::critical_catenoid();
        let s = e.sample_mesh(8).unwrap();
        let src = SurfaceSource::Mesh {
            domain: e.domain(),
            a_squared: Some(s.fields.a_squared.clone()),
        };
        let h = refinement_hierarchy(&s.mesh, &src, 1).unwrap();
        assert_eq!(h[1].fields.a_squared.len(), h[1].mesh.n_vertices());
        for l in h[1].mesh.boundary_loops() {
            for &v in l {
                assert!((h[1].mesh.vertices()[v].coords.norm() - 1.0).abs() < 1e-12);
            }
        }
    }
}
