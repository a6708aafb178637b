//! Discrete harmonic 1-forms on triangulated surfaces with boundary.
//!
//! 1-forms are Whitney edge elements: one value per mesh edge, the line
//! integral along the edge oriented from its lower to its higher vertex
//! index. The Hodge pencil is
//!
//! ```text
//! K = d₁ᵀ M₂ d₁ + M₁ d₀ M₀⁻¹ d₀ᵀ M₁,    K x = μ M₁ x
//! ```
//!
//! with kernel `ker d ∩ ker δ`. The tangential flavor uses every vertex and
//! edge (absolute complex, natural boundary condition). The normal flavor
//! drops boundary vertices and boundary edges (relative complex), which
//! forces the tangential trace of the form to vanish on `∂M`.

use crate::geometry::{FieldError, GeometricFields};
use crate::jacobi::SolverMode;
use crate::linalg::{dense_generalized, shift_invert_lowest, CsrMatrix, EigenError, KrylovOptions, Triplets};
use crate::mesh::{homology_profile, HomologyProfile, MeshError, TriSurfaceMesh};
use crate::scalar::{lit, to_f64, Real};
use nalgebra::{DMatrix, DVector, Point3, Vector3};
use serde::{Deserialize, Serialize};
use std::str::FromStr;

/// Eigenvalues below this fraction of the largest computed eigenvalue are
/// kernel candidates. Raised to `10³·ε` for scalars with larger machine
/// epsilon.
pub const KERNEL_CUTOFF: f64 = 1e-6;

/// Extra eigenpairs computed beyond the expected kernel dimension.
const SPECTRAL_MARGIN: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryFlavor {
    /// `i_ν ω = 0` on `∂M`: the space 𝓗¹_N, isomorphic to `H¹(M)`.
    TangentialAtBoundary,
    /// `ν ∧ ω = 0` on `∂M`: the space 𝓗¹_T, isomorphic to `H₁(M, ∂M)`.
    NormalAtBoundary,
}

impl BoundaryFlavor {
    pub fn name(self) -> &'static str {
        match self {
            BoundaryFlavor::TangentialAtBoundary => "tangential",
            BoundaryFlavor::NormalAtBoundary => "normal",
        }
    }

    /// Dimension the harmonic space must have.
    pub fn homology_dimension(self, h: &HomologyProfile) -> usize {
        match self {
            BoundaryFlavor::TangentialAtBoundary => h.h1,
            BoundaryFlavor::NormalAtBoundary => h.h1_relative,
        }
    }
}

impl FromStr for BoundaryFlavor {
    type Err = HodgeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tangential" | "tangential_at_boundary" | "absolute" => Ok(BoundaryFlavor::TangentialAtBoundary),
            "normal" | "normal_at_boundary" | "relative" => Ok(BoundaryFlavor::NormalAtBoundary),
            other => Err(HodgeError::UnknownFlavor(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HodgeError {
    #[error("{flavor} harmonic space: {spectral} kernel eigenvalues but homology dimension {homology} (lowest eigenvalues {eigenvalues:?})")]
    DimensionMismatch {
        flavor: &'static str,
        spectral: usize,
        homology: usize,
        eigenvalues: Vec<f64>,
    },
    #[error("unknown boundary flavor '{0}' (expected 'normal' or 'tangential')")]
    UnknownFlavor(String),
    #[error("cochain has {found} values but the mesh has {expected} edges")]
    Length { expected: usize, found: usize },
    #[error("eigensolver failed: {0}")]
    Eigen(#[from] EigenError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("missing geometry: {0}")]
    MissingGeometry(#[from] FieldError),
}

/// Gradients of the barycentric coordinates of a triangle.
pub(crate) fn barycentric_gradients<T: Real>(c: &[Point3<T>; 3]) -> [Vector3<T>; 3] {
    let n = (c[1] - c[0]).cross(&(c[2] - c[0]));
    let n2 = n.norm_squared();
    [0, 1, 2].map(|i| n.cross(&(c[(i + 2) % 3] - c[(i + 1) % 3])) / n2)
}

/// A discrete 1-form.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeCochain<T: Real> {
    /// Line integral along each mesh edge, lower to higher vertex index.
    pub values: Vec<T>,
    pub flavor: BoundaryFlavor,
}

/// Serializable form of an [`EdgeCochain`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeCochainRecord {
    pub flavor: BoundaryFlavor,
    pub edges: Vec<[usize; 2]>,
    pub values: Vec<f64>,
}

impl<T: Real> EdgeCochain<T> {
    pub fn new(mesh: &TriSurfaceMesh<T>, values: Vec<T>, flavor: BoundaryFlavor) -> Result<Self, HodgeError> {
        if values.len() != mesh.n_edges() {
            return Err(HodgeError::Length {
                expected: mesh.n_edges(),
                found: values.len(),
            });
        }
        Ok(Self { values, flavor })
    }

    /// Samples a vector field `f` as a cochain by the midpoint rule on each
    /// edge (exact for constant fields). The normal flavor zeroes boundary
    /// edges.
    pub fn from_vector_field(
        mesh: &TriSurfaceMesh<T>,
        flavor: BoundaryFlavor,
        f: impl Fn(&Point3<T>) -> Vector3<T>,
    ) -> Self {
        let half = lit::<T>(0.5);
        let values = mesh
            .edges()
            .iter()
            .map(|e| {
                if flavor == BoundaryFlavor::NormalAtBoundary && e.is_boundary() {
                    return T::zero();
                }
                let (a, b) = (mesh.vertices()[e.v[0]], mesh.vertices()[e.v[1]]);
                let mid = Point3::from((a.coords + b.coords) * half);
                f(&mid).dot(&(b - a))
            })
            .collect();
        Self { values, flavor }
    }

    /// Whitney interpolant in triangle `t` at barycentric coordinates `bary`.
    pub fn value_in_triangle(&self, mesh: &TriSurfaceMesh<T>, t: usize, bary: [T; 3]) -> Vector3<T> {
        let g = barycentric_gradients(&mesh.corners(t));
        let te = mesh.triangle_edges(t);
        let mut out = Vector3::zeros();
        for k in 0..3 {
            let k1 = (k + 1) % 3;
            let x = self.values[te[k]] * lit(mesh.edge_sign(t, k) as f64);
            out += (g[k1] * bary[k] - g[k] * bary[k1]) * x;
        }
        out
    }

    /// `ω♯` at triangle barycenters.
    pub fn at_barycenters(&self, mesh: &TriSurfaceMesh<T>) -> Vec<Vector3<T>> {
        let third = lit::<T>(1.0 / 3.0);
        (0..mesh.n_triangles())
            .map(|t| self.value_in_triangle(mesh, t, [third; 3]))
            .collect()
    }

    /// `ω♯` at vertices: area-weighted mean over incident triangles of the
    /// triangle's linear fit (see [`linear_fits`]) evaluated at the vertex,
    /// projected onto the plane orthogonal to `normals[v]`.
    pub fn at_vertices(&self, mesh: &TriSurfaceMesh<T>, normals: &[Vector3<T>]) -> Vec<Vector3<T>> {
        let fits = linear_fits(mesh, self);
        let mut sum = vec![Vector3::zeros(); mesh.n_vertices()];
        let mut weight = vec![T::zero(); mesh.n_vertices()];
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let a = mesh.triangle_area(t);
            for &v in tri {
                sum[v] += fits[t].eval(&mesh.vertices()[v]) * a;
                weight[v] += a;
            }
        }
        sum.into_iter()
            .zip(weight)
            .zip(normals)
            .map(|((s, w), n)| {
                let w = s / w;
                w - n * n.dot(&w)
            })
            .collect()
    }

    /// Largest absolute value on boundary edges.
    pub fn max_boundary_value(&self, mesh: &TriSurfaceMesh<T>) -> T {
        mesh.edges()
            .iter()
            .zip(&self.values)
            .filter(|(e, _)| e.is_boundary())
            .fold(T::zero(), |m, (_, v)| m.max(v.abs()))
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            values: self.values.iter().map(|&v| v * s).collect(),
            flavor: self.flavor,
        }
    }

    pub fn record(&self, mesh: &TriSurfaceMesh<T>) -> EdgeCochainRecord {
        EdgeCochainRecord {
            flavor: self.flavor,
            edges: mesh.edges().iter().map(|e| e.v).collect(),
            values: self.values.iter().map(|&v| to_f64(v)).collect(),
        }
    }
}

/// The Hodge pencil of one flavor, restricted to the free degrees of
/// freedom.
#[derive(Debug, Clone)]
pub struct HodgePencil<T: Real> {
    pub flavor: BoundaryFlavor,
    /// Mesh edges carrying a degree of freedom, in pencil order.
    pub edges: Vec<usize>,
    /// Mesh vertices carrying a 0-form degree of freedom.
    pub vertices: Vec<usize>,
    /// Coboundary on 0-forms, `edges × vertices`.
    pub d0: CsrMatrix<T>,
    /// Coboundary on 1-forms, `triangles × edges`.
    pub d1: CsrMatrix<T>,
    /// Lumped vertex areas.
    pub mass0: Vec<T>,
    /// Whitney mass matrix.
    pub mass1: CsrMatrix<T>,
    /// Inverse triangle areas.
    pub mass2: Vec<T>,
    /// `K = d₁ᵀ M₂ d₁ + M₁ d₀ M₀⁻¹ d₀ᵀ M₁`.
    pub laplacian: CsrMatrix<T>,
}

impl<T: Real> HodgePencil<T> {
    pub fn dim(&self) -> usize {
        self.edges.len()
    }

    /// `‖dω‖²` for a vector in pencil order.
    pub fn curl_energy(&self, x: &DVector<T>) -> T {
        let c = self.d1.mul_vec(x);
        c.iter().zip(&self.mass2).fold(T::zero(), |s, (v, w)| s + *v * *v * *w)
    }

    /// `‖δω‖²` for a vector in pencil order.
    pub fn divergence_energy(&self, x: &DVector<T>) -> T {
        let div = self.d0.transpose().mul_vec(&self.mass1.mul_vec(x));
        div.iter()
            .zip(&self.mass0)
            .fold(T::zero(), |s, (v, w)| s + *v * *v / *w)
    }

    /// Expands a pencil-order vector to a full edge cochain.
    pub fn expand(&self, x: &DVector<T>, n_edges: usize) -> Vec<T> {
        let mut out = vec![T::zero(); n_edges];
        for (i, &e) in self.edges.iter().enumerate() {
            out[e] = x[i];
        }
        out
    }
}

/// Whitney mass matrix over all edges.
fn whitney_mass<T: Real>(mesh: &TriSurfaceMesh<T>) -> CsrMatrix<T> {
    let ne = mesh.n_edges();
    let mut m = Triplets::new(ne, ne);
    for t in 0..mesh.n_triangles() {
        let area = mesh.triangle_area(t);
        let g = barycentric_gradients(&mesh.corners(t));
        let te = mesh.triangle_edges(t);
        // ∫ λ_i λ_j = A (1 + δ_ij) / 12
        let int = |i: usize, j: usize| area * lit(if i == j { 1.0 / 6.0 } else { 1.0 / 12.0 });
        let gg = |i: usize, j: usize| g[i].dot(&g[j]);
        for k in 0..3 {
            let (a, b) = (k, (k + 1) % 3);
            let sk = lit::<T>(mesh.edge_sign(t, k) as f64);
            for l in 0..3 {
                let (c, d) = (l, (l + 1) % 3);
                let sl = lit::<T>(mesh.edge_sign(t, l) as f64);
                let v = int(a, c) * gg(b, d) - int(a, d) * gg(b, c) - int(b, c) * gg(a, d) + int(b, d) * gg(a, c);
                m.push(te[k], te[l], v * sk * sl);
            }
        }
    }
    m.into_csr()
}

/// Assembles the Hodge pencil of the given flavor.
pub fn hodge_laplacian_1<T: Real>(mesh: &TriSurfaceMesh<T>, flavor: BoundaryFlavor) -> HodgePencil<T> {
    let (nv, ne, nt) = (mesh.n_vertices(), mesh.n_edges(), mesh.n_triangles());
    let relative = flavor == BoundaryFlavor::NormalAtBoundary;
    let edges: Vec<usize> = (0..ne)
        .filter(|&e| !(relative && mesh.edges()[e].is_boundary()))
        .collect();
    let vertices: Vec<usize> = (0..nv).filter(|&v| !(relative && mesh.is_boundary_vertex(v))).collect();

    let mut d0 = Triplets::new(ne, nv);
    for (i, e) in mesh.edges().iter().enumerate() {
        d0.push(i, e.v[0], -T::one());
        d0.push(i, e.v[1], T::one());
    }
    let mut d1 = Triplets::new(nt, ne);
    for t in 0..nt {
        let te = mesh.triangle_edges(t);
        for k in 0..3 {
            d1.push(t, te[k], lit(mesh.edge_sign(t, k) as f64));
        }
    }
    let all_t: Vec<usize> = (0..nt).collect();
    let d0 = d0.into_csr().submatrix(&edges, &vertices);
    let d1 = d1.into_csr().submatrix(&all_t, &edges);
    let mass1 = whitney_mass(mesh).submatrix(&edges, &edges);

    let mut area0 = vec![T::zero(); nv];
    let mut mass2 = Vec::with_capacity(nt);
    let third = lit::<T>(1.0 / 3.0);
    for t in 0..nt {
        let a = mesh.triangle_area(t);
        for &v in &mesh.triangles()[t] {
            area0[v] += a * third;
        }
        mass2.push(T::one() / a);
    }
    let mass0: Vec<T> = vertices.iter().map(|&v| area0[v]).collect();

    let curl = d1.transpose().matmul(&CsrMatrix::from_diagonal(&mass2).matmul(&d1));
    let m1d0 = mass1.matmul(&d0);
    let inv0: Vec<T> = mass0.iter().map(|&a| T::one() / a).collect();
    let div = m1d0.matmul(&CsrMatrix::from_diagonal(&inv0).matmul(&m1d0.transpose()));
    let laplacian = curl.add_scaled(T::one(), &div, T::one());
    HodgePencil {
        flavor,
        edges,
        vertices,
        d0,
        d1,
        mass0,
        mass1,
        mass2,
        laplacian,
    }
}

/// Orthonormal basis of the discrete harmonic space of one flavor.
#[derive(Debug, Clone)]
pub struct HarmonicBasis<T: Real> {
    pub flavor: BoundaryFlavor,
    pub forms: Vec<EdgeCochain<T>>,
    /// `L²` Gram matrix of `forms`.
    pub gram: DMatrix<f64>,
    /// Smallest eigenvalue of the pencil outside the kernel.
    pub spectral_gap: f64,
    /// Separator between kernel and non-kernel eigenvalues: the geometric
    /// mean of the largest kernel candidate and the smallest non-kernel
    /// eigenvalue.
    pub threshold: f64,
    /// Lowest computed pencil eigenvalues.
    pub eigenvalues: Vec<f64>,
    /// `(‖dω‖, ‖δω‖)` per basis element.
    pub closure_defects: Vec<(f64, f64)>,
    pub mode: SolverMode,
}

impl<T: Real> HarmonicBasis<T> {
    pub fn dim(&self) -> usize {
        self.forms.len()
    }

    /// `‖Gram − I‖_max`.
    pub fn gram_defect(&self) -> f64 {
        let k = self.gram.nrows();
        (self.gram.clone() - DMatrix::identity(k, k)).abs().max()
    }
}

/// Serializable summary of a [`HarmonicBasis`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicBasisRecord {
    pub flavor: BoundaryFlavor,
    pub dimension: usize,
    pub spectral_gap: f64,
    pub threshold: f64,
    pub eigenvalues: Vec<f64>,
    pub gram_defect: f64,
    pub closure_defects: Vec<(f64, f64)>,
    pub mode: SolverMode,
    pub forms: Vec<EdgeCochainRecord>,
}

impl<T: Real> HarmonicBasis<T> {
    pub fn record(&self, mesh: &TriSurfaceMesh<T>) -> HarmonicBasisRecord {
        HarmonicBasisRecord {
            flavor: self.flavor,
            dimension: self.dim(),
            spectral_gap: self.spectral_gap,
            threshold: self.threshold,
            eigenvalues: self.eigenvalues.clone(),
            gram_defect: self.gram_defect(),
            closure_defects: self.closure_defects.clone(),
            mode: self.mode,
            forms: self.forms.iter().map(|f| f.record(mesh)).collect(),
        }
    }
}

/// Harmonic basis checked against the homology of the mesh.
pub fn harmonic_basis<T: Real>(
    mesh: &TriSurfaceMesh<T>,
    flavor: BoundaryFlavor,
    mode: SolverMode,
) -> Result<HarmonicBasis<T>, HodgeError> {
    let profile = homology_profile(mesh)?;
    harmonic_basis_with_dimension(mesh, flavor, flavor.homology_dimension(&profile), mode)
}

/// Harmonic basis whose dimension must equal `expected`.
pub fn harmonic_basis_with_dimension<T: Real>(
    mesh: &TriSurfaceMesh<T>,
    flavor: BoundaryFlavor,
    expected: usize,
    mode: SolverMode,
) -> Result<HarmonicBasis<T>, HodgeError> {
    let pencil = hodge_laplacian_1(mesh, flavor);
    let n = pencil.dim();
    let m = (expected + SPECTRAL_MARGIN).min(n);
    let mode = mode.resolve(n);
    let pairs = match mode {
        SolverMode::Dense => dense_generalized(&pencil.laplacian.to_dense(), &pencil.mass1.to_dense(), m)?,
        _ => {
            // the pencil is semidefinite, so any negative shift is below it
            let opts = KrylovOptions {
                shift: Some(-1e-2 / to_f64(mesh.total_area())),
                ..KrylovOptions::default()
            };
            shift_invert_lowest(&pencil.laplacian, &pencil.mass1, m, &opts)?.0
        }
    };
    let eigenvalues: Vec<f64> = pairs.values.iter().map(|&v| to_f64(v)).collect();
    let scale = eigenvalues.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let kernel = eigenvalues
        .iter()
        .take_while(|&&v| v <= KERNEL_CUTOFF.max(1e3 * to_f64(T::eps())) * scale)
        .count();
    let largest_candidate = if kernel > 0 { eigenvalues[kernel - 1].abs() } else { 0.0 };
    let spectral_gap = eigenvalues.get(kernel).copied().unwrap_or(f64::INFINITY);
    let threshold = (largest_candidate.max(f64::EPSILON * scale) * spectral_gap).sqrt();
    if kernel != expected {
        return Err(HodgeError::DimensionMismatch {
            flavor: flavor.name(),
            spectral: kernel,
            homology: expected,
            eigenvalues,
        });
    }
    let x = pairs.vectors.columns(0, kernel).into_owned();
    let gram_t = x.transpose() * pencil.mass1.mul_dense(&x);
    let gram = gram_t.map(to_f64);
    let mut forms = Vec::with_capacity(kernel);
    let mut closure_defects = Vec::with_capacity(kernel);
    for k in 0..kernel {
        let col = x.column(k).into_owned();
        closure_defects.push((
            to_f64(pencil.curl_energy(&col)).max(0.0).sqrt(),
            to_f64(pencil.divergence_energy(&col)).max(0.0).sqrt(),
        ));
        forms.push(EdgeCochain {
            values: pencil.expand(&col, mesh.n_edges()),
            flavor,
        });
    }
    Ok(HarmonicBasis {
        flavor,
        forms,
        gram,
        spectral_gap,
        threshold,
        eigenvalues,
        closure_defects,
        mode,
    })
}

/// Two-point Gauss rule along boundary edges. For each directed boundary
/// edge `(a, b)` and node `s ∈ (0, 1)`, `f(a, b, s, ω♯, tangent)` is
/// evaluated with the trace of `ω♯` on the edge: the tangential component
/// is the exact Whitney trace (edge value over edge length), the conormal
/// component comes from the linear fit of the incident triangle.
pub fn boundary_edge_integral<T: Real>(
    mesh: &TriSurfaceMesh<T>,
    form: &EdgeCochain<T>,
    fits: &[LinearFit<T>],
    mut f: impl FnMut(usize, usize, T, &Vector3<T>, &Vector3<T>) -> T,
) -> T {
    let h = lit::<T>(0.5 / 3f64.sqrt());
    let half = lit::<T>(0.5);
    let mut total = T::zero();
    for (a, b) in mesh.directed_boundary_edges() {
        let e = mesh.edge_index(a, b).expect("boundary edge exists");
        let t = mesh.edges()[e].triangles[0];
        let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
        let dir = pb - pa;
        let len = dir.norm();
        let tangent = dir / len;
        let sign = if a < b { T::one() } else { -T::one() };
        let trace = tangent * (form.values[e] * sign / len);
        let mut acc = T::zero();
        for s in [half - h, half + h] {
            let fit = fits[t].eval(&(pa + dir * s));
            let w = fit - tangent * tangent.dot(&fit) + trace;
            acc += f(a, b, s, &w, &tangent);
        }
        total += acc * len * half;
    }
    total
}

/// Both sides of the integrated Bochner formula for a harmonic 1-form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BochnerResidual {
    /// `∫ |∇ω|² + K |ω|² dμ`.
    pub lhs: f64,
    /// `−∫ H^{∂M} |ω|² dσ` (normal flavor) or `−∫ A^{∂M}(ω♯, ω♯) dσ`
    /// (tangential flavor).
    pub rhs: f64,
    pub relative_residual: f64,
    /// `∫ |∇ω|² dμ`.
    pub dirichlet: f64,
    /// `∫ K |ω|² dμ`.
    pub curvature: f64,
}

/// Linear vector field fitted to `ω♯` around one triangle, expressed in the
/// triangle's tangent frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit<T: Real> {
    pub center: Point3<T>,
    pub frame: [Vector3<T>; 2],
    pub value: [T; 2],
    /// `gradient[i][j] = ∂_i ω_j` in `frame`.
    pub gradient: [[T; 2]; 2],
}

impl<T: Real> LinearFit<T> {
    /// The fitted field at `p`, after projecting `p` onto the frame plane.
    pub fn eval(&self, p: &Point3<T>) -> Vector3<T> {
        let d = p - self.center;
        let x = [d.dot(&self.frame[0]), d.dot(&self.frame[1])];
        let w = [0, 1].map(|j| self.value[j] + self.gradient[0][j] * x[0] + self.gradient[1][j] * x[1]);
        self.frame[0] * w[0] + self.frame[1] * w[1]
    }

    /// `|∇ω|²`, the squared Frobenius norm of the gradient.
    pub fn gradient_sq(&self) -> T {
        self.gradient.iter().flatten().fold(T::zero(), |s, g| s + *g * *g)
    }
}

/// Least-squares fit of a linear vector field to the edge values of the
/// cochain over the vertex star of every triangle, in the triangle's tangent
/// frame. Line integrals of a linear field are exact under the midpoint
/// rule, so each edge contributes one exact linear equation. Edge vectors
/// are projected onto the triangle's plane, which approximates the
/// covariant derivative to first order in the mesh size.
pub fn linear_fits<T: Real>(mesh: &TriSurfaceMesh<T>, form: &EdgeCochain<T>) -> Vec<LinearFit<T>> {
    let vt = mesh.vertex_triangles();
    let third = lit::<T>(1.0 / 3.0);
    let half = lit::<T>(0.5);
    let mut out = Vec::with_capacity(mesh.n_triangles());
    let mut star_edges = Vec::new();
    for t in 0..mesh.n_triangles() {
        star_edges.clear();
        for &v in &mesh.triangles()[t] {
            for &s in &vt[v] {
                for e in mesh.triangle_edges(s) {
                    if !star_edges.contains(&e) {
                        star_edges.push(e);
                    }
                }
            }
        }
        let c = mesh.corners(t);
        let center = Point3::from((c[0].coords + c[1].coords + c[2].coords) * third);
        let e1 = (c[1] - c[0]).normalize();
        let n = mesh.face_normal_raw(t).normalize();
        let e2 = n.cross(&e1);
        // unknowns [w_x, w_y, ∂x w_x, ∂y w_x, ∂x w_y, ∂y w_y]
        let mut a = DMatrix::<T>::zeros(star_edges.len(), 6);
        let mut rhs = DVector::<T>::zeros(star_edges.len());
        for (i, &e) in star_edges.iter().enumerate() {
            let [va, vb] = mesh.edges()[e].v;
            let (pa, pb) = (mesh.vertices()[va], mesh.vertices()[vb]);
            let d = pb - pa;
            let m = Point3::from((pa.coords + pb.coords) * half) - center;
            let (dx, dy) = (d.dot(&e1), d.dot(&e2));
            let (mx, my) = (m.dot(&e1), m.dot(&e2));
            a[(i, 0)] = dx;
            a[(i, 1)] = dy;
            a[(i, 2)] = mx * dx;
            a[(i, 3)] = my * dx;
            a[(i, 4)] = mx * dy;
            a[(i, 5)] = my * dy;
            rhs[i] = form.values[e];
        }
        let fit = a.svd(true, true).solve(&rhs, lit(1e-12));
        let (value, gradient) = match fit {
            Ok(f) => ([f[0], f[1]], [[f[2], f[4]], [f[3], f[5]]]),
            Err(_) => {
                let w = form.value_in_triangle(mesh, t, [third; 3]);
                ([w.dot(&e1), w.dot(&e2)], [[T::zero(); 2]; 2])
            }
        };
        out.push(LinearFit {
            center,
            frame: [e1, e2],
            value,
            gradient,
        });
    }
    out
}

/// `∫ |∇ω|² + K|ω|² dμ` split into its two parts.
pub fn bochner_interior<T: Real>(
    mesh: &TriSurfaceMesh<T>,
    fields: &GeometricFields<T>,
    form: &EdgeCochain<T>,
) -> Result<(T, T), HodgeError> {
    fields.check(mesh)?;
    let fits = linear_fits(mesh, form);
    let bary = form.at_barycenters(mesh);
    let third = lit::<T>(1.0 / 3.0);
    let mut dirichlet = T::zero();
    let mut curvature = T::zero();
    for t in 0..mesh.n_triangles() {
        let a = mesh.triangle_area(t);
        let k = mesh.triangles()[t]
            .iter()
            .fold(T::zero(), |s, &v| s + fields.gauss_curvature[v])
            * third;
        dirichlet += fits[t].gradient_sq() * a;
        curvature += k * bary[t].norm_squared() * a;
    }
    Ok((dirichlet, curvature))
}

/// Residual of the integrated Bochner identity matching the form's flavor.
pub fn bochner_residuals<T: Real>(
    mesh: &TriSurfaceMesh<T>,
    fields: &GeometricFields<T>,
    form: &EdgeCochain<T>,
) -> Result<BochnerResidual, HodgeError> {
    let (dirichlet, curvature) = bochner_interior(mesh, fields, form)?;
    let hb = &fields.boundary_curvature;
    let flavor = form.flavor;
    let fits = linear_fits(mesh, form);
    let boundary = boundary_edge_integral(mesh, form, &fits, |a, b, s, w, tangent| {
        let h = hb[a] * (T::one() - s) + hb[b] * s;
        match flavor {
            BoundaryFlavor::NormalAtBoundary => h * w.norm_squared(),
            // A^{∂M}(X, X) = κ ⟨X, T⟩² for a boundary curve
            BoundaryFlavor::TangentialAtBoundary => {
                let wt = w.dot(tangent);
                h * wt * wt
            }
        }
    });
    let lhs = to_f64(dirichlet + curvature);
    let rhs = -to_f64(boundary);
    Ok(BochnerResidual {
        lhs,
        rhs,
        relative_residual: relative_gap(lhs, rhs),
        dirichlet: to_f64(dirichlet),
        curvature: to_f64(curvature),
    })
}

/// `|a − b| / max(|a|, |b|, ε)`.
pub fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exemplars::ExemplarSurface;
    use crate::mesh::samples::{annulus, fan_disk, punctured_torus};

    fn dim(mesh: &TriSurfaceMesh<f64>, flavor: BoundaryFlavor) -> usize {
        harmonic_basis(mesh, flavor, SolverMode::Dense).unwrap().dim()
    }

    #[test]
    fn coboundaries_compose_to_zero() {
        let m = annulus(9, 3, 0.4, 1.0);
        for flavor in [BoundaryFlavor::TangentialAtBoundary, BoundaryFlavor::NormalAtBoundary] {
            let p = hodge_laplacian_1(&m, flavor);
            assert_eq!(p.d1.matmul(&p.d0).max_abs(), 0.0);
            assert!(p.laplacian.symmetry_defect() < 1e-12 * p.laplacian.max_abs());
        }
    }

    #[test]
    fn whitney_interpolation_reproduces_constant_forms() {
        let m = annulus(11, 4, 0.3, 1.0);
        let c = Vector3::new(0.7, -1.3, 0.0);
        let w = EdgeCochain::from_vector_field(&m, BoundaryFlavor::TangentialAtBoundary, |_| c);
        for v in w.at_barycenters(&m) {
            assert!((v - c).norm() < 1e-13);
        }
        let normals = m.vertex_normals().to_vec();
        for v in w.at_vertices(&m, &normals) {
            assert!((v - c).norm() < 1e-13);
        }
        for t in 0..m.n_triangles() {
            let v = w.value_in_triangle(&m, t, [0.2, 0.5, 0.3]);
            assert!((v - c).norm() < 1e-13);
        }
    }

    #[test]
    fn whitney_mass_integrates_constant_forms() {
        let m = fan_disk(10);
        let c = Vector3::new(1.0, 2.0, 0.0);
        let w = EdgeCochain::from_vector_field(&m, BoundaryFlavor::TangentialAtBoundary, |_| c);
        let mass = whitney_mass(&m);
        let x = DVector::from_vec(w.values.clone());
        assert!((mass.quad_form(&x) - c.norm_squared() * m.total_area()).abs() < 1e-12);
    }

    #[test]
    fn harmonic_dimensions_match_homology() {
        let disk = fan_disk(8);
        assert_eq!(dim(&disk, BoundaryFlavor::NormalAtBoundary), 0);
        assert_eq!(dim(&disk, BoundaryFlavor::TangentialAtBoundary), 0);
        let ann = annulus(12, 3, 0.4, 1.0);
        assert_eq!(dim(&ann, BoundaryFlavor::NormalAtBoundary), 1);
        assert_eq!(dim(&ann, BoundaryFlavor::TangentialAtBoundary), 1);
        let torus = punctured_torus(6);
        assert_eq!(dim(&torus, BoundaryFlavor::NormalAtBoundary), 2);
        assert_eq!(dim(&torus, BoundaryFlavor::TangentialAtBoundary), 2);
    }

    #[test]
    fn wrong_expected_dimension_is_reported() {
        let ann = annulus(12, 3, 0.4, 1.0);
        let err =
            harmonic_basis_with_dimension(&ann, BoundaryFlavor::NormalAtBoundary, 2, SolverMode::Dense).unwrap_err();
        assert!(matches!(
            err,
            HodgeError::DimensionMismatch {
                spectral: 1,
                homology: 2,
                ..
            }
        ));
    }

    #[test]
    fn basis_is_orthonormal_closed_and_coclosed() {
        let ann = annulus(16, 4, 0.4, 1.0);
        for flavor in [BoundaryFlavor::TangentialAtBoundary, BoundaryFlavor::NormalAtBoundary] {
            let b = harmonic_basis(&ann, flavor, SolverMode::Dense).unwrap();
            assert!(b.gram_defect() < 1e-10);
            for &(d, delta) in &b.closure_defects {
                assert!(
                    d < 1e-6 * b.spectral_gap && delta < 1e-6 * b.spectral_gap,
                    "{d} {delta}"
                );
            }
            if flavor == BoundaryFlavor::NormalAtBoundary {
                assert_eq!(b.forms[0].max_boundary_value(&ann), 0.0);
            }
        }
    }

    #[test]
    fn dense_and_iterative_bases_span_the_same_space() {
        let ann = annulus(16, 4, 0.4, 1.0);
        let d = harmonic_basis(&ann, BoundaryFlavor::NormalAtBoundary, SolverMode::Dense).unwrap();
        let k = harmonic_basis(&ann, BoundaryFlavor::NormalAtBoundary, SolverMode::Iterative).unwrap();
        let p = hodge_laplacian_1(&ann, BoundaryFlavor::NormalAtBoundary);
        let pick = |f: &EdgeCochain<f64>| DVector::from_iterator(p.dim(), p.edges.iter().map(|&e| f.values[e]));
        let overlap = p.mass1.bilinear(&pick(&d.forms[0]), &pick(&k.forms[0]));
        assert!((overlap.abs() - 1.0).abs() < 1e-8);
        for (a, b) in d.eigenvalues.iter().zip(&k.eigenvalues).skip(1) {
            assert!((a - b).abs() < 1e-8 * a.abs(), "{a} vs {b}");
        }
    }

    #[test]
    fn flat_annulus_bochner_identities() {
        let ann = annulus(96, 24, 0.5, 1.0);
        let fields = GeometricFields::estimate(&ann);
        for flavor in [BoundaryFlavor::NormalAtBoundary, BoundaryFlavor::TangentialAtBoundary] {
            let b = harmonic_basis(&ann, flavor, SolverMode::Auto).unwrap();
            let r = bochner_residuals(&ann, &fields, &b.forms[0]).unwrap();
            assert!(r.curvature.abs() < 1e-10);
            assert!(r.relative_residual < 0.05, "{flavor:?}: {r:?}");
        }
    }

    #[test]
    fn flat_annulus_generators_match_closed_forms() {
        // dr/r spans the normal flavor, dθ the tangential one
        let ann = annulus(64, 16, 0.5, 1.0);
        let dr = EdgeCochain::from_vector_field(&ann, BoundaryFlavor::NormalAtBoundary, |p| {
            p.coords / p.coords.norm_squared()
        });
        let b = harmonic_basis(&ann, BoundaryFlavor::NormalAtBoundary, SolverMode::Auto).unwrap();
        let p = hodge_laplacian_1(&ann, BoundaryFlavor::NormalAtBoundary);
        let pick = |f: &EdgeCochain<f64>| DVector::from_iterator(p.dim(), p.edges.iter().map(|&e| f.values[e]));
        let (x, y) = (pick(&dr), pick(&b.forms[0]));
        let cos = p.mass1.bilinear(&x, &y) / p.mass1.quad_form(&x).sqrt();
        assert!(cos.abs() > 0.999, "{cos}");
    }

    #[test]
    fn catenoid_normal_flavor_is_refinement_stable() {
        let e = ExemplarSurface::<f64>::critical_catenoid();
        let s = e.sample_mesh(16).unwrap();
        let fine = e.refined(&s.mesh, 1).unwrap();
        let b0 = harmonic_basis(&s.mesh, BoundaryFlavor::NormalAtBoundary, SolverMode::Auto).unwrap();
        let b1 = harmonic_basis(&fine.mesh, BoundaryFlavor::NormalAtBoundary, SolverMode::Auto).unwrap();
        assert_eq!((b0.dim(), b1.dim()), (1, 1));
        assert!(b1.spectral_gap > 0.5 * b0.spectral_gap);
    }

    #[test]
    fn flavor_names_parse() {
        assert_eq!(
            "normal".parse::<BoundaryFlavor>().unwrap(),
            BoundaryFlavor::NormalAtBoundary
        );
        assert_eq!(
            "tangential_at_boundary".parse::<BoundaryFlavor>().unwrap(),
            BoundaryFlavor::TangentialAtBoundary
        );
        assert!("sideways".parse::<BoundaryFlavor>().is_err());
    }
}
