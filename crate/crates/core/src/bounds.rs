//! Test functions built from harmonic 1-forms, the index form evaluated on
//! them, injectivity of the balancing map, and index lower bounds.
//!
//! For a unit normal `N` and a 1-form `ω` the test functions are the
//! coordinates of `N ∧ ω♯` in the basis `θᵢ ∧ θⱼ` of `Λ²ℝ³`,
//!
//! ```text
//! u_ij = ⟨N, θᵢ⟩⟨ω♯, θⱼ⟩ − ⟨N, θⱼ⟩⟨ω♯, θᵢ⟩,    (i, j) ∈ {(1,2), (1,3), (2,3)}
//! ```
//!
//! The sum `Σ Q(u_ij, u_ij)` does not depend on the frame `θ`.

use crate::ambient::{AmbientDomain, AmbientError, ConvexityFlags, ConvexityReport, FlagSource};
use crate::exemplars::{ExemplarError, ExemplarSurface, SampledSurface};
use crate::geometry::{FieldAccuracy, GeometricFields};
use crate::hodge::{
    bochner_interior, bochner_residuals, boundary_edge_integral, harmonic_basis_with_dimension, linear_fits,
    relative_gap, BochnerResidual, BoundaryFlavor, EdgeCochain, HarmonicBasis, HodgeError,
};
use crate::jacobi::{
    assemble_surface, morse_index, solve_spectrum_unsaturated, JacobiError, LevelIndex, QuadraticFormAssembly,
    SolverMode, SpectralResult, StabilityReport, SurfaceSource,
};
use crate::mesh::{homology_profile, topology, HomologyProfile, MeshError, Topology, TriSurfaceMesh};
use crate::scalar::{to_f64, Real};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

/// Index pairs `(i, j)`, zero-based, in the order of the `u_ij`.
pub const PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

/// Relative singular-value cutoff for the rank of the balancing matrix.
pub const BALANCING_RANK_CUTOFF: f64 = 1e-8;

/// `|ω♯|` below this fraction of its maximum counts as vanishing.
const VANISHING_FRACTION: f64 = 1e-8;

/// Runs of vanishing boundary values longer than this fraction of a loop
/// are reported.
const VANISHING_RUN_WARNING: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BoundsError {
    #[error(transparent)]
    Hodge(#[from] HodgeError),
    #[error(transparent)]
    Jacobi(#[from] JacobiError),
    #[error(transparent)]
    Ambient(#[from] AmbientError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Exemplar(#[from] ExemplarError),
    #[error("frame is not orthonormal (defect {0:.3e})")]
    InvalidFrame(f64),
    #[error("missing geometry: {0}")]
    MissingGeometry(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// `Λ²` coordinates of `n ∧ w` in the frame whose rows are `θ₁, θ₂, θ₃`.
pub fn wedge_coordinates<T: Real>(frame: &Matrix3<T>, n: &Vector3<T>, w: &Vector3<T>) -> [T; 3] {
    let a = frame * n;
    let b = frame * w;
    PAIRS.map(|(i, j)| a[i] * b[j] - a[j] * b[i])
}

/// The three test functions of one 1-form, as nodal values.
#[derive(Debug, Clone)]
pub struct TestFunctionSet<T: Real> {
    pub flavor: BoundaryFlavor,
    /// Rows are `θ₁, θ₂, θ₃`.
    pub frame: Matrix3<T>,
    /// `ω♯` at vertices.
    pub omega: Vec<Vector3<T>>,
    /// `u[k]` belongs to `PAIRS[k]`.
    pub u: [DVector<T>; 3],
}

impl<T: Real> TestFunctionSet<T> {
    /// `max_v |Σ u_ij² − |ω♯|²|`.
    pub fn norm_defect(&self) -> T {
        (0..self.omega.len()).fold(T::zero(), |m, v| {
            let s = self.u.iter().fold(T::zero(), |s, u| s + u[v] * u[v]);
            m.max((s - self.omega[v].norm_squared()).abs())
        })
    }

    /// `Σ Q(u_ij, u_ij)` with the assembled index form.
    pub fn sum_q(&self, assembly: &QuadraticFormAssembly<T>) -> T {
        self.u.iter().fold(T::zero(), |s, u| s + assembly.quadratic_form(u))
    }
}

/// Test functions of `form` with `ω♯` reconstructed at vertices by
/// area-weighted averaging of the barycenter values. `normals` are the
/// unit normals at vertices; `frame` has the basis vectors as rows.
pub fn build_test_functions<T: Real>(
    mesh: &TriSurfaceMesh<T>,
    normals: &[Vector3<T>],
    form: &EdgeCochain<T>,
    frame: &Matrix3<T>,
) -> Result<TestFunctionSet<T>, BoundsError> {
    if normals.len() != mesh.n_vertices() {
        return Err(BoundsError::MissingGeometry(format!(
            "{} normals for {} vertices",
            normals.len(),
            mesh.n_vertices()
        )));
    }
    if form.values.len() != mesh.n_edges() {
        return Err(HodgeError::Length {
            expected: mesh.n_edges(),
            found: form.values.len(),
        }
        .into());
    }
    let defect = to_f64((frame * frame.transpose() - Matrix3::identity()).abs().max());
    if !(defect <= 1e3 * to_f64(T::eps())) {
        return Err(BoundsError::InvalidFrame(defect));
    }
    let omega = form.at_vertices(mesh, normals);
    let n = mesh.n_vertices();
    let mut u = [DVector::zeros(n), DVector::zeros(n), DVector::zeros(n)];
    for v in 0..n {
        let c = wedge_coordinates(frame, &normals[v], &omega[v]);
        for k in 0..3 {
            u[k][v] = c[k];
        }
    }
    Ok(TestFunctionSet {
        flavor: form.flavor,
        frame: *frame,
        omega,
        u,
    })
}

/// Which part of the test-function identity applies; fixed by the flavor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentityPart {
    /// Normal flavor: `Σ Q(u_ij, u_ij) = −∫ H^{∂Ω} |ω|² dσ`.
    MeanCurvature,
    /// Tangential flavor:
    /// `Σ Q(u_ij, u_ij) = −∫ II^{∂Ω}(N, N) |ω|² + II^{∂Ω}(ω♯, ω♯) dσ`.
    SecondFundamentalForm,
}

impl IdentityPart {
    pub fn of(flavor: BoundaryFlavor) -> Self {
        match flavor {
            BoundaryFlavor::NormalAtBoundary => IdentityPart::MeanCurvature,
            BoundaryFlavor::TangentialAtBoundary => IdentityPart::SecondFundamentalForm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionCheck {
    pub part: IdentityPart,
    pub flavor: BoundaryFlavor,
    /// `Σ Q(u_ij, u_ij)` through the index-form assembly.
    pub sum_q: f64,
    /// The boundary integral `B` of the matching part; the identity reads
    /// `sum_q = −B`.
    pub boundary_integral: f64,
    /// `|sum_q + B| / |B|`.
    pub relative_residual: f64,
}

/// Boundary integral of `g(p, N, ω♯)` along `∂M`, with `N` interpolated
/// linearly and renormalized, and the trace of `ω♯` from
/// [`boundary_edge_integral`].
fn boundary_integral<T: Real>(
    mesh: &TriSurfaceMesh<T>,
    fields: &GeometricFields<T>,
    form: &EdgeCochain<T>,
    mut g: impl FnMut(&nalgebra::Point3<T>, &Vector3<T>, &Vector3<T>) -> Result<T, AmbientError>,
) -> Result<T, BoundsError> {
    fields.check(mesh).map_err(HodgeError::from)?;
    let fits = linear_fits(mesh, form);
    let mut failure = None;
    let total = boundary_edge_integral(mesh, form, &fits, |a, b, s, w, _| {
        let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
        let p = pa + (pb - pa) * s;
        let n = (fields.normals[a] * (T::one() - s) + fields.normals[b] * s).normalize();
        match g(&p, &n, w) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                T::zero()
            }
        }
    });
    match failure {
        Some(e) => Err(e.into()),
        None => Ok(total),
    }
}

/// `∫_{∂M} II^{∂Ω}(N, N) |ω|² dσ`.
pub fn robin_boundary_integral<T: Real>(
    mesh: &TriSurfaceMesh<T>,
    fields: &GeometricFields<T>,
    form: &EdgeCochain<T>,
    domain: &AmbientDomain<T>,
) -> Result<T, BoundsError> {
    boundary_integral(mesh, fields, form, |p, n, w| {
        Ok(domain.second_fundamental_form(p, n, n)? * w.norm_squared())
    })
}

/// Both sides of the test-function identity matching the flavor of `form`.
pub fn test_function_check<T: Real>(
    mesh: &TriSurfaceMesh<T>,
    fields: &GeometricFields<T>,
    form: &EdgeCochain<T>,
    domain: &AmbientDomain<T>,
    assembly: &QuadraticFormAssembly<T>,
) -> Result<TestFunctionCheck, BoundsError> {
    let tfs = build_test_functions(mesh, &fields.normals, form, &Matrix3::identity())?;
    let part = IdentityPart::of(form.flavor);
    let b = boundary_integral(mesh, fields, form, |p, n, w| match part {
        IdentityPart::MeanCurvature => Ok(domain.mean_curvature(p)? * w.norm_squared()),
        IdentityPart::SecondFundamentalForm => Ok(
            domain.second_fundamental_form(p, n, n)? * w.norm_squared() + domain.second_fundamental_form(p, w, w)?
        ),
    })?;
    let sum_q = to_f64(tfs.sum_q(assembly));
    let boundary_integral = to_f64(b);
    Ok(TestFunctionCheck {
        part,
        flavor: form.flavor,
        sum_q,
        boundary_integral,
        relative_residual: (sum_q + boundary_integral).abs() / boundary_integral.abs().max(f64::MIN_POSITIVE),
    })
}

/// The intermediate identity
/// `Σ Q(u_ij, u_ij) = ∫ |∇ω|² + Ric(ω, ω) dμ − ∫ II^{∂Ω}(N, N) |ω|² dσ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityChain {
    pub sum_q: f64,
    /// `∫ |∇ω|² + K |ω|² dμ`.
    pub interior: f64,
    /// `∫ II^{∂Ω}(N, N) |ω|² dσ`.
    pub robin_boundary: f64,
    /// `|sum_q − (interior − robin_boundary)| / max(|sum_q|, |interior − robin_boundary|)`.
    pub relative_residual: f64,
}

pub fn identity_chain<T: Real>(
    mesh: &TriSurfaceMesh<T>,
    fields: &GeometricFields<T>,
    form: &EdgeCochain<T>,
    domain: &AmbientDomain<T>,
    assembly: &QuadraticFormAssembly<T>,
) -> Result<IdentityChain, BoundsError> {
    let tfs = build_test_functions(mesh, &fields.normals, form, &Matrix3::identity())?;
    let (dirichlet, curvature) = bochner_interior(mesh, fields, form)?;
    let robin = to_f64(robin_boundary_integral(mesh, fields, form, domain)?);
    let sum_q = to_f64(tfs.sum_q(assembly));
    let interior = to_f64(dirichlet + curvature);
    Ok(IdentityChain {
        sum_q,
        interior,
        robin_boundary: robin,
        relative_residual: relative_gap(sum_q, interior - robin),
    })
}

/// Pointwise `H^{∂M} + II^{∂Ω}(N, N) − H^{∂Ω}` at boundary vertices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryAlgebra {
    pub vertices: usize,
    pub max_defect: f64,
    pub mean_defect: f64,
}

pub fn boundary_algebra<T: Real>(
    mesh: &TriSurfaceMesh<T>,
    fields: &GeometricFields<T>,
    domain: &AmbientDomain<T>,
) -> Result<BoundaryAlgebra, BoundsError> {
    fields.check(mesh).map_err(HodgeError::from)?;
    let mut max_defect = 0.0f64;
    let mut total = 0.0f64;
    let mut count = 0usize;
    for v in (0..mesh.n_vertices()).filter(|&v| mesh.is_boundary_vertex(v)) {
        let p = mesh.vertices()[v];
        let n = fields.normals[v];
        let geo = domain.boundary_geometry(&p)?;
        let defect = fields.boundary_curvature[v] + domain.second_fundamental_form(&p, &n, &n)? - geo.mean_curvature;
        let d = to_f64(defect.abs());
        max_defect = max_defect.max(d);
        total += d;
        count += 1;
    }
    Ok(BoundaryAlgebra {
        vertices: count,
        max_defect,
        mean_defect: if count > 0 { total / count as f64 } else { 0.0 },
    })
}

/// Longest run of boundary vertices, as a fraction of its loop, on which
/// `|ω♯|` vanishes relative to its maximum over the mesh.
pub fn boundary_vanishing_fraction<T: Real>(mesh: &TriSurfaceMesh<T>, omega: &[Vector3<T>]) -> f64 {
    let scale = omega.iter().fold(0.0f64, |m, w| m.max(to_f64(w.norm())));
    if scale == 0.0 {
        return if mesh.boundary_loops().is_empty() { 0.0 } else { 1.0 };
    }
    let mut worst = 0.0f64;
    for lp in mesh.boundary_loops() {
        let small: Vec<bool> = lp
            .iter()
            .map(|&v| to_f64(omega[v].norm()) <= VANISHING_FRACTION * scale)
            .collect();
        let n = small.len();
        if small.iter().all(|&s| s) {
            return 1.0;
        }
        // runs may wrap around the end of the loop
        let mut run = 0usize;
        let mut best = 0usize;
        for i in 0..2 * n {
            if small[i % n] {
                run += 1;
                best = best.max(run.min(n));
            } else {
                run = 0;
            }
        }
        worst = worst.max(best as f64 / n as f64);
    }
    worst
}

/// Matrix of the balancing map `ω ↦ [∫ u_ij φ_q dμ]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalancingMatrix {
    pub flavor: BoundaryFlavor,
    /// Harmonic dimension.
    pub rows: usize,
    /// `3k`, column `3·q + pair` for eigenfunction `q` and pair index.
    pub cols: usize,
    pub k: usize,
    pub entries: Vec<Vec<f64>>,
    /// Descending.
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub smallest_singular_value: Option<f64>,
    /// Smallest over largest singular value.
    pub relative_smallest: Option<f64>,
    /// Trivial kernel, `rank == rows`.
    pub injective: bool,
}

/// Balancing matrix of `basis` against the first `k` eigenfunctions, where
/// `k` is the negative count of `spectrum`.
pub fn balancing_rank<T: Real>(
    mesh: &TriSurfaceMesh<T>,
    normals: &[Vector3<T>],
    basis: &HarmonicBasis<T>,
    assembly: &QuadraticFormAssembly<T>,
    spectrum: &SpectralResult<T>,
    frame: &Matrix3<T>,
) -> Result<BalancingMatrix, BoundsError> {
    let k = spectrum.negative_count;
    if spectrum.eigenvectors.ncols() < k || spectrum.eigenvectors.nrows() != mesh.n_vertices() {
        return Err(BoundsError::InvalidArgument(format!(
            "spectrum has {} eigenvectors of length {}, need {k} of length {}",
            spectrum.eigenvectors.ncols(),
            spectrum.eigenvectors.nrows(),
            mesh.n_vertices()
        )));
    }
    let rows = basis.dim();
    let cols = 3 * k;
    let mut m = DMatrix::<f64>::zeros(rows, cols);
    let mphi = assembly
        .mass
        .mul_dense(&spectrum.eigenvectors.columns(0, k).into_owned());
    for (r, form) in basis.forms.iter().enumerate() {
        let tfs = build_test_functions(mesh, normals, form, frame)?;
        for q in 0..k {
            for (pair, u) in tfs.u.iter().enumerate() {
                m[(r, 3 * q + pair)] = to_f64(u.dot(&mphi.column(q)));
            }
        }
    }
    let mut singular_values: Vec<f64> = if rows == 0 || cols == 0 {
        Vec::new()
    } else {
        m.clone().svd(false, false).singular_values.iter().copied().collect()
    };
    singular_values.sort_by(|a, b| b.total_cmp(a));
    let largest = singular_values.first().copied().unwrap_or(0.0);
    let rank = singular_values
        .iter()
        .filter(|&&s| s > BALANCING_RANK_CUTOFF * largest && s > 0.0)
        .count();
    let smallest = if rows > 0 && cols > 0 {
        // a wide matrix has min(rows, cols) singular values; a tall one has a
        // nontrivial kernel regardless
        Some(if cols < rows {
            0.0
        } else {
            *singular_values.last().unwrap_or(&0.0)
        })
    } else {
        None
    };
    Ok(BalancingMatrix {
        flavor: basis.flavor,
        rows,
        cols,
        k,
        entries: m.row_iter().map(|r| r.iter().copied().collect()).collect(),
        relative_smallest: smallest.map(|s| if largest > 0.0 { s / largest } else { 0.0 }),
        smallest_singular_value: smallest,
        singular_values,
        rank,
        injective: rank == rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub hypothesis: String,
    pub hypothesis_satisfied: bool,
    /// The bound as stated, a real number.
    pub bound_real: f64,
    /// Smallest integer not below `bound_real`.
    pub bound: usize,
    pub index: Option<usize>,
    pub status: VerdictStatus,
    pub note: Option<String>,
}

impl Verdict {
    fn new(hypothesis: &str, satisfied: bool, numerator: usize, bound_real: f64, index: Option<usize>) -> Self {
        // the bounds are numerator / 3 at n = 2
        let bound = numerator.div_ceil(3);
        let status = match (satisfied, index) {
            (false, _) => VerdictStatus::NotApplicable,
            (true, Some(k)) if k >= bound => VerdictStatus::Pass,
            _ => VerdictStatus::Fail,
        };
        Self {
            hypothesis: hypothesis.to_string(),
            hypothesis_satisfied: satisfied,
            bound_real,
            bound,
            index,
            status,
            note: None,
        }
    }

    fn with_note(mut self, note: &str) -> Self {
        self.note = Some(note.to_string());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdicts {
    #[serde(rename = "A")]
    pub a: Verdict,
    #[serde(rename = "B")]
    pub b: Verdict,
    #[serde(rename = "C")]
    pub c: Verdict,
    #[serde(rename = "F")]
    pub f: Verdict,
}

impl Verdicts {
    pub fn all(&self) -> [&Verdict; 4] {
        [&self.a, &self.b, &self.c, &self.f]
    }

    pub fn any_not_applicable(&self) -> bool {
        self.all().iter().any(|v| v.status == VerdictStatus::NotApplicable)
    }
}

/// Index lower bounds for surfaces in domains of `ℝ³`. The bounds use the
/// integer homology dimensions; `index` is the computed Morse index.
pub fn theorem_verdicts(
    index: Option<usize>,
    topo: &Topology,
    homology: &HomologyProfile,
    flags: &ConvexityFlags,
    alpha: f64,
) -> Result<Verdicts, BoundsError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(BoundsError::InvalidArgument(format!(
            "alpha = {alpha} is outside [0, 1]"
        )));
    }
    let h1_rel = homology.h1_relative;
    let r_minus_1 = topo.boundary_components.saturating_sub(1);
    let two_g_r = 2 * topo.genus + r_minus_1;
    let a = Verdict::new(
        "strictly mean convex",
        flags.strictly_mean_convex,
        h1_rel,
        h1_rel as f64 / 3.0,
        index,
    );
    let b = Verdict::new(
        "strictly mean convex",
        flags.strictly_mean_convex,
        r_minus_1,
        r_minus_1 as f64 / 3.0,
        index,
    )
    .with_note("stated for hypersurfaces of dimension at least 3; at n = 2 reported as the (r - 1)/3 specialization");
    let c = Verdict::new(
        "weakly mean convex",
        flags.weakly_mean_convex,
        two_g_r,
        two_g_r as f64 / 3.0,
        index,
    );
    // H_{n-1}(M, ∂M) = H_1(M, ∂M) at n = 2, so both terms coincide
    let f = Verdict::new(
        "strictly two-convex",
        flags.strictly_two_convex,
        h1_rel,
        (alpha * h1_rel as f64 + (1.0 - alpha) * h1_rel as f64) / 3.0,
        index,
    )
    .with_note(
        "at n = 2 both homology terms are dim H_1(M, dM), so the bound equals the one of Theorem A for every alpha",
    );
    Ok(Verdicts { a, b, c, f })
}

/// What to certify.
#[derive(Debug, Clone)]
pub enum CertifyInput<'a, T: Real> {
    Exemplar {
        surface: &'a ExemplarSurface<T>,
        resolution: usize,
    },
    /// A user mesh. `a_squared` are per-vertex values of `|A|²`; when absent
    /// they are estimated.
    Mesh {
        name: String,
        mesh: &'a TriSurfaceMesh<T>,
        domain: &'a AmbientDomain<T>,
        a_squared: Option<Vec<T>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    /// Midpoint refinements of the base mesh for the index computation.
    pub refinements: usize,
    /// Initial number of eigenpairs; doubled while all are negative.
    pub eigenpairs: usize,
    pub alpha: f64,
    pub mode: SolverMode,
    pub convexity_samples: usize,
    pub seed: u64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            refinements: 0,
            eigenpairs: 12,
            alpha: 0.5,
            mode: SolverMode::Auto,
            convexity_samples: 2000,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceRecord {
    pub name: String,
    /// "exemplar" or "mesh".
    pub source: String,
    pub resolution: Option<usize>,
    pub refinements: usize,
    pub domain: String,
    pub vertices: usize,
    pub triangles: usize,
    pub field_accuracy: FieldAccuracy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologyRecord {
    pub g: usize,
    pub r: usize,
    pub chi: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HomologyRecord {
    pub h0: usize,
    pub h1: usize,
    pub h0_boundary: usize,
    pub h1_boundary: usize,
    pub h1_rel: usize,
    pub im_istar: usize,
    pub long_exact_sequence: bool,
    pub surface_formula: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityMargins {
    pub min_mean_curvature: f64,
    pub min_pair_sum: f64,
    pub min_principal_curvature: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityRecord {
    pub flags: ConvexityFlags,
    pub sampled_flags: ConvexityFlags,
    pub source: FlagSource,
    pub sample_count: usize,
    pub margins: ConvexityMargins,
}

impl From<&ConvexityReport> for ConvexityRecord {
    fn from(r: &ConvexityReport) -> Self {
        Self {
            flags: r.flags,
            sampled_flags: r.sampled_flags,
            source: r.source,
            sample_count: r.sample_count,
            margins: ConvexityMargins {
                min_mean_curvature: r.min_mean_curvature,
                min_pair_sum: r.min_pair_sum,
                min_principal_curvature: r.min_principal_curvature,
                margin: r.margin,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRecord {
    /// Lowest eigenvalues at the finest level.
    pub eigenvalues: Vec<f64>,
    /// Negative count at the finest level.
    pub index: usize,
    pub threshold: f64,
    pub inertia_count: Option<usize>,
    pub stable: bool,
    pub inertia_consistent: bool,
    pub resolved_index: Option<usize>,
    pub levels: Vec<LevelIndex>,
}

/// A value per boundary flavor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct FlavorPair<X> {
    pub normal: X,
    pub tangential: X,
}

impl<X> FlavorPair<X> {
    pub fn get(&self, flavor: BoundaryFlavor) -> &X {
        match flavor {
            BoundaryFlavor::NormalAtBoundary => &self.normal,
            BoundaryFlavor::TangentialAtBoundary => &self.tangential,
        }
    }

    fn set(&mut self, flavor: BoundaryFlavor, x: X) {
        match flavor {
            BoundaryFlavor::NormalAtBoundary => self.normal = x,
            BoundaryFlavor::TangentialAtBoundary => self.tangential = x,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct HodgeRecord {
    /// Dimensions of the discrete harmonic spaces.
    pub dims: FlavorPair<Option<usize>>,
    /// Homology dimensions they must match.
    pub homology_dims: FlavorPair<usize>,
    pub gaps: FlavorPair<Option<f64>>,
    pub gram_defects: FlavorPair<Option<f64>>,
    /// Largest fraction of a boundary loop on which a basis element vanishes.
    pub boundary_vanishing: FlavorPair<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct IdentityRecord {
    /// Serialized under the certificate schema's key names.
    #[serde(rename = "prop41_1")]
    pub test_functions_1: Option<TestFunctionCheck>,
    #[serde(rename = "prop41_2")]
    pub test_functions_2: Option<TestFunctionCheck>,
    pub bochner_1: Option<BochnerResidual>,
    pub bochner_2: Option<BochnerResidual>,
    pub ident_1: Option<IdentityChain>,
    pub ident_2: Option<IdentityChain>,
    pub boundary_algebra: Option<BoundaryAlgebra>,
    /// `max_v |Σ u_ij² − |ω♯|²|` per flavor.
    pub test_function_norm_defect: FlavorPair<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct BalancingRecord {
    pub normal: Option<BalancingMatrix>,
    pub tangential: Option<BalancingMatrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Diagnostics {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
    /// Negative count on the base mesh, where the forms live.
    pub base_index: Option<usize>,
    pub max_eigen_residual: Option<f64>,
    pub eigen_gram_defect: Option<f64>,
    pub solver_mode: Option<SolverMode>,
}

/// Complete verification record of one surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexCertificate {
    pub surface: SurfaceRecord,
    pub topology: TopologyRecord,
    pub homology: HomologyRecord,
    pub convexity: Option<ConvexityRecord>,
    pub spectrum: Option<SpectrumRecord>,
    pub hodge: HodgeRecord,
    pub identities: IdentityRecord,
    pub balancing: BalancingRecord,
    pub verdicts: Verdicts,
    pub diagnostics: Diagnostics,
}

/// Runs the full pipeline. The Morse index comes from the finest level of
/// the refinement hierarchy; harmonic forms, identities and the balancing
/// map live on the base mesh. Failures of individual stages are recorded in
/// the diagnostics; only invalid input topology is fatal.
pub fn certify<T: Real>(
    input: &CertifyInput<'_, T>,
    options: &CertifyOptions,
) -> Result<IndexCertificate, BoundsError> {
    let mut diag = Diagnostics::default();
    let (base, source, domain, record) = match input {
        CertifyInput::Exemplar { surface, resolution } => {
            let s = surface.sample_mesh(*resolution)?;
            let rec = SurfaceRecord {
                name: surface.name().to_string(),
                source: "exemplar".into(),
                resolution: Some(*resolution),
                refinements: options.refinements,
                domain: surface.domain().name().to_string(),
                vertices: s.mesh.n_vertices(),
                triangles: s.mesh.n_triangles(),
                field_accuracy: s.fields.accuracy,
            };
            (s, SurfaceSource::Exemplar(surface), surface.domain(), rec)
        }
        CertifyInput::Mesh {
            name,
            mesh,
            domain,
            a_squared,
        } => {
            let fields = match a_squared {
                Some(a) if a.len() != mesh.n_vertices() => {
                    return Err(BoundsError::MissingGeometry(format!(
                        "{} |A|² values for {} vertices",
                        a.len(),
                        mesh.n_vertices()
                    )))
                }
                Some(a) => GeometricFields::estimate_with_a_squared(mesh, a.clone()),
                None => GeometricFields::estimate(mesh),
            };
            let rec = SurfaceRecord {
                name: name.clone(),
                source: "mesh".into(),
                resolution: None,
                refinements: options.refinements,
                domain: domain.name().to_string(),
                vertices: mesh.n_vertices(),
                triangles: mesh.n_triangles(),
                field_accuracy: fields.accuracy,
            };
            let src = SurfaceSource::Mesh {
                domain,
                a_squared: a_squared.clone(),
            };
            (
                SampledSurface {
                    mesh: (*mesh).clone(),
                    fields,
                },
                src,
                *domain,
                rec,
            )
        }
    };
    if base.fields.accuracy == FieldAccuracy::Estimated {
        diag.warnings
            .push("geometric fields are discrete estimates; identity residuals are low accuracy".into());
    }
    let mesh = &base.mesh;
    let topo = topology(mesh)?;
    let hom = homology_profile(mesh)?;
    let homology = HomologyRecord {
        h0: hom.h0,
        h1: hom.h1,
        h0_boundary: hom.h0_boundary,
        h1_boundary: hom.h1_boundary,
        h1_rel: hom.h1_relative,
        im_istar: hom.image_inclusion,
        long_exact_sequence: hom.long_exact_sequence_holds(),
        surface_formula: hom.matches_surface_formula(&topo),
    };
    if !homology.long_exact_sequence || !homology.surface_formula {
        diag.errors
            .push("homology dimensions violate the exact-sequence or surface identity".into());
    }

    let convexity = match domain.classify_convexity(options.convexity_samples, options.seed) {
        Ok(r) => Some(ConvexityRecord::from(&r)),
        Err(e) => {
            diag.errors.push(format!("convexity: {e}"));
            None
        }
    };

    let assembly = match assemble_surface(mesh, &base.fields, domain) {
        Ok(a) => Some(a),
        Err(e) => {
            diag.errors.push(format!("assembly: {e}"));
            None
        }
    };
    let base_spectrum =
        assembly.as_ref().and_then(
            |a| match solve_spectrum_unsaturated(a, options.eigenpairs, options.mode) {
                Ok(s) => Some(s),
                Err(e) => {
                    diag.errors.push(format!("base spectrum: {e}"));
                    None
                }
            },
        );
    if let Some(s) = &base_spectrum {
        diag.base_index = Some(s.negative_count);
        diag.max_eigen_residual = Some(s.max_residual);
        diag.eigen_gram_defect = Some(s.gram_defect);
        diag.solver_mode = Some(s.mode);
    }

    // without refinement the base spectrum is the whole hierarchy
    let hierarchy = match (&base_spectrum, options.refinements) {
        (Some(s), 0) => {
            let report = StabilityReport::from_levels(vec![LevelIndex::from_spectrum(0, mesh.n_vertices(), s)]);
            Ok((report.index(), report))
        }
        _ => morse_index(mesh, &source, options.refinements, options.eigenpairs, options.mode),
    };
    let spectrum = match hierarchy {
        Ok((index, report)) => {
            if !report.stable {
                diag.warnings
                    .push("negative counts differ between the two finest levels".into());
            }
            if !report.inertia_consistent {
                diag.warnings
                    .push("eigensolver and inertia counts disagree at some level".into());
            }
            let finest = report.levels.last().expect("at least one level");
            Some(SpectrumRecord {
                eigenvalues: finest.lowest_eigenvalues.clone(),
                index,
                threshold: finest.zero_threshold,
                inertia_count: finest.inertia_count,
                stable: report.stable,
                inertia_consistent: report.inertia_consistent,
                resolved_index: report.resolved_count,
                levels: report.levels,
            })
        }
        Err(e) => {
            diag.errors.push(format!("morse index: {e}"));
            None
        }
    };

    let mut hodge = HodgeRecord {
        homology_dims: FlavorPair {
            normal: hom.h1_relative,
            tangential: hom.h1,
        },
        ..HodgeRecord::default()
    };
    let mut identities = IdentityRecord::default();
    let mut balancing = BalancingRecord::default();
    let frame = Matrix3::identity();
    for flavor in [BoundaryFlavor::NormalAtBoundary, BoundaryFlavor::TangentialAtBoundary] {
        let expected = *hodge.homology_dims.get(flavor);
        let basis = match harmonic_basis_with_dimension(mesh, flavor, expected, options.mode) {
            Ok(b) => b,
            Err(e) => {
                diag.errors.push(format!("{} harmonic basis: {e}", flavor.name()));
                continue;
            }
        };
        hodge.dims.set(flavor, Some(basis.dim()));
        hodge.gaps.set(flavor, Some(basis.spectral_gap));
        hodge.gram_defects.set(flavor, Some(basis.gram_defect()));
        if let (Some(asm), Some(spec)) = (&assembly, &base_spectrum) {
            match balancing_rank(mesh, &base.fields.normals, &basis, asm, spec, &frame) {
                Ok(b) => match flavor {
                    BoundaryFlavor::NormalAtBoundary => balancing.normal = Some(b),
                    BoundaryFlavor::TangentialAtBoundary => balancing.tangential = Some(b),
                },
                Err(e) => diag.errors.push(format!("{} balancing map: {e}", flavor.name())),
            }
        }
        let Some(form) = basis.forms.first() else {
            continue;
        };
        let mut vanishing = 0.0f64;
        for f in &basis.forms {
            vanishing = vanishing.max(boundary_vanishing_fraction(
                mesh,
                &f.at_vertices(mesh, &base.fields.normals),
            ));
        }
        hodge.boundary_vanishing.set(flavor, Some(vanishing));
        if vanishing >= VANISHING_RUN_WARNING {
            diag.warnings.push(format!(
                "a {} harmonic form vanishes on {:.0}% of a boundary loop",
                flavor.name(),
                100.0 * vanishing
            ));
        }
        match build_test_functions(mesh, &base.fields.normals, form, &frame) {
            Ok(t) => identities
                .test_function_norm_defect
                .set(flavor, Some(to_f64(t.norm_defect()))),
            Err(e) => diag.errors.push(format!("{} test functions: {e}", flavor.name())),
        }
        match bochner_residuals(mesh, &base.fields, form) {
            Ok(b) => match flavor {
                BoundaryFlavor::NormalAtBoundary => identities.bochner_1 = Some(b),
                BoundaryFlavor::TangentialAtBoundary => identities.bochner_2 = Some(b),
            },
            Err(e) => diag.errors.push(format!("{} Bochner identity: {e}", flavor.name())),
        }
        if let Some(asm) = &assembly {
            match test_function_check(mesh, &base.fields, form, domain, asm) {
                Ok(c) => match flavor {
                    BoundaryFlavor::NormalAtBoundary => identities.test_functions_1 = Some(c),
                    BoundaryFlavor::TangentialAtBoundary => identities.test_functions_2 = Some(c),
                },
                Err(e) => diag
                    .errors
                    .push(format!("{} test-function identity: {e}", flavor.name())),
            }
            match identity_chain(mesh, &base.fields, form, domain, asm) {
                Ok(c) => match flavor {
                    BoundaryFlavor::NormalAtBoundary => identities.ident_1 = Some(c),
                    BoundaryFlavor::TangentialAtBoundary => identities.ident_2 = Some(c),
                },
                Err(e) => diag.errors.push(format!("{} identity chain: {e}", flavor.name())),
            }
        }
    }
    match boundary_algebra(mesh, &base.fields, domain) {
        Ok(b) => identities.boundary_algebra = Some(b),
        Err(e) => diag.errors.push(format!("boundary algebra: {e}")),
    }

    let flags = convexity.as_ref().map_or(ConvexityFlags::NONE, |c| c.flags);
    let verdicts = theorem_verdicts(spectrum.as_ref().map(|s| s.index), &topo, &hom, &flags, options.alpha)?;
    Ok(IndexCertificate {
        surface: record,
        topology: TopologyRecord {
            g: topo.genus,
            r: topo.boundary_components,
            chi: topo.euler_characteristic,
        },
        homology,
        convexity,
        spectrum,
        hodge,
        identities,
        balancing,
        verdicts,
        diagnostics: diag,
    })
}

/// Rotation-induced frame for tests and callers that want a generic basis:
/// rows are the images of the standard basis under `r`.
pub fn rotated_frame<T: Real>(r: &nalgebra::Rotation3<T>) -> Matrix3<T> {
    r.matrix().transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::samples::{fan_disk, punctured_torus};
    use nalgebra::{Rotation3, Unit};
    use proptest::prelude::*;

    fn profile(g: usize, r: usize) -> (Topology, HomologyProfile) {
        let mesh = if g == 1 { punctured_torus(6) } else { fan_disk(8) };
        let topo = topology(&mesh).unwrap();
        assert_eq!((topo.genus, topo.boundary_components), (g, r));
        (topo, homology_profile(&mesh).unwrap())
    }

    #[test]
    fn flat_disk_wedge_coordinates() {
        let u = wedge_coordinates(&Matrix3::<f64>::identity(), &Vector3::z(), &Vector3::x());
        assert_eq!(u, [0.0, -1.0, 0.0]);
        // the same vector as N × ω♯ = (0, 1, 0) up to the identification of Λ²ℝ³ with ℝ³
        let c = Vector3::z().cross(&Vector3::x());
        assert_eq!([u[2], -u[1], u[0]], [c.x, c.y, c.z]);
    }

    #[test]
    fn constant_form_on_flat_disk_gives_constant_test_functions() {
        let mesh = fan_disk(8);
        let normals = vec![Vector3::z(); mesh.n_vertices()];
        let form = EdgeCochain::from_vector_field(&mesh, BoundaryFlavor::TangentialAtBoundary, |_| Vector3::x());
        let tfs = build_test_functions(&mesh, &normals, &form, &Matrix3::identity()).unwrap();
        for v in 0..mesh.n_vertices() {
            assert!(tfs.u[0][v].abs() < 1e-14);
            assert!((tfs.u[1][v] + 1.0).abs() < 1e-14);
            assert!(tfs.u[2][v].abs() < 1e-14);
        }
        assert!(tfs.norm_defect() < 1e-14);
    }

    #[test]
    fn rejects_non_orthonormal_frames() {
        let mesh = fan_disk(8);
        let normals = vec![Vector3::z(); mesh.n_vertices()];
        let form = EdgeCochain::from_vector_field(&mesh, BoundaryFlavor::TangentialAtBoundary, |_| Vector3::x());
        let err = build_test_functions(&mesh, &normals, &form, &(Matrix3::identity() * 1.1)).unwrap_err();
        assert!(matches!(err, BoundsError::InvalidFrame(_)));
        let err = build_test_functions(&mesh, &normals[1..], &form, &Matrix3::identity()).unwrap_err();
        assert!(matches!(err, BoundsError::MissingGeometry(_)));
    }

    #[test]
    fn verdicts_for_disk_and_punctured_torus() {
        let (topo, hom) = profile(0, 1);
        let v = theorem_verdicts(Some(1), &topo, &hom, &ConvexityFlags::ALL, 0.5).unwrap();
        for x in v.all() {
            assert_eq!(x.bound, 0);
            assert_eq!(x.status, VerdictStatus::Pass);
        }
        let (topo, hom) = profile(1, 1);
        let v = theorem_verdicts(Some(1), &topo, &hom, &ConvexityFlags::ALL, 0.25).unwrap();
        assert_eq!((v.a.bound, v.b.bound, v.c.bound, v.f.bound), (1, 0, 1, 1));
        assert!((v.a.bound_real - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(v.f.bound_real, v.a.bound_real);
        let v = theorem_verdicts(Some(0), &topo, &hom, &ConvexityFlags::ALL, 0.25).unwrap();
        assert_eq!(v.a.status, VerdictStatus::Fail);
        assert_eq!(v.b.status, VerdictStatus::Pass);
    }

    #[test]
    fn verdicts_are_gated_by_hypotheses() {
        let (topo, hom) = profile(0, 1);
        let v = theorem_verdicts(Some(1), &topo, &hom, &ConvexityFlags::NONE, 0.5).unwrap();
        assert!(v.all().iter().all(|x| x.status == VerdictStatus::NotApplicable));
        let weak = ConvexityFlags {
            weakly_mean_convex: true,
            ..ConvexityFlags::NONE
        };
        let v = theorem_verdicts(Some(1), &topo, &hom, &weak, 0.5).unwrap();
        assert_eq!(v.a.status, VerdictStatus::NotApplicable);
        assert_eq!(v.c.status, VerdictStatus::Pass);
        let v = theorem_verdicts(None, &topo, &hom, &ConvexityFlags::ALL, 0.5).unwrap();
        assert_eq!(v.a.status, VerdictStatus::Fail);
        assert!(theorem_verdicts(Some(1), &topo, &hom, &ConvexityFlags::ALL, 1.5).is_err());
    }

    #[test]
    fn vanishing_runs_on_the_boundary() {
        let mesh = fan_disk(10);
        let lp = mesh.boundary_loops()[0].clone();
        let mut omega = vec![Vector3::x(); mesh.n_vertices()];
        assert_eq!(boundary_vanishing_fraction(&mesh, &omega), 0.0);
        // three consecutive vanishing vertices across the start of the loop
        for &v in [lp[0], lp[1], lp[lp.len() - 1]].iter() {
            omega[v] = Vector3::zeros();
        }
        assert!((boundary_vanishing_fraction(&mesh, &omega) - 0.3).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn wedge_norm_is_frame_free(
            axis in prop::array::uniform3(-1.0f64..1.0),
            angle in 0.0f64..6.28,
            n in prop::array::uniform3(-1.0f64..1.0),
            w in prop::array::uniform3(-1.0f64..1.0),
        ) {
            let axis = Vector3::from(axis);
            prop_assume!(axis.norm() > 1e-3);
            let r = Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle);
            let (n, w) = (Vector3::from(n), Vector3::from(w));
            let a = wedge_coordinates(&Matrix3::identity(), &n, &w);
            let b = wedge_coordinates(&rotated_frame(&r), &n, &w);
            let na: f64 = a.iter().map(|x| x * x).sum();
            let nb: f64 = b.iter().map(|x| x * x).sum();
            prop_assert!((na - nb).abs() <= 1e-12 * na.max(1e-300));
            prop_assert!((na - n.cross(&w).norm_squared()).abs() <= 1e-12 * na.max(1e-12));
        }
    }
}
