//! Genus, boundary count and real (relative) simplicial homology.

use super::{MeshError, TriSurfaceMesh};
use crate::linalg::rank::{float_rank, integer_rank, IntMatrix};
use crate::scalar::Real;
use serde::{Deserialize, Serialize};

/// Relative singular-value cutoff of the floating point rank route.
pub const RANK_CUTOFF: f64 = 1e-10;

/// Matrices with fewer nonzeros than this are also ranked exactly.
pub const EXACT_RANK_NNZ_LIMIT: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub genus: usize,
    pub boundary_components: usize,
    pub euler_characteristic: i64,
}

pub fn topology<T: Real>(mesh: &TriSurfaceMesh<T>) -> Result<Topology, MeshError> {
    let chi = mesh.euler_characteristic();
    let r = mesh.boundary_loops().len();
    let twice_g = 2 - r as i64 - chi;
    if twice_g < 0 || twice_g % 2 != 0 {
        return Err(MeshError::InconsistentTopology(format!(
            "χ = {chi} with r = {r} gives 2g = {twice_g}"
        )));
    }
    Ok(Topology {
        genus: (twice_g / 2) as usize,
        boundary_components: r,
        euler_characteristic: chi,
    })
}

/// Both rank routes for one boundary matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankCheck {
    pub matrix: String,
    pub rows: usize,
    pub cols: usize,
    pub float_rank: usize,
    pub integer_rank: Option<usize>,
}

/// Real homology dimensions of the pair `(M, ∂M)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HomologyProfile {
    pub h0: usize,
    pub h1: usize,
    pub h0_boundary: usize,
    pub h1_boundary: usize,
    pub h0_relative: usize,
    pub h1_relative: usize,
    pub image_inclusion: usize,
    pub rank_checks: Vec<RankCheck>,
}

impl HomologyProfile {
    /// `dim H₁(M,∂M) = (r − 1) + (dim H₁(M) − dim Im i_*)`, checked in
    /// integer arithmetic.
    pub fn long_exact_sequence_holds(&self) -> bool {
        let rhs = (self.h0_boundary as i64 - 1) + (self.h1 as i64 - self.image_inclusion as i64);
        self.h1_relative as i64 == rhs
    }

    /// `dim H₁(M,∂M) = 2g + r − 1` for an orientable surface.
    pub fn matches_surface_formula(&self, topo: &Topology) -> bool {
        self.h1_relative as i64 == 2 * topo.genus as i64 + topo.boundary_components as i64 - 1
    }
}

fn checked_rank(name: &str, m: &IntMatrix, checks: &mut Vec<RankCheck>) -> Result<usize, MeshError> {
    let f = float_rank(m, RANK_CUTOFF);
    let i = if m.nnz() < EXACT_RANK_NNZ_LIMIT {
        Some(integer_rank(m).map_err(|e| MeshError::InconsistentTopology(e.to_string()))?)
    } else {
        None
    };
    if let Some(i) = i {
        if i != f {
            return Err(MeshError::RankMismatch {
                matrix: name.to_string(),
                float: f,
                integer: i,
            });
        }
    }
    checks.push(RankCheck {
        matrix: name.to_string(),
        rows: m.n_rows,
        cols: m.n_cols(),
        float_rank: f,
        integer_rank: i,
    });
    Ok(f)
}

/// Vertex-by-edge boundary matrix `∂₁` (edge `a < b` maps to `b − a`).
pub fn boundary_1<T: Real>(mesh: &TriSurfaceMesh<T>) -> IntMatrix {
    let mut d = IntMatrix::new(mesh.n_vertices());
    for e in mesh.edges() {
        d.push_column(vec![(e.v[0], -1), (e.v[1], 1)]);
    }
    d
}

/// Edge-by-triangle boundary matrix `∂₂` for the mesh orientation.
pub fn boundary_2<T: Real>(mesh: &TriSurfaceMesh<T>) -> IntMatrix {
    let mut d = IntMatrix::new(mesh.n_edges());
    for t in 0..mesh.n_triangles() {
        let te = mesh.triangle_edges(t);
        d.push_column((0..3).map(|k| (te[k], mesh.edge_sign(t, k))).collect());
    }
    d
}

pub fn homology_profile<T: Real>(mesh: &TriSurfaceMesh<T>) -> Result<HomologyProfile, MeshError> {
    let nv = mesh.n_vertices();
    let ne = mesh.n_edges();
    let d1 = boundary_1(mesh);
    let d2 = boundary_2(mesh);
    let mut checks = Vec::new();

    let r1 = checked_rank("d1", &d1, &mut checks)?;
    let r2 = checked_rank("d2", &d2, &mut checks)?;

    let bverts: Vec<usize> = (0..nv).filter(|&v| mesh.is_boundary_vertex(v)).collect();
    let iverts: Vec<usize> = (0..nv).filter(|&v| !mesh.is_boundary_vertex(v)).collect();
    let bedges: Vec<usize> = (0..ne).filter(|&e| mesh.edges()[e].is_boundary()).collect();
    let iedges: Vec<usize> = (0..ne).filter(|&e| !mesh.edges()[e].is_boundary()).collect();

    let d1_boundary = d1.select_columns(&bedges).select_rows(&bverts);
    let rb = checked_rank("d1_boundary", &d1_boundary, &mut checks)?;

    let d1_rel = d1.select_columns(&iedges).select_rows(&iverts);
    let d2_rel = d2.select_rows(&iedges);
    let r1_rel = checked_rank("d1_relative", &d1_rel, &mut checks)?;
    let r2_rel = checked_rank("d2_relative", &d2_rel, &mut checks)?;

    // boundary cycles as 1-chains of M
    let mut cycles = IntMatrix::new(ne);
    for lp in mesh.boundary_loops() {
        let col = (0..lp.len())
            .map(|i| {
                let (a, b) = (lp[i], lp[(i + 1) % lp.len()]);
                let e = mesh.edge_index(a, b).expect("loop edge exists");
                (e, if a < b { 1 } else { -1 })
            })
            .collect();
        cycles.push_column(col);
    }
    let r_aug = checked_rank("d2_with_boundary_cycles", &d2.hstack(&cycles), &mut checks)?;

    let h1_boundary = bedges.len() - rb;
    if h1_boundary != mesh.boundary_loops().len() {
        return Err(MeshError::InconsistentTopology(format!(
            "dim H1(∂M) = {h1_boundary} but {} boundary loops",
            mesh.boundary_loops().len()
        )));
    }

    Ok(HomologyProfile {
        h0: nv - r1,
        h1: ne - r1 - r2,
        h0_boundary: bverts.len() - rb,
        h1_boundary,
        h0_relative: iverts.len() - r1_rel,
        h1_relative: iedges.len() - r1_rel - r2_rel,
        image_inclusion: r_aug - r2,
        rank_checks: checks,
    })
}
