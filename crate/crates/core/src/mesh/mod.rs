//! Oriented triangulated surfaces with boundary.
//!
//! A [`TriSurfaceMesh`] is immutable once built. Construction validates the
//! 2-manifold conditions, repairs triangle winding so that every interior
//! edge is traversed once in each direction, and extracts the boundary
//! loops. Edges are stored with their endpoints in increasing index order,
//! which is also the orientation used by edge cochains.

mod io;
mod refine;
pub mod samples;
mod topology;

pub use io::{read_field, read_mesh, write_field, write_mesh, MeshIoError};
pub use refine::{refine, Reprojector};
pub use topology::{homology_profile, topology, HomologyProfile, RankCheck, Topology};

use crate::scalar::{lit, Real};
use nalgebra::{Point3, Vector3};
use std::collections::{HashMap, VecDeque};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeshError {
    #[error("mesh needs at least 3 vertices and 1 triangle (got {vertices} vertices, {triangles} triangles)")]
    TooSmall { vertices: usize, triangles: usize },
    #[error("triangle {triangle} references vertex {index} but there are only {count} vertices")]
    IndexOutOfRange {
        triangle: usize,
        index: usize,
        count: usize,
    },
    #[error("triangle {triangle} repeats a vertex")]
    DegenerateTriangle { triangle: usize },
    #[error("edge ({a}, {b}) is shared by {count} triangles")]
    NonManifoldEdge { a: usize, b: usize, count: usize },
    #[error("vertex {vertex} is not a manifold vertex")]
    NonManifoldVertex { vertex: usize },
    #[error("surface is not orientable")]
    Unorientable,
    #[error("surface is disconnected ({reason})")]
    Disconnected { reason: String },
    #[error("surface has no boundary")]
    NoBoundary,
    #[error("vertex {vertex} has a degenerate normal")]
    DegenerateNormal { vertex: usize },
    #[error("inconsistent topology: {0}")]
    InconsistentTopology(String),
    #[error("homology rank routes disagree for {matrix}: float {float} vs integer {integer}")]
    RankMismatch {
        matrix: String,
        float: usize,
        integer: usize,
    },
    #[error("reprojection failed: {0}")]
    ProjectionFailed(String),
}

/// Undirected edge with endpoints `v[0] < v[1]` and its incident triangles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub v: [usize; 2],
    pub triangles: Vec<usize>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.triangles.len() == 1
    }
}

#[derive(Debug, Clone)]
pub struct TriSurfaceMesh<T: Real> {
    vertices: Vec<Point3<T>>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    edge_lookup: HashMap<(usize, usize), usize>,
    triangle_edges: Vec<[usize; 3]>,
    boundary_loops: Vec<Vec<usize>>,
    vertex_normals: Vec<Vector3<T>>,
    vertex_on_boundary: Vec<bool>,
    reoriented: usize,
}

#[inline]
fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl<T: Real> TriSurfaceMesh<T> {
    /// Validates the input and derives edges, boundary loops and normals.
    pub fn build(vertices: Vec<Point3<T>>, triangles: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let nv = vertices.len();
        if nv < 3 || triangles.is_empty() {
            return Err(MeshError::TooSmall {
                vertices: nv,
                triangles: triangles.len(),
            });
        }
        for (t, tri) in triangles.iter().enumerate() {
            for &i in tri {
                if i >= nv {
                    return Err(MeshError::IndexOutOfRange {
                        triangle: t,
                        index: i,
                        count: nv,
                    });
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(MeshError::DegenerateTriangle { triangle: t });
            }
        }

        // edges in first-seen order
        let mut edge_lookup = HashMap::with_capacity(triangles.len() * 2);
        let mut edges: Vec<Edge> = Vec::new();
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut te = [0usize; 3];
            for k in 0..3 {
                let (a, b) = key(tri[k], tri[(k + 1) % 3]);
                let e = *edge_lookup.entry((a, b)).or_insert_with(|| {
                    edges.push(Edge {
                        v: [a, b],
                        triangles: Vec::with_capacity(2),
                    });
                    edges.len() - 1
                });
                edges[e].triangles.push(t);
                te[k] = e;
            }
            triangle_edges.push(te);
        }
        for e in &edges {
            if e.triangles.len() > 2 {
                return Err(MeshError::NonManifoldEdge {
                    a: e.v[0],
                    b: e.v[1],
                    count: e.triangles.len(),
                });
            }
            if e.triangles.len() == 2 && e.triangles[0] == e.triangles[1] {
                return Err(MeshError::NonManifoldEdge {
                    a: e.v[0],
                    b: e.v[1],
                    count: 2,
                });
            }
        }

        let mut used = vec![false; nv];
        triangles.iter().flatten().for_each(|&i| used[i] = true);
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(MeshError::Disconnected {
                reason: format!("vertex {v} is not referenced by any triangle"),
            });
        }

        let (triangles, reoriented) = orient(&triangles, &edges, &triangle_edges)?;
        let triangle_edges: Vec<[usize; 3]> = triangles
            .iter()
            .map(|tri| std::array::from_fn(|k| edge_lookup[&key(tri[k], tri[(k + 1) % 3])]))
            .collect();

        let mut vertex_on_boundary = vec![false; nv];
        for e in edges.iter().filter(|e| e.is_boundary()) {
            vertex_on_boundary[e.v[0]] = true;
            vertex_on_boundary[e.v[1]] = true;
        }
        let boundary_loops = extract_loops(&vertices, &triangles, &edges, &edge_lookup)?;
        if boundary_loops.is_empty() {
            return Err(MeshError::NoBoundary);
        }

        check_vertex_fans(nv, &triangles, &vertex_on_boundary)?;

        let mut mesh = Self {
            vertices,
            triangles,
            edges,
            edge_lookup,
            triangle_edges,
            boundary_loops,
            vertex_normals: Vec::new(),
            vertex_on_boundary,
            reoriented,
        };
        mesh.vertex_normals = mesh.compute_vertex_normals()?;
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Point3<T>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Edge indices of triangle `t`; entry `k` joins corners `k` and `k + 1`.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.triangle_edges[t]
    }

    pub fn boundary_loops(&self) -> &[Vec<usize>] {
        &self.boundary_loops
    }

    pub fn vertex_normals(&self) -> &[Vector3<T>] {
        &self.vertex_normals
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.vertex_on_boundary[v]
    }

    pub fn boundary_vertex_flags(&self) -> &[bool] {
        &self.vertex_on_boundary
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Number of input triangles whose winding was flipped during build.
    pub fn reoriented_triangles(&self) -> usize {
        self.reoriented
    }

    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_lookup.get(&key(a, b)).copied()
    }

    /// `+1` if triangle `t` traverses its `k`-th edge from low to high index.
    pub fn edge_sign(&self, t: usize, k: usize) -> i64 {
        let tri = self.triangles[t];
        if tri[k] < tri[(k + 1) % 3] {
            1
        } else {
            -1
        }
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges.len() as i64 + self.triangles.len() as i64
    }

    pub fn corners(&self, t: usize) -> [Point3<T>; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Unnormalized face normal `(b - a) × (c - a)`; its norm is twice the area.
    pub fn face_normal_raw(&self, t: usize) -> Vector3<T> {
        let [a, b, c] = self.corners(t);
        (b - a).cross(&(c - a))
    }

    pub fn triangle_area(&self, t: usize) -> T {
        self.face_normal_raw(t).norm() * lit(0.5)
    }

    pub fn total_area(&self) -> T {
        (0..self.n_triangles()).fold(T::zero(), |s, t| s + self.triangle_area(t))
    }

    pub fn edge_length(&self, e: usize) -> T {
        let [a, b] = self.edges[e].v;
        (self.vertices[b] - self.vertices[a]).norm()
    }

    /// Longest edge over the mesh.
    pub fn max_edge_length(&self) -> T {
        (0..self.n_edges()).fold(T::zero(), |m, e| m.max(self.edge_length(e)))
    }

    /// Boundary edges as directed pairs `(a, b)` following triangle winding.
    pub fn directed_boundary_edges(&self) -> Vec<(usize, usize)> {
        self.boundary_loops
            .iter()
            .flat_map(|l| (0..l.len()).map(move |i| (l[i], l[(i + 1) % l.len()])))
            .collect()
    }

    /// Outward unit conormal of a directed boundary edge `(a, b)`, lying in
    /// the plane of its triangle and pointing away from the opposite corner.
    pub fn edge_conormal(&self, a: usize, b: usize) -> Vector3<T> {
        let e = self.edge_index(a, b).expect("boundary edge exists");
        let t = self.edges[e].triangles[0];
        let n = self.face_normal_raw(t);
        let dir = self.vertices[b] - self.vertices[a];
        dir.cross(&n).normalize()
    }

    /// Discrete outward conormal at each boundary vertex: the normalized mean
    /// of the conormals of its two boundary edges. Interior vertices get zero.
    pub fn vertex_conormals(&self) -> Vec<Vector3<T>> {
        let mut out = vec![Vector3::zeros(); self.n_vertices()];
        for (a, b) in self.directed_boundary_edges() {
            let c = self.edge_conormal(a, b);
            out[a] += c;
            out[b] += c;
        }
        for v in out.iter_mut() {
            let n = v.norm();
            if n > T::zero() {
                *v /= n;
            }
        }
        out
    }

    /// Geometric length of a boundary loop.
    pub fn loop_length(&self, l: usize) -> T {
        loop_length(&self.vertices, &self.boundary_loops[l])
    }

    /// Vertices adjacent to `v` through an edge.
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut nb = vec![Vec::new(); self.n_vertices()];
        for e in &self.edges {
            nb[e.v[0]].push(e.v[1]);
            nb[e.v[1]].push(e.v[0]);
        }
        nb.iter_mut().for_each(|n| n.sort_unstable());
        nb
    }

    /// Triangles incident to each vertex.
    pub fn vertex_triangles(&self) -> Vec<Vec<usize>> {
        let mut vt = vec![Vec::new(); self.n_vertices()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                vt[v].push(t);
            }
        }
        vt
    }

    /// Interior angle of triangle `t` at corner `k`.
    pub fn corner_angle(&self, t: usize, k: usize) -> T {
        let p = self.corners(t);
        let u = p[(k + 1) % 3] - p[k];
        let w = p[(k + 2) % 3] - p[k];
        u.cross(&w).norm().atan2(u.dot(&w))
    }

    fn compute_vertex_normals(&self) -> Result<Vec<Vector3<T>>, MeshError> {
        let mut normals = vec![Vector3::zeros(); self.n_vertices()];
        for t in 0..self.n_triangles() {
            let n = self.face_normal_raw(t);
            let len = n.norm();
            if len <= T::zero() {
                continue;
            }
            let n = n / len;
            for k in 0..3 {
                normals[self.triangles[t][k]] += n * self.corner_angle(t, k);
            }
        }
        for (v, n) in normals.iter_mut().enumerate() {
            let len = n.norm();
            if !(len > T::zero()) {
                return Err(MeshError::DegenerateNormal { vertex: v });
            }
            *n /= len;
        }
        Ok(normals)
    }

    /// Relabels vertices with `perm[new] = old`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self, MeshError> {
        let mut inv = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let vertices = perm.iter().map(|&old| self.vertices[old]).collect();
        let triangles = self
            .triangles
            .iter()
            .map(|t| [inv[t[0]], inv[t[1]], inv[t[2]]])
            .collect();
        Self::build(vertices, triangles)
    }

    /// Applies a map to every vertex position, keeping connectivity.
    pub fn map_vertices(&self, f: impl Fn(&Point3<T>) -> Point3<T>) -> Result<Self, MeshError> {
        Self::build(self.vertices.iter().map(f).collect(), self.triangles.clone())
    }
}

fn loop_length<T: Real>(vertices: &[Point3<T>], lp: &[usize]) -> T {
    (0..lp.len()).fold(T::zero(), |s, i| {
        s + (vertices[lp[(i + 1) % lp.len()]] - vertices[lp[i]]).norm()
    })
}

/// Breadth-first propagation of a consistent winding. Returns the possibly
/// flipped triangles and how many were flipped.
fn orient(
    triangles: &[[usize; 3]],
    edges: &[Edge],
    triangle_edges: &[[usize; 3]],
) -> Result<(Vec<[usize; 3]>, usize), MeshError> {
    let nt = triangles.len();
    let mut flip: Vec<Option<bool>> = vec![None; nt];
    let direction = |t: usize, flipped: bool, a: usize, b: usize| -> bool {
        // true if (oriented) triangle t traverses a -> b
        let tri = triangles[t];
        let fwd = (0..3).any(|k| tri[k] == a && tri[(k + 1) % 3] == b);
        fwd != flipped
    };
    flip[0] = Some(false);
    let mut queue = VecDeque::from([0usize]);
    let mut visited = 1;
    while let Some(t) = queue.pop_front() {
        let ft = flip[t].unwrap();
        for &e in &triangle_edges[t] {
            let [a, b] = edges[e].v;
            for &u in &edges[e].triangles {
                if u == t {
                    continue;
                }
                let t_ab = direction(t, ft, a, b);
                // neighbour must traverse the edge the other way
                let u_ab_unflipped = direction(u, false, a, b);
                let need_flip = u_ab_unflipped == t_ab;
                match flip[u] {
                    None => {
                        flip[u] = Some(need_flip);
                        visited += 1;
                        queue.push_back(u);
                    }
                    Some(f) if f != need_flip => return Err(MeshError::Unorientable),
                    Some(_) => {}
                }
            }
        }
    }
    if visited != nt {
        return Err(MeshError::Disconnected {
            reason: format!("{} of {} triangles reachable", visited, nt),
        });
    }
    let mut count = 0;
    let out = triangles
        .iter()
        .zip(&flip)
        .map(|(tri, f)| {
            if f.unwrap() {
                count += 1;
                [tri[0], tri[2], tri[1]]
            } else {
                *tri
            }
        })
        .collect();
    Ok((out, count))
}

fn extract_loops<T: Real>(
    vertices: &[Point3<T>],
    triangles: &[[usize; 3]],
    edges: &[Edge],
    edge_lookup: &HashMap<(usize, usize), usize>,
) -> Result<Vec<Vec<usize>>, MeshError> {
    let mut next: HashMap<usize, usize> = HashMap::new();
    let mut incoming: HashMap<usize, usize> = HashMap::new();
    for tri in triangles {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            let e = edge_lookup[&key(a, b)];
            if edges[e].is_boundary() {
                if next.insert(a, b).is_some() {
                    return Err(MeshError::NonManifoldVertex { vertex: a });
                }
                if incoming.insert(b, a).is_some() {
                    return Err(MeshError::NonManifoldVertex { vertex: b });
                }
            }
        }
    }
    let mut starts: Vec<usize> = next.keys().copied().collect();
    starts.sort_unstable();
    let mut seen = std::collections::HashSet::new();
    let mut loops = Vec::new();
    for s in starts {
        if seen.contains(&s) {
            continue;
        }
        let mut lp = vec![s];
        seen.insert(s);
        let mut cur = next[&s];
        while cur != s {
            if !seen.insert(cur) {
                return Err(MeshError::NonManifoldVertex { vertex: cur });
            }
            lp.push(cur);
            cur = *next.get(&cur).ok_or(MeshError::NonManifoldVertex { vertex: cur })?;
        }
        loops.push(lp);
    }
    // descending geometric length, ties by smallest vertex
    loops.sort_by(|a, b| {
        let (la, lb) = (loop_length(vertices, a), loop_length(vertices, b));
        lb.partial_cmp(&la)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a[0].cmp(&b[0]))
    });
    Ok(loops)
}

/// Every vertex star must be a single fan: a disk for interior vertices and a
/// half-disk for boundary vertices.
fn check_vertex_fans(nv: usize, triangles: &[[usize; 3]], on_boundary: &[bool]) -> Result<(), MeshError> {
    // link edges per vertex: for triangle (a,b,c), vertex a sees link edge b->c
    let mut link: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nv];
    for tri in triangles {
        for k in 0..3 {
            link[tri[k]].push((tri[(k + 1) % 3], tri[(k + 2) % 3]));
        }
    }
    for v in 0..nv {
        let edges = &link[v];
        let succ: HashMap<usize, usize> = edges.iter().copied().collect();
        let pred: HashMap<usize, usize> = edges.iter().map(|&(a, b)| (b, a)).collect();
        let start = if on_boundary[v] {
            // start of the open chain: a link vertex with no predecessor
            match edges.iter().find(|(a, _)| !pred.contains_key(a)) {
                Some(&(a, _)) => a,
                None => return Err(MeshError::NonManifoldVertex { vertex: v }),
            }
        } else {
            edges[0].0
        };
        let mut count = 0;
        let mut cur = start;
        while let Some(&n) = succ.get(&cur) {
            count += 1;
            cur = n;
            if cur == start || count > edges.len() {
                break;
            }
        }
        if count != edges.len() {
            return Err(MeshError::NonManifoldVertex { vertex: v });
        }
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod fixtures {
    pub use super::samples::*;
    use nalgebra::Point3;

    pub fn p(x: f64, y: f64, z: f64) -> Point3<f64> {
        Point3::new(x, y, z)
    }
}
