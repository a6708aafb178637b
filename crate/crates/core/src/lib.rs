//! Morse index and harmonic 1-forms of discretized free boundary minimal
//! surfaces in Euclidean domains, and lower bounds for the index in terms of
//! the relative homology of the surface.
//!
//! Numerical types are generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases below fix the scalar for the common cases.

pub mod ambient;
pub mod bounds;
pub mod exemplars;
pub mod geometry;
pub mod hodge;
pub mod jacobi;
pub mod linalg;
pub mod mesh;
pub mod scalar;

pub type Mesh = mesh::TriSurfaceMesh<f64>;
pub type Mesh32 = mesh::TriSurfaceMesh<f32>;
pub type Domain = ambient::AmbientDomain<f64>;
pub type Domain32 = ambient::AmbientDomain<f32>;
pub type Exemplar = exemplars::ExemplarSurface<f64>;
pub type Exemplar32 = exemplars::ExemplarSurface<f32>;
pub type Fields = geometry::GeometricFields<f64>;
pub type Fields32 = geometry::GeometricFields<f32>;
pub type Assembly = jacobi::QuadraticFormAssembly<f64>;
pub type Assembly32 = jacobi::QuadraticFormAssembly<f32>;
pub type Cochain = hodge::EdgeCochain<f64>;
pub type Cochain32 = hodge::EdgeCochain<f32>;
