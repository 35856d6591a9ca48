//! Quad-only mesh reconstruction from point clouds.
//!
//! Every point proposes quadrilaterals with triples of its nearest
//! neighbours; a trainable classifier keeps the ones that lie on the
//! surface, and a repair pass removes overlaps and fills small holes.
//!
//! Geometry is generic over [`Real`] (`f32` or `f64`); the learner runs in
//! `f64`. The aliases below name the common `f64` instantiations.

pub mod candidates;
pub mod dataset;
pub mod error;
pub mod features;
pub mod geom;
pub mod learner;
pub mod mesh;
pub mod metrics;
pub mod pipeline;
pub mod postprocess;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Point = geom::Vec3<f64>;
pub type Cloud = mesh::PointCloud<f64>;
pub type Mesh = mesh::QuadMesh<f64>;
pub type Candidate = candidates::CandidateFace<f64>;

pub type Point32 = geom::Vec3<f32>;
pub type Cloud32 = mesh::PointCloud<f32>;
pub type Mesh32 = mesh::QuadMesh<f32>;
