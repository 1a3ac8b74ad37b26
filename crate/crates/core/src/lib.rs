//! Scene-coherency objectives for multi-body triangle-mesh scenes.
//!
//! The crate computes two losses over a set of rigidly placed watertight
//! meshes seen through a pinhole camera:
//!
//! * an interpenetration penalty, built from a per-body clamped signed
//!   distance field sampled at the other bodies' vertices and robustified
//!   with a Geman-McClure kernel ([`penetration`]);
//! * an ordinal depth loss that compares a rendered instance map against an
//!   annotated one and pushes the two disagreeing bodies apart in depth
//!   ([`raster`]).
//!
//! [`refine`] descends a weighted sum of both over per-body translations,
//! and [`metrics`] reports collision counts and pairwise depth-order accuracy.
//!
//! Data-parallel kernels run on rayon when the `parallel` feature is on (the
//! default) and fall back to sequential loops otherwise. Results are
//! bit-identical either way and for any worker count.

pub mod error;
pub mod fixtures;
pub mod geometry;
pub mod image;
pub mod mesh;
pub mod metrics;
pub mod parallel;
pub mod penetration;
pub mod raster;
pub mod refine;
pub mod scene;
pub mod sdf;

mod bvh;

pub use error::{Error, Result};
pub use geometry::{Aabb, Vec3};
pub use image::{DepthMap, InstanceMap};
pub use mesh::{Transform, TriMesh};
pub use metrics::{MetricsReport, OrderingScore};
pub use penetration::{PenetrationConfig, PenetrationReport, RobustifierConfig};
pub use raster::{OrdinalDepthReport, RenderOutput};
pub use refine::{RefineConfig, RefineTrace};
pub use scene::{BodyInstance, Camera, Scene};
pub use sdf::DistanceField;
