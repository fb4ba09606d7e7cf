//! Locality-aware point-cloud network (PCN) pipeline.
//!
//! Implements the software model of an islandization-based PCN optimizer:
//! octree-indexed data structuring, octree-based islandization, and
//! hub-based scheduling with cached-result reuse and delta compensation,
//! plus the workload accounting that quantifies memory-fetch and
//! computation savings against an unoptimized baseline.

pub mod accounting;
pub mod cloud;
pub mod config;
pub mod error;
pub mod feature;
pub mod islandization;
pub mod morton;
pub mod octree;
pub mod scheduling;
pub mod structuring;
pub mod synth;

pub use cloud::{compute_bounds, Aabb, Point3, PointCloud, PointRecord};
pub use config::{NeighborMethod, ReuseMode, RunConfig};
pub use error::LpcnError;
pub use morton::MortonCode;
pub use octree::Octree;
