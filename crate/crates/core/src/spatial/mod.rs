//! Spatial acceleration: a k-d tree over points and an AABB hierarchy over
//! triangles, plus exact triangle predicates.

mod bvh;
mod intersect;
mod kdtree;

pub use bvh::{closest_point_on_triangle, ClosestPoint, TriangleBvh};
pub use intersect::{segment_intersects_triangle, triangles_intersect};
pub use kdtree::KdTree;
