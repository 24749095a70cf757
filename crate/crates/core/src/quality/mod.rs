//! Simulation-readiness and accuracy metrics for fitted surfaces.

mod caps;
mod dice;
mod distance;
mod intersection;
mod report;

use thiserror::Error;

pub use caps::{cap_coplanarity, cap_wall_orthogonality, CwoVariant};
pub use dice::{dice, winding_number};
pub use distance::{chamfer_and_hausdorff, point_set_distance, SurfaceDistance};
pub use intersection::{intersecting_pairs, self_intersection_fraction};
pub use report::{quality_report, round_significant, CapQuality, QualityReport, ReportOptions};

use crate::mesh::MeshError;

#[derive(Debug, Error)]
pub enum QualityError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("cap `{cap}`: mean {what} normal has zero length")]
    ZeroMeanNormal { cap: String, what: &'static str },
    #[error("cap `{0}` has fewer than three non-collinear vertices")]
    CollinearCap(String),
    #[error("cap `{0}` has no cap or wall faces")]
    EmptyCap(String),
    #[error("mesh has no faces to sample")]
    EmptyMesh,
    #[error("voxel spacing must be positive and finite, got {0}")]
    InvalidSpacing(f64),
    #[error("voxel grid of {0} cells is too large")]
    GridTooLarge(u128),
}

pub type Result<T, E = QualityError> = std::result::Result<T, E>;
