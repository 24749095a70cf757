use rayon::prelude::*;
use serde::Serialize;

use super::{QualityError, Result};
use crate::mesh::{surface_samples, TriangleMesh, Vec3};
use crate::spatial::KdTree;

/// Symmetric surface distances in model units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurfaceDistance {
    /// Mean of the two directed mean nearest-neighbour distances.
    pub chamfer: f64,
    /// Largest nearest-neighbour distance in either direction.
    pub hausdorff: f64,
}

fn directed(from: &[Vec3], to: &KdTree) -> (f64, f64) {
    let d: Vec<f64> = from.par_iter().map(|p| to.nearest(p).expect("nonempty").1.sqrt()).collect();
    (d.iter().sum::<f64>() / d.len() as f64, d.iter().copied().fold(0.0, f64::max))
}

/// Chamfer and Hausdorff distances between two nonempty point sets.
pub fn point_set_distance(a: &[Vec3], b: &[Vec3]) -> SurfaceDistance {
    assert!(!a.is_empty() && !b.is_empty(), "point sets must be nonempty");
    let (ta, tb) = (KdTree::new(a), KdTree::new(b));
    let (mean_ab, max_ab) = directed(a, &tb);
    let (mean_ba, max_ba) = directed(b, &ta);
    SurfaceDistance { chamfer: 0.5 * (mean_ab + mean_ba), hausdorff: max_ab.max(max_ba) }
}

/// Distances between `samples` area-weighted points drawn from each surface
/// with the same `seed`.
pub fn chamfer_and_hausdorff(a: &TriangleMesh, b: &TriangleMesh, samples: usize, seed: u64) -> Result<SurfaceDistance> {
    if a.face_count() == 0 || b.face_count() == 0 {
        return Err(QualityError::EmptyMesh);
    }
    let sa = surface_samples(a, samples, seed)?;
    let sb = surface_samples(b, samples, seed)?;
    Ok(point_set_distance(&sa.points, &sb.points))
}
