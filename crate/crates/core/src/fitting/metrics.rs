use serde::Serialize;

use super::Result;
use crate::energies::{orthogonal_energy, structure_vertices, TargetSampling, TargetSet};
use crate::mesh::{surface_samples_on, SurfaceSamples, TaggedMesh};
use crate::quality::{cap_coplanarity, cap_wall_orthogonality, point_set_distance, CwoVariant};

/// Accuracy and cap-quality summary of a fitted surface.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitMetrics {
    /// Symmetric mean nearest-sample distance to the targets.
    pub chamfer: f64,
    pub hausdorff: f64,
    /// Mean over caps of the centroid-axis orthogonality score.
    pub cwo: Option<f64>,
    /// Mean over caps of the best-fit-plane distance.
    pub coplanarity: Option<f64>,
    /// Summed `|<wall normal, mean cap normal>|`.
    pub orthogonal: Option<f64>,
}

/// Points of `mesh` drawn the way `targets` were drawn from its target:
/// structure vertices for vertex targets, otherwise surface samples with the
/// same per-structure counts, seeds and order as
/// [`TargetSet::sample_structures`] (with `seed` when the set does not record
/// one). A mesh identical to the target yields identical points.
pub fn sample_like_targets(mesh: &TaggedMesh, targets: &TargetSet, seed: u64) -> Result<SurfaceSamples> {
    let mut parts = Vec::new();
    for (k, (name, faces)) in mesh.tags.structures.iter().enumerate() {
        let Some(t) = targets.supervised.get(name) else { continue };
        parts.push(match targets.sampling {
            Some(TargetSampling::Vertices) => structure_vertices(mesh, faces)?,
            Some(TargetSampling::Surface { seed }) => surface_samples_on(&mesh.mesh, Some(faces), t.len(), seed.wrapping_add(k as u64))?,
            None => surface_samples_on(&mesh.mesh, Some(faces), t.len(), seed.wrapping_add(k as u64))?,
        });
    }
    Ok(SurfaceSamples::concat(&parts))
}

fn mean(values: Vec<f64>) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

impl FitMetrics {
    pub fn compute(mesh: &TaggedMesh, targets: &TargetSet, seed: u64) -> Result<Self> {
        let ours = sample_like_targets(mesh, targets, seed)?;
        let theirs = targets.union();
        let (chamfer, hausdorff) = if ours.is_empty() || theirs.is_empty() {
            (0.0, 0.0)
        } else {
            let d = point_set_distance(&ours.points, &theirs.points);
            (d.chamfer, d.hausdorff)
        };
        let has_caps = !mesh.tags.caps.is_empty();
        let cwo = cap_wall_orthogonality(&mesh.mesh, &mesh.tags, CwoVariant::CentroidAxis).ok().and_then(mean);
        let coplanarity = cap_coplanarity(&mesh.mesh, &mesh.tags).ok().and_then(mean);
        let orthogonal = if has_caps { orthogonal_energy(&mesh.mesh, &mesh.tags).ok().map(|l| l.value) } else { None };
        Ok(Self { chamfer, hausdorff, cwo, coplanarity, orthogonal })
    }
}
