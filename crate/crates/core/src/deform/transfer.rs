use std::collections::BTreeMap;

use super::{BiharmonicMap, DeformError, Result};
use crate::mesh::TriangleMesh;
use crate::spatial::TriangleBvh;

/// Projection distances above this fraction of the source bounding-box
/// diagonal are reported as warnings.
pub const FAR_PROJECTION_FRACTION: f64 = 0.01;

#[derive(Debug, Clone)]
pub struct TransferReport {
    pub map: BiharmonicMap,
    /// Largest distance from a target vertex to the source surface.
    pub max_distance: f64,
    /// Source bounding-box diagonal.
    pub diagonal: f64,
    /// Target vertices whose projection exceeded the warning distance.
    pub far_vertices: usize,
}

/// Carry a map computed on `source` over to a remeshed `target` surface.
///
/// Every target vertex is projected to the closest point on the source and
/// its row is the barycentric blend of the three source rows. Handle indices
/// keep referring to the source template.
pub fn transfer_map(map: &BiharmonicMap, source: &TriangleMesh, target: &TriangleMesh) -> Result<TransferReport> {
    if map.vertex_count() != source.vertex_count() {
        return Err(DeformError::Dimension(format!(
            "map has {} rows, source mesh has {} vertices",
            map.vertex_count(),
            source.vertex_count()
        )));
    }
    if target.vertex_count() == 0 {
        return Err(DeformError::Dimension("target mesh has no vertices".into()));
    }
    let bvh = TriangleBvh::new(source);
    let diagonal = source.bounding_box().diagonal();
    let warn_at = FAR_PROJECTION_FRACTION * diagonal;

    let mut row_ptr = vec![0];
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    let mut max_distance: f64 = 0.0;
    let mut far_vertices = 0;
    for v in target.vertices() {
        let hit = bvh
            .closest_point(v)
            .ok_or_else(|| DeformError::Dimension("source mesh has no faces".into()))?;
        let d = hit.distance_squared.sqrt();
        max_distance = max_distance.max(d);
        if d > warn_at {
            far_vertices += 1;
        }
        let face = source.faces()[hit.face];
        let mut row: BTreeMap<usize, f64> = BTreeMap::new();
        for k in 0..3 {
            let b = hit.bary[k];
            if b == 0.0 {
                continue;
            }
            let (cols, vals) = map.row(face[k]);
            for (&j, &w) in cols.iter().zip(vals) {
                *row.entry(j).or_insert(0.0) += b * w;
            }
        }
        for (j, w) in row {
            col_idx.push(j);
            values.push(w);
        }
        row_ptr.push(values.len());
    }
    if far_vertices > 0 {
        log::warn!(
            "{far_vertices} target vertices lie farther than {warn_at:.3e} from the source surface (max {max_distance:.3e})"
        );
    }
    let map = BiharmonicMap::from_csr(row_ptr, col_idx, values, map.handles().clone())?;
    Ok(TransferReport { map, max_distance, diagonal, far_vertices })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deform::{build_energy, compute_biharmonic, sample_handles, EnergyKind};
    use crate::mesh::{shapes, Vec3};

    #[test]
    fn identical_mesh_reproduces_the_map() {
        let m = shapes::icosphere(2);
        let e = build_energy(&m, EnergyKind::CotangentSquared).unwrap();
        let w = compute_biharmonic(&e, &sample_handles(&m, 12, 0).unwrap()).unwrap();
        let t = transfer_map(&w, &m, &m).unwrap();
        assert_eq!(t.max_distance, 0.0);
        assert_eq!(t.far_vertices, 0);
        let (a, b) = (w.to_dense(), t.map.to_dense());
        assert!((a - b).abs().max() < 1e-12);
    }

    #[test]
    fn far_vertices_are_counted() {
        let m = shapes::icosphere(1);
        let e = build_energy(&m, EnergyKind::UniformSquared).unwrap();
        let w = compute_biharmonic(&e, &sample_handles(&m, 6, 0).unwrap()).unwrap();
        let big = m.map_vertices(|v| v * 1.5 + Vec3::new(0.0, 0.0, 0.1));
        let t = transfer_map(&w, &m, &big).unwrap();
        assert_eq!(t.far_vertices, big.vertex_count());
        assert!(t.map.row_sum_error() < 1e-12);
    }
}
