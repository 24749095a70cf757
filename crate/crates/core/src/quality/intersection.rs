use rayon::prelude::*;

use crate::mesh::TriangleMesh;
use crate::spatial::{triangles_intersect, TriangleBvh};

fn share_vertex(a: &[usize; 3], b: &[usize; 3]) -> bool {
    a.iter().any(|v| b.contains(v))
}

/// Sorted pairs `(f, g)`, `f < g`, of faces that intersect and share no
/// vertex. Candidates come from bounding-box overlap in a BVH; every
/// candidate is decided by exact orientation predicates.
pub fn intersecting_pairs(mesh: &TriangleMesh) -> Vec<(usize, usize)> {
    let bvh = TriangleBvh::new(mesh);
    let faces = mesh.faces();
    (0..mesh.face_count())
        .into_par_iter()
        .flat_map_iter(|f| {
            let bvh = &bvh;
            bvh.overlapping(bvh.face_bounds(f))
                .into_iter()
                .filter(move |&g| g > f && !share_vertex(&faces[f], &faces[g]))
                .filter(move |&g| triangles_intersect(bvh.triangle(f), bvh.triangle(g)))
                .map(move |g| (f, g))
        })
        .collect()
}

/// Fraction of faces involved in at least one intersection with a face
/// that shares none of its vertices.
pub fn self_intersection_fraction(mesh: &TriangleMesh) -> f64 {
    if mesh.face_count() == 0 {
        return 0.0;
    }
    let mut hit = vec![false; mesh.face_count()];
    for (f, g) in intersecting_pairs(mesh) {
        hit[f] = true;
        hit[g] = true;
    }
    hit.iter().filter(|&&h| h).count() as f64 / mesh.face_count() as f64
}
