use std::f64::consts::PI;

use rayon::prelude::*;

use super::{QualityError, Result};
use crate::mesh::{Aabb, MeshError, TriangleMesh, Vec3};

const MAX_VOXELS: u128 = 1 << 31;

/// Generalised winding number of `mesh` at `p`: the summed signed solid
/// angle of its triangles over `4 pi`.
pub fn winding_number(mesh: &TriangleMesh, p: &Vec3) -> f64 {
    let total: f64 = mesh
        .faces()
        .iter()
        .map(|&[i, j, k]| {
            let a = mesh.vertices()[i] - p;
            let b = mesh.vertices()[j] - p;
            let c = mesh.vertices()[k] - p;
            let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
            let det = a.dot(&b.cross(&c));
            let div = la * lb * lc + a.dot(&b) * lc + b.dot(&c) * la + c.dot(&a) * lb;
            2.0 * det.atan2(div)
        })
        .sum();
    total / (4.0 * PI)
}

fn check_closed(mesh: &TriangleMesh) -> Result<()> {
    let edges = mesh.boundary_edges();
    if !edges.is_empty() {
        return Err(QualityError::Mesh(MeshError::OpenMesh { edges }));
    }
    Ok(())
}

/// Dice overlap of the solids bounded by two closed meshes, voxelised on
/// their shared bounding grid with cubic cells of side `spacing`. A voxel is
/// inside when the winding number at its centre has magnitude at least 0.5.
/// Two solids too thin to cover any voxel centre count as identical.
pub fn dice(a: &TriangleMesh, b: &TriangleMesh, spacing: f64) -> Result<f64> {
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(QualityError::InvalidSpacing(spacing));
    }
    check_closed(a)?;
    check_closed(b)?;
    let (ba, bb) = (a.bounding_box(), b.bounding_box());
    let grid = ba.merge(&bb);
    let dims: Vec<usize> = (0..3).map(|d| (((grid.max[d] - grid.min[d]) / spacing).ceil() as usize).max(1)).collect();
    let total = dims.iter().map(|&d| d as u128).product::<u128>();
    if total > MAX_VOXELS {
        return Err(QualityError::GridTooLarge(total));
    }
    let inside = |mesh: &TriangleMesh, bounds: &Aabb, p: &Vec3| bounds.contains(p) && winding_number(mesh, p).abs() >= 0.5;
    let counts = (0..dims[2])
        .into_par_iter()
        .map(|k| {
            let mut c = [0u64; 3];
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let p = grid.min + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * spacing;
                    let (ia, ib) = (inside(a, &ba, &p), inside(b, &bb, &p));
                    c[0] += ia as u64;
                    c[1] += ib as u64;
                    c[2] += (ia && ib) as u64;
                }
            }
            c
        })
        .reduce(|| [0; 3], |x, y| [x[0] + y[0], x[1] + y[1], x[2] + y[2]]);
    if counts[0] + counts[1] == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * counts[2] as f64 / (counts[0] + counts[1]) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;

    #[test]
    fn winding_number_inside_and_outside() {
        let s = shapes::icosphere(2);
        assert!((winding_number(&s, &Vec3::zeros()) - 1.0).abs() < 1e-12);
        assert!(winding_number(&s, &Vec3::new(2.0, 0.3, 0.0)).abs() < 1e-12);
    }

    #[test]
    fn identical_disjoint_and_shifted_cubes() {
        let cube = shapes::unit_cube();
        assert_eq!(dice(&cube, &cube, 0.1).unwrap(), 1.0);
        let far = cube.map_vertices(|v| v + Vec3::new(3.0, 0.0, 0.0));
        assert_eq!(dice(&cube, &far, 0.1).unwrap(), 0.0);
        let half = cube.map_vertices(|v| v + Vec3::new(0.5, 0.0, 0.0));
        let d = dice(&cube, &half, 0.05).unwrap();
        assert!((d - 0.5).abs() <= 0.02, "{d}");
        assert_eq!(d, dice(&half, &cube, 0.05).unwrap());
    }

    #[test]
    fn open_mesh_and_bad_spacing_are_rejected() {
        let cube = shapes::unit_cube();
        let open = TriangleMesh::new(cube.vertices().to_vec(), cube.faces()[2..].to_vec()).unwrap();
        assert!(matches!(dice(&open, &cube, 0.1), Err(QualityError::Mesh(MeshError::OpenMesh { .. }))));
        assert!(matches!(dice(&cube, &cube, 0.0), Err(QualityError::InvalidSpacing(_))));
    }
}
