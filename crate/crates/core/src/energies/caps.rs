use super::{backprop_normal, unit_normal, EnergyError, LossValue, Result};
use crate::mesh::{CapRecord, TemplateTags, TriangleMesh, Vec3};

fn face_normals(vertices: &[Vec3], faces: &[[usize; 3]], ids: &[usize]) -> Result<Vec<(Vec3, f64)>> {
    ids.iter().map(|&f| unit_normal(vertices, &faces[f], f)).collect()
}

fn mean_normal(normals: &[(Vec3, f64)]) -> Vec3 {
    normals.iter().fold(Vec3::zeros(), |acc, (n, _)| acc + n) / normals.len() as f64
}

/// `sum_j |n_j - mean(n)|^2` over the cap faces of one cap.
pub(crate) fn coplanar_term(
    vertices: &[Vec3],
    faces: &[[usize; 3]],
    cap: &CapRecord,
    scale: f64,
    grad: &mut [Vec3],
) -> Result<f64> {
    if cap.cap_faces.is_empty() {
        return Err(EnergyError::EmptyCap(cap.name.clone()));
    }
    let normals = face_normals(vertices, faces, &cap.cap_faces)?;
    let mean = mean_normal(&normals);
    let mut value = 0.0;
    for (&f, (n, len)) in cap.cap_faces.iter().zip(&normals) {
        let d = n - mean;
        value += d.norm_squared();
        if scale != 0.0 {
            backprop_normal(vertices, &faces[f], n, *len, &(d * (2.0 * scale)), grad);
        }
    }
    Ok(value)
}

/// `sum_j |<n_j, mean(n_cap)>|` over the wall faces of one cap. Dot products
/// are appended to `dots`; an exact zero contributes a zero subgradient.
pub(crate) fn orthogonal_term(
    vertices: &[Vec3],
    faces: &[[usize; 3]],
    cap: &CapRecord,
    scale: f64,
    grad: &mut [Vec3],
    dots: &mut Vec<f64>,
) -> Result<f64> {
    if cap.cap_faces.is_empty() {
        return Err(EnergyError::EmptyCap(cap.name.clone()));
    }
    if cap.wall_faces.is_empty() {
        return Err(EnergyError::EmptyWall(cap.name.clone()));
    }
    let cap_normals = face_normals(vertices, faces, &cap.cap_faces)?;
    let wall_normals = face_normals(vertices, faces, &cap.wall_faces)?;
    let mean = mean_normal(&cap_normals);
    let mut value = 0.0;
    let mut pull = Vec3::zeros();
    for (&f, (n, len)) in cap.wall_faces.iter().zip(&wall_normals) {
        let d = n.dot(&mean);
        dots.push(d);
        value += d.abs();
        let s = if d > 0.0 {
            1.0
        } else if d < 0.0 {
            -1.0
        } else {
            0.0
        };
        if s != 0.0 && scale != 0.0 {
            backprop_normal(vertices, &faces[f], n, *len, &(mean * (s * scale)), grad);
            pull += n * s;
        }
    }
    if scale != 0.0 && pull != Vec3::zeros() {
        let dn = pull * (scale / cap_normals.len() as f64);
        for (&f, (n, len)) in cap.cap_faces.iter().zip(&cap_normals) {
            backprop_normal(vertices, &faces[f], n, *len, &dn, grad);
        }
    }
    Ok(value)
}

/// Sum over caps of the squared deviation of cap-face normals from their mean.
pub fn coplanar_energy(mesh: &TriangleMesh, tags: &TemplateTags) -> Result<LossValue> {
    let mut gradient = vec![Vec3::zeros(); mesh.vertex_count()];
    let mut value = 0.0;
    for cap in &tags.caps {
        value += coplanar_term(mesh.vertices(), mesh.faces(), cap, 1.0, &mut gradient)?;
    }
    Ok(LossValue { value, gradient })
}

/// Sum over caps of `|<n_wall, mean cap normal>|` across the adjacent walls.
pub fn orthogonal_energy(mesh: &TriangleMesh, tags: &TemplateTags) -> Result<LossValue> {
    let mut gradient = vec![Vec3::zeros(); mesh.vertex_count()];
    let mut value = 0.0;
    let mut dots = Vec::new();
    for cap in &tags.caps {
        value += orthogonal_term(mesh.vertices(), mesh.faces(), cap, 1.0, &mut gradient, &mut dots)?;
    }
    Ok(LossValue { value, gradient })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energies::testing::{finite_difference, jitter, max_relative_error};
    use crate::mesh::shapes;

    fn two_face_cap() -> (TriangleMesh, TemplateTags) {
        // Face 0 lies in z = 0 (normal +z), face 1 in x = 0 with normal +x.
        let mesh = TriangleMesh::new(
            vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::new(0.0, 1.0, 1.0), Vec3::z()],
            vec![[0, 1, 2], [0, 2, 4]],
        )
        .unwrap();
        let mut tags = TemplateTags::whole(&mesh, "s");
        tags.caps.push(CapRecord { name: "c".into(), cap_faces: vec![0, 1], wall_faces: vec![], inlet: false });
        (mesh, tags)
    }

    #[test]
    fn two_face_cap_hand_value() {
        let (mesh, tags) = two_face_cap();
        assert!((coplanar_energy(&mesh, &tags).unwrap().value - 1.0).abs() < 1e-15);
        assert!(matches!(orthogonal_energy(&mesh, &tags), Err(EnergyError::EmptyWall(_))));
    }

    #[test]
    fn ideal_cylinder_is_flat_and_orthogonal() {
        let cyl = shapes::capped_cylinder(1.0, 3.0, 24, 6, 2);
        assert!(coplanar_energy(&cyl.mesh, &cyl.tags).unwrap().value < 1e-24);
        assert!(orthogonal_energy(&cyl.mesh, &cyl.tags).unwrap().value < 1e-12);
    }

    #[test]
    fn wall_parallel_to_cap_contributes_one() {
        let mesh = TriangleMesh::new(
            vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.0, 1.0), Vec3::new(0.0, 1.0, 1.0)],
            vec![[0, 1, 2], [3, 4, 5]],
        )
        .unwrap();
        let mut tags = TemplateTags::whole(&mesh, "s");
        tags.caps.push(CapRecord { name: "c".into(), cap_faces: vec![0], wall_faces: vec![1], inlet: false });
        assert!((orthogonal_energy(&mesh, &tags).unwrap().value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tilting_a_cap_face_raises_coplanar_energy() {
        let cyl = shapes::capped_cylinder(1.0, 3.0, 16, 4, 2);
        let cap = &cyl.tags.caps[0];
        let apex = cyl.mesh.faces()[cap.cap_faces[0]][0];
        let mut v = cyl.mesh.vertices().to_vec();
        v[apex].z += 0.05;
        let tilted = cyl.mesh.with_vertices(v).unwrap();
        assert!(coplanar_energy(&tilted, &cyl.tags).unwrap().value > 1e-6);
    }

    fn perturbed_cylinder(seed: u64) -> (TriangleMesh, TemplateTags) {
        let cyl = shapes::capped_cylinder(1.0, 3.0, 12, 4, 2);
        (jitter(&cyl.mesh, 0.05, seed), cyl.tags)
    }

    #[test]
    fn cap_gradients_match_finite_differences() {
        let mut checked = 0;
        for seed in 0..20 {
            let (mesh, tags) = perturbed_cylinder(seed);
            let mut dots = Vec::new();
            orthogonal_term(mesh.vertices(), mesh.faces(), &tags.caps[0], 0.0, &mut [], &mut dots).unwrap();
            orthogonal_term(mesh.vertices(), mesh.faces(), &tags.caps[1], 0.0, &mut [], &mut dots).unwrap();
            if dots.iter().any(|d| d.abs() <= 1e-3) {
                continue;
            }
            checked += 1;

            let r = coplanar_energy(&mesh, &tags).unwrap();
            let fd = finite_difference(mesh.vertices(), 1e-5, |x| {
                coplanar_energy(&mesh.with_vertices(x.to_vec()).unwrap(), &tags).unwrap().value
            });
            assert!(max_relative_error(&r.gradient, &fd) < 1e-4);

            let r = orthogonal_energy(&mesh, &tags).unwrap();
            let fd = finite_difference(mesh.vertices(), 1e-5, |x| {
                orthogonal_energy(&mesh.with_vertices(x.to_vec()).unwrap(), &tags).unwrap().value
            });
            assert!(max_relative_error(&r.gradient, &fd) < 1e-4);
        }
        assert!(checked >= 4);
    }

    #[test]
    fn coplanar_zero_iff_equal_normals() {
        let (mesh, tags) = perturbed_cylinder(11);
        assert!(coplanar_energy(&mesh, &tags).unwrap().value > 1e-6);
        let flat = shapes::capped_cylinder(2.0, 1.0, 9, 3, 1);
        assert!(coplanar_energy(&flat.mesh, &flat.tags).unwrap().value < 1e-24);
    }
}
