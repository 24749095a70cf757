use nalgebra::{Matrix3, SymmetricEigen};

use super::{QualityError, Result};
use crate::mesh::{CapRecord, MeshError, TemplateTags, TriangleMesh, Vec3, DEGENERATE_CROSS_EPS};

/// Mean vectors shorter than this are treated as zero.
const ZERO_MEAN_EPS: f64 = 1e-9;

/// Which vectors the cap-wall orthogonality compares with the mean cap normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CwoVariant {
    /// `1 - <mean wall normal, mean cap normal>`, both means normalised.
    #[default]
    MeanNormals,
    /// `1 - <unit(cap centroid - wall centroid), mean cap normal>`.
    CentroidAxis,
}

fn mean_face_normal(mesh: &TriangleMesh, faces: &[usize], cap: &str, what: &'static str) -> Result<Vec3> {
    let mut sum = Vec3::zeros();
    for &f in faces {
        let c = mesh.face_cross(f);
        let len = c.norm();
        if len < DEGENERATE_CROSS_EPS {
            return Err(QualityError::Mesh(MeshError::DegenerateFace(f)));
        }
        sum += c / len;
    }
    let mean = sum / faces.len() as f64;
    if mean.norm() < ZERO_MEAN_EPS {
        return Err(QualityError::ZeroMeanNormal { cap: cap.to_string(), what });
    }
    Ok(mean.normalize())
}

fn centroid(mesh: &TriangleMesh, faces: &[usize]) -> Vec3 {
    let verts = TemplateTags::vertices_of(mesh, faces);
    verts.iter().fold(Vec3::zeros(), |acc, &v| acc + mesh.vertices()[v]) / verts.len() as f64
}

fn check_cap(cap: &CapRecord) -> Result<()> {
    if cap.cap_faces.is_empty() || cap.wall_faces.is_empty() {
        return Err(QualityError::EmptyCap(cap.name.clone()));
    }
    Ok(())
}

/// Orthogonality score of one cap in `[0, 2]`; 0 is ideal.
pub(crate) fn cap_cwo(mesh: &TriangleMesh, cap: &CapRecord, variant: CwoVariant) -> Result<f64> {
    check_cap(cap)?;
    let cap_normal = mean_face_normal(mesh, &cap.cap_faces, &cap.name, "cap")?;
    let other = match variant {
        CwoVariant::MeanNormals => mean_face_normal(mesh, &cap.wall_faces, &cap.name, "wall")?,
        CwoVariant::CentroidAxis => {
            let axis = centroid(mesh, &cap.cap_faces) - centroid(mesh, &cap.wall_faces);
            if axis.norm() < ZERO_MEAN_EPS {
                return Err(QualityError::ZeroMeanNormal { cap: cap.name.clone(), what: "centroid axis" });
            }
            axis.normalize()
        }
    };
    Ok((1.0 - other.dot(&cap_normal)).clamp(0.0, 2.0))
}

/// Per-cap orthogonality score in `[0, 2]`; 0 is ideal.
pub fn cap_wall_orthogonality(mesh: &TriangleMesh, tags: &TemplateTags, variant: CwoVariant) -> Result<Vec<f64>> {
    tags.caps.iter().map(|cap| cap_cwo(mesh, cap, variant)).collect()
}

/// Least-squares plane through `points`: centroid and unit normal along the
/// smallest-variance direction.
pub(crate) fn fit_plane(points: &[Vec3]) -> Option<(Vec3, Vec3)> {
    if points.len() < 3 {
        return None;
    }
    let c = points.iter().fold(Vec3::zeros(), |acc, p| acc + p) / points.len() as f64;
    let cov = points.iter().fold(Matrix3::zeros(), |acc, p| acc + (p - c) * (p - c).transpose());
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (mid, large) = (eig.eigenvalues[order[1]], eig.eigenvalues[order[2]]);
    if !(large > 0.0) || mid <= 1e-12 * large {
        return None;
    }
    Some((c, eig.eigenvectors.column(order[0]).into_owned()))
}

/// Mean absolute distance of one cap's vertices to their best-fit plane.
pub(crate) fn cap_plane_distance(mesh: &TriangleMesh, cap: &CapRecord) -> Result<f64> {
    if cap.cap_faces.is_empty() {
        return Err(QualityError::EmptyCap(cap.name.clone()));
    }
    let points: Vec<Vec3> = TemplateTags::vertices_of(mesh, &cap.cap_faces).iter().map(|&v| mesh.vertices()[v]).collect();
    let (c, n) = fit_plane(&points).ok_or_else(|| QualityError::CollinearCap(cap.name.clone()))?;
    Ok(points.iter().map(|p| (p - c).dot(&n).abs()).sum::<f64>() / points.len() as f64)
}

/// Per-cap mean absolute distance of cap vertices to their best-fit plane.
pub fn cap_coplanarity(mesh: &TriangleMesh, tags: &TemplateTags) -> Result<Vec<f64>> {
    tags.caps.iter().map(|cap| cap_plane_distance(mesh, cap)).collect()
}
