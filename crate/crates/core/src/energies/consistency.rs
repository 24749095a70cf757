use std::hash::Hasher;

use rayon::prelude::*;

use super::{backprop_normal, check_weights, unit_normal, EnergyError, LossValue, Result, GEOMETRIC_EPS};
use crate::mesh::{SurfaceSamples, TriangleMesh, Vec3};
use crate::spatial::KdTree;

const UNIT_NORMAL_TOLERANCE: f64 = 1e-6;

pub(crate) fn check_target(target: &SurfaceSamples) -> Result<()> {
    if target.is_empty() {
        return Err(EnergyError::EmptyTarget);
    }
    if let Some(j) = target.normals.iter().position(|n| (n.norm() - 1.0).abs() > UNIT_NORMAL_TOLERANCE) {
        return Err(EnergyError::NonUnitNormal(j));
    }
    Ok(())
}

/// Point and normal terms of one surface against one target, with separate
/// gradients so the caller can form the geometric mean.
pub(crate) struct ConsistencyParts {
    pub point: f64,
    pub normal: f64,
    pub grad_point: Vec<Vec3>,
    pub grad_normal: Vec<Vec3>,
}

pub(crate) fn point_parts(
    vertices: &[Vec3],
    target: &SurfaceSamples,
    target_tree: &KdTree,
    weights: &[f64],
    signature: &mut impl Hasher,
) -> Result<(f64, Vec<Vec3>)> {
    if vertices.is_empty() {
        return Err(EnergyError::EmptyMesh);
    }
    let nv = vertices.len() as f64;
    let nt = target.len() as f64;
    let mut value = 0.0;
    let mut grad = vec![Vec3::zeros(); vertices.len()];

    let forward: Vec<(usize, f64)> =
        vertices.par_iter().map(|v| target_tree.nearest(v).expect("target is nonempty")).collect();
    for (i, &(j, d2)) in forward.iter().enumerate() {
        signature.write_usize(j);
        let w = weights[i];
        value += w * d2 / nv;
        grad[i] += (vertices[i] - target.points[j]) * (2.0 * w / nv);
    }

    let vertex_tree = KdTree::new(vertices);
    let backward: Vec<(usize, f64)> =
        target.points.par_iter().map(|p| vertex_tree.nearest(p).expect("mesh is nonempty")).collect();
    for (j, &(i, d2)) in backward.iter().enumerate() {
        signature.write_usize(i);
        value += d2 / nt;
        grad[i] += (vertices[i] - target.points[j]) * (2.0 / nt);
    }
    Ok((value, grad))
}

pub(crate) fn normal_parts(
    vertices: &[Vec3],
    faces: &[[usize; 3]],
    target: &SurfaceSamples,
    target_tree: &KdTree,
    weights: &[f64],
    signature: &mut impl Hasher,
) -> Result<(f64, Vec<Vec3>)> {
    let mut grad = vec![Vec3::zeros(); vertices.len()];
    if faces.is_empty() {
        return Ok((0.0, grad));
    }
    let nf = faces.len() as f64;
    let matches: Vec<usize> = faces
        .par_iter()
        .map(|t| {
            let c = (vertices[t[0]] + vertices[t[1]] + vertices[t[2]]) / 3.0;
            target_tree.nearest(&c).expect("target is nonempty").0
        })
        .collect();
    let mut value = 0.0;
    for (f, (tri, &j)) in faces.iter().zip(&matches).enumerate() {
        signature.write_usize(j);
        let (n, len) = unit_normal(vertices, tri, f)?;
        let t = target.normals[j];
        let wbar = (weights[tri[0]] + weights[tri[1]] + weights[tri[2]]) / 3.0;
        value += wbar * (1.0 - n.dot(&t)) / nf;
        backprop_normal(vertices, tri, &n, len, &(t * (-wbar / nf)), &mut grad);
    }
    Ok((value, grad))
}

pub(crate) fn consistency_parts(
    vertices: &[Vec3],
    faces: &[[usize; 3]],
    target: &SurfaceSamples,
    target_tree: &KdTree,
    weights: &[f64],
    signature: &mut impl Hasher,
) -> Result<ConsistencyParts> {
    let (point, grad_point) = point_parts(vertices, target, target_tree, weights, signature)?;
    let (normal, grad_normal) = normal_parts(vertices, faces, target, target_tree, weights, signature)?;
    Ok(ConsistencyParts { point, normal, grad_point, grad_normal })
}

/// Geometric mean `sqrt((P + eps)(N + eps)) - eps` and its gradient.
pub(crate) fn geometric_mean(point: f64, normal: f64) -> (f64, f64, f64) {
    let p = point + GEOMETRIC_EPS;
    let n = normal + GEOMETRIC_EPS;
    let root = (p * n).sqrt();
    ((root - GEOMETRIC_EPS).max(0.0), n / (2.0 * root), p / (2.0 * root))
}

/// Combine point and normal losses by their geometric mean.
pub fn combine_geometric(point: &LossValue, normal: &LossValue) -> LossValue {
    let (value, dp, dn) = geometric_mean(point.value, normal.value);
    let gradient = point.gradient.iter().zip(&normal.gradient).map(|(a, b)| a * dp + b * dn).collect();
    LossValue { value, gradient }
}

/// Weighted symmetric chamfer between mesh vertices and target points:
/// the mean over vertices of `w_i |v_i - NN(v_i)|^2` plus the mean over
/// target points of `|p_j - NN(p_j)|^2`.
pub fn point_consistency(vertices: &[Vec3], target: &SurfaceSamples, weights: &[f64]) -> Result<LossValue> {
    check_target(target)?;
    check_weights(weights, vertices.len())?;
    let tree = KdTree::new(&target.points);
    let (value, gradient) = point_parts(vertices, target, &tree, weights, &mut NoHash)?;
    Ok(LossValue { value, gradient })
}

/// Mean over faces of `w_f (1 - <n_f, n_target>)`, where the target normal
/// is taken at the sample nearest to the face centroid and `w_f` averages the
/// face's vertex weights.
pub fn normal_consistency(mesh: &TriangleMesh, target: &SurfaceSamples, weights: &[f64]) -> Result<LossValue> {
    check_target(target)?;
    check_weights(weights, mesh.vertex_count())?;
    let tree = KdTree::new(&target.points);
    let (value, gradient) = normal_parts(mesh.vertices(), mesh.faces(), target, &tree, weights, &mut NoHash)?;
    Ok(LossValue { value, gradient })
}

/// Geometric mean of [`point_consistency`] and [`normal_consistency`].
pub fn geometric_consistency(mesh: &TriangleMesh, target: &SurfaceSamples, weights: &[f64]) -> Result<LossValue> {
    check_target(target)?;
    check_weights(weights, mesh.vertex_count())?;
    let tree = KdTree::new(&target.points);
    let parts = consistency_parts(mesh.vertices(), mesh.faces(), target, &tree, weights, &mut NoHash)?;
    Ok(combine_geometric(
        &LossValue { value: parts.point, gradient: parts.grad_point },
        &LossValue { value: parts.normal, gradient: parts.grad_normal },
    ))
}

pub(crate) struct NoHash;

impl Hasher for NoHash {
    fn finish(&self) -> u64 {
        0
    }

    fn write(&mut self, _: &[u8]) {}
}
