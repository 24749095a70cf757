//! Differentiable surface-fitting losses with analytic vertex gradients.
//!
//! Every loss returns its value together with `d loss / d vertex`.
//! Nearest-neighbour correspondences are frozen within one evaluation.

mod caps;
mod consistency;
mod objective;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use caps::{coplanar_energy, orthogonal_energy};
pub use consistency::{combine_geometric, geometric_consistency, normal_consistency, point_consistency};
pub(crate) use objective::structure_vertices;
pub use objective::{dual_supervision, total_mesh_loss, DualValue, Evaluation, Objective, TargetSampling, TargetSet};

use crate::mesh::{MeshError, Vec3, DEGENERATE_CROSS_EPS};

/// Offset inside the geometric mean that keeps its gradient finite at zero.
pub const GEOMETRIC_EPS: f64 = 1e-8;

/// Fraction of the target bounding-box diagonal by which the weighting box
/// is grown.
pub const MASK_EXPANSION: f64 = 0.01;

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("target sample set is empty")]
    EmptyTarget,
    #[error("mesh has no vertices")]
    EmptyMesh,
    #[error("target normal {0} is not unit length")]
    NonUnitNormal(usize),
    #[error("expected {expected} vertex weights, got {actual}")]
    WeightLength { expected: usize, actual: usize },
    #[error("vertex weights must be finite and nonnegative")]
    InvalidVertexWeights,
    #[error("face {face} is degenerate")]
    DegenerateFace { face: usize },
    #[error("cap `{0}` has no cap faces")]
    EmptyCap(String),
    #[error("cap `{0}` has no wall faces")]
    EmptyWall(String),
    #[error("shape mismatch: {0} vs {1} rows")]
    ShapeMismatch(usize, usize),
    #[error("structure `{0}` has no target and is not marked unsupervised")]
    MissingTarget(String),
    #[error("target given for unknown structure `{0}`")]
    UnknownStructure(String),
    #[error("invalid loss weights: {0}")]
    InvalidWeights(String),
}

pub type Result<T, E = EnergyError> = std::result::Result<T, E>;

/// Weights of the composed surface loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    /// Weight of the cap regularisation.
    pub alpha: f64,
    /// Weight of the orthogonality term inside the cap regularisation.
    pub beta: f64,
    /// Weight of the loss on the directly predicted surface.
    pub lambda1: f64,
    /// Weight of the loss on the handle-deformed surface.
    pub lambda2: f64,
    /// Weight of the squared distance between the two surfaces.
    pub lambda3: f64,
    /// Multiplier for vertices on inlet walls.
    pub inlet_weight: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { alpha: 1.0, beta: 1.0, lambda1: 1.0, lambda2: 1.0, lambda3: 0.5, inlet_weight: 2.0 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda3", self.lambda3),
            ("inlet_weight", self.inlet_weight),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(EnergyError::InvalidWeights(format!("{name} = {v} must be finite and nonnegative")));
            }
        }
        if self.inlet_weight < 1.0 {
            return Err(EnergyError::InvalidWeights(format!("inlet_weight = {} must be at least 1", self.inlet_weight)));
        }
        Ok(())
    }
}

/// A loss value and its gradient with respect to every vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub gradient: Vec<Vec3>,
}

/// Squared Frobenius distance between two point arrays with both gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct PairLossValue {
    pub value: f64,
    pub grad_s: Vec<Vec3>,
    pub grad_v: Vec<Vec3>,
}

/// `||S - V||_F^2` with gradients `2 (S - V)` and `-2 (S - V)`.
pub fn l2_consistency(s: &[Vec3], v: &[Vec3]) -> Result<PairLossValue> {
    if s.len() != v.len() {
        return Err(EnergyError::ShapeMismatch(s.len(), v.len()));
    }
    let diff: Vec<Vec3> = s.iter().zip(v).map(|(a, b)| a - b).collect();
    let value = diff.iter().map(|d| d.norm_squared()).sum();
    Ok(PairLossValue {
        value,
        grad_s: diff.iter().map(|d| d * 2.0).collect(),
        grad_v: diff.iter().map(|d| d * -2.0).collect(),
    })
}

/// Unnormalised face normal `(b - a) x (c - a)` and its unit direction.
pub(crate) fn unit_normal(vertices: &[Vec3], tri: &[usize; 3], face: usize) -> Result<(Vec3, f64)> {
    let [a, b, c] = tri.map(|i| vertices[i]);
    let cross = (b - a).cross(&(c - a));
    let len = cross.norm();
    if !(len >= DEGENERATE_CROSS_EPS) {
        return Err(EnergyError::DegenerateFace { face });
    }
    Ok((cross / len, len))
}

/// Accumulate the vertex gradient of a loss given `d loss / d n` for the
/// unit normal `n` of one face.
pub(crate) fn backprop_normal(vertices: &[Vec3], tri: &[usize; 3], n: &Vec3, len: f64, dn: &Vec3, grad: &mut [Vec3]) {
    let h = (dn - n * n.dot(dn)) / len;
    for k in 0..3 {
        let a = vertices[tri[(k + 1) % 3]];
        let b = vertices[tri[(k + 2) % 3]];
        grad[tri[k]] += (a - b).cross(&h);
    }
}

pub(crate) fn check_weights(weights: &[f64], expected: usize) -> Result<()> {
    if weights.len() != expected {
        return Err(EnergyError::WeightLength { expected, actual: weights.len() });
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(EnergyError::InvalidVertexWeights);
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;
    use crate::mesh::TriangleMesh;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Displace every vertex uniformly within `[-amount, amount)^3`.
    pub fn jitter(mesh: &TriangleMesh, amount: f64, seed: u64) -> TriangleMesh {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut offset = || rng.gen_range(-amount..amount);
        let v = mesh.vertices().iter().map(|v| v + Vec3::new(offset(), offset(), offset())).collect();
        mesh.with_vertices(v).expect("same topology")
    }

    /// Central finite differences of `f` at every coordinate of `x`.
    pub fn finite_difference(x: &[Vec3], step: f64, f: impl Fn(&[Vec3]) -> f64) -> Vec<Vec3> {
        let mut x = x.to_vec();
        let mut out = vec![Vec3::zeros(); x.len()];
        for i in 0..x.len() {
            for d in 0..3 {
                let orig = x[i][d];
                x[i][d] = orig + step;
                let fp = f(&x);
                x[i][d] = orig - step;
                let fm = f(&x);
                x[i][d] = orig;
                out[i][d] = (fp - fm) / (2.0 * step);
            }
        }
        out
    }

    /// Largest relative error with a floor of `1e-6` on the denominator.
    pub fn max_relative_error(a: &[Vec3], b: &[Vec3]) -> f64 {
        a.iter()
            .zip(b)
            .flat_map(|(x, y)| (0..3).map(move |d| (x[d] - y[d]).abs() / x[d].abs().max(y[d].abs()).max(1e-6)))
            .fold(0.0, f64::max)
    }
}
