use std::collections::HashSet;

use super::{DeformError, Result};
use crate::mesh::{TriangleMesh, Vec3};

/// Ordered, distinct control-handle vertex indices. The order fixes the
/// column order of the biharmonic map and the row order of handle positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HandleSet {
    indices: Vec<usize>,
}

impl HandleSet {
    pub fn new(indices: Vec<usize>, vertex_count: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(DeformError::InvalidHandles("at least one handle is required".into()));
        }
        let mut seen = HashSet::with_capacity(indices.len());
        for &i in &indices {
            if i >= vertex_count {
                return Err(DeformError::InvalidHandles(format!(
                    "handle {i} out of range for {vertex_count} vertices"
                )));
            }
            if !seen.insert(i) {
                return Err(DeformError::InvalidHandles(format!("handle {i} listed twice")));
            }
        }
        Ok(Self { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Rows of `positions` at the handle vertices.
    pub fn gather(&self, positions: &[Vec3]) -> Vec<Vec3> {
        self.indices.iter().map(|&i| positions[i]).collect()
    }
}

/// Euclidean farthest-point sampling of `count` handles starting from
/// `start_index`. Ties go to the lowest vertex index.
pub fn sample_handles(mesh: &TriangleMesh, count: usize, start_index: usize) -> Result<HandleSet> {
    let n = mesh.vertex_count();
    if count > n {
        return Err(DeformError::TooManyHandles { requested: count, available: n });
    }
    if count == 0 {
        return Err(DeformError::InvalidHandles("at least one handle is required".into()));
    }
    if start_index >= n {
        return Err(DeformError::InvalidHandles(format!("start vertex {start_index} out of range")));
    }
    let order = farthest_point_order(mesh.vertices(), count, start_index, None);
    HandleSet::new(order, n)
}

/// Greedy farthest-point order over `points`. Points with `allowed[i] ==
/// false` are never picked (the start must be allowed). Returns fewer than
/// `count` indices only when fewer candidates exist.
pub fn farthest_point_order(points: &[Vec3], count: usize, start: usize, allowed: Option<&[bool]>) -> Vec<usize> {
    let n = points.len();
    let ok = |i: usize| allowed.map_or(true, |a| a[i]);
    let mut picked = vec![false; n];
    let mut dist = vec![f64::INFINITY; n];
    let mut order = Vec::with_capacity(count);
    let mut next = Some(start);
    while let Some(s) = next {
        if order.len() == count {
            break;
        }
        order.push(s);
        picked[s] = true;
        let ps = points[s];
        let mut best: Option<(usize, f64)> = None;
        for i in 0..n {
            let d = (points[i] - ps).norm_squared();
            if d < dist[i] {
                dist[i] = d;
            }
            if !picked[i] && ok(i) && best.map_or(true, |(_, bd)| dist[i] > bd) {
                best = Some((i, dist[i]));
            }
        }
        next = best.map(|(i, _)| i);
    }
    order
}
