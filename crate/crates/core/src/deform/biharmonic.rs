use rayon::prelude::*;

use super::ldl::SparseLdl;
use super::{DeformError, EnergyMatrix, HandleSet, Result};
use crate::mesh::Vec3;

/// Entries below this fraction of their column's largest magnitude are
/// dropped when the map is stored.
pub const DROP_TOLERANCE: f64 = 1e-10;

/// Row-compressed `n x c` biharmonic coordinates with `V = W P`.
///
/// `handles` are the template vertices whose positions form the rows of `P`.
/// For a map computed on a mesh, row `handles[j]` is the unit vector `e_j`;
/// a transferred map keeps the source template's handle indices while its
/// rows belong to the new template.
#[derive(Debug, Clone, PartialEq)]
pub struct BiharmonicMap {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    handles: HandleSet,
}

impl BiharmonicMap {
    pub fn from_csr(row_ptr: Vec<usize>, col_idx: Vec<usize>, values: Vec<f64>, handles: HandleSet) -> Result<Self> {
        if row_ptr.is_empty() || row_ptr[0] != 0 {
            return Err(DeformError::Format("row pointer must start at 0".into()));
        }
        if row_ptr.windows(2).any(|w| w[1] < w[0]) || *row_ptr.last().unwrap() != values.len() {
            return Err(DeformError::Format("row pointers are not monotone or do not match nnz".into()));
        }
        if col_idx.len() != values.len() {
            return Err(DeformError::Format("column index and value arrays differ in length".into()));
        }
        let c = handles.len();
        if let Some(j) = col_idx.iter().find(|&&j| j >= c) {
            return Err(DeformError::Format(format!("column {j} out of range for {c} handles")));
        }
        Ok(Self { row_ptr, col_idx, values, handles })
    }

    /// Number of rows `n`.
    pub fn vertex_count(&self) -> usize {
        self.row_ptr.len() - 1
    }

    /// Number of columns `c`.
    pub fn handle_count(&self) -> usize {
        self.handles.len()
    }

    pub fn handles(&self) -> &HandleSet {
        &self.handles
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut d = nalgebra::DMatrix::zeros(self.vertex_count(), self.handle_count());
        for i in 0..self.vertex_count() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                d[(i, j)] = v;
            }
        }
        d
    }

    /// `max |Q W - I|`; meaningful when rows index the handle template.
    pub fn interpolation_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, &h) in self.handles.indices().iter().enumerate() {
            if h >= self.vertex_count() {
                return f64::INFINITY;
            }
            let (cols, vals) = self.row(h);
            let mut seen_diag = false;
            for (&k, &v) in cols.iter().zip(vals) {
                let target = if k == j { 1.0 } else { 0.0 };
                seen_diag |= k == j;
                worst = worst.max((v - target).abs());
            }
            if !seen_diag {
                worst = worst.max(1.0);
            }
        }
        worst
    }

    /// `max_i |sum_j W_ij - 1|`.
    pub fn row_sum_error(&self) -> f64 {
        (0..self.vertex_count())
            .map(|i| (self.row(i).1.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `max_i sum_j |W_ij|`.
    pub fn max_abs_row_sum(&self) -> f64 {
        (0..self.vertex_count())
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `W^T G`: pulls per-vertex gradients back onto the handles.
    pub fn pullback(&self, vertex_gradient: &[Vec3]) -> Vec<Vec3> {
        assert_eq!(vertex_gradient.len(), self.vertex_count());
        let mut out = vec![Vec3::zeros(); self.handle_count()];
        for (i, g) in vertex_gradient.iter().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &w) in cols.iter().zip(vals) {
                out[j] += g * w;
            }
        }
        out
    }

    fn apply(&self, p: &[Vec3]) -> Vec<Vec3> {
        (0..self.vertex_count())
            .into_par_iter()
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).fold(Vec3::zeros(), |acc, (&j, &w)| acc + p[j] * w)
            })
            .collect()
    }
}

/// Solve for the biharmonic coordinates of `handles` under `energy`.
///
/// The free block `T A T^T` is factored once and the `c` right-hand sides
/// `-T A Q^T e_j` are solved in parallel. Entries below [`DROP_TOLERANCE`]
/// of their column maximum are dropped and rows are renormalised to unit sum.
pub fn compute_biharmonic(energy: &EnergyMatrix, handles: &HandleSet) -> Result<BiharmonicMap> {
    let n = energy.dim();
    let c = handles.len();
    if let Some(&h) = handles.indices().iter().find(|&&h| h >= n) {
        return Err(DeformError::InvalidHandles(format!("handle {h} out of range for {n} vertices")));
    }

    let (labels, count) = energy.components();
    let mut covered = vec![false; count];
    for &h in handles.indices() {
        covered[labels[h]] = true;
    }
    if let Some(component) = covered.iter().position(|&c| !c) {
        let size = labels.iter().filter(|&&l| l == component).count();
        let first_vertex = labels.iter().position(|&l| l == component).unwrap_or(0);
        return Err(DeformError::ComponentWithoutHandle { component, size, first_vertex });
    }

    let mut column_of = vec![usize::MAX; n];
    for (j, &h) in handles.indices().iter().enumerate() {
        column_of[h] = j;
    }
    let free: Vec<usize> = (0..n).filter(|&v| column_of[v] == usize::MAX).collect();
    let mut free_pos = vec![usize::MAX; n];
    for (k, &v) in free.iter().enumerate() {
        free_pos[v] = k;
    }

    let a = energy.matrix();
    let nf = free.len();
    let solutions: Vec<Vec<f64>> = if nf == 0 {
        vec![Vec::new(); c]
    } else {
        let mut tri = sprs::TriMat::new((nf, nf));
        for (k, &v) in free.iter().enumerate() {
            if let Some(row) = a.outer_view(v) {
                for (u, val) in row.iter() {
                    if free_pos[u] != usize::MAX {
                        tri.add_triplet(k, free_pos[u], *val);
                    }
                }
            }
        }
        let aff: sprs::CsMat<f64> = tri.to_csr();
        let ldl = SparseLdl::factor(&aff)?;
        if ldl.perturbed_pivots() > 0 {
            log::warn!("{} pivots perturbed while factoring the free block", ldl.perturbed_pivots());
        }
        handles
            .indices()
            .par_iter()
            .map(|&h| {
                let mut rhs = vec![0.0; nf];
                if let Some(row) = a.outer_view(h) {
                    for (u, val) in row.iter() {
                        if free_pos[u] != usize::MAX {
                            rhs[free_pos[u]] = -val;
                        }
                    }
                }
                ldl.solve(&rhs)
            })
            .collect()
    };
    if solutions.iter().flatten().any(|x| !x.is_finite()) {
        return Err(DeformError::Singular("non-finite biharmonic coordinates".into()));
    }

    let thresholds: Vec<f64> = solutions
        .iter()
        .map(|col| DROP_TOLERANCE * col.iter().fold(1.0f64, |m, x| m.max(x.abs())))
        .collect();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    row_ptr.push(0);
    for v in 0..n {
        if column_of[v] != usize::MAX {
            col_idx.push(column_of[v]);
            values.push(1.0);
        } else {
            let k = free_pos[v];
            let start = values.len();
            for j in 0..c {
                let w = solutions[j][k];
                if w.abs() >= thresholds[j] {
                    col_idx.push(j);
                    values.push(w);
                }
            }
            let sum: f64 = values[start..].iter().sum();
            if sum.abs() < 0.5 {
                return Err(DeformError::Singular(format!("row {v} of the map sums to {sum}")));
            }
            for w in &mut values[start..] {
                *w /= sum;
            }
        }
        row_ptr.push(values.len());
    }
    BiharmonicMap::from_csr(row_ptr, col_idx, values, handles.clone())
}

/// `V = W P`.
pub fn deform(map: &BiharmonicMap, handle_positions: &[Vec3]) -> Result<Vec<Vec3>> {
    check_positions(map, handle_positions)?;
    Ok(map.apply(handle_positions))
}

/// `V = V_rest + W (P - P_rest)`: handle displacements applied to a rest
/// template. Returns the rest template exactly when `P == P_rest`.
pub fn deform_from_rest(
    map: &BiharmonicMap,
    rest_vertices: &[Vec3],
    rest_handles: &[Vec3],
    handle_positions: &[Vec3],
) -> Result<Vec<Vec3>> {
    check_positions(map, handle_positions)?;
    if rest_vertices.len() != map.vertex_count() || rest_handles.len() != map.handle_count() {
        return Err(DeformError::Dimension(format!(
            "map is {}x{}, rest has {} vertices and {} handles",
            map.vertex_count(),
            map.handle_count(),
            rest_vertices.len(),
            rest_handles.len()
        )));
    }
    let delta: Vec<Vec3> = handle_positions.iter().zip(rest_handles).map(|(p, r)| p - r).collect();
    let d = map.apply(&delta);
    Ok(rest_vertices.iter().zip(d).map(|(v, dv)| v + dv).collect())
}

fn check_positions(map: &BiharmonicMap, p: &[Vec3]) -> Result<()> {
    if p.len() != map.handle_count() {
        return Err(DeformError::Dimension(format!(
            "{} handle positions for a map with {} handles",
            p.len(),
            map.handle_count()
        )));
    }
    if p.iter().any(|x| !x.iter().all(|c| c.is_finite())) {
        return Err(DeformError::Dimension("handle positions must be finite".into()));
    }
    Ok(())
}
