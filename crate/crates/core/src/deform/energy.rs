use serde::{Deserialize, Serialize};
use sprs::{CsMat, TriMat};

use super::Result;
use crate::mesh::{MeshError, TriangleMesh, UnionFind, DEGENERATE_CROSS_EPS};

/// Cotangent edge weights are clamped into this range so the stiffness stays
/// a valid weighted graph Laplacian on obtuse triangulations.
pub const COT_WEIGHT_MIN: f64 = 1e-6;
pub const COT_WEIGHT_MAX: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnergyKind {
    /// `L^T M^-1 L` with clamped cotangent `L` and barycentric lumped mass `M`.
    #[serde(rename = "cotan", alias = "cotangent_squared")]
    CotangentSquared,
    /// `L^T L` with the combinatorial graph Laplacian.
    #[serde(rename = "uniform", alias = "uniform_squared")]
    UniformSquared,
}

impl std::str::FromStr for EnergyKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "cotan" | "cotangent" | "cotangent_squared" => Ok(Self::CotangentSquared),
            "uniform" | "uniform_squared" => Ok(Self::UniformSquared),
            other => Err(format!("unknown energy `{other}` (expected cotan or uniform)")),
        }
    }
}

/// Sparse symmetric positive-semidefinite squared-Laplacian form.
#[derive(Debug, Clone)]
pub struct EnergyMatrix {
    matrix: CsMat<f64>,
    kind: EnergyKind,
}

impl EnergyMatrix {
    /// Wrap an arbitrary symmetric matrix (rows in CSR order).
    pub fn from_matrix(matrix: CsMat<f64>, kind: EnergyKind) -> Self {
        let matrix = if matrix.is_csr() { matrix } else { matrix.to_csr() };
        Self { matrix, kind }
    }

    pub fn matrix(&self) -> &CsMat<f64> {
        &self.matrix
    }

    pub fn kind(&self) -> EnergyKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// `||A 1||_inf / ||A||_inf`.
    pub fn constant_residual(&self) -> f64 {
        let mut res: f64 = 0.0;
        let mut norm: f64 = 0.0;
        for row in self.matrix.outer_iterator() {
            res = res.max(row.iter().map(|(_, v)| *v).sum::<f64>().abs());
            norm = norm.max(row.iter().map(|(_, v)| v.abs()).sum::<f64>());
        }
        if norm == 0.0 {
            0.0
        } else {
            res / norm
        }
    }

    /// Connected components of the sparsity graph.
    pub fn components(&self) -> (Vec<usize>, usize) {
        let mut uf = UnionFind::new(self.dim());
        for (i, row) in self.matrix.outer_iterator().enumerate() {
            for (j, v) in row.iter() {
                if *v != 0.0 {
                    uf.union(i, j);
                }
            }
        }
        uf.labels()
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.dim();
        let mut d = nalgebra::DMatrix::zeros(n, n);
        for (i, row) in self.matrix.outer_iterator().enumerate() {
            for (j, v) in row.iter() {
                d[(i, j)] += v;
            }
        }
        d
    }
}

/// Assemble the squared-Laplacian energy of `mesh`.
pub fn build_energy(mesh: &TriangleMesh, kind: EnergyKind) -> Result<EnergyMatrix> {
    let n = mesh.vertex_count();
    let (edges, mass) = match kind {
        EnergyKind::UniformSquared => (mesh.edges().into_iter().map(|(i, j)| (i, j, 1.0)).collect(), vec![1.0; n]),
        EnergyKind::CotangentSquared => cotangent_weights(mesh)?,
    };
    let mut k = TriMat::new((n, n));
    for i in 0..n {
        k.add_triplet(i, i, 0.0);
    }
    for &(i, j, w) in &edges {
        k.add_triplet(i, i, w);
        k.add_triplet(j, j, w);
        k.add_triplet(i, j, -w);
        k.add_triplet(j, i, -w);
    }
    let k: CsMat<f64> = k.to_csr();
    let mut minv = TriMat::new((n, n));
    for (i, m) in mass.iter().enumerate() {
        minv.add_triplet(i, i, 1.0 / m);
    }
    let minv: CsMat<f64> = minv.to_csr();
    let a = &(&k * &minv) * &k;
    let at: CsMat<f64> = a.transpose_view().to_csr();
    let sym = (&a + &at).map(|x| 0.5 * x);
    Ok(EnergyMatrix { matrix: sym, kind })
}

/// Clamped cotangent edge weights `(i, j, w)` with `i < j` and lumped
/// barycentric vertex areas.
fn cotangent_weights(mesh: &TriangleMesh) -> Result<(Vec<(usize, usize, f64)>, Vec<f64>)> {
    let n = mesh.vertex_count();
    let mut mass = vec![0.0; n];
    let mut raw: Vec<(usize, usize, f64)> = Vec::with_capacity(mesh.face_count() * 3);
    for (f, face) in mesh.faces().iter().enumerate() {
        let p = mesh.triangle(f);
        let cross = (p[1] - p[0]).cross(&(p[2] - p[0])).norm();
        if cross < DEGENERATE_CROSS_EPS {
            return Err(MeshError::DegenerateFace(f).into());
        }
        for corner in 0..3 {
            let (j, k) = ((corner + 1) % 3, (corner + 2) % 3);
            let cot = (p[j] - p[corner]).dot(&(p[k] - p[corner])) / cross;
            let (a, b) = (face[j].min(face[k]), face[j].max(face[k]));
            raw.push((a, b, 0.5 * cot));
            mass[face[corner]] += cross / 6.0;
        }
    }
    raw.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
    let mut edges: Vec<(usize, usize, f64)> = Vec::with_capacity(raw.len() / 2 + 1);
    for (a, b, w) in raw {
        match edges.last_mut() {
            Some(last) if last.0 == a && last.1 == b => last.2 += w,
            _ => edges.push((a, b, w)),
        }
    }
    for e in &mut edges {
        e.2 = e.2.clamp(COT_WEIGHT_MIN, COT_WEIGHT_MAX);
    }
    for m in &mut mass {
        if *m == 0.0 {
            // unreferenced vertex: its stiffness row is empty anyway
            *m = 1.0;
        }
    }
    Ok((edges, mass))
}
