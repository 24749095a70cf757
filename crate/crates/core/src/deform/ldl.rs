//! Sparse `L D L^T` factorisation (up-looking, elimination-tree driven) with a
//! reverse Cuthill-McKee ordering and small-pivot perturbation.

use sprs::CsMat;

use super::{DeformError, Result};

/// Pivots smaller in magnitude than this times the mean diagonal are replaced.
pub const PIVOT_PERTURBATION: f64 = 1e-12;

const NONE: usize = usize::MAX;

#[derive(Debug, Clone)]
pub struct SparseLdl {
    n: usize,
    /// `perm[new] = old`
    perm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d_inv: Vec<f64>,
    perturbed: usize,
}

impl SparseLdl {
    /// Factor a symmetric matrix; only the upper triangle after permutation is
    /// read, so tiny asymmetries are ignored.
    pub fn factor(a: &CsMat<f64>) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(DeformError::Dimension(format!("{}x{} matrix is not square", n, a.cols())));
        }
        let a = if a.is_csr() { a.clone() } else { a.to_csr() };
        let ordering = sprs::linalg::reverse_cuthill_mckee(a.view());
        let perm: Vec<usize> = ordering.perm.vec();
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }

        // upper triangle of P A P^T in compressed columns
        let mut col_count = vec![0usize; n + 1];
        let mut trace = 0.0;
        for (i, row) in a.outer_iterator().enumerate() {
            for (j, _) in row.iter() {
                let (pi, pj) = (inv[i], inv[j]);
                if pi <= pj {
                    col_count[pj + 1] += 1;
                }
            }
            trace += row.get(i).copied().unwrap_or(0.0).abs();
        }
        for k in 0..n {
            col_count[k + 1] += col_count[k];
        }
        let ap = col_count.clone();
        let mut fill = col_count;
        let nnz = ap[n];
        let mut ai = vec![0usize; nnz];
        let mut ax = vec![0.0; nnz];
        for (i, row) in a.outer_iterator().enumerate() {
            for (j, v) in row.iter() {
                let (pi, pj) = (inv[i], inv[j]);
                if pi <= pj {
                    ai[fill[pj]] = pi;
                    ax[fill[pj]] = *v;
                    fill[pj] += 1;
                }
            }
        }
        let delta = PIVOT_PERTURBATION * if n > 0 { trace / n as f64 } else { 1.0 };

        // elimination tree and column counts of L
        let mut etree = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        let mut work = vec![NONE; n];
        for j in 0..n {
            work[j] = j;
            for p in ap[j]..ap[j + 1] {
                let mut i = ai[p];
                if i > j {
                    return Err(DeformError::Singular("internal: lower entry in upper factor input".into()));
                }
                while work[i] != j {
                    if etree[i] == NONE {
                        etree[i] = j;
                    }
                    lnz[i] += 1;
                    work[i] = j;
                    i = etree[i];
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for i in 0..n {
            lp[i + 1] = lp[i] + lnz[i];
        }
        let mut li = vec![0usize; lp[n]];
        let mut lx = vec![0.0; lp[n]];
        let mut d = vec![0.0; n];
        let mut d_inv = vec![0.0; n];
        let mut y_vals = vec![0.0; n];
        let mut y_used = vec![false; n];
        let mut y_idx = vec![0usize; n];
        let mut elim = vec![0usize; n];
        let mut next_space = lp[..n].to_vec();
        let mut perturbed = 0;

        for k in 0..n {
            let mut nnz_y = 0;
            for p in ap[k]..ap[k + 1] {
                let b = ai[p];
                if b == k {
                    d[k] += ax[p];
                    continue;
                }
                y_vals[b] += ax[p];
                if !y_used[b] {
                    y_used[b] = true;
                    elim[0] = b;
                    let mut ne = 1;
                    let mut nx = etree[b];
                    while nx != NONE && nx < k {
                        if y_used[nx] {
                            break;
                        }
                        y_used[nx] = true;
                        elim[ne] = nx;
                        ne += 1;
                        nx = etree[nx];
                    }
                    while ne > 0 {
                        ne -= 1;
                        y_idx[nnz_y] = elim[ne];
                        nnz_y += 1;
                    }
                }
            }
            for t in (0..nnz_y).rev() {
                let c = y_idx[t];
                let end = next_space[c];
                let yc = y_vals[c];
                for j in lp[c]..end {
                    y_vals[li[j]] -= lx[j] * yc;
                }
                li[end] = k;
                lx[end] = yc * d_inv[c];
                d[k] -= yc * lx[end];
                next_space[c] += 1;
                y_vals[c] = 0.0;
                y_used[c] = false;
            }
            if !d[k].is_finite() {
                return Err(DeformError::Singular(format!("non-finite pivot at step {k}")));
            }
            if d[k].abs() < delta {
                d[k] = if d[k] < 0.0 { -delta } else { delta };
                perturbed += 1;
            }
            d_inv[k] = 1.0 / d[k];
        }
        Ok(Self { n, perm, lp, li, lx, d_inv, perturbed })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of pivots that were replaced by the perturbation floor.
    pub fn perturbed_pivots(&self) -> usize {
        self.perturbed
    }

    pub fn factor_nnz(&self) -> usize {
        self.lx.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n, "right-hand side length");
        let mut x: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..self.n {
            let xi = x[i];
            for j in self.lp[i]..self.lp[i + 1] {
                x[self.li[j]] -= self.lx[j] * xi;
            }
        }
        for i in 0..self.n {
            x[i] *= self.d_inv[i];
        }
        for i in (0..self.n).rev() {
            let mut xi = x[i];
            for j in self.lp[i]..self.lp[i + 1] {
                xi -= self.lx[j] * x[self.li[j]];
            }
            x[i] = xi;
        }
        let mut out = vec![0.0; self.n];
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = x[new];
        }
        out
    }
}
