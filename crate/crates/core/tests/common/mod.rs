#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use meshfit::deform::EnergyKind;
use meshfit::mesh::{TriangleMesh, Vec3};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Squared-Laplacian energy assembled densely, corner by corner, with
/// cotangents from `atan2` rather than dot-over-cross.
pub fn dense_energy(mesh: &TriangleMesh, kind: EnergyKind) -> DMatrix<f64> {
    let n = mesh.vertex_count();
    let mut l = DMatrix::<f64>::zeros(n, n);
    let mut mass = vec![0.0; n];
    match kind {
        EnergyKind::UniformSquared => {
            for f in mesh.faces() {
                for k in 0..3 {
                    let (i, j) = (f[k], f[(k + 1) % 3]);
                    l[(i, j)] = -1.0;
                    l[(j, i)] = -1.0;
                }
            }
            mass.iter_mut().for_each(|m| *m = 1.0);
        }
        EnergyKind::CotangentSquared => {
            for (fi, f) in mesh.faces().iter().enumerate() {
                let p = mesh.triangle(fi);
                let area = 0.5 * (p[1] - p[0]).cross(&(p[2] - p[0])).norm();
                for k in 0..3 {
                    let (u, v) = (p[(k + 1) % 3] - p[k], p[(k + 2) % 3] - p[k]);
                    let angle = u.cross(&v).norm().atan2(u.dot(&v));
                    let cot = 1.0 / angle.tan();
                    let (i, j) = (f[(k + 1) % 3], f[(k + 2) % 3]);
                    l[(i, j)] -= 0.5 * cot;
                    l[(j, i)] -= 0.5 * cot;
                    mass[f[k]] += area / 3.0;
                }
            }
            for i in 0..n {
                for j in 0..n {
                    if i != j && l[(i, j)] != 0.0 {
                        l[(i, j)] = -(-l[(i, j)]).clamp(1e-6, 1e6);
                    }
                }
            }
        }
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| l[(i, j)]).sum();
        l[(i, i)] = -off;
    }
    let minv = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, mass.iter().map(|m| if *m > 0.0 { 1.0 / m } else { 1.0 })));
    &l * minv * &l
}

/// `W = Q^T - T^T (T A T^T)^-1 T A Q^T` with explicit selection matrices.
pub fn dense_biharmonic(a: &DMatrix<f64>, handles: &[usize]) -> DMatrix<f64> {
    let n = a.nrows();
    let c = handles.len();
    let free: Vec<usize> = (0..n).filter(|i| !handles.contains(i)).collect();
    let mut q = DMatrix::<f64>::zeros(c, n);
    for (k, &h) in handles.iter().enumerate() {
        q[(k, h)] = 1.0;
    }
    let mut t = DMatrix::<f64>::zeros(free.len(), n);
    for (k, &f) in free.iter().enumerate() {
        t[(k, f)] = 1.0;
    }
    let tat = &t * a * t.transpose();
    let inv = tat.lu().try_inverse().expect("free block invertible");
    q.transpose() - t.transpose() * inv * &t * a * q.transpose()
}

/// Random closed surface: an icosphere with its vertices pushed radially.
pub fn random_blob(level: u32, seed: u64) -> TriangleMesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sphere = meshfit::mesh::shapes::icosphere(level);
    let vertices = sphere.vertices().iter().map(|v| v * rng.gen_range(0.8..1.2)).collect();
    sphere.with_vertices(vertices).unwrap()
}

pub fn random_points(count: usize, scale: f64, rng: &mut ChaCha8Rng) -> Vec<Vec3> {
    (0..count)
        .map(|_| Vec3::new(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale), rng.gen_range(-scale..scale)))
        .collect()
}

pub fn meshfit(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_meshfit")).args(args).current_dir(cwd).output().expect("binary runs")
}
