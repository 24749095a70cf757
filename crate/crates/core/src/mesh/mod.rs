//! Triangle meshes, tagged templates and the geometric primitives shared by
//! every other module (normals, enclosed volume, area-weighted sampling).

mod obj;
pub mod shapes;
mod tags;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use obj::{parse_obj, read_obj, to_obj_string, write_obj};
pub use tags::{CapRecord, TemplateTags};

pub type Vec3 = Vector3<f64>;

/// Faces whose edge cross product has a smaller norm are treated as degenerate.
pub const DEGENERATE_CROSS_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid tags: {0}")]
    Tags(String),
    #[error("face {face} references vertex {index}, mesh has {count} vertices")]
    FaceIndexOutOfRange { face: usize, index: usize, count: usize },
    #[error("face {0} repeats a vertex index")]
    RepeatedIndex(usize),
    #[error("face {0} is degenerate (cross product norm below 1e-12)")]
    DegenerateFace(usize),
    #[error("mesh is not closed: {} boundary or non-manifold edges, first {:?}", .edges.len(), .edges.first())]
    OpenMesh { edges: Vec<(usize, usize)> },
    #[error("vertex {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T, E = MeshError> = std::result::Result<T, E>;

/// Triangle mesh with immutable connectivity. Deformation produces new meshes
/// that share the face array.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    faces: Arc<[[usize; 3]]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        for (i, v) in vertices.iter().enumerate() {
            if !(v.x.is_finite() && v.y.is_finite() && v.z.is_finite()) {
                return Err(MeshError::NonFinite(i));
            }
        }
        for (f, face) in faces.iter().enumerate() {
            for &index in face {
                if index >= n {
                    return Err(MeshError::FaceIndexOutOfRange { face: f, index, count: n });
                }
            }
            if face[0] == face[1] || face[1] == face[2] || face[0] == face[2] {
                return Err(MeshError::RepeatedIndex(f));
            }
        }
        Ok(Self { vertices, faces: faces.into() })
    }

    /// Same connectivity, new positions.
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(MeshError::Invalid(format!(
                "expected {} vertices, got {}",
                self.vertices.len(),
                vertices.len()
            )));
        }
        if let Some(i) = vertices.iter().position(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(MeshError::NonFinite(i));
        }
        Ok(Self { vertices, faces: Arc::clone(&self.faces) })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn triangle(&self, f: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[f];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Unnormalised face normal `(v1 - v0) x (v2 - v0)`.
    pub fn face_cross(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.triangle(f);
        (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, f: usize) -> f64 {
        0.5 * self.face_cross(f).norm()
    }

    pub fn face_centroid(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.triangle(f);
        (a + b + c) / 3.0
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.face_count()).map(|f| self.face_area(f)).sum()
    }

    pub fn bounding_box(&self) -> Aabb {
        Aabb::from_points(&self.vertices)
    }

    /// Connected components over face connectivity; unreferenced vertices form
    /// singleton components. Returns per-vertex labels and the component count.
    pub fn connected_components(&self) -> (Vec<usize>, usize) {
        let mut uf = UnionFind::new(self.vertex_count());
        for f in self.faces.iter() {
            uf.union(f[0], f[1]);
            uf.union(f[1], f[2]);
        }
        uf.labels()
    }

    /// Undirected edges as sorted pairs, in ascending order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = self
            .faces
            .iter()
            .flat_map(|f| [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])])
            .map(|(a, b)| if a < b { (a, b) } else { (b, a) })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// Directed edges without a matching opposite half-edge, plus half-edges
    /// that occur more than once. Empty for closed, consistently oriented
    /// manifold meshes.
    pub fn boundary_edges(&self) -> Vec<(usize, usize)> {
        let mut count: HashMap<(usize, usize), u32> = HashMap::with_capacity(self.faces.len() * 3);
        for f in self.faces.iter() {
            for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                *count.entry((a, b)).or_insert(0) += 1;
            }
        }
        let mut bad: Vec<(usize, usize)> = count
            .iter()
            .filter(|(&(a, b), &c)| c != 1 || count.get(&(b, a)) != Some(&1))
            .map(|(&e, _)| e)
            .collect();
        bad.sort_unstable();
        bad
    }

    pub fn is_closed(&self) -> bool {
        self.boundary_edges().is_empty()
    }

    /// Extract the sub-mesh made of `faces`. Returns the compacted mesh and,
    /// for each of its vertices, the originating vertex index.
    pub fn submesh(&self, faces: &[usize]) -> Result<(TriangleMesh, Vec<usize>)> {
        let mut remap: HashMap<usize, usize> = HashMap::new();
        let mut origin = Vec::new();
        let mut new_faces = Vec::with_capacity(faces.len());
        for &f in faces {
            if f >= self.face_count() {
                return Err(MeshError::Invalid(format!("face {f} out of range")));
            }
            let mut tri = [0; 3];
            for (k, &v) in self.faces[f].iter().enumerate() {
                tri[k] = *remap.entry(v).or_insert_with(|| {
                    origin.push(v);
                    origin.len() - 1
                });
            }
            new_faces.push(tri);
        }
        let vertices = origin.iter().map(|&v| self.vertices[v]).collect();
        Ok((TriangleMesh::new(vertices, new_faces)?, origin))
    }

    /// Apply `f` to every vertex position.
    pub fn map_vertices(&self, f: impl Fn(&Vec3) -> Vec3) -> TriangleMesh {
        Self { vertices: self.vertices.iter().map(f).collect(), faces: Arc::clone(&self.faces) }
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Self { min: Vec3::repeat(f64::INFINITY), max: Vec3::repeat(f64::NEG_INFINITY) }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Self {
        let mut b = Self::empty();
        for p in points {
            b.grow(p);
        }
        b
    }

    pub fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn merge(&self, other: &Aabb) -> Aabb {
        Aabb { min: self.min.inf(&other.min), max: self.max.sup(&other.max) }
    }

    pub fn diagonal(&self) -> f64 {
        if self.min.x > self.max.x {
            return 0.0;
        }
        (self.max - self.min).norm()
    }

    pub fn center(&self) -> Vec3 {
        0.5 * (self.min + self.max)
    }

    /// Grow each side by `fraction` of the diagonal.
    pub fn expanded(&self, fraction: f64) -> Aabb {
        let pad = Vec3::repeat(fraction * self.diagonal());
        Aabb { min: self.min - pad, max: self.max + pad }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    pub fn overlaps(&self, other: &Aabb) -> bool {
        (0..3).all(|k| self.min[k] <= other.max[k] && other.min[k] <= self.max[k])
    }

    /// Squared distance from `p` to the box (0 inside).
    pub fn distance_squared(&self, p: &Vec3) -> f64 {
        let mut d = 0.0;
        for k in 0..3 {
            let e = if p[k] < self.min[k] {
                self.min[k] - p[k]
            } else if p[k] > self.max[k] {
                p[k] - self.max[k]
            } else {
                0.0
            };
            d += e * e;
        }
        d
    }
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller root wins so labels are stable
            if ra < rb {
                self.parent[rb] = ra;
            } else {
                self.parent[ra] = rb;
            }
        }
    }

    /// Dense component labels numbered in order of first vertex.
    pub(crate) fn labels(&mut self) -> (Vec<usize>, usize) {
        let n = self.parent.len();
        let mut label = vec![usize::MAX; n];
        let mut out = vec![0; n];
        let mut next = 0;
        for v in 0..n {
            let r = self.find(v);
            if label[r] == usize::MAX {
                label[r] = next;
                next += 1;
            }
            out[v] = label[r];
        }
        (out, next)
    }
}

/// A mesh together with its template annotations.
#[derive(Debug, Clone)]
pub struct TaggedMesh {
    pub mesh: TriangleMesh,
    pub tags: TemplateTags,
}

impl TaggedMesh {
    pub fn new(mesh: TriangleMesh, tags: TemplateTags) -> Result<Self> {
        tags.validate(&mesh)?;
        Ok(Self { mesh, tags })
    }

    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> Result<Self> {
        Ok(Self { mesh: self.mesh.with_vertices(vertices)?, tags: self.tags.clone() })
    }
}

/// Read an OBJ mesh and its JSON tag sidecar and validate both.
pub fn load_tagged_mesh(mesh_path: &Path, tags_path: &Path) -> Result<TaggedMesh> {
    let mesh = read_obj(mesh_path)?;
    let tags = TemplateTags::read(tags_path, mesh.vertex_count())?;
    TaggedMesh::new(mesh, tags)
}

/// Unit face normals in winding order.
pub fn face_normals(mesh: &TriangleMesh) -> Result<Vec<Vec3>> {
    (0..mesh.face_count())
        .map(|f| {
            let c = mesh.face_cross(f);
            let len = c.norm();
            if len < DEGENERATE_CROSS_EPS {
                Err(MeshError::DegenerateFace(f))
            } else {
                Ok(c / len)
            }
        })
        .collect()
}

/// Area-weighted vertex normals (zero-area faces contribute nothing).
pub fn vertex_normals(mesh: &TriangleMesh) -> Vec<Vec3> {
    let mut normals = vec![Vec3::zeros(); mesh.vertex_count()];
    for (f, face) in mesh.faces().iter().enumerate() {
        let c = mesh.face_cross(f);
        for &v in face {
            normals[v] += c;
        }
    }
    for n in &mut normals {
        let len = n.norm();
        if len > 0.0 {
            *n /= len;
        }
    }
    normals
}

/// Enclosed volume of a closed, consistently oriented mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnclosedVolume {
    /// Absolute volume.
    pub volume: f64,
    /// `true` when the faces wind counter-clockwise seen from outside.
    pub outward: bool,
}

impl EnclosedVolume {
    pub fn signed(&self) -> f64 {
        if self.outward {
            self.volume
        } else {
            -self.volume
        }
    }
}

pub fn enclosed_volume(mesh: &TriangleMesh) -> Result<EnclosedVolume> {
    let edges = mesh.boundary_edges();
    if !edges.is_empty() {
        return Err(MeshError::OpenMesh { edges });
    }
    Ok(signed_volume_unchecked(mesh))
}

/// Divergence-theorem volume without the closedness check. Tetrahedra are
/// formed against the vertex centroid, which keeps the sum insensitive to
/// where the mesh sits in space.
pub(crate) fn signed_volume_unchecked(mesh: &TriangleMesh) -> EnclosedVolume {
    let n = mesh.vertex_count().max(1) as f64;
    let origin = mesh.vertices().iter().fold(Vec3::zeros(), |acc, v| acc + v) / n;
    let six_v: f64 = mesh
        .faces()
        .iter()
        .map(|&[a, b, c]| {
            let (pa, pb, pc) =
                (mesh.vertices()[a] - origin, mesh.vertices()[b] - origin, mesh.vertices()[c] - origin);
            pa.dot(&pb.cross(&pc))
        })
        .sum();
    let v = six_v / 6.0;
    EnclosedVolume { volume: v.abs(), outward: v >= 0.0 }
}

/// Oriented point samples on a surface.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSamples {
    pub points: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    pub source_face: Vec<usize>,
}

impl SurfaceSamples {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bounding_box(&self) -> Aabb {
        Aabb::from_points(&self.points)
    }

    /// Concatenate several sample sets.
    pub fn concat<'a>(sets: impl IntoIterator<Item = &'a SurfaceSamples>) -> SurfaceSamples {
        let mut out = SurfaceSamples { points: vec![], normals: vec![], source_face: vec![] };
        for s in sets {
            out.points.extend_from_slice(&s.points);
            out.normals.extend_from_slice(&s.normals);
            out.source_face.extend_from_slice(&s.source_face);
        }
        out
    }

    pub fn transformed(&self, rotation: &nalgebra::Matrix3<f64>, translation: &Vec3) -> SurfaceSamples {
        SurfaceSamples {
            points: self.points.iter().map(|p| rotation * p + translation).collect(),
            normals: self.normals.iter().map(|n| rotation * n).collect(),
            source_face: self.source_face.clone(),
        }
    }
}

/// Area-weighted uniform samples; the same seed always yields the same bytes.
pub fn surface_samples(mesh: &TriangleMesh, count: usize, seed: u64) -> Result<SurfaceSamples> {
    surface_samples_on(mesh, None, count, seed)
}

/// Like [`surface_samples`] but restricted to a face subset.
pub fn surface_samples_on(
    mesh: &TriangleMesh,
    faces: Option<&[usize]>,
    count: usize,
    seed: u64,
) -> Result<SurfaceSamples> {
    if count == 0 {
        return Err(MeshError::Invalid("sample count must be at least 1".into()));
    }
    let face_ids: Vec<usize> = match faces {
        Some(f) => f.to_vec(),
        None => (0..mesh.face_count()).collect(),
    };
    let mut cumulative = Vec::with_capacity(face_ids.len());
    let mut total = 0.0;
    for &f in &face_ids {
        total += mesh.face_area(f);
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(MeshError::Invalid("cannot sample a surface with zero area".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SurfaceSamples {
        points: Vec::with_capacity(count),
        normals: Vec::with_capacity(count),
        source_face: Vec::with_capacity(count),
    };
    for _ in 0..count {
        let r = rng.gen::<f64>() * total;
        let k = cumulative.partition_point(|&c| c <= r).min(face_ids.len() - 1);
        let f = face_ids[k];
        let (r1, r2): (f64, f64) = (rng.gen(), rng.gen());
        let s = r1.sqrt();
        let [a, b, c] = mesh.triangle(f);
        out.points.push(a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2));
        out.normals.push(mesh.face_cross(f).normalize());
        out.source_face.push(f);
    }
    Ok(out)
}
