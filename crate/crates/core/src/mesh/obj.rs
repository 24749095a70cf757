//! Minimal Wavefront OBJ support: `v x y z` and triangular `f i j k` records.

use std::fmt::Write as _;
use std::path::Path;

use super::{MeshError, Result, TriangleMesh, Vec3};

pub fn read_obj(path: &Path) -> Result<TriangleMesh> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| MeshError::Io { path: path.to_path_buf(), source })?;
    parse_obj(&text)
}

/// Parse OBJ text. Face tokens may carry `/vt/vn` suffixes, which are
/// ignored; every other record type is skipped.
pub fn parse_obj(text: &str) -> Result<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let mut tokens = raw.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let mut xyz = [0.0; 3];
                for c in &mut xyz {
                    let tok = tokens
                        .next()
                        .ok_or_else(|| MeshError::Parse { line, msg: "vertex needs 3 coordinates".into() })?;
                    *c = tok
                        .parse()
                        .map_err(|_| MeshError::Parse { line, msg: format!("bad coordinate `{tok}`") })?;
                }
                vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
            }
            Some("f") => {
                let idx: Vec<&str> = tokens.collect();
                if idx.len() != 3 {
                    return Err(MeshError::Parse {
                        line,
                        msg: format!("only triangles are supported, face has {} vertices", idx.len()),
                    });
                }
                let mut tri = [0usize; 3];
                for (k, tok) in idx.iter().enumerate() {
                    let head = tok.split('/').next().unwrap_or("");
                    let i: usize = head
                        .parse()
                        .map_err(|_| MeshError::Parse { line, msg: format!("bad face index `{tok}`") })?;
                    if i == 0 {
                        return Err(MeshError::Parse { line, msg: "face indices are 1-based".into() });
                    }
                    tri[k] = i - 1;
                }
                faces.push(tri);
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, faces)
}

/// Serialise with shortest round-trip float formatting, so writing the same
/// mesh twice produces identical bytes and reading it back is lossless.
pub fn to_obj_string(mesh: &TriangleMesh) -> String {
    let mut s = String::with_capacity(mesh.vertex_count() * 40 + mesh.face_count() * 20);
    for v in mesh.vertices() {
        let _ = writeln!(s, "v {:?} {:?} {:?}", v.x, v.y, v.z);
    }
    for f in mesh.faces() {
        let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    s
}

pub fn write_obj(mesh: &TriangleMesh, path: &Path) -> Result<()> {
    std::fs::write(path, to_obj_string(mesh)).map_err(|source| MeshError::Io { path: path.to_path_buf(), source })
}
