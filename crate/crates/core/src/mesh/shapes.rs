//! Procedural meshes used by tests, benchmarks and the synthetic templates.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CapRecord, TaggedMesh, TemplateTags, TriangleMesh, Vec3};

pub fn unit_cube() -> TriangleMesh {
    let v = [
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [1.0, 1.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [1.0, 0.0, 1.0],
        [1.0, 1.0, 1.0],
        [0.0, 1.0, 1.0],
    ]
    .iter()
    .map(|p| Vec3::new(p[0], p[1], p[2]))
    .collect();
    let faces = vec![
        [0, 2, 1],
        [0, 3, 2],
        [4, 5, 6],
        [4, 6, 7],
        [0, 1, 5],
        [0, 5, 4],
        [3, 7, 6],
        [3, 6, 2],
        [0, 4, 7],
        [0, 7, 3],
        [1, 2, 6],
        [1, 6, 5],
    ];
    TriangleMesh::new(v, faces).expect("cube")
}

/// Unit-radius icosphere. Level `k` has `10 * 4^k + 2` vertices.
pub fn icosphere(level: u32) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|p| Vec3::new(p[0], p[1], p[2]).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let (v, f) = split_faces(&vertices, &faces, true);
        vertices = v;
        faces = f;
    }
    TriangleMesh::new(vertices, faces).expect("icosphere")
}

/// Axis-aligned ellipsoid with the given semi-axes.
pub fn ellipsoid(axes: Vec3, level: u32) -> TriangleMesh {
    icosphere(level).map_vertices(|v| v.component_mul(&axes))
}

/// 1-to-4 midpoint subdivision. The original vertices keep their indices;
/// new edge midpoints are appended, so every new vertex lies on the input
/// surface.
pub fn subdivide_midpoint(mesh: &TriangleMesh) -> TriangleMesh {
    let (v, f) = split_faces(mesh.vertices(), mesh.faces(), false);
    TriangleMesh::new(v, f).expect("subdivision keeps validity")
}

fn split_faces(vertices: &[Vec3], faces: &[[usize; 3]], project: bool) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let mut out_v = vertices.to_vec();
    let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
    let mut mid = |a: usize, b: usize, out_v: &mut Vec<Vec3>| -> usize {
        let key = if a < b { (a, b) } else { (b, a) };
        *cache.entry(key).or_insert_with(|| {
            let mut p = 0.5 * (out_v[a] + out_v[b]);
            if project {
                p = p.normalize();
            }
            out_v.push(p);
            out_v.len() - 1
        })
    };
    let mut out_f = Vec::with_capacity(faces.len() * 4);
    for &[a, b, c] in faces {
        let ab = mid(a, b, &mut out_v);
        let bc = mid(b, c, &mut out_v);
        let ca = mid(c, a, &mut out_v);
        out_f.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
    }
    (out_v, out_f)
}

/// Concatenate meshes without welding.
pub fn merge(meshes: &[&TriangleMesh]) -> TriangleMesh {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for m in meshes {
        let off = vertices.len();
        vertices.extend_from_slice(m.vertices());
        faces.extend(m.faces().iter().map(|f| [f[0] + off, f[1] + off, f[2] + off]));
    }
    TriangleMesh::new(vertices, faces).expect("merge of valid meshes")
}

/// Closed cylinder along +z with fan caps. Tags hold one structure and two
/// caps whose walls are the `wall_bands` rings of side faces next to each cap.
pub fn capped_cylinder(radius: f64, height: f64, segments: usize, rings: usize, wall_bands: usize) -> TaggedMesh {
    assert!(segments >= 3 && rings >= 1 && wall_bands >= 1 && wall_bands <= rings);
    let mut vertices = Vec::with_capacity((rings + 1) * segments + 2);
    for r in 0..=rings {
        let z = height * r as f64 / rings as f64;
        for k in 0..segments {
            let phi = 2.0 * PI * k as f64 / segments as f64;
            vertices.push(Vec3::new(radius * phi.cos(), radius * phi.sin(), z));
        }
    }
    let bottom = vertices.len();
    vertices.push(Vec3::zeros());
    let top = vertices.len();
    vertices.push(Vec3::new(0.0, 0.0, height));
    let at = |r: usize, k: usize| r * segments + (k % segments);
    let mut faces = Vec::new();
    let mut band_faces: Vec<Vec<usize>> = vec![Vec::new(); rings];
    for r in 0..rings {
        for k in 0..segments {
            let (a, b, c, d) = (at(r, k), at(r, k + 1), at(r + 1, k + 1), at(r + 1, k));
            band_faces[r].push(faces.len());
            faces.push([a, b, c]);
            band_faces[r].push(faces.len());
            faces.push([a, c, d]);
        }
    }
    let mut bottom_cap = Vec::new();
    let mut top_cap = Vec::new();
    for k in 0..segments {
        bottom_cap.push(faces.len());
        faces.push([bottom, at(0, k + 1), at(0, k)]);
    }
    for k in 0..segments {
        top_cap.push(faces.len());
        faces.push([top, at(rings, k), at(rings, k + 1)]);
    }
    let mesh = TriangleMesh::new(vertices, faces).expect("cylinder");
    let mut tags = TemplateTags::whole(&mesh, "vessel");
    tags.caps.push(CapRecord {
        name: "bottom".into(),
        cap_faces: bottom_cap,
        wall_faces: band_faces[..wall_bands].concat(),
        inlet: true,
    });
    tags.caps.push(CapRecord {
        name: "top".into(),
        cap_faces: top_cap,
        wall_faces: band_faces[rings - wall_bands..].concat(),
        inlet: false,
    });
    TaggedMesh::new(mesh, tags).expect("cylinder tags")
}

/// Open grid strip with random vertex displacement. With `quantum > 0` the
/// coordinates snap to multiples of `quantum`, which produces many exactly
/// coplanar and touching triangle pairs.
pub fn crumpled_strip(cols: usize, rows: usize, amplitude: f64, quantum: f64, seed: u64) -> TriangleMesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vertices = Vec::with_capacity(cols * rows);
    for j in 0..rows {
        for i in 0..cols {
            let mut p = Vec3::new(
                i as f64 + amplitude * rng.gen_range(-1.0..1.0),
                j as f64 + amplitude * rng.gen_range(-1.0..1.0),
                amplitude * rng.gen_range(-1.0..1.0),
            );
            if quantum > 0.0 {
                p = p.map(|c| (c / quantum).round() * quantum);
            }
            vertices.push(p);
        }
    }
    let mut faces = Vec::new();
    for j in 0..rows - 1 {
        for i in 0..cols - 1 {
            let a = j * cols + i;
            faces.push([a, a + 1, a + cols + 1]);
            faces.push([a, a + cols + 1, a + cols]);
        }
    }
    TriangleMesh::new(vertices, faces).expect("strip")
}

/// Tetrahedral unit directions used for the four vessels.
pub fn vessel_directions() -> [Vec3; 4] {
    [
        Vec3::new(1.0, 1.0, 1.0).normalize(),
        Vec3::new(1.0, -1.0, -1.0).normalize(),
        Vec3::new(-1.0, 1.0, -1.0).normalize(),
        Vec3::new(-1.0, -1.0, 1.0).normalize(),
    ]
}

/// Synthetic four-vessel template: an icosphere body of the given radius with
/// four capped tubes grown from circular holes. The cap of each tube is a flat
/// fan orthogonal to the tube axis; the walls are the two side bands below it.
/// Vessel 0 is tagged as an inlet.
pub fn four_vessel_template(radius: f64, level: u32) -> TaggedMesh {
    const HOLE_ANGLE: f64 = 0.36;
    const RINGS: usize = 4;
    const WALL_BANDS: usize = 2;
    let sphere = icosphere(level);
    let dirs = vessel_directions();
    let near = |v: &Vec3, d: &Vec3| v.dot(d).clamp(-1.0, 1.0).acos() < HOLE_ANGLE;

    let body_faces: Vec<[usize; 3]> = sphere
        .faces()
        .iter()
        .filter(|f| !f.iter().any(|&v| dirs.iter().any(|d| near(&sphere.vertices()[v], d))))
        .copied()
        .collect();
    let mut vertices: Vec<Vec3> = sphere.vertices().iter().map(|v| v * radius).collect();
    let mut faces = body_faces.clone();

    // Boundary half-edges of the perforated body.
    let mut half: HashMap<(usize, usize), ()> = HashMap::new();
    for f in &body_faces {
        for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
            half.insert((a, b), ());
        }
    }
    let mut next: BTreeMap<usize, usize> = BTreeMap::new();
    for &(a, b) in half.keys() {
        if !half.contains_key(&(b, a)) {
            assert!(next.insert(a, b).is_none(), "hole boundary is not a simple loop");
        }
    }

    let mut structures = BTreeMap::new();
    structures.insert("body".to_string(), (0..body_faces.len()).collect::<Vec<_>>());
    let mut caps = Vec::new();
    let tube_radius = radius * HOLE_ANGLE.sin() * 0.95;
    let cap_height = radius * 1.45;

    for (k, d) in dirs.iter().enumerate() {
        let start = *next
            .keys()
            .filter(|&&v| sphere.vertices()[v].dot(d) > 0.5)
            .min()
            .expect("hole boundary for every vessel");
        let mut ring = vec![start];
        let mut cur = next[&start];
        while cur != start {
            ring.push(cur);
            cur = next[&cur];
        }
        let base: Vec<Vec3> = ring.iter().map(|&v| vertices[v]).collect();
        let mut rings = vec![ring.clone()];
        for j in 1..=RINGS {
            let t = j as f64 / RINGS as f64;
            let s = (2.0 * t).min(1.0);
            let ids = base
                .iter()
                .map(|p| {
                    let z0 = p.dot(d);
                    let rho = p - z0 * d;
                    let radial = rho.normalize() * (rho.norm() * (1.0 - s) + tube_radius * s);
                    vertices.push(radial + d * (z0 + (cap_height - z0) * t));
                    vertices.len() - 1
                })
                .collect();
            rings.push(ids);
        }
        let mut vessel_faces = Vec::new();
        let mut bands: Vec<Vec<usize>> = Vec::new();
        let len = ring.len();
        for j in 0..RINGS {
            let mut band = Vec::new();
            for i in 0..len {
                // boundary half-edge runs a -> b, so new faces walk b -> a
                let (a, b) = (rings[j][i], rings[j][(i + 1) % len]);
                let (a1, b1) = (rings[j + 1][i], rings[j + 1][(i + 1) % len]);
                band.push(faces.len());
                faces.push([b, a, a1]);
                band.push(faces.len());
                faces.push([b, a1, b1]);
            }
            vessel_faces.extend_from_slice(&band);
            bands.push(band);
        }
        vertices.push(d * cap_height);
        let center = vertices.len() - 1;
        let mut cap_faces = Vec::new();
        for i in 0..len {
            let (a, b) = (rings[RINGS][i], rings[RINGS][(i + 1) % len]);
            cap_faces.push(faces.len());
            faces.push([b, a, center]);
        }
        vessel_faces.extend_from_slice(&cap_faces);
        structures.insert(format!("vessel_{k}"), vessel_faces);
        caps.push(CapRecord {
            name: format!("vessel_{k}_cap"),
            cap_faces,
            wall_faces: bands[RINGS - WALL_BANDS..].concat(),
            inlet: k == 0,
        });
    }

    // Drop the sphere vertices inside the holes and compact indices.
    let mut used = vec![false; vertices.len()];
    for f in &faces {
        for &v in f {
            used[v] = true;
        }
    }
    let mut remap = vec![usize::MAX; vertices.len()];
    let mut compact = Vec::new();
    for (i, v) in vertices.iter().enumerate() {
        if used[i] {
            remap[i] = compact.len();
            compact.push(*v);
        }
    }
    let faces = faces.iter().map(|f| [remap[f[0]], remap[f[1]], remap[f[2]]]).collect();
    let mesh = TriangleMesh::new(compact, faces).expect("template mesh");
    let n = mesh.vertex_count();
    let tags = TemplateTags { structures, caps, vertex_weights: vec![1.0; n] };
    TaggedMesh::new(mesh, tags).expect("template tags")
}
