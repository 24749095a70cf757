use crate::mesh::{Aabb, TriangleMesh, Vec3};

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    // leaf: faces in order[start..end]; inner: children
    start: usize,
    end: usize,
    children: Option<(usize, usize)>,
}

/// Result of a closest-point query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestPoint {
    pub face: usize,
    pub point: Vec3,
    /// Barycentric weights of `point` with respect to the face's corners.
    pub bary: [f64; 3],
    pub distance_squared: f64,
}

/// Bounding-volume hierarchy over the faces of a mesh (median split on the
/// longest centroid axis).
#[derive(Debug, Clone)]
pub struct TriangleBvh {
    triangles: Vec<[Vec3; 3]>,
    boxes: Vec<Aabb>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl TriangleBvh {
    pub fn new(mesh: &TriangleMesh) -> Self {
        let triangles: Vec<[Vec3; 3]> = (0..mesh.face_count()).map(|f| mesh.triangle(f)).collect();
        let boxes = triangles.iter().map(|t| Aabb::from_points(t.iter())).collect();
        let mut bvh = Self { order: (0..triangles.len()).collect(), triangles, boxes, nodes: Vec::new() };
        if !bvh.triangles.is_empty() {
            bvh.build(0, bvh.triangles.len());
        }
        bvh
    }

    pub fn triangle(&self, f: usize) -> &[Vec3; 3] {
        &self.triangles[f]
    }

    pub fn face_bounds(&self, f: usize) -> &Aabb {
        &self.boxes[f]
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let bounds = self.order[start..end].iter().fold(Aabb::empty(), |b, &f| b.merge(&self.boxes[f]));
        let id = self.nodes.len();
        self.nodes.push(Node { bounds, start, end, children: None });
        if end - start > LEAF_SIZE {
            let centroid = |f: usize| self.boxes[f].center();
            let cb = Aabb::from_points(self.order[start..end].iter().map(|&f| centroid(f)).collect::<Vec<_>>().iter());
            let axis = (cb.max - cb.min).imax();
            let boxes = &self.boxes;
            self.order[start..end]
                .sort_unstable_by(|&a, &b| boxes[a].center()[axis].total_cmp(&boxes[b].center()[axis]).then(a.cmp(&b)));
            let mid = start + (end - start) / 2;
            let l = self.build(start, mid);
            let r = self.build(mid, end);
            self.nodes[id].children = Some((l, r));
        }
        id
    }

    /// Closest surface point; ties go to the lowest face index.
    pub fn closest_point(&self, p: &Vec3) -> Option<ClosestPoint> {
        if self.triangles.is_empty() {
            return None;
        }
        let mut best: Option<ClosestPoint> = None;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            let bound = best.map_or(f64::INFINITY, |b| b.distance_squared);
            if node.bounds.distance_squared(p) > bound {
                continue;
            }
            match node.children {
                Some((l, r)) => {
                    let (dl, dr) = (self.nodes[l].bounds.distance_squared(p), self.nodes[r].bounds.distance_squared(p));
                    // visit nearer child first
                    if dl <= dr {
                        stack.push(r);
                        stack.push(l);
                    } else {
                        stack.push(l);
                        stack.push(r);
                    }
                }
                None => {
                    for &f in &self.order[node.start..node.end] {
                        let [a, b, c] = &self.triangles[f];
                        let (point, bary) = closest_point_on_triangle(p, a, b, c);
                        let d = (point - p).norm_squared();
                        let better = match best {
                            None => true,
                            Some(cur) => d < cur.distance_squared || (d == cur.distance_squared && f < cur.face),
                        };
                        if better {
                            best = Some(ClosestPoint { face: f, point, bary, distance_squared: d });
                        }
                    }
                }
            }
        }
        best
    }

    /// Faces whose bounding boxes overlap `query`, in ascending order.
    pub fn overlapping(&self, query: &Aabb) -> Vec<usize> {
        let mut out = Vec::new();
        if self.triangles.is_empty() {
            return out;
        }
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if !node.bounds.overlaps(query) {
                continue;
            }
            match node.children {
                Some((l, r)) => {
                    stack.push(l);
                    stack.push(r);
                }
                None => out.extend(self.order[node.start..node.end].iter().filter(|&&f| self.boxes[f].overlaps(query))),
            }
        }
        out.sort_unstable();
        out
    }
}

/// Closest point on triangle `abc` to `p` and its barycentric coordinates.
/// Vertex and edge regions return exact barycentrics (e.g. `[1, 0, 0]`).
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> (Vec3, [f64; 3]) {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (*a, [1.0, 0.0, 0.0]);
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (*b, [0.0, 1.0, 0.0]);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, [1.0 - v, v, 0.0]);
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (*c, [0.0, 0.0, 1.0]);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, [1.0 - w, 0.0, w]);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, [0.0, 1.0 - w, w]);
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, [1.0 - v - w, v, w])
}
