//! Exact triangle-triangle intersection built on adaptive-precision
//! orientation predicates (floating-point filter, exact arithmetic when the
//! determinant is too close to zero to trust).

use robust::{orient2d, orient3d, Coord, Coord3D};

use crate::mesh::Vec3;

fn c3(p: &Vec3) -> Coord3D<f64> {
    Coord3D { x: p.x, y: p.y, z: p.z }
}

fn o3(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> f64 {
    orient3d(c3(a), c3(b), c3(c), c3(d))
}

type P2 = (f64, f64);

fn o2(a: P2, b: P2, c: P2) -> f64 {
    orient2d(Coord { x: a.0, y: a.1 }, Coord { x: b.0, y: b.1 }, Coord { x: c.0, y: c.1 })
}

/// Closed triangles `t1` and `t2` share at least one point.
///
/// Two closed triangles intersect iff an edge of one meets the other, which
/// covers both the transversal and the coplanar (overlap or containment)
/// configurations.
pub fn triangles_intersect(t1: &[Vec3; 3], t2: &[Vec3; 3]) -> bool {
    (0..3).any(|i| segment_intersects_triangle(&t1[i], &t1[(i + 1) % 3], t2))
        || (0..3).any(|i| segment_intersects_triangle(&t2[i], &t2[(i + 1) % 3], t1))
}

/// Closed segment `pq` meets closed triangle `t`. Degenerate (collinear or
/// collapsed) triangles are treated as the segment or point they span.
pub fn segment_intersects_triangle(p: &Vec3, q: &Vec3, t: &[Vec3; 3]) -> bool {
    let [a, b, c] = t;
    if is_degenerate(t) {
        let coplanar = match t.iter().find(|v| *v != a) {
            Some(other) => o3(p, q, a, other) == 0.0,
            None => true,
        };
        return coplanar && coplanar_segment_triangle(p, q, t);
    }
    let op = o3(a, b, c, p);
    let oq = o3(a, b, c, q);
    if (op > 0.0 && oq > 0.0) || (op < 0.0 && oq < 0.0) {
        return false;
    }
    if op == 0.0 && oq == 0.0 {
        return coplanar_segment_triangle(p, q, t);
    }
    let s1 = o3(p, q, a, b);
    let s2 = o3(p, q, b, c);
    let s3 = o3(p, q, c, a);
    (s1 >= 0.0 && s2 >= 0.0 && s3 >= 0.0) || (s1 <= 0.0 && s2 <= 0.0 && s3 <= 0.0)
}

fn project(v: &Vec3, drop: usize) -> P2 {
    match drop {
        0 => (v.y, v.z),
        1 => (v.z, v.x),
        _ => (v.x, v.y),
    }
}

/// The three corners are collinear: every coordinate projection collapses.
fn is_degenerate(t: &[Vec3; 3]) -> bool {
    (0..3).all(|k| o2(project(&t[0], k), project(&t[1], k), project(&t[2], k)) == 0.0)
}

/// For point sets in a common plane, at least one coordinate projection is
/// injective on that plane, and every projection preserves intersection, so
/// the sets meet iff all three projections meet.
fn coplanar_segment_triangle(p: &Vec3, q: &Vec3, t: &[Vec3; 3]) -> bool {
    (0..3).all(|k| {
        let tri = [project(&t[0], k), project(&t[1], k), project(&t[2], k)];
        segment_meets_triangle_2d(project(p, k), project(q, k), &tri)
    })
}

fn segment_meets_triangle_2d(p: P2, q: P2, tri: &[P2; 3]) -> bool {
    let solid = o2(tri[0], tri[1], tri[2]) != 0.0;
    if solid && (point_in_triangle(p, tri) || point_in_triangle(q, tri)) {
        return true;
    }
    (0..3).any(|i| segments_intersect(p, q, tri[i], tri[(i + 1) % 3]))
}

fn point_in_triangle(p: P2, t: &[P2; 3]) -> bool {
    let d = [o2(t[0], t[1], p), o2(t[1], t[2], p), o2(t[2], t[0], p)];
    let neg = d.iter().any(|&x| x < 0.0);
    let pos = d.iter().any(|&x| x > 0.0);
    !(neg && pos)
}

fn on_segment(a: P2, b: P2, p: P2) -> bool {
    p.0 >= a.0.min(b.0) && p.0 <= a.0.max(b.0) && p.1 >= a.1.min(b.1) && p.1 <= a.1.max(b.1)
}

fn segments_intersect(p: P2, q: P2, r: P2, s: P2) -> bool {
    let d1 = o2(p, q, r);
    let d2 = o2(p, q, s);
    let d3 = o2(r, s, p);
    let d4 = o2(r, s, q);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(p, q, r))
        || (d2 == 0.0 && on_segment(p, q, s))
        || (d3 == 0.0 && on_segment(r, s, p))
        || (d4 == 0.0 && on_segment(r, s, q))
}
