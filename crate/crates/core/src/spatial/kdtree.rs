use crate::mesh::Vec3;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Static k-d tree for nearest-neighbour queries. Ties are resolved towards
/// the lowest point index, so results do not depend on tree layout.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Vec3>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl KdTree {
    pub fn new(points: &[Vec3]) -> Self {
        let mut tree = Self { points: points.to_vec(), order: (0..points.len()).collect(), nodes: Vec::new() };
        if !points.is_empty() {
            tree.build(0, points.len());
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for &i in &self.order[start..end] {
            lo = lo.inf(&self.points[i]);
            hi = hi.sup(&self.points[i]);
        }
        let axis = (hi - lo).imax();
        let pts = &self.points;
        self.order[start..end].sort_unstable_by(|&a, &b| pts[a][axis].total_cmp(&pts[b][axis]).then(a.cmp(&b)));
        let mid = start + (end - start) / 2;
        let value = self.points[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    /// Index and squared distance of the nearest point. `None` on an empty tree.
    pub fn nearest(&self, q: &Vec3) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(0, q, &mut best);
        Some(best)
    }

    fn search(&self, node: usize, q: &Vec3, best: &mut (usize, f64)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = (self.points[i] - q).norm_squared();
                    if d < best.1 || (d == best.1 && i < best.0) {
                        *best = (i, d);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let delta = q[axis] - value;
                let (near, far) = if delta < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                // `<=` keeps equidistant candidates on the far side reachable
                if delta * delta <= best.1 {
                    self.search(far, q, best);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(points: &[Vec3], q: &Vec3) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, p) in points.iter().enumerate() {
            let d = (p - q).norm_squared();
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    #[test]
    fn duplicate_points_resolve_to_lowest_index() {
        let pts = vec![Vec3::new(1.0, 0.0, 0.0); 40];
        let t = KdTree::new(&pts);
        assert_eq!(t.nearest(&Vec3::zeros()), Some((0, 1.0)));
        assert_eq!(KdTree::new(&[]).nearest(&Vec3::zeros()), None);
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            raw in prop::collection::vec((-4i32..4, -4i32..4, -4i32..4), 1..200),
            q in (-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0),
        ) {
            // integer lattice points force many exact ties
            let pts: Vec<Vec3> = raw.iter().map(|&(x, y, z)| Vec3::new(x as f64, y as f64, z as f64)).collect();
            let q = Vec3::new(q.0.round(), q.1, q.2.round());
            let t = KdTree::new(&pts);
            prop_assert_eq!(t.nearest(&q).unwrap(), brute(&pts, &q));
        }
    }
}
