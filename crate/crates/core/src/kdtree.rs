//! Exact k-d tree over 3-D points.
//!
//! Every entry carries a `key` (normally the point's original id). Queries
//! order neighbours by `(squared distance, key)`, so equidistant points are
//! resolved towards the smaller key and results are reproducible.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::geom::Point3;

const BUCKET: usize = 8;

#[derive(Debug, Clone, Copy)]
enum Node {
    Leaf { start: u32, end: u32 },
    Split { axis: u8, value: f64, left: u32, right: u32 },
}

/// A neighbour returned by a query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub dist2: f64,
    pub key: usize,
    /// Index of the point in the slice the tree was built from.
    pub index: usize,
}

impl Eq for Neighbor {}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.key.cmp(&other.key))
    }
}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Point3>,
    keys: Vec<usize>,
    source: Vec<u32>,
    nodes: Vec<Node>,
}

impl KdTree {
    /// Builds a tree whose keys are the slice positions.
    pub fn new(points: &[Point3]) -> Self {
        let keys: Vec<usize> = (0..points.len()).collect();
        Self::with_keys(points, &keys)
    }

    pub fn with_keys(points: &[Point3], keys: &[usize]) -> Self {
        assert_eq!(points.len(), keys.len());
        assert!(points.len() < u32::MAX as usize);
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * points.len() / BUCKET + 1);
        if !points.is_empty() {
            build(points, &mut order, 0, &mut nodes);
        }
        KdTree {
            points: order.iter().map(|&i| points[i as usize]).collect(),
            keys: order.iter().map(|&i| keys[i as usize]).collect(),
            source: order,
            nodes,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The `k` nearest entries to `query`, skipping the entry whose key is
    /// `exclude`. Output is sorted by `(dist2, key)`.
    pub fn knn(&self, query: &Point3, k: usize, exclude: Option<usize>) -> Vec<Neighbor> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        let mut out = Vec::with_capacity(k);
        self.knn_into(query, k, exclude, &mut heap, &mut out);
        out
    }

    /// Allocation-free variant of [`KdTree::knn`] for hot loops.
    pub fn knn_into(
        &self,
        query: &Point3,
        k: usize,
        exclude: Option<usize>,
        heap: &mut BinaryHeap<Neighbor>,
        out: &mut Vec<Neighbor>,
    ) {
        heap.clear();
        out.clear();
        if k == 0 || self.nodes.is_empty() {
            return;
        }
        self.knn_rec(0, query, k, exclude, heap);
        out.extend(heap.drain());
        out.sort_unstable();
    }

    fn knn_rec(
        &self,
        node: usize,
        q: &Point3,
        k: usize,
        exclude: Option<usize>,
        heap: &mut BinaryHeap<Neighbor>,
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for i in start as usize..end as usize {
                    let key = self.keys[i];
                    if Some(key) == exclude {
                        continue;
                    }
                    let cand = Neighbor {
                        dist2: self.points[i].dist2(q),
                        key,
                        index: self.source[i] as usize,
                    };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q.coord(axis as usize) - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.knn_rec(near as usize, q, k, exclude, heap);
                // Equality still descends: an equidistant entry with a smaller
                // key may live on the far side.
                if heap.len() < k || diff * diff <= heap.peek().unwrap().dist2 {
                    self.knn_rec(far as usize, q, k, exclude, heap);
                }
            }
        }
    }

    /// Nearest entry to `query` (no exclusion).
    pub fn nearest(&self, query: &Point3) -> Option<Neighbor> {
        self.knn(query, 1, None).into_iter().next()
    }

    /// Number of entries with squared distance `<= radius2` from `query`.
    pub fn count_within(&self, query: &Point3, radius2: f64) -> usize {
        if self.nodes.is_empty() {
            return 0;
        }
        let mut count = 0;
        let mut stack = vec![0u32];
        while let Some(n) = stack.pop() {
            match self.nodes[n as usize] {
                Node::Leaf { start, end } => {
                    count += self.points[start as usize..end as usize]
                        .iter()
                        .filter(|p| p.dist2(query) <= radius2)
                        .count();
                }
                Node::Split { axis, value, left, right } => {
                    let diff = query.coord(axis as usize) - value;
                    let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                    stack.push(near);
                    if diff * diff <= radius2 {
                        stack.push(far);
                    }
                }
            }
        }
        count
    }
}

fn build(points: &[Point3], order: &mut [u32], offset: usize, nodes: &mut Vec<Node>) -> u32 {
    let id = nodes.len() as u32;
    let n = order.len();
    if n <= BUCKET {
        nodes.push(Node::Leaf {
            start: offset as u32,
            end: (offset + n) as u32,
        });
        return id;
    }
    let axis = widest_axis(points, order);
    let mid = n / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize]
            .coord(axis)
            .total_cmp(&points[b as usize].coord(axis))
    });
    let value = points[order[mid] as usize].coord(axis);
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let (lo, hi) = order.split_at_mut(mid);
    let left = build(points, lo, offset, nodes);
    let right = build(points, hi, offset + mid, nodes);
    nodes[id as usize] = Node::Split {
        axis: axis as u8,
        value,
        left,
        right,
    };
    id
}

fn widest_axis(points: &[Point3], order: &[u32]) -> usize {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in order {
        let p = &points[i as usize];
        for a in 0..3 {
            let c = p.coord(a);
            lo[a] = lo[a].min(c);
            hi[a] = hi[a].max(c);
        }
    }
    let spread = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
    let mut best = 0;
    for a in 1..3 {
        if spread[a] > spread[best] {
            best = a;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_knn(points: &[Point3], q: &Point3, k: usize, exclude: Option<usize>) -> Vec<(f64, usize)> {
        let mut all: Vec<(f64, usize)> = points
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != exclude)
            .map(|(i, p)| (p.dist2(q), i))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all.truncate(k);
        all
    }

    fn lattice_points(seed: u64, n: usize) -> Vec<Point3> {
        // Integer lattice coordinates force many exact distance ties.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                Point3::new(
                    rng.random_range(0..6) as f64,
                    rng.random_range(0..6) as f64,
                    rng.random_range(0..3) as f64,
                )
            })
            .collect()
    }

    #[test]
    fn empty_tree_returns_nothing() {
        let t = KdTree::new(&[]);
        assert!(t.knn(&Point3::default(), 3, None).is_empty());
        assert_eq!(t.count_within(&Point3::default(), 1.0), 0);
    }

    #[test]
    fn ties_resolve_to_smaller_key() {
        let pts = lattice_points(3, 300);
        let tree = KdTree::new(&pts);
        for (i, p) in pts.iter().enumerate() {
            let got: Vec<(f64, usize)> = tree
                .knn(p, 7, Some(i))
                .iter()
                .map(|n| (n.dist2, n.key))
                .collect();
            assert_eq!(got, brute_knn(&pts, p, 7, Some(i)));
        }
    }

    #[test]
    fn custom_keys_are_reported() {
        let pts = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)];
        let tree = KdTree::with_keys(&pts, &[40, 10]);
        let n = tree.nearest(&Point3::new(0.9, 0.0, 0.0)).unwrap();
        assert_eq!((n.key, n.index), (10, 1));
    }

    proptest! {
        #[test]
        fn knn_matches_brute_force(seed in any::<u64>(), n in 1usize..400, k in 1usize..20) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<Point3> = (0..n)
                .map(|_| Point3::new(rng.random(), rng.random(), rng.random::<f64>() * 0.1))
                .collect();
            let tree = KdTree::new(&pts);
            for (i, p) in pts.iter().enumerate().take(50) {
                let got: Vec<(f64, usize)> =
                    tree.knn(p, k, Some(i)).iter().map(|n| (n.dist2, n.index)).collect();
                prop_assert_eq!(got, brute_knn(&pts, p, k, Some(i)));
            }
        }

        #[test]
        fn radius_count_matches_brute_force(seed in any::<u64>(), r in 0.0f64..0.5) {
            let pts = lattice_points(seed, 200)
                .into_iter()
                .map(|p| p.scale(0.1))
                .collect::<Vec<_>>();
            let tree = KdTree::new(&pts);
            for p in pts.iter().take(40) {
                let want = pts.iter().filter(|o| o.dist2(p) <= r * r).count();
                prop_assert_eq!(tree.count_within(p, r * r), want);
            }
        }
    }
}
