//! Candidate pre-screening inside a leaf: an occupancy gate on an adaptive
//! voxel grid, followed by kNN density estimation and a percentile cut.

use std::collections::{BinaryHeap, HashMap};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geom::{Aabb, Point3};
use crate::kdtree::KdTree;
use crate::octree::Leaf;

/// Voxel edge for a leaf, `beta * (V / N)^(1/3)`.
///
/// Flat leaves fall back to lower-dimensional spacing: `beta * sqrt(A / N)`
/// with one vanishing extent, `beta * L / N` with two. Returns `None` when
/// all extents vanish; callers then keep every point of the leaf.
pub fn adaptive_voxel_size(leaf: &Leaf, beta: f64) -> Option<f64> {
    voxel_size_for(&leaf.bbox, leaf.len(), beta)
}

pub fn voxel_size_for(bbox: &Aabb, n: usize, beta: f64) -> Option<f64> {
    if n == 0 {
        return None;
    }
    let n = n as f64;
    let nonzero: Vec<f64> = bbox.extents().into_iter().filter(|&e| e > 0.0).collect();
    let h = match nonzero.as_slice() {
        [a, b, c] => beta * (a * b * c / n).cbrt(),
        [a, b] => beta * (a * b / n).sqrt(),
        [a] => beta * a / n,
        _ => return None,
    };
    (h > 0.0 && h.is_finite()).then_some(h)
}

/// Occupancy counts of a regular grid anchored at `origin`.
#[derive(Debug, Clone)]
pub struct VoxelGrid {
    pub origin: Point3,
    pub h: f64,
    pub occupancy: HashMap<[i64; 3], usize>,
}

impl VoxelGrid {
    pub fn build<'a>(origin: Point3, h: f64, points: impl IntoIterator<Item = &'a Point3>) -> Self {
        assert!(h > 0.0, "voxel edge must be positive");
        let mut occupancy = HashMap::new();
        for p in points {
            *occupancy.entry(voxel_key(&origin, h, p)).or_insert(0) += 1;
        }
        Self {
            origin,
            h,
            occupancy,
        }
    }

    pub fn key(&self, p: &Point3) -> [i64; 3] {
        voxel_key(&self.origin, self.h, p)
    }

    pub fn count(&self, p: &Point3) -> usize {
        self.occupancy.get(&self.key(p)).copied().unwrap_or(0)
    }
}

#[inline]
fn voxel_key(origin: &Point3, h: f64, p: &Point3) -> [i64; 3] {
    [
        ((p.x - origin.x) / h).floor() as i64,
        ((p.y - origin.y) / h).floor() as i64,
        ((p.z - origin.z) / h).floor() as i64,
    ]
}

/// Keeps the members of `indices` whose voxel holds at least `min_count`
/// points of `indices`. Order is preserved.
pub fn voxel_gate(
    points: &[Point3],
    indices: &[usize],
    origin: Point3,
    h: f64,
    min_count: usize,
) -> Vec<usize> {
    if min_count == 0 {
        return indices.to_vec();
    }
    let grid = VoxelGrid::build(origin, h, indices.iter().map(|&i| &points[i]));
    indices
        .iter()
        .copied()
        .filter(|&i| grid.count(&points[i]) >= min_count)
        .collect()
}

/// kNN density of a candidate set, in candidate-local indexing.
///
/// Neighbour lists are stored compressed: the neighbours of candidate `i`
/// are `neighbors(i)` with matching `distances(i)`, nearest first.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    /// Neighbour count used for the density (`K` clamped to `n - 1`).
    pub k: usize,
    pub rho: Vec<f64>,
    pub r_k: Vec<f64>,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    distances: Vec<f64>,
}

impl DensityField {
    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn distances(&self, i: usize) -> &[f64] {
        &self.distances[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Field over the candidates at `keep` (ascending local indices).
    /// Densities and radii are carried over; neighbour lists are cut down to
    /// pairs where both ends survive and re-indexed.
    pub fn restrict(&self, keep: &[usize]) -> DensityField {
        let mut remap = vec![usize::MAX; self.len()];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        let mut offsets = Vec::with_capacity(keep.len() + 1);
        let mut neighbors = Vec::new();
        let mut distances = Vec::new();
        offsets.push(0);
        for &old in keep {
            for (&j, &d) in self.neighbors(old).iter().zip(self.distances(old)) {
                if remap[j] != usize::MAX {
                    neighbors.push(remap[j]);
                    distances.push(d);
                }
            }
            offsets.push(neighbors.len());
        }
        DensityField {
            k: self.k,
            rho: keep.iter().map(|&i| self.rho[i]).collect(),
            r_k: keep.iter().map(|&i| self.r_k[i]).collect(),
            offsets,
            neighbors,
            distances,
        }
    }
}

/// For each candidate, finds its `k` nearest other candidates (ties broken by
/// ascending key), the distance `r_k` to the farthest of them, and the
/// density `k_eff / (4/3 pi max(r_k, eps)^3)`.
pub fn knn_density(points: &[Point3], keys: &[usize], k: usize, epsilon: f64) -> Result<DensityField> {
    assert_eq!(points.len(), keys.len());
    let n = points.len();
    if n < 2 {
        return Err(Error::DegenerateLeaf(n));
    }
    if k < 1 {
        return Err(Error::param("k", "must be >= 1"));
    }
    let k_eff = k.min(n - 1);
    let tree = KdTree::with_keys(points, keys);

    let mut offsets = Vec::with_capacity(n + 1);
    let mut neighbors = Vec::with_capacity(n * k_eff);
    let mut distances = Vec::with_capacity(n * k_eff);
    let mut rho = Vec::with_capacity(n);
    let mut r_k = Vec::with_capacity(n);
    let mut heap = BinaryHeap::with_capacity(k_eff + 1);
    let mut found = Vec::with_capacity(k_eff);
    offsets.push(0);
    for (p, &key) in points.iter().zip(keys) {
        tree.knn_into(p, k_eff, Some(key), &mut heap, &mut found);
        let mut r = 0.0f64;
        for nb in &found {
            let d = nb.dist2.sqrt();
            r = r.max(d);
            neighbors.push(nb.index);
            distances.push(d);
        }
        offsets.push(neighbors.len());
        r_k.push(r);
        rho.push(ball_density(k_eff, r, epsilon));
    }
    Ok(DensityField {
        k: k_eff,
        rho,
        r_k,
        offsets,
        neighbors,
        distances,
    })
}

#[inline]
pub(crate) fn ball_density(k: usize, r: f64, epsilon: f64) -> f64 {
    let r = r.max(epsilon);
    k as f64 / (4.0 / 3.0 * PI * r * r * r)
}

/// Linear-interpolation percentile: the value at fractional rank
/// `q / 100 * (n - 1)` of the ascending sort.
pub fn percentile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = (q / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    Some(if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    })
}

/// Local indices of candidates with density at or above the `q`-th percentile.
pub fn density_filter(field: &DensityField, q: f64) -> Vec<usize> {
    match percentile(&field.rho, q) {
        None => Vec::new(),
        Some(t) => (0..field.len()).filter(|&i| field.rho[i] >= t).collect(),
    }
}
