//! Recursive octree partitioning of a cloud into independent leaves.

use crate::error::{Error, Result};
use crate::geom::{Aabb, Point3, PointCloud};

/// A terminal octree cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Leaf {
    /// Positions of the member points in the partitioned cloud, ascending.
    pub indices: Vec<usize>,
    /// Tight box of the member points (not the cell bounds).
    pub bbox: Aabb,
}

impl Leaf {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn volume(&self) -> f64 {
        self.bbox.volume()
    }
}

/// Leaves in depth-first child-index (Morton) order.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafPartition {
    pub leaves: Vec<Leaf>,
}

impl LeafPartition {
    /// Treats the whole cloud as a single leaf.
    pub fn single(cloud: &PointCloud) -> Result<Self> {
        let bbox = Aabb::from_points(cloud.points()).ok_or(Error::EmptyInput)?;
        Ok(Self {
            leaves: vec![Leaf {
                indices: (0..cloud.len()).collect(),
                bbox,
            }],
        })
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }
}

/// Splits the cloud's bounding cube 8 ways until a cell holds at most
/// `max_leaf_points` points or its edge drops to
/// `min_leaf_edge_fraction * root_diagonal`. Empty cells are pruned.
///
/// Along each axis a cell is split into `[min, mid)` and `[mid, max]`.
pub fn partition(
    cloud: &PointCloud,
    max_leaf_points: usize,
    min_leaf_edge_fraction: f64,
) -> Result<LeafPartition> {
    if max_leaf_points < 1 {
        return Err(Error::param("max_leaf_points", "must be >= 1"));
    }
    if !(min_leaf_edge_fraction > 0.0 && min_leaf_edge_fraction < 1.0) {
        return Err(Error::param("min_leaf_edge_fraction", "must lie in (0, 1)"));
    }
    let bbox = Aabb::from_points(cloud.points()).ok_or(Error::EmptyInput)?;
    let [hx, hy, hz] = bbox.extents();
    let edge = hx.max(hy).max(hz);
    let min_edge = min_leaf_edge_fraction * bbox.diagonal();

    let mut leaves = Vec::new();
    let builder = Builder {
        points: cloud.points(),
        max_leaf_points,
        min_edge,
    };
    builder.split(
        (0..cloud.len()).collect(),
        bbox.center(),
        0.5 * edge,
        &mut leaves,
    );
    Ok(LeafPartition { leaves })
}

struct Builder<'a> {
    points: &'a [Point3],
    max_leaf_points: usize,
    min_edge: f64,
}

impl Builder<'_> {
    fn split(&self, members: Vec<usize>, center: Point3, half: f64, out: &mut Vec<Leaf>) {
        if members.is_empty() {
            return;
        }
        if members.len() <= self.max_leaf_points || 2.0 * half <= self.min_edge {
            let bbox = Aabb::from_points(members.iter().map(|&i| &self.points[i])).unwrap();
            out.push(Leaf {
                indices: members,
                bbox,
            });
            return;
        }
        let mut children: [Vec<usize>; 8] = Default::default();
        for &i in &members {
            let p = &self.points[i];
            let child = (p.x >= center.x) as usize
                | ((p.y >= center.y) as usize) << 1
                | ((p.z >= center.z) as usize) << 2;
            children[child].push(i);
        }
        drop(members);
        let q = 0.5 * half;
        for (c, kids) in children.into_iter().enumerate() {
            let offset = Point3::new(
                if c & 1 != 0 { q } else { -q },
                if c & 2 != 0 { q } else { -q },
                if c & 4 != 0 { q } else { -q },
            );
            self.split(kids, center + offset, q, out);
        }
    }
}
