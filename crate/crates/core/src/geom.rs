//! Basic geometric types: points, labelled point clouds and axis-aligned boxes.

use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in 3-D space. Units are whatever the input uses.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn coord(&self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    #[inline]
    pub fn dist2(&self, other: &Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        dx * dx + dy * dy + dz * dz
    }

    #[inline]
    pub fn dist(&self, other: &Point3) -> f64 {
        self.dist2(other).sqrt()
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn scale(&self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

/// An ordered set of points with an optional ground-truth noise label per
/// point and a stable id per point.
///
/// Ids are assigned `0..N` when a cloud is created and are carried through
/// every filter, so a filtered cloud's ids are a strictly increasing
/// subsequence of the original ids. Labels (`true` = noise) travel alongside
/// the points and are never re-derived from coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3>,
    labels: Option<Vec<bool>>,
    ids: Vec<usize>,
}

impl PointCloud {
    /// Builds an unlabelled cloud. Fails on any non-finite coordinate.
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        check_finite(&points)?;
        let ids = (0..points.len()).collect();
        Ok(Self {
            points,
            labels: None,
            ids,
        })
    }

    /// Builds a labelled cloud (`true` marks a noise point).
    pub fn with_labels(points: Vec<Point3>, labels: Vec<bool>) -> Result<Self> {
        if labels.len() != points.len() {
            return Err(Error::LabelMismatch {
                labels: labels.len(),
                points: points.len(),
            });
        }
        let mut cloud = Self::new(points)?;
        cloud.labels = Some(labels);
        Ok(cloud)
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn labels(&self) -> Option<&[bool]> {
        self.labels.as_deref()
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of points labelled as noise (0 for unlabelled clouds).
    pub fn noise_count(&self) -> usize {
        self.labels
            .as_ref()
            .map_or(0, |l| l.iter().filter(|&&b| b).count())
    }

    /// Keeps the points at the given positions (not ids). Positions must be
    /// strictly increasing.
    pub fn select_positions(&self, positions: &[usize]) -> PointCloud {
        debug_assert!(positions.windows(2).all(|w| w[0] < w[1]));
        self.gather(positions)
    }

    /// Points at `positions`, in the order given.
    pub fn gather(&self, positions: &[usize]) -> PointCloud {
        PointCloud {
            points: positions.iter().map(|&p| self.points[p]).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| positions.iter().map(|&p| l[p]).collect()),
            ids: positions.iter().map(|&p| self.ids[p]).collect(),
        }
    }

    /// Keeps the points whose id is in `ids` (sorted ascending).
    pub fn select_ids(&self, ids: &[usize]) -> PointCloud {
        let mut positions = Vec::with_capacity(ids.len());
        let mut cursor = 0;
        for &id in ids {
            while cursor < self.ids.len() && self.ids[cursor] < id {
                cursor += 1;
            }
            if cursor < self.ids.len() && self.ids[cursor] == id {
                positions.push(cursor);
            }
        }
        self.select_positions(&positions)
    }

    /// The subcloud of points labelled clean. Unlabelled clouds are returned
    /// whole.
    pub fn clean_part(&self) -> PointCloud {
        match &self.labels {
            None => self.clone(),
            Some(l) => {
                let keep: Vec<usize> = (0..l.len()).filter(|&i| !l[i]).collect();
                self.select_positions(&keep)
            }
        }
    }

    /// Appends points; new points receive fresh ids after the current maximum.
    pub(crate) fn append(&mut self, points: &[Point3], label: bool) {
        let base = self.ids.last().map_or(0, |&m| m + 1);
        let labels = self
            .labels
            .get_or_insert_with(|| vec![false; self.points.len()]);
        labels.extend(std::iter::repeat_n(label, points.len()));
        self.ids.extend(base..base + points.len());
        self.points.extend_from_slice(points);
    }

    /// Attaches an all-clean label channel if none is present.
    pub fn ensure_labels(&mut self) {
        if self.labels.is_none() {
            self.labels = Some(vec![false; self.points.len()]);
        }
    }

    /// Applies `f` to every coordinate, keeping ids and labels.
    pub fn map_points(&self, f: impl Fn(Point3) -> Point3) -> Result<PointCloud> {
        let points: Vec<Point3> = self.points.iter().map(|&p| f(p)).collect();
        check_finite(&points)?;
        Ok(PointCloud {
            points,
            labels: self.labels.clone(),
            ids: self.ids.clone(),
        })
    }
}

fn check_finite(points: &[Point3]) -> Result<()> {
    let bad: Vec<usize> = points
        .iter()
        .enumerate()
        .filter(|(_, p)| !p.is_finite())
        .map(|(i, _)| i)
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::NonFinite { records: bad })
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    /// Tight box around `points`; `None` when empty.
    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point3>) -> Option<Aabb> {
        let mut it = points.into_iter();
        let first = *it.next()?;
        let (mut lo, mut hi) = (first, first);
        for p in it {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            lo.z = lo.z.min(p.z);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
            hi.z = hi.z.max(p.z);
        }
        Some(Aabb { min: lo, max: hi })
    }

    /// Extents `(H_x, H_y, H_z)`.
    pub fn extents(&self) -> [f64; 3] {
        [
            self.max.x - self.min.x,
            self.max.y - self.min.y,
            self.max.z - self.min.z,
        ]
    }

    pub fn diagonal(&self) -> f64 {
        let [hx, hy, hz] = self.extents();
        (hx * hx + hy * hy + hz * hz).sqrt()
    }

    pub fn volume(&self) -> f64 {
        let [hx, hy, hz] = self.extents();
        hx * hy * hz
    }

    pub fn center(&self) -> Point3 {
        Point3::new(
            0.5 * (self.min.x + self.max.x),
            0.5 * (self.min.y + self.max.y),
            0.5 * (self.min.z + self.max.z),
        )
    }

    /// The box scaled by `factor` about its center.
    pub fn expanded(&self, factor: f64) -> Aabb {
        let c = self.center();
        let [hx, hy, hz] = self.extents();
        let half = Point3::new(hx, hy, hz).scale(0.5 * factor);
        Aabb {
            min: c - half,
            max: c + half,
        }
    }

    pub fn contains(&self, p: &Point3) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }
}

/// Component-wise extrema of the cloud.
pub fn bounding_box(cloud: &PointCloud) -> Result<Aabb> {
    Aabb::from_points(cloud.points()).ok_or(Error::EmptyInput)
}

/// Arithmetic mean of all points.
pub fn centroid(cloud: &PointCloud) -> Result<Point3> {
    mean(cloud.points()).ok_or(Error::EmptyInput)
}

pub(crate) fn mean(points: &[Point3]) -> Option<Point3> {
    if points.is_empty() {
        return None;
    }
    let (mut sx, mut sy, mut sz) = (0.0, 0.0, 0.0);
    for p in points {
        sx += p.x;
        sy += p.y;
        sz += p.z;
    }
    let n = points.len() as f64;
    Some(Point3::new(sx / n, sy / n, sz / n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(pts: &[(f64, f64, f64)]) -> PointCloud {
        PointCloud::new(pts.iter().map(|&(x, y, z)| Point3::new(x, y, z)).collect()).unwrap()
    }

    fn cube_corners() -> PointCloud {
        let mut v = Vec::new();
        for i in 0..8 {
            v.push(((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64));
        }
        cloud(&v)
    }

    fn random_cloud(n: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = (0..n)
            .map(|_| {
                Point3::new(
                    rng.random_range(-5.0..5.0),
                    rng.random_range(0.0..1.0),
                    rng.random_range(-100.0..3.0),
                )
            })
            .collect();
        PointCloud::new(pts).unwrap()
    }

    #[test]
    fn bbox_of_cube_corners() {
        let b = bounding_box(&cube_corners()).unwrap();
        assert_eq!(b.min, Point3::new(0.0, 0.0, 0.0));
        assert_eq!(b.max, Point3::new(1.0, 1.0, 1.0));
        assert_eq!(b.extents(), [1.0, 1.0, 1.0]);
        assert!((b.diagonal() - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn bbox_of_single_point_is_degenerate() {
        let b = bounding_box(&cloud(&[(3.0, 4.0, 5.0)])).unwrap();
        assert_eq!(b.min, Point3::new(3.0, 4.0, 5.0));
        assert_eq!(b.max, b.min);
        assert_eq!(b.extents(), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn bbox_matches_direct_scan() {
        let c = random_cloud(100, 7);
        let b = bounding_box(&c).unwrap();
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in c.points() {
            for a in 0..3 {
                lo[a] = lo[a].min(p.coord(a));
                hi[a] = hi[a].max(p.coord(a));
            }
        }
        for a in 0..3 {
            assert_eq!(b.min.coord(a), lo[a]);
            assert_eq!(b.max.coord(a), hi[a]);
        }
    }

    #[test]
    fn empty_cloud_is_rejected() {
        let c = PointCloud::new(vec![]).unwrap();
        assert!(matches!(bounding_box(&c), Err(Error::EmptyInput)));
        assert!(matches!(centroid(&c), Err(Error::EmptyInput)));
    }

    #[test]
    fn centroid_examples() {
        let c = centroid(&cloud(&[(0.0, 0.0, 0.0), (2.0, 2.0, 2.0)])).unwrap();
        assert_eq!(c, Point3::new(1.0, 1.0, 1.0));
        assert_eq!(centroid(&cube_corners()).unwrap(), Point3::new(0.5, 0.5, 0.5));
    }

    // Compensated (Neumaier) summation as an independent high-precision route.
    fn neumaier_mean(v: impl Iterator<Item = f64>) -> f64 {
        let (mut sum, mut comp, mut n) = (0.0f64, 0.0f64, 0usize);
        for x in v {
            let t = sum + x;
            if sum.abs() >= x.abs() {
                comp += (sum - t) + x;
            } else {
                comp += (x - t) + sum;
            }
            sum = t;
            n += 1;
        }
        (sum + comp) / n as f64
    }

    #[test]
    fn centroid_matches_compensated_oracle() {
        let c = random_cloud(500, 11);
        let got = centroid(&c).unwrap();
        for a in 0..3 {
            let want = neumaier_mean(c.points().iter().map(|p| p.coord(a)));
            let rel = (got.coord(a) - want).abs() / want.abs().max(1e-300);
            assert!(rel <= 1e-12, "axis {a}: {} vs {want}", got.coord(a));
        }
    }

    #[test]
    fn non_finite_points_rejected() {
        let err = PointCloud::new(vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(f64::NAN, 0.0, 0.0),
            Point3::new(0.0, f64::INFINITY, 0.0),
        ])
        .unwrap_err();
        match err {
            Error::NonFinite { records } => assert_eq!(records, vec![1, 2]),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn label_length_checked() {
        let r = PointCloud::with_labels(vec![Point3::default(); 3], vec![false; 2]);
        assert!(matches!(r, Err(Error::LabelMismatch { .. })));
    }

    #[test]
    fn select_ids_keeps_labels_and_ids() {
        let c = PointCloud::with_labels(
            (0..5).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect(),
            vec![false, true, false, true, false],
        )
        .unwrap();
        let s = c.select_ids(&[1, 2, 4]);
        assert_eq!(s.ids(), &[1, 2, 4]);
        assert_eq!(s.labels().unwrap(), &[true, false, false]);
        let t = s.select_ids(&[2, 4]);
        assert_eq!(t.points()[0].x, 2.0);
        assert_eq!(t.ids(), &[2, 4]);
    }

    proptest! {
        #[test]
        fn centroid_translation_covariant(
            seed in any::<u64>(),
            tx in -1e3f64..1e3, ty in -1e3f64..1e3, tz in -1e3f64..1e3,
        ) {
            let c = random_cloud(64, seed);
            let t = Point3::new(tx, ty, tz);
            let moved = c.map_points(|p| p + t).unwrap();
            let a = centroid(&c).unwrap() + t;
            let b = centroid(&moved).unwrap();
            for ax in 0..3 {
                let scale = a.coord(ax).abs().max(1.0);
                prop_assert!((a.coord(ax) - b.coord(ax)).abs() <= 1e-9 * scale);
            }
        }

        #[test]
        fn bbox_permutation_invariant(seed in any::<u64>(), rot in 0usize..64) {
            let c = random_cloud(64, seed);
            let mut pts = c.points().to_vec();
            pts.rotate_left(rot);
            pts.reverse();
            let shuffled = PointCloud::new(pts).unwrap();
            prop_assert_eq!(bounding_box(&c).unwrap(), bounding_box(&shuffled).unwrap());
        }
    }
}
