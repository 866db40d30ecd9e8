//! Gravitational-feature-function denoiser used as the comparison baseline.
//!
//! Each point's "force" is `G * n_i / d_i^2`, where `d_i` is its distance to
//! the cloud centroid and `n_i` counts points within a global radius `R`
//! (the point itself included). Points with force `>= T / d_i` are kept.
//!
//! The radius and threshold mix units (`R` is an area per point), so the
//! outcome depends on the absolute scale of the input.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{bounding_box, centroid, PointCloud};
use crate::kdtree::KdTree;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineParams {
    /// Gravitational constant.
    pub g: f64,
    /// Empirical threshold weight.
    pub alpha_threshold: f64,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self {
            g: 6.67e-11,
            alpha_threshold: 600.0,
        }
    }
}

impl BaselineParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.g > 0.0 && self.g.is_finite()) {
            return Err(Error::param("G", "must be > 0"));
        }
        if !(self.alpha_threshold > 0.0 && self.alpha_threshold.is_finite()) {
            return Err(Error::param("alpha_threshold", "must be > 0"));
        }
        Ok(())
    }
}

/// `R = 6 (Hx Hy + Hx Hz + Hy Hz) / N`.
pub fn search_radius(cloud: &PointCloud) -> Result<f64> {
    let [hx, hy, hz] = bounding_box(cloud)?.extents();
    Ok(6.0 * (hx * hy + hx * hz + hy * hz) / cloud.len() as f64)
}

/// `T = alpha * G * (Hx + Hy + Hz) / N`.
pub fn threshold(cloud: &PointCloud, params: &BaselineParams) -> Result<f64> {
    let [hx, hy, hz] = bounding_box(cloud)?.extents();
    Ok(params.alpha_threshold * params.g * (hx + hy + hz) / cloud.len() as f64)
}

/// Keeps a point when its force reaches `T / d_i`. Points sitting exactly on
/// the centroid are always kept. Returns retained ids, ascending.
pub fn baseline_denoise(cloud: &PointCloud, params: &BaselineParams) -> Result<Vec<usize>> {
    params.validate()?;
    let theta = centroid(cloud)?;
    let r = search_radius(cloud)?;
    let t = threshold(cloud, params)?;
    let tree = KdTree::new(cloud.points());
    let r2 = r * r;
    let keep: Vec<bool> = cloud
        .points()
        .par_iter()
        .map(|p| {
            let d = p.dist(&theta);
            if d == 0.0 {
                return true;
            }
            let n = tree.count_within(p, r2) as f64;
            let force = params.g * n / (d * d);
            force >= t / d
        })
        .collect();
    Ok(keep
        .iter()
        .zip(cloud.ids())
        .filter(|(&k, _)| k)
        .map(|(_, &id)| id)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point3;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Straight O(N^2) evaluation with no spatial index.
    fn brute_force(cloud: &PointCloud, p: &BaselineParams) -> Vec<usize> {
        let pts = cloud.points();
        let n = pts.len() as f64;
        let mut c = [0.0; 3];
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for q in pts {
            for a in 0..3 {
                c[a] += q.coord(a);
                lo[a] = lo[a].min(q.coord(a));
                hi[a] = hi[a].max(q.coord(a));
            }
        }
        let theta = Point3::new(c[0] / n, c[1] / n, c[2] / n);
        let h = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
        let r = 6.0 * (h[0] * h[1] + h[0] * h[2] + h[1] * h[2]) / n;
        let t = p.alpha_threshold * p.g * (h[0] + h[1] + h[2]) / n;
        let mut out = Vec::new();
        for (i, q) in pts.iter().enumerate() {
            let d = q.dist(&theta);
            let ni = pts.iter().filter(|o| o.dist2(q) <= r * r).count() as f64;
            if d == 0.0 || p.g * ni / (d * d) >= t / d {
                out.push(i);
            }
        }
        out
    }

    fn cluster_with_outlier(seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts: Vec<Point3> = (0..200)
            .map(|_| Point3::new(rng.random(), rng.random(), rng.random()))
            .collect();
        pts.push(Point3::new(100.5, 0.5, 0.5));
        PointCloud::new(pts).unwrap()
    }

    #[test]
    fn radius_examples() {
        let mut cube: Vec<Point3> = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 1.0, 1.0)];
        cube.resize(6, Point3::new(0.5, 0.5, 0.5));
        assert_eq!(search_radius(&PointCloud::new(cube).unwrap()).unwrap(), 3.0);
        let mut big: Vec<Point3> = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(2.0, 2.0, 2.0)];
        big.resize(24, Point3::new(1.0, 1.0, 1.0));
        assert_eq!(search_radius(&PointCloud::new(big).unwrap()).unwrap(), 3.0);
    }

    #[test]
    fn radius_matches_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pts: Vec<Point3> = (0..1000)
            .map(|_| Point3::new(rng.random::<f64>() * 4.0, rng.random(), rng.random::<f64>() * 0.5))
            .collect();
        let c = PointCloud::new(pts.clone()).unwrap();
        let ext = |a: usize| {
            let v: Vec<f64> = pts.iter().map(|p| p.coord(a)).collect();
            v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min)
        };
        let (hx, hy, hz) = (ext(0), ext(1), ext(2));
        let want = 6.0 * (hx * hy + hx * hz + hy * hz) / 1000.0;
        assert_relative_eq!(search_radius(&c).unwrap(), want, max_relative = 1e-12);
    }

    #[test]
    fn single_point_is_kept() {
        let c = PointCloud::new(vec![Point3::new(2.0, 3.0, 4.0)]).unwrap();
        assert_eq!(baseline_denoise(&c, &BaselineParams::default()).unwrap(), vec![0]);
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        // Scale chosen so that the threshold actually splits the cloud.
        let pts: Vec<Point3> = (0..300)
            .map(|_| Point3::new(rng.random::<f64>() * 30.0, rng.random::<f64>() * 30.0, rng.random::<f64>() * 30.0))
            .collect();
        let c = PointCloud::new(pts).unwrap();
        let p = BaselineParams { g: 6.67e-11, alpha_threshold: 60.0 };
        let got = baseline_denoise(&c, &p).unwrap();
        assert_eq!(got, brute_force(&c, &p));
        assert!(!got.is_empty() && got.len() < 300);
    }

    #[test]
    fn far_outlier_is_removed() {
        let c = cluster_with_outlier(2);
        let p = BaselineParams::default();
        let oracle = brute_force(&c, &p);
        assert!(!oracle.contains(&200));
        let got = baseline_denoise(&c, &p).unwrap();
        assert_eq!(got, oracle);
        assert!(!got.contains(&200));
        // Every cluster point sees the whole cluster within R (about 6), so
        // n_i = 200 and the rule reduces to d_i <= 200 / 306; points well inside
        // that distance of the (shifted) centroid must survive.
        let theta = centroid(&c).unwrap();
        let near: Vec<usize> = (0..200).filter(|&i| c.points()[i].dist(&theta) < 0.6).collect();
        assert!(near.len() > 20);
        assert!(near.iter().all(|i| got.contains(i)));
        assert!(got.iter().all(|&i| i < 200));
    }

    #[test]
    fn invalid_params_rejected() {
        let c = cluster_with_outlier(1);
        let p = BaselineParams { g: 0.0, ..Default::default() };
        assert!(baseline_denoise(&c, &p).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn oracle_equivalence_and_monotone_threshold(
            seed in any::<u64>(),
            n in 1usize..400,
            scale in 1.0f64..60.0,
            a in 1.0f64..800.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<Point3> = (0..n)
                .map(|_| Point3::new(rng.random::<f64>() * scale, rng.random::<f64>() * scale, rng.random::<f64>() * scale * 0.3))
                .collect();
            let c = PointCloud::new(pts).unwrap();
            let p = BaselineParams { g: 6.67e-11, alpha_threshold: a };
            let got = baseline_denoise(&c, &p).unwrap();
            prop_assert_eq!(&got, &brute_force(&c, &p));
            let stricter = baseline_denoise(&c, &BaselineParams { alpha_threshold: a * 1.5, ..p }).unwrap();
            prop_assert!(stricter.iter().all(|i| got.contains(i)));
        }
    }
}
