//! Synthetic contamination with ground-truth labels: uniform "random" noise
//! over an expanded bounding box and compact Gaussian "dense" clusters.
//!
//! Generation is driven by ChaCha8 seeded from [`NoiseSpec::seed`]; random
//! noise draws from stream 0 and cluster noise from stream 1, so the two
//! kinds never perturb each other's sequences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Aabb, Point3, PointCloud};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    /// Uniform noise, as a fraction of the clean point count.
    pub random_ratio: f64,
    /// Cluster noise, as a fraction of the clean point count.
    pub dense_ratio: f64,
    pub cluster_count: usize,
    /// Cluster standard deviation as a fraction of the clean box diagonal.
    pub cluster_sigma_fraction: f64,
    /// Scale of the placement box relative to the clean box (about its centre).
    pub bbox_expand: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            random_ratio: 0.10,
            dense_ratio: 0.0,
            cluster_count: 3,
            cluster_sigma_fraction: 0.02,
            bbox_expand: 1.1,
            seed: 0,
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.random_ratio >= 0.0 && self.random_ratio.is_finite()) {
            return Err(Error::param("random_ratio", "must be >= 0"));
        }
        if !(self.dense_ratio >= 0.0 && self.dense_ratio.is_finite()) {
            return Err(Error::param("dense_ratio", "must be >= 0"));
        }
        if self.dense_ratio > 0.0 && self.cluster_count == 0 {
            return Err(Error::param("cluster_count", "must be >= 1 when dense_ratio > 0"));
        }
        if !(self.cluster_sigma_fraction >= 0.0 && self.cluster_sigma_fraction.is_finite()) {
            return Err(Error::param("cluster_sigma_fraction", "must be >= 0"));
        }
        if !(self.bbox_expand > 0.0 && self.bbox_expand.is_finite()) {
            return Err(Error::param("bbox_expand", "must be > 0"));
        }
        Ok(())
    }
}

/// `round(ratio * n)` with halves rounded away from zero.
pub fn added_count(ratio: f64, n: usize) -> usize {
    (ratio * n as f64).round() as usize
}

struct CleanStats {
    n: usize,
    bbox: Aabb,
}

fn clean_stats(cloud: &PointCloud) -> Result<CleanStats> {
    let clean = cloud.clean_part();
    let bbox = Aabb::from_points(clean.points()).ok_or(Error::EmptyInput)?;
    Ok(CleanStats {
        n: clean.len(),
        bbox,
    })
}

fn uniform_in(rng: &mut ChaCha8Rng, b: &Aabb) -> Point3 {
    let u: [f64; 3] = [rng.random(), rng.random(), rng.random()];
    Point3::new(
        b.min.x + u[0] * (b.max.x - b.min.x),
        b.min.y + u[1] * (b.max.y - b.min.y),
        b.min.z + u[2] * (b.max.z - b.min.z),
    )
}

/// Appends `round(ratio * N_clean)` points drawn uniformly from the clean
/// box expanded by `spec.bbox_expand`. Existing points keep their labels
/// (unlabelled input counts as clean); new points are labelled noise.
pub fn inject_random(cloud: &PointCloud, ratio: f64, spec: &NoiseSpec) -> Result<PointCloud> {
    spec.validate()?;
    let stats = clean_stats(cloud)?;
    let m = added_count(ratio, stats.n);
    let region = stats.bbox.expanded(spec.bbox_expand);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(0);
    let noise: Vec<Point3> = (0..m).map(|_| uniform_in(&mut rng, &region)).collect();
    let mut out = cloud.clone();
    out.ensure_labels();
    out.append(&noise, true);
    Ok(out)
}

/// Appends `round(ratio * N_clean)` points split as evenly as possible over
/// `spec.cluster_count` isotropic Gaussian blobs. Blob centres are uniform in
/// the expanded clean box; the standard deviation is
/// `cluster_sigma_fraction * clean_diagonal`.
pub fn inject_dense_clusters(cloud: &PointCloud, ratio: f64, spec: &NoiseSpec) -> Result<PointCloud> {
    spec.validate()?;
    let stats = clean_stats(cloud)?;
    let m = added_count(ratio, stats.n);
    let mut out = cloud.clone();
    out.ensure_labels();
    if m == 0 {
        return Ok(out);
    }
    if spec.cluster_count == 0 {
        return Err(Error::param("cluster_count", "must be >= 1 when dense noise is added"));
    }
    let region = stats.bbox.expanded(spec.bbox_expand);
    let sd = spec.cluster_sigma_fraction * stats.bbox.diagonal();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1);
    let c = spec.cluster_count;
    let centers: Vec<Point3> = (0..c).map(|_| uniform_in(&mut rng, &region)).collect();
    let mut noise = Vec::with_capacity(m);
    for (k, center) in centers.iter().enumerate() {
        let size = m / c + usize::from(k < m % c);
        for _ in 0..size {
            let g: [f64; 3] = [
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            ];
            noise.push(*center + Point3::new(g[0], g[1], g[2]).scale(sd));
        }
    }
    out.append(&noise, true);
    Ok(out)
}

/// Random noise followed by dense clusters, both sized against the clean
/// point count.
pub fn contaminate(clean: &PointCloud, spec: &NoiseSpec) -> Result<PointCloud> {
    let noisy = inject_random(clean, spec.random_ratio, spec)?;
    inject_dense_clusters(&noisy, spec.dense_ratio, spec)
}
