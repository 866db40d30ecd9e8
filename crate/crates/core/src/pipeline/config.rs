use std::path::Path;

use serde::Deserialize;

use super::{MedianScope, PipelineOptions};
use crate::error::{Error, Result};
use crate::noise::NoiseSpec;
use crate::params::DenoiseParams;

/// Flat `key = value` parameter file. Every key is optional; unknown keys
/// are rejected. The noise keys (`random_ratio` .. `noise_seed`) only matter
/// to commands that contaminate a cloud.
///
/// ```text
/// k = 12
/// q = 0.2
/// lambda = 0.99
/// use_octree = true
/// median = "leaf"
/// ```
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub max_leaf_points: Option<usize>,
    pub min_leaf_edge_fraction: Option<f64>,
    pub beta: Option<f64>,
    pub min_vox_count: Option<usize>,
    pub k: Option<usize>,
    pub q: Option<f64>,
    pub alpha: Option<f64>,
    pub sigma: Option<f64>,
    pub lambda: Option<f64>,
    pub epsilon: Option<f64>,
    pub use_octree: Option<bool>,
    pub a1_voxel: Option<bool>,
    pub a2_density: Option<bool>,
    pub a3_gravity: Option<bool>,
    pub recompute_knn: Option<bool>,
    pub median: Option<MedianScope>,
    pub threads: Option<usize>,
    pub random_ratio: Option<f64>,
    pub dense_ratio: Option<f64>,
    pub cluster_count: Option<usize>,
    pub cluster_sigma_fraction: Option<f64>,
    pub bbox_expand: Option<f64>,
    pub noise_seed: Option<u64>,
}

impl ConfigFile {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    /// Overwrites the fields this file sets.
    pub fn apply(&self, params: &mut DenoiseParams, opts: &mut PipelineOptions) {
        set(&mut params.max_leaf_points, self.max_leaf_points);
        set(&mut params.min_leaf_edge_fraction, self.min_leaf_edge_fraction);
        set(&mut params.beta, self.beta);
        set(&mut params.min_vox_count, self.min_vox_count);
        set(&mut params.k, self.k);
        set(&mut params.q, self.q);
        set(&mut params.alpha, self.alpha);
        set(&mut params.sigma, self.sigma);
        set(&mut params.lambda, self.lambda);
        set(&mut params.epsilon, self.epsilon);
        set(&mut opts.toggles.use_octree, self.use_octree);
        set(&mut opts.toggles.a1_voxel, self.a1_voxel);
        set(&mut opts.toggles.a2_density, self.a2_density);
        set(&mut opts.toggles.a3_gravity, self.a3_gravity);
        set(&mut opts.recompute_knn, self.recompute_knn);
        set(&mut opts.median, self.median);
        if self.threads.is_some() {
            opts.threads = self.threads;
        }
    }

    /// Overwrites the noise settings this file sets.
    pub fn apply_noise(&self, spec: &mut NoiseSpec) {
        set(&mut spec.random_ratio, self.random_ratio);
        set(&mut spec.dense_ratio, self.dense_ratio);
        set(&mut spec.cluster_count, self.cluster_count);
        set(&mut spec.cluster_sigma_fraction, self.cluster_sigma_fraction);
        set(&mut spec.bbox_expand, self.bbox_expand);
        set(&mut spec.seed, self.noise_seed);
    }
}

fn set<T: Copy>(dst: &mut T, src: Option<T>) {
    if let Some(v) = src {
        *dst = v;
    }
}
