use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tunables of the proposed denoiser.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DenoiseParams {
    /// Octree cells holding at most this many points become leaves.
    pub max_leaf_points: usize,
    /// Cells whose edge is at most this fraction of the root diagonal are not
    /// split further.
    pub min_leaf_edge_fraction: f64,
    /// Voxel enlargement factor for the occupancy gate.
    pub beta: f64,
    /// Minimum voxel occupancy for a point to survive the gate.
    pub min_vox_count: usize,
    /// Neighbour count for density estimation and scoring.
    pub k: usize,
    /// Density percentile (0..=100) below which candidates are dropped.
    pub q: f64,
    /// Density weighting exponent.
    pub alpha: f64,
    /// Global bandwidth scale of the distance weight.
    pub sigma: f64,
    /// Fraction of scored candidates kept per leaf.
    pub lambda: f64,
    /// Regulariser shared by the density weight and the gravity kernel.
    pub epsilon: f64,
}

impl Default for DenoiseParams {
    fn default() -> Self {
        Self {
            max_leaf_points: 8192,
            min_leaf_edge_fraction: 1.0 / 64.0,
            beta: 2.0,
            min_vox_count: 4,
            k: 12,
            q: 0.2,
            alpha: 1.0,
            sigma: 1.0,
            lambda: 0.99,
            epsilon: 1e-12,
        }
    }
}

impl DenoiseParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_leaf_points < 1 {
            return Err(Error::param("max_leaf_points", "must be >= 1"));
        }
        if !(self.min_leaf_edge_fraction > 0.0 && self.min_leaf_edge_fraction < 1.0) {
            return Err(Error::param("min_leaf_edge_fraction", "must lie in (0, 1)"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::param("beta", "must be > 0"));
        }
        if self.k < 1 {
            return Err(Error::param("k", "must be >= 1"));
        }
        if !(0.0..=100.0).contains(&self.q) {
            return Err(Error::param("q", "must lie in [0, 100]"));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::param("alpha", "must be >= 0"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::param("sigma", "must be > 0"));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::param("lambda", "must lie in (0, 1]"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::param("epsilon", "must be > 0"));
        }
        Ok(())
    }
}
