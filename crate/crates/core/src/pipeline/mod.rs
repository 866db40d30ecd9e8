//! End-to-end orchestration: octree partition, voxel gate, density filter,
//! gravitational top-λ selection and leaf-order merge, plus evaluation,
//! ablation grids and parameter sweeps.

mod config;
mod experiment;
mod report;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{baseline_denoise, BaselineParams};
use crate::error::{Error, Result};
use crate::geom::PointCloud;
use crate::gravity::{median, score_and_select, GravityWeights};
use crate::octree::{partition, Leaf, LeafPartition};
use crate::params::DenoiseParams;
use crate::prefilter::{adaptive_voxel_size, density_filter, knn_density, voxel_gate, DensityField};

pub use config::ConfigFile;
pub use experiment::{
    ablation_csv, default_grid, parse_grid, run_ablation, run_parameter_sweep, sweep_csv, AblationRow, Experiment,
    SweepAxis,
};
pub use report::{cloud_sha256, evaluate, ConfigEcho, EvalMetrics, Method, RunReport, StageCounts, StageTimings};

/// Which stages run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageToggle {
    pub use_octree: bool,
    pub a1_voxel: bool,
    pub a2_density: bool,
    pub a3_gravity: bool,
}

impl StageToggle {
    pub const FULL: StageToggle = StageToggle {
        use_octree: true,
        a1_voxel: true,
        a2_density: true,
        a3_gravity: true,
    };
    pub const NONE: StageToggle = StageToggle {
        use_octree: false,
        a1_voxel: false,
        a2_density: false,
        a3_gravity: false,
    };
}

impl Default for StageToggle {
    fn default() -> Self {
        StageToggle::FULL
    }
}

/// Population over which the reference density of the density weight is
/// taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MedianScope {
    #[default]
    Leaf,
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub toggles: StageToggle,
    /// Recompute neighbourhoods on the density-filtered set instead of
    /// restricting the ones found before filtering.
    pub recompute_knn: bool,
    pub median: MedianScope,
    /// Worker count; `None` uses rayon's default pool.
    pub threads: Option<usize>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            toggles: StageToggle::FULL,
            recompute_knn: false,
            median: MedianScope::Leaf,
            threads: None,
        }
    }
}

/// Runs `f` on a pool of `threads` workers, or on the ambient pool.
pub(crate) fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(Error::param("threads", "must be >= 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::param("threads", e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Per-leaf working state between stage passes.
struct LeafWork {
    /// Surviving positions, ascending.
    positions: Vec<usize>,
    field: Option<DensityField>,
}

fn field_for(cloud: &PointCloud, positions: &[usize], params: &DenoiseParams) -> Option<DensityField> {
    let pts: Vec<_> = positions.iter().map(|&p| cloud.points()[p]).collect();
    let keys: Vec<usize> = positions.iter().map(|&p| cloud.ids()[p]).collect();
    match knn_density(&pts, &keys, params.k, params.epsilon) {
        Ok(f) => Some(f),
        Err(Error::DegenerateLeaf(_)) => None,
        Err(e) => unreachable!("density estimation failed: {e}"),
    }
}

fn stage_a1(cloud: &PointCloud, leaf: &Leaf, params: &DenoiseParams) -> Vec<usize> {
    match adaptive_voxel_size(leaf, params.beta) {
        Some(h) => voxel_gate(cloud.points(), &leaf.indices, leaf.bbox.min, h, params.min_vox_count),
        None => leaf.indices.clone(),
    }
}

fn stage_a2(cloud: &PointCloud, work: &mut LeafWork, params: &DenoiseParams, filter: bool) {
    let Some(field) = field_for(cloud, &work.positions, params) else {
        return;
    };
    if filter {
        let keep = density_filter(&field, params.q);
        work.positions = keep.iter().map(|&i| work.positions[i]).collect();
        work.field = Some(field.restrict(&keep));
    } else {
        work.field = Some(field);
    }
}

/// Output of [`denoise`]: the retained cloud and its run report.
#[derive(Debug, Clone)]
pub struct Denoised {
    pub cloud: PointCloud,
    pub report: RunReport,
}

/// Runs the enabled stages per leaf and merges the survivors in leaf order.
pub fn denoise(cloud: &PointCloud, params: &DenoiseParams, opts: &PipelineOptions) -> Result<Denoised> {
    params.validate()?;
    if cloud.is_empty() {
        return Err(Error::EmptyInput);
    }
    with_pool(opts.threads, || run_stages(cloud, params, opts))?
}

fn run_stages(cloud: &PointCloud, params: &DenoiseParams, opts: &PipelineOptions) -> Result<Denoised> {
    let t = opts.toggles;
    let mut timings = StageTimings::default();
    let start = Instant::now();

    let clock = Instant::now();
    let leaves = if t.use_octree {
        partition(cloud, params.max_leaf_points, params.min_leaf_edge_fraction)?
    } else {
        LeafPartition::single(cloud)?
    };
    timings.partition = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let mut work: Vec<LeafWork> = leaves
        .leaves
        .par_iter()
        .map(|leaf| LeafWork {
            positions: if t.a1_voxel {
                stage_a1(cloud, leaf, params)
            } else {
                leaf.indices.clone()
            },
            field: None,
        })
        .collect();
    timings.a1_voxel = clock.elapsed().as_secs_f64();
    let p1: usize = work.iter().map(|w| w.positions.len()).sum();

    let clock = Instant::now();
    if t.a2_density {
        work.par_iter_mut().for_each(|w| stage_a2(cloud, w, params, true));
    }
    timings.a2_density = clock.elapsed().as_secs_f64();
    let p2: usize = work.iter().map(|w| w.positions.len()).sum();

    let clock = Instant::now();
    if t.a3_gravity {
        work.par_iter_mut().for_each(|w| {
            if w.field.is_none() || opts.recompute_knn {
                w.field = None;
                stage_a2(cloud, w, params, false);
            }
        });
        let global = match opts.median {
            MedianScope::Leaf => None,
            MedianScope::Global => {
                let all: Vec<f64> = work.iter().filter_map(|w| w.field.as_ref()).flat_map(|f| f.rho.iter().copied()).collect();
                median(&all)
            }
        };
        work.par_iter_mut().for_each(|w| {
            let Some(field) = w.field.take() else {
                return;
            };
            let Some(rho_med) = global.or_else(|| median(&field.rho)) else {
                return;
            };
            let weights = GravityWeights {
                rho_med,
                alpha: params.alpha,
                sigma: params.sigma,
                epsilon: params.epsilon,
            };
            let keys: Vec<usize> = w.positions.iter().map(|&p| cloud.ids()[p]).collect();
            let scored = score_and_select(&field, &keys, &weights, params.lambda);
            w.positions = w
                .positions
                .iter()
                .zip(&scored.retained)
                .filter(|(_, &keep)| keep)
                .map(|(&p, _)| p)
                .collect();
        });
    }
    timings.a3_gravity = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let merged: Vec<usize> = work.into_iter().flat_map(|w| w.positions).collect();
    let out = cloud.gather(&merged);
    timings.merge = clock.elapsed().as_secs_f64();
    timings.total = start.elapsed().as_secs_f64();

    let report = RunReport {
        config: ConfigEcho::proposed(params, opts),
        leaves: leaves.len(),
        counts: StageCounts {
            n_input: cloud.len(),
            p1,
            p2,
            n_output: out.len(),
        },
        metrics: None,
        timings_s: timings,
        io_s: None,
        seed: None,
        input_sha256: cloud_sha256(cloud),
    };
    Ok(Denoised { cloud: out, report })
}

/// The baseline denoiser wrapped with the same reporting as [`denoise`].
pub fn denoise_baseline(cloud: &PointCloud, params: &BaselineParams, threads: Option<usize>) -> Result<Denoised> {
    params.validate()?;
    if cloud.is_empty() {
        return Err(Error::EmptyInput);
    }
    let start = Instant::now();
    let ids = with_pool(threads, || baseline_denoise(cloud, params))??;
    let out = cloud.select_ids(&ids);
    let total = start.elapsed().as_secs_f64();
    let report = RunReport {
        config: ConfigEcho::baseline(params, threads),
        leaves: 1,
        counts: StageCounts {
            n_input: cloud.len(),
            p1: cloud.len(),
            p2: cloud.len(),
            n_output: out.len(),
        },
        metrics: None,
        timings_s: StageTimings {
            baseline: total,
            total,
            ..StageTimings::default()
        },
        io_s: None,
        seed: None,
        input_sha256: cloud_sha256(cloud),
    };
    Ok(Denoised { cloud: out, report })
}

/// Repeats `run` and reports the per-field median of the timings. Outputs
/// are deterministic, so the last run's cloud is returned.
pub fn repeat_timed(repetitions: usize, mut run: impl FnMut() -> Result<Denoised>) -> Result<Denoised> {
    let mut runs = Vec::with_capacity(repetitions.max(1));
    for _ in 0..repetitions.max(1) {
        runs.push(run()?);
    }
    let timings: Vec<StageTimings> = runs.iter().map(|r| r.report.timings_s).collect();
    let mut last = runs.pop().unwrap();
    last.report.timings_s = StageTimings::median_of(&timings);
    last.report.config.repetitions = timings.len();
    Ok(last)
}
