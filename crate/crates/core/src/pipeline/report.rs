use serde::{Serialize, Serializer};
use sha2::{Digest, Sha256};

use super::{MedianScope, PipelineOptions, StageToggle};
use crate::baseline::BaselineParams;
use crate::error::{Error, Result};
use crate::geom::PointCloud;
use crate::io::{encode_cloud, CloudFormat, Precision};
use crate::metrics::{chamfer, cohen_kappa, psnr, removal_metrics, AgreementTable, RemovalConfusion};
use crate::noise::NoiseSpec;
use crate::params::DenoiseParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Proposed,
    Baseline,
}

/// Everything needed to rerun a report's configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<DenoiseParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub toggles: Option<StageToggle>,
    pub recompute_knn: bool,
    pub median: MedianScope,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
    pub threads: Option<usize>,
    pub repetitions: usize,
}

impl ConfigEcho {
    pub(crate) fn proposed(params: &DenoiseParams, opts: &PipelineOptions) -> Self {
        ConfigEcho {
            method: Method::Proposed,
            params: Some(params.clone()),
            toggles: Some(opts.toggles),
            recompute_knn: opts.recompute_knn,
            median: opts.median,
            baseline: None,
            noise: None,
            threads: opts.threads,
            repetitions: 1,
        }
    }

    pub(crate) fn baseline(params: &BaselineParams, threads: Option<usize>) -> Self {
        ConfigEcho {
            method: Method::Baseline,
            params: None,
            toggles: None,
            recompute_knn: false,
            median: MedianScope::Leaf,
            baseline: Some(*params),
            noise: None,
            threads,
            repetitions: 1,
        }
    }
}

/// Point counts after each stage; disabled stages pass their input through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StageCounts {
    pub n_input: usize,
    pub p1: usize,
    pub p2: usize,
    pub n_output: usize,
}

/// Wall-clock seconds per stage. File I/O is excluded.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct StageTimings {
    pub partition: f64,
    pub a1_voxel: f64,
    pub a2_density: f64,
    pub a3_gravity: f64,
    pub merge: f64,
    pub baseline: f64,
    pub total: f64,
}

impl StageTimings {
    fn to_array(self) -> [f64; 7] {
        [self.partition, self.a1_voxel, self.a2_density, self.a3_gravity, self.merge, self.baseline, self.total]
    }

    fn from_array(a: [f64; 7]) -> Self {
        let [partition, a1_voxel, a2_density, a3_gravity, merge, baseline, total] = a;
        StageTimings {
            partition,
            a1_voxel,
            a2_density,
            a3_gravity,
            merge,
            baseline,
            total,
        }
    }

    /// Field-wise median.
    pub fn median_of(runs: &[StageTimings]) -> StageTimings {
        let arrays: Vec<[f64; 7]> = runs.iter().map(|r| r.to_array()).collect();
        StageTimings::from_array(std::array::from_fn(|f| {
            let column: Vec<f64> = arrays.iter().map(|a| a[f]).collect();
            crate::gravity::median(&column).unwrap_or(0.0)
        }))
    }
}

fn finite_or_tag<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_str("nan")
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// `"inf"` when the denoised cloud covers every clean point exactly.
    #[serde(serialize_with = "finite_or_tag")]
    pub psnr_db: f64,
    /// Chamfer distance in (input unit)².
    #[serde(serialize_with = "finite_or_tag")]
    pub cd: f64,
    /// Agreement between ground-truth labels and the removal decision;
    /// `None` when chance agreement is 1.
    pub kappa: Option<f64>,
    pub removed: usize,
    pub removed_noise: usize,
    pub noise: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub config: ConfigEcho,
    pub leaves: usize,
    pub counts: StageCounts,
    pub metrics: Option<EvalMetrics>,
    pub timings_s: StageTimings,
    /// Seconds spent reading and writing files, when any.
    pub io_s: Option<f64>,
    pub seed: Option<u64>,
    /// SHA-256 of the input cloud's binary little-endian PLY encoding (f64).
    pub input_sha256: String,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn cloud_sha256(cloud: &PointCloud) -> String {
    match encode_cloud(cloud, CloudFormat::PlyBinaryLe, Precision::F64) {
        Ok(bytes) => hex::encode(Sha256::digest(&bytes)),
        Err(_) => hex::encode(Sha256::digest(b"")),
    }
}

/// Scores a denoising run. `input` must be labelled; removal is judged from
/// the label counts of `input` and `output`, which share one label channel,
/// and never by matching coordinates. PSNR and CD compare `clean` against
/// `output`.
pub fn evaluate(clean: &PointCloud, input: &PointCloud, output: &PointCloud) -> Result<EvalMetrics> {
    let in_labels = input.labels().ok_or_else(|| Error::param("input", "evaluation needs noise labels"))?;
    let out_labels = output
        .labels()
        .ok_or_else(|| Error::param("output", "evaluation needs noise labels"))?;
    if output.len() > input.len() {
        return Err(Error::param("output", "has more points than the input"));
    }
    let noise = in_labels.iter().filter(|&&b| b).count();
    let kept_noise = out_labels.iter().filter(|&&b| b).count();
    if kept_noise > noise {
        return Err(Error::param("output", "carries more noise labels than the input"));
    }
    let conf = RemovalConfusion {
        removed_noise: noise - kept_noise,
        removed: input.len() - output.len(),
        noise,
    };
    let m = removal_metrics(&conf);

    // Truth marks noise; the prediction marks removed points. Both are
    // reconstructed from counts, which is all the 2x2 table needs.
    let n = input.len() as u64;
    let removed_signal = (conf.removed - conf.removed_noise) as u64;
    let truth_signal = n - noise as u64;
    let table = AgreementTable {
        agree_signal: truth_signal - removed_signal,
        agree_noise: conf.removed_noise as u64,
        disagree: removed_signal + kept_noise as u64,
        a_signal: truth_signal,
        b_signal: output.len() as u64,
    };
    let kappa = cohen_kappa(&table)?.kappa;

    let (psnr_db, cd) = if output.is_empty() {
        (f64::NEG_INFINITY, f64::INFINITY)
    } else {
        (psnr(clean, output)?, chamfer(clean, output)?)
    };
    Ok(EvalMetrics {
        precision: m.precision,
        recall: m.recall,
        f1: m.f1,
        psnr_db,
        cd,
        kappa,
        removed: conf.removed,
        removed_noise: conf.removed_noise,
        noise,
    })
}
