//! Evaluation metrics: removal precision/recall/F1, PSNR, Chamfer distance
//! and Cohen's kappa.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Aabb, Point3, PointCloud};
use crate::kdtree::KdTree;

/// Counts behind removal precision and recall.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemovalConfusion {
    /// Removed points that are true noise (`N_q`).
    pub removed_noise: usize,
    /// All removed points (`N_s`).
    pub removed: usize,
    /// All true noise points (`N_y`).
    pub noise: usize,
}

impl RemovalConfusion {
    /// Builds the counts from the input labels and the sorted ids that survived.
    /// `input_ids` and `input_labels` describe the cloud that was denoised.
    pub fn from_retained(input_ids: &[usize], input_labels: &[bool], retained_ids: &[usize]) -> Self {
        let mut removed = 0;
        let mut removed_noise = 0;
        let mut cursor = 0;
        for (&id, &is_noise) in input_ids.iter().zip(input_labels) {
            while cursor < retained_ids.len() && retained_ids[cursor] < id {
                cursor += 1;
            }
            let kept = cursor < retained_ids.len() && retained_ids[cursor] == id;
            if !kept {
                removed += 1;
                removed_noise += usize::from(is_noise);
            }
        }
        RemovalConfusion {
            removed_noise,
            removed,
            noise: input_labels.iter().filter(|&&b| b).count(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemovalMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision `N_q / N_s`, recall `N_q / N_y` and their harmonic mean. Any
/// ratio with a zero denominator is reported as 0.
pub fn removal_metrics(c: &RemovalConfusion) -> RemovalMetrics {
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(c.removed_noise, c.removed);
    let recall = ratio(c.removed_noise, c.noise);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    RemovalMetrics {
        precision,
        recall,
        f1,
    }
}

/// Squared distance from each query point to its nearest target point.
fn nearest_sq_dists(queries: &[Point3], targets: &[Point3]) -> Vec<f64> {
    let tree = KdTree::new(targets);
    queries
        .par_iter()
        .map(|q| tree.nearest(q).map_or(f64::INFINITY, |n| n.dist2))
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Mean over clean points of the squared distance to the nearest denoised
/// point.
pub fn nearest_mse(clean: &PointCloud, denoised: &PointCloud) -> Result<f64> {
    if clean.is_empty() || denoised.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(mean(&nearest_sq_dists(clean.points(), denoised.points())))
}

/// `10 log10(M^2 / MSE)` with `M` the clean box diagonal. Returns
/// `f64::INFINITY` when the MSE is zero.
pub fn psnr(clean: &PointCloud, denoised: &PointCloud) -> Result<f64> {
    let mse = nearest_mse(clean, denoised)?;
    let m = Aabb::from_points(clean.points()).ok_or(Error::EmptyInput)?.diagonal();
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (m * m / mse).log10())
}

/// Symmetric Chamfer distance with squared point distances, in input units².
pub fn chamfer(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput);
    }
    let ab = mean(&nearest_sq_dists(a.points(), b.points()));
    let ba = mean(&nearest_sq_dists(b.points(), a.points()));
    Ok(ab + ba)
}

/// Agreement between two binary annotations (signal vs noise).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgreementTable {
    pub agree_signal: u64,
    pub agree_noise: u64,
    pub disagree: u64,
    /// Points annotator A labelled signal.
    pub a_signal: u64,
    /// Points annotator B labelled signal.
    pub b_signal: u64,
}

impl AgreementTable {
    /// From two label vectors (`true` = noise).
    pub fn from_labels(a: &[bool], b: &[bool]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::LabelMismatch {
                labels: b.len(),
                points: a.len(),
            });
        }
        let mut t = AgreementTable {
            agree_signal: 0,
            agree_noise: 0,
            disagree: 0,
            a_signal: 0,
            b_signal: 0,
        };
        for (&x, &y) in a.iter().zip(b) {
            match (x, y) {
                (false, false) => t.agree_signal += 1,
                (true, true) => t.agree_noise += 1,
                _ => t.disagree += 1,
            }
            t.a_signal += u64::from(!x);
            t.b_signal += u64::from(!y);
        }
        Ok(t)
    }

    pub fn total(&self) -> u64 {
        self.agree_signal + self.agree_noise + self.disagree
    }

    fn validate(&self) -> Result<()> {
        let consistent = self.a_signal >= self.agree_signal
            && self.b_signal >= self.agree_signal
            && (self.a_signal - self.agree_signal) + (self.b_signal - self.agree_signal) == self.disagree;
        if consistent {
            Ok(())
        } else {
            Err(Error::param("agreement table", "marginals do not match the agreement counts"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kappa {
    /// Observed agreement.
    pub p0: f64,
    /// Chance agreement.
    pub pe: f64,
    /// `None` when chance agreement is 1 (kappa undefined).
    pub kappa: Option<f64>,
}

pub fn observed_agreement(agree_signal: u64, agree_noise: u64, disagree: u64) -> Option<f64> {
    let total = agree_signal + agree_noise + disagree;
    (total > 0).then(|| (agree_signal + agree_noise) as f64 / total as f64)
}

pub fn kappa_from(p0: f64, pe: f64) -> Option<f64> {
    (pe != 1.0).then(|| (p0 - pe) / (1.0 - pe))
}

pub fn cohen_kappa(t: &AgreementTable) -> Result<Kappa> {
    let total = t.total();
    if total == 0 {
        return Err(Error::EmptyInput);
    }
    t.validate()?;
    let n = total as f64;
    let p0 = observed_agreement(t.agree_signal, t.agree_noise, t.disagree).unwrap();
    let (pa, pb) = (t.a_signal as f64 / n, t.b_signal as f64 / n);
    let pe = pa * pb + (1.0 - pa) * (1.0 - pb);
    Ok(Kappa {
        p0,
        pe,
        kappa: kappa_from(p0, pe),
    })
}
