use std::str::FromStr;

use serde::Serialize;

use super::{denoise, denoise_baseline, evaluate, repeat_timed, Method, PipelineOptions, RunReport, StageToggle};
use crate::baseline::BaselineParams;
use crate::error::{Error, Result};
use crate::geom::PointCloud;
use crate::noise::{contaminate, NoiseSpec};
use crate::params::DenoiseParams;

/// Shared settings for ablation and sweep runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub params: DenoiseParams,
    /// Toggles here are replaced by each ablation row's toggles.
    pub options: PipelineOptions,
    pub baseline: BaselineParams,
    /// Timing repetitions; reported times are medians.
    pub repetitions: usize,
}

impl Default for Experiment {
    fn default() -> Self {
        Experiment {
            params: DenoiseParams::default(),
            options: PipelineOptions::default(),
            baseline: BaselineParams::default(),
            repetitions: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AblationRow {
    pub name: String,
    pub method: Method,
    pub toggles: StageToggle,
}

impl AblationRow {
    fn proposed(name: &str, use_octree: bool, a1_voxel: bool, a2_density: bool, a3_gravity: bool) -> Self {
        AblationRow {
            name: name.to_owned(),
            method: Method::Proposed,
            toggles: StageToggle {
                use_octree,
                a1_voxel,
                a2_density,
                a3_gravity,
            },
        }
    }
}

/// Eight structural rows followed by the octree on/off pair.
pub fn default_grid() -> Vec<AblationRow> {
    vec![
        AblationRow {
            name: "Baseline".into(),
            method: Method::Baseline,
            toggles: StageToggle::NONE,
        },
        AblationRow::proposed("OnlyA1", true, true, false, false),
        AblationRow::proposed("OnlyA2", true, false, true, false),
        AblationRow::proposed("OnlyA3", true, false, false, true),
        AblationRow::proposed("A1+A2", true, true, true, false),
        AblationRow::proposed("A1+A3", true, true, false, true),
        AblationRow::proposed("A2+A3", true, false, true, true),
        AblationRow::proposed("Ours", true, true, true, true),
        AblationRow::proposed("WithOctree", true, true, true, true),
        AblationRow::proposed("WithoutOctree", false, true, true, true),
    ]
}

fn parse_flag(s: &str) -> Option<bool> {
    match s {
        "1" | "true" | "on" => Some(true),
        "0" | "false" | "off" => Some(false),
        _ => None,
    }
}

/// Grid file: one `name,method,octree,a1,a2,a3` row per configuration,
/// `method` being `proposed` or `baseline` and flags `0`/`1`. A header row
/// starting with `name` and `#` comment lines are allowed.
pub fn parse_grid(text: &str) -> Result<Vec<AblationRow>> {
    let grid_err = |line: u64, msg: String| Error::Parse {
        path: "grid".into(),
        msg: format!("line {line}: {msg}"),
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| grid_err(0, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.get(0) == Some("name") {
            continue;
        }
        if record.len() != 6 {
            return Err(grid_err(line, format!("expected 6 fields, got {}", record.len())));
        }
        let method = match &record[1] {
            "proposed" => Method::Proposed,
            "baseline" => Method::Baseline,
            m => return Err(grid_err(line, format!("unknown method `{m}`"))),
        };
        let mut flags = [false; 4];
        for (slot, field) in flags.iter_mut().zip(record.iter().skip(2)) {
            *slot = parse_flag(field).ok_or_else(|| grid_err(line, format!("bad flag `{field}`")))?;
        }
        rows.push(AblationRow {
            name: record[0].to_owned(),
            method,
            toggles: StageToggle {
                use_octree: flags[0],
                a1_voxel: flags[1],
                a2_density: flags[2],
                a3_gravity: flags[3],
            },
        });
    }
    if rows.is_empty() {
        return Err(grid_err(0, "grid has no rows".into()));
    }
    Ok(rows)
}

fn scored_run(
    clean: &PointCloud,
    noisy: &PointCloud,
    noise: &NoiseSpec,
    exp: &Experiment,
    method: Method,
    params: &DenoiseParams,
    opts: &PipelineOptions,
) -> Result<RunReport> {
    let run = repeat_timed(exp.repetitions, || match method {
        Method::Proposed => denoise(noisy, params, opts),
        Method::Baseline => denoise_baseline(noisy, &exp.baseline, opts.threads),
    })?;
    let mut report = run.report;
    report.metrics = Some(evaluate(clean, noisy, &run.cloud)?);
    report.seed = Some(noise.seed);
    report.config.noise = Some(noise.clone());
    Ok(report)
}

/// Contaminates `clean` once and runs every grid row on the same cloud.
pub fn run_ablation(
    clean: &PointCloud,
    noise: &NoiseSpec,
    grid: &[AblationRow],
    exp: &Experiment,
) -> Result<Vec<(AblationRow, RunReport)>> {
    let noisy = contaminate(clean, noise)?;
    let clean = noisy.clean_part();
    grid.iter()
        .map(|row| {
            let opts = PipelineOptions {
                toggles: row.toggles,
                ..exp.options.clone()
            };
            let report = scored_run(&clean, &noisy, noise, exp, row.method, &exp.params, &opts)?;
            Ok((row.clone(), report))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    K,
    Q,
    MinVoxCount,
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "k" | "K" => Ok(SweepAxis::K),
            "q" => Ok(SweepAxis::Q),
            "min-vox-count" | "min_vox_count" | "nv" => Ok(SweepAxis::MinVoxCount),
            other => Err(format!("unknown sweep axis `{other}`")),
        }
    }
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::K => "k",
            SweepAxis::Q => "q",
            SweepAxis::MinVoxCount => "min_vox_count",
        }
    }

    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepAxis::K => (1..=10).map(|i| 4.0 * i as f64).collect(),
            SweepAxis::Q => (1..=10).map(|i| 0.05 * i as f64).collect(),
            SweepAxis::MinVoxCount => (2..=11).map(f64::from).collect(),
        }
    }

    /// `base` with this axis set to `value`.
    pub fn apply(self, base: &DenoiseParams, value: f64) -> Result<DenoiseParams> {
        let count = |name: &'static str| {
            if value >= 0.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
                Ok(value as usize)
            } else {
                Err(Error::param(name, format!("sweep value {value} is not a count")))
            }
        };
        let mut p = base.clone();
        match self {
            SweepAxis::K => p.k = count("k")?,
            SweepAxis::Q => p.q = value,
            SweepAxis::MinVoxCount => p.min_vox_count = count("min_vox_count")?,
        }
        p.validate()?;
        Ok(p)
    }
}

/// One full-pipeline run per value of `axis`, other parameters as in `exp`.
pub fn run_parameter_sweep(
    clean: &PointCloud,
    noise: &NoiseSpec,
    axis: SweepAxis,
    values: &[f64],
    exp: &Experiment,
) -> Result<Vec<(f64, RunReport)>> {
    if values.is_empty() {
        return Err(Error::param("values", "sweep needs at least one value"));
    }
    let params: Vec<DenoiseParams> = values.iter().map(|&v| axis.apply(&exp.params, v)).collect::<Result<_>>()?;
    let noisy = contaminate(clean, noise)?;
    let clean = noisy.clean_part();
    values
        .iter()
        .zip(&params)
        .map(|(&v, p)| Ok((v, scored_run(&clean, &noisy, noise, exp, Method::Proposed, p, &exp.options)?)))
        .collect()
}

fn num(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else if v > 0.0 {
        "inf".into()
    } else if v < 0.0 {
        "-inf".into()
    } else {
        "nan".into()
    }
}

fn metric_fields(r: &RunReport) -> Vec<String> {
    let mut out = match &r.metrics {
        Some(m) => vec![
            num(m.precision),
            num(m.recall),
            num(m.f1),
            num(m.psnr_db),
            num(m.cd),
            m.kappa.map_or_else(String::new, num),
        ],
        None => vec![String::new(); 6],
    };
    out.extend(
        [r.counts.n_input, r.counts.p1, r.counts.p2, r.counts.n_output]
            .iter()
            .map(|c| c.to_string()),
    );
    out.push(num(r.timings_s.total));
    out
}

const METRIC_HEADER: [&str; 11] = [
    "precision", "recall", "f1", "psnr_db", "cd", "kappa", "n_input", "p1", "p2", "n_output", "runtime_s",
];

fn write_csv(header: Vec<&str>, rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::param("csv", e.to_string());
    w.write_record(&header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::param("csv", e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn ablation_csv(rows: &[(AblationRow, RunReport)]) -> Result<String> {
    let mut header = vec!["name", "method", "octree", "a1", "a2", "a3"];
    header.extend(METRIC_HEADER);
    let flag = |b: bool| u8::from(b).to_string();
    let body = rows
        .iter()
        .map(|(row, r)| {
            let t = row.toggles;
            let method = match row.method {
                Method::Proposed => "proposed",
                Method::Baseline => "baseline",
            };
            let mut fields = vec![
                row.name.clone(),
                method.to_owned(),
                flag(t.use_octree),
                flag(t.a1_voxel),
                flag(t.a2_density),
                flag(t.a3_gravity),
            ];
            fields.extend(metric_fields(r));
            fields
        })
        .collect();
    write_csv(header, body)
}

pub fn sweep_csv(axis: SweepAxis, rows: &[(f64, RunReport)]) -> Result<String> {
    let mut header = vec![axis.name()];
    header.extend(METRIC_HEADER);
    let body = rows
        .iter()
        .map(|(v, r)| {
            let mut fields = vec![num(*v)];
            fields.extend(metric_fields(r));
            fields
        })
        .collect();
    write_csv(header, body)
}
