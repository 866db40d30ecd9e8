use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use gravity_denoise::baseline::BaselineParams;
use gravity_denoise::io::{read_cloud, resolve_format, write_cloud, CloudFormat, Precision};
use gravity_denoise::noise::{contaminate, NoiseSpec};
use gravity_denoise::pipeline::{
    ablation_csv, default_grid, denoise, denoise_baseline, evaluate, parse_grid, run_ablation, run_parameter_sweep,
    sweep_csv, ConfigFile, Experiment, MedianScope, PipelineOptions, RunReport, SweepAxis,
};
use gravity_denoise::{DenoiseParams, PointCloud};

#[derive(Parser)]
#[command(name = "gdenoise", version, about = "Point cloud denoising and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Denoise a cloud with the octree / voxel / density / gravity pipeline
    Denoise(DenoiseArgs),
    /// Append labelled synthetic noise to a clean cloud
    AddNoise(AddNoiseArgs),
    /// Score a denoised cloud against the clean original
    Evaluate(EvaluateArgs),
    /// Denoise with the centroid-distance gravitational baseline
    Baseline(BaselineArgs),
    /// Run a grid of stage configurations on one contaminated cloud
    Ablate(AblateArgs),
    /// Vary one parameter and record metrics per value
    Sweep(SweepArgs),
}

/// Output file options shared by commands that write clouds.
#[derive(Args)]
struct OutputArgs {
    /// Output format; inferred from the extension when omitted
    #[arg(long, value_parser = clap::value_parser!(CloudFormat))]
    out_format: Option<CloudFormat>,
    /// Store coordinates as 32-bit floats
    #[arg(long)]
    single_precision: bool,
}

impl OutputArgs {
    fn write(&self, cloud: &PointCloud, path: &Path) -> Result<()> {
        let format = resolve_format(path, self.out_format)?;
        let precision = if self.single_precision {
            Precision::F32
        } else {
            Precision::F64
        };
        write_cloud(cloud, path, format, precision).with_context(|| format!("writing {}", path.display()))
    }
}

#[derive(Args, Default)]
struct ParamArgs {
    /// Flat key = value parameter file; flags below override it
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    /// Density percentile in percent (0..=100)
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    min_vox_count: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    max_leaf_points: Option<usize>,
    #[arg(long)]
    min_leaf_edge_fraction: Option<f64>,
    /// Treat the whole cloud as a single leaf
    #[arg(long)]
    no_octree: bool,
    /// Recompute neighbourhoods after density filtering
    #[arg(long)]
    recompute_knn: bool,
    /// Normalise densities by the median over all leaves
    #[arg(long)]
    global_median: bool,
    /// Worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
}

impl ParamArgs {
    fn resolve(&self) -> Result<(DenoiseParams, PipelineOptions)> {
        let mut params = DenoiseParams::default();
        let mut opts = PipelineOptions::default();
        if let Some(path) = &self.params {
            ConfigFile::load(path)?.apply(&mut params, &mut opts);
        }
        let overrides = ConfigFile {
            max_leaf_points: self.max_leaf_points,
            min_leaf_edge_fraction: self.min_leaf_edge_fraction,
            beta: self.beta,
            min_vox_count: self.min_vox_count,
            k: self.k,
            q: self.q,
            alpha: self.alpha,
            sigma: self.sigma,
            lambda: self.lambda,
            epsilon: self.epsilon,
            use_octree: self.no_octree.then_some(false),
            recompute_knn: self.recompute_knn.then_some(true),
            median: self.global_median.then_some(MedianScope::Global),
            threads: self.threads,
            ..ConfigFile::default()
        };
        overrides.apply(&mut params, &mut opts);
        params.validate()?;
        Ok((params, opts))
    }
}

#[derive(Args)]
struct DenoiseArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Write a JSON run report here
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct NoiseArgs {
    /// Uniform noise as a fraction of the clean point count [default: 0.1]
    #[arg(long)]
    random_ratio: Option<f64>,
    /// Clustered noise as a fraction of the clean point count [default: 0]
    #[arg(long)]
    dense_ratio: Option<f64>,
    /// Number of noise clusters [default: 3]
    #[arg(long)]
    clusters: Option<usize>,
    /// Cluster standard deviation as a fraction of the box diagonal [default: 0.02]
    #[arg(long)]
    cluster_sigma: Option<f64>,
    /// Scale of the noise box relative to the clean box [default: 1.1]
    #[arg(long)]
    bbox_expand: Option<f64>,
}

impl NoiseArgs {
    fn spec(&self, config: Option<&Path>, seed: Option<u64>) -> Result<NoiseSpec> {
        let mut spec = NoiseSpec::default();
        if let Some(path) = config {
            ConfigFile::load(path)?.apply_noise(&mut spec);
        }
        ConfigFile {
            random_ratio: self.random_ratio,
            dense_ratio: self.dense_ratio,
            cluster_count: self.clusters,
            cluster_sigma_fraction: self.cluster_sigma,
            bbox_expand: self.bbox_expand,
            noise_seed: seed,
            ..ConfigFile::default()
        }
        .apply_noise(&mut spec);
        Ok(spec)
    }
}

#[derive(Args)]
struct AddNoiseArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    noise: NoiseArgs,
    /// Noise keys are read from this parameter file; flags override it
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Noise-free reference cloud
    #[arg(long)]
    clean: PathBuf,
    /// Denoiser output; must carry the is_noise channel
    #[arg(long)]
    denoised: PathBuf,
    /// The labelled cloud that was denoised
    #[arg(long)]
    labels_from: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Gravitational constant
    #[arg(long = "G", default_value_t = 6.67e-11)]
    g: f64,
    /// Threshold weight
    #[arg(long, default_value_t = 600.0)]
    alpha_threshold: f64,
    #[arg(long)]
    threads: Option<usize>,
    #[command(flatten)]
    output: OutputArgs,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    clean: PathBuf,
    #[arg(long)]
    noise_seed: Option<u64>,
    #[command(flatten)]
    noise: NoiseArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// Timing repetitions; reported runtimes are medians
    #[arg(long, default_value_t = 5)]
    repetitions: usize,
}

impl ExperimentArgs {
    fn setup(&self) -> Result<(PointCloud, NoiseSpec, Experiment)> {
        let clean = read_cloud(&self.clean, None).with_context(|| format!("reading {}", self.clean.display()))?;
        let (params, options) = self.params.resolve()?;
        let exp = Experiment {
            params,
            options,
            baseline: BaselineParams::default(),
            repetitions: self.repetitions,
        };
        let noise = self.noise.spec(self.params.params.as_deref(), self.noise_seed)?;
        Ok((clean.clean_part(), noise, exp))
    }
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// `default` or a file of `name,method,octree,a1,a2,a3` rows
    #[arg(long, default_value = "default")]
    grid: String,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_parser = clap::value_parser!(SweepAxis))]
    axis: SweepAxis,
    /// Comma-separated values, or `default`
    #[arg(long, default_value = "default")]
    values: String,
    #[command(flatten)]
    experiment: ExperimentArgs,
    #[arg(long)]
    out: PathBuf,
}

fn read_input(path: &Path) -> Result<(PointCloud, f64)> {
    let t = Instant::now();
    let cloud = read_cloud(path, None).with_context(|| format!("reading {}", path.display()))?;
    Ok((cloud, t.elapsed().as_secs_f64()))
}

fn write_report(report: &RunReport, path: Option<&Path>) -> Result<()> {
    if let Some(path) = path {
        fs::write(path, report.to_json()?).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn run_denoise(args: &DenoiseArgs) -> Result<()> {
    let (params, opts) = args.params.resolve()?;
    let (cloud, read_s) = read_input(&args.input)?;
    let out = denoise(&cloud, &params, &opts)?;
    let t = Instant::now();
    args.output.write(&out.cloud, &args.out)?;
    let mut report = out.report;
    report.io_s = Some(read_s + t.elapsed().as_secs_f64());
    if cloud.labels().is_some() {
        report.metrics = Some(evaluate(&cloud.clean_part(), &cloud, &out.cloud)?);
    }
    info!(
        "kept {} of {} points in {:.3}s",
        report.counts.n_output, report.counts.n_input, report.timings_s.total
    );
    write_report(&report, args.report.as_deref())
}

fn run_add_noise(args: &AddNoiseArgs) -> Result<()> {
    let (cloud, _) = read_input(&args.input)?;
    let noisy = contaminate(&cloud, &args.noise.spec(args.params.as_deref(), args.seed)?)?;
    info!("added {} noise points", noisy.len() - cloud.len());
    args.output.write(&noisy, &args.out)
}

fn run_evaluate(args: &EvaluateArgs) -> Result<()> {
    let (clean, _) = read_input(&args.clean)?;
    let (denoised, _) = read_input(&args.denoised)?;
    let (input, _) = read_input(&args.labels_from)?;
    if input.labels().is_none() || denoised.labels().is_none() {
        bail!("both --denoised and --labels-from need an is_noise channel");
    }
    let metrics = evaluate(&clean, &input, &denoised)?;
    let report = serde_json::json!({
        "clean": args.clean,
        "denoised": args.denoised,
        "labels_from": args.labels_from,
        "counts": { "n_input": input.len(), "n_output": denoised.len() },
        "metrics": metrics,
    });
    let text = serde_json::to_string_pretty(&report)?;
    match &args.report {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn run_baseline(args: &BaselineArgs) -> Result<()> {
    let params = BaselineParams {
        g: args.g,
        alpha_threshold: args.alpha_threshold,
    };
    let (cloud, read_s) = read_input(&args.input)?;
    let out = denoise_baseline(&cloud, &params, args.threads)?;
    let t = Instant::now();
    args.output.write(&out.cloud, &args.out)?;
    let mut report = out.report;
    report.io_s = Some(read_s + t.elapsed().as_secs_f64());
    if cloud.labels().is_some() {
        report.metrics = Some(evaluate(&cloud.clean_part(), &cloud, &out.cloud)?);
    }
    write_report(&report, args.report.as_deref())
}

fn run_ablate(args: &AblateArgs) -> Result<()> {
    let (clean, noise, exp) = args.experiment.setup()?;
    let grid = if args.grid == "default" {
        default_grid()
    } else {
        let text = fs::read_to_string(&args.grid).with_context(|| format!("reading {}", args.grid))?;
        parse_grid(&text)?
    };
    let rows = run_ablation(&clean, &noise, &grid, &exp)?;
    fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    for (i, (row, report)) in rows.iter().enumerate() {
        let name: String = row
            .name
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
            .collect();
        let path = args.out_dir.join(format!("{i:02}_{name}.json"));
        write_report(report, Some(&path))?;
    }
    let csv_path = args.out_dir.join("ablation.csv");
    fs::write(&csv_path, ablation_csv(&rows)?).with_context(|| format!("writing {}", csv_path.display()))?;
    Ok(())
}

fn parse_values(text: &str, axis: SweepAxis) -> Result<Vec<f64>> {
    if text == "default" {
        return Ok(axis.default_values());
    }
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .with_context(|| format!("bad sweep value `{v}`"))
        })
        .collect()
}

fn run_sweep(args: &SweepArgs) -> Result<()> {
    let (clean, noise, exp) = args.experiment.setup()?;
    let values = parse_values(&args.values, args.axis)?;
    let rows = run_parameter_sweep(&clean, &noise, args.axis, &values, &exp)?;
    fs::write(&args.out, sweep_csv(args.axis, &rows)?).with_context(|| format!("writing {}", args.out.display()))?;
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Denoise(a) => run_denoise(a),
        Command::AddNoise(a) => run_add_noise(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::Baseline(a) => run_baseline(a),
        Command::Ablate(a) => run_ablate(a),
        Command::Sweep(a) => run_sweep(a),
    }
}
