use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use npksrc::features::extract_descriptors;
use npksrc::harness::{run_benchmark, sweep, sweep_table, BenchConfig, SplitSpec};
use npksrc::{
    pnm, FeatureSpec, FeatureVariant, Label, SolverConfig, SpdBundle, SynthSpec, WeightMode,
};

#[derive(Parser)]
#[command(
    name = "npksrc",
    version,
    about = "Sparse representation classification of SPD matrices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract region covariance descriptors; each image becomes one class.
    Features(FeaturesArgs),
    /// Generate a seeded synthetic SPD bundle.
    Synth(SynthArgs),
    /// Run the repeated stratified-split benchmark on a bundle.
    Bench(BenchArgs),
    /// Benchmark over a lambda x gamma grid.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct FeaturesArgs {
    /// Binary PGM (gray5) or PPM (color17) images, in class order.
    #[arg(required = true)]
    images: Vec<PathBuf>,
    #[arg(long, default_value = "gray5")]
    variant: FeatureVariant,
    /// Tile size WxH.
    #[arg(long, default_value = "32x32", value_parser = parse_size)]
    tile: (usize, usize),
    #[arg(long, default_value_t = 1e-5)]
    reg_eps: f64,
    /// Box-resample each image to WxH before tiling.
    #[arg(long, value_parser = parse_size)]
    resize: Option<(usize, usize)>,
    /// Output bundle path (stdout if omitted).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 3)]
    classes: usize,
    #[arg(long, default_value_t = 64)]
    per_class: usize,
    #[arg(long, default_value_t = 5)]
    dim: usize,
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    #[arg(long, default_value_t = 5.0)]
    sep: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long, default_value_t = 5)]
    train_per_class: usize,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.09)]
    lambda: f64,
    #[arg(long, default_value_t = 0.05)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    #[arg(long, default_value = "logeuclidean")]
    weight_metric: WeightMode,
    /// Rescale weights to mean one before solving.
    #[arg(long)]
    normalize_weights: bool,
    /// CSV output path (stdout if omitted).
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Write a JSON summary with the full configuration echo.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    bench: BenchArgs,
    /// Comma-separated lambda values.
    #[arg(long, value_delimiter = ',', required = true)]
    lambda_grid: Vec<f64>,
    /// Comma-separated gamma values.
    #[arg(long, value_delimiter = ',', required = true)]
    gamma_grid: Vec<f64>,
}

fn parse_size(s: &str) -> std::result::Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got '{s}'"))?;
    let w = w.parse().map_err(|_| format!("bad width in '{s}'"))?;
    let h = h.parse().map_err(|_| format!("bad height in '{s}'"))?;
    Ok((w, h))
}

fn emit(path: Option<&Path>, contents: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, contents).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(contents)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn features(args: FeaturesArgs) -> Result<()> {
    let spec = FeatureSpec {
        variant: args.variant,
        reg_epsilon: args.reg_eps,
    };
    let mut labels = Vec::new();
    let mut matrices = Vec::new();
    for (k, path) in args.images.iter().enumerate() {
        let mut img = pnm::read(path).with_context(|| format!("reading {}", path.display()))?;
        if let Some((w, h)) = args.resize {
            img = img.downsample_box(w, h)?;
        }
        let descriptors = extract_descriptors(&img, &spec, args.tile.0, args.tile.1)
            .with_context(|| format!("extracting descriptors from {}", path.display()))?;
        labels.extend(std::iter::repeat_n((k + 1) as Label, descriptors.len()));
        matrices.extend(descriptors);
    }
    let bundle = SpdBundle::new(spec.variant.dim(), labels, matrices)?;
    let mut buf = Vec::new();
    bundle.write_to(&mut buf)?;
    emit(args.out.as_deref(), &buf)
}

fn synth(args: SynthArgs) -> Result<()> {
    let bundle = npksrc::synth_gallery(&SynthSpec {
        n_classes: args.classes,
        per_class: args.per_class,
        dim: args.dim,
        sigma: args.sigma,
        centroid_sep: args.sep,
        seed: args.seed,
    })?;
    let mut buf = Vec::new();
    bundle.write_to(&mut buf)?;
    emit(args.out.as_deref(), &buf)
}

fn bench_config(args: &BenchArgs) -> BenchConfig {
    BenchConfig {
        split: SplitSpec {
            train_per_class: args.train_per_class,
            trials: args.trials,
            seed: args.seed,
        },
        gamma: args.gamma,
        solver: SolverConfig {
            lambda: args.lambda,
            mu: args.mu,
            eps: args.eps,
            max_iter: args.max_iter,
        },
        weight_metric: args.weight_metric,
        normalize_weights: args.normalize_weights,
    }
}

fn load(path: &Path) -> Result<SpdBundle> {
    SpdBundle::load(path).with_context(|| format!("loading bundle {}", path.display()))
}

fn bench(args: BenchArgs) -> Result<()> {
    let bundle = load(&args.bundle)?;
    let report = run_benchmark(&bundle, &bench_config(&args))?;
    if let Some(p) = &args.summary {
        fs::write(p, serde_json::to_string_pretty(&report)? + "\n")
            .with_context(|| format!("writing {}", p.display()))?;
    }
    emit(args.out.as_deref(), report.to_csv().as_bytes())?;
    if args.out.is_some() {
        eprintln!("{}", report.summary_line());
    }
    Ok(())
}

fn run_sweep(args: SweepArgs) -> Result<()> {
    if args.lambda_grid.is_empty() || args.gamma_grid.is_empty() {
        bail!("sweep grids must be nonempty");
    }
    let bundle = load(&args.bench.bundle)?;
    let points = sweep(
        &bundle,
        &bench_config(&args.bench),
        &args.lambda_grid,
        &args.gamma_grid,
    )?;
    if let Some(p) = &args.bench.summary {
        fs::write(p, serde_json::to_string_pretty(&points)? + "\n")
            .with_context(|| format!("writing {}", p.display()))?;
    }
    emit(args.bench.out.as_deref(), sweep_table(&points).as_bytes())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Features(a) => features(a),
        Command::Synth(a) => synth(a),
        Command::Bench(a) => bench(a),
        Command::Sweep(a) => run_sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
