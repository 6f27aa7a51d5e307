//! `osfe`: one-shot edge detection on point clouds.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric error.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{ArgGroup, Args, Parser, Subcommand};
use osfe_core::cloud::io::{read_cloud, write_cloud, Format};
use osfe_core::cloud::{add_gaussian_noise, downsample};
use osfe_core::eval::evaluate;
use osfe_core::net::{load_checkpoint, save_checkpoint, DEFAULT_HEADS};
use osfe_core::segment::{default_min_size, flood_segment_with, DEFAULT_GRAPH_K};
use osfe_core::synth::generate;
use osfe_core::train::{predict, train};
use osfe_core::{Error, Hyper, ModelParameters, PointCloud, ShapeKind, ShapeSpec, TrainConfig};

#[derive(Parser)]
#[command(name = "osfe", version, about = "One-shot edge detection on 3D point clouds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic CAD-like cloud plus a metadata sidecar.
    Synth(SynthArgs),
    /// Train a classifier on one labeled cloud.
    Train(TrainArgs),
    /// Predict per-point edge probabilities.
    Predict(PredictArgs),
    /// Compare predicted edge points against ground truth.
    Eval(EvalArgs),
    /// Flood-fill surface segmentation bounded by edge points.
    Segment(SegmentArgs),
    /// Add Gaussian noise or randomly downsample a cloud.
    Perturb(PerturbArgs),
    /// Describe a checkpoint (or a freshly initialized model).
    Info(InfoArgs),
}

#[derive(Args)]
#[command(group(ArgGroup::new("size").args(["density", "points"])))]
struct SynthArgs {
    /// Shape as `name` or `name:p1,p2,...` (box, cylinder, l_bracket, prism, sphere, union_of_boxes).
    #[arg(long, value_parser = parse_shape)]
    shape: ShapeKind,
    /// Points per unit surface area.
    #[arg(long)]
    density: Option<f64>,
    /// Approximate total point count; picks the density from the surface area.
    #[arg(long)]
    points: Option<usize>,
    /// Edge band half-width; defaults to 1.5 sample spacings.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output cloud (.xyz or .ply).
    #[arg(long)]
    out: PathBuf,
    /// Metadata CSV; defaults to `<out stem>.meta.csv` next to the cloud.
    #[arg(long)]
    metadata: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Labeled training cloud.
    #[arg(long)]
    cloud: PathBuf,
    /// `key = value` config file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_checkpoint: PathBuf,
    /// Per-epoch CSV log.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
    /// Drop exact duplicate points first.
    #[arg(long)]
    dedup: bool,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    cloud: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Patches per forward batch.
    #[arg(long, default_value_t = 256)]
    batch: usize,
    /// Output cloud with labels (and probabilities when written as .ply).
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    threads: Option<usize>,
    /// Drop exact duplicate points first.
    #[arg(long)]
    dedup: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Cloud whose labels are the predicted edges.
    #[arg(long)]
    pred: PathBuf,
    /// Cloud whose labels are the true edges.
    #[arg(long)]
    gt: PathBuf,
    /// Where to write the JSON report line.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SegmentArgs {
    /// Cloud with edge labels.
    #[arg(long)]
    cloud: PathBuf,
    /// kNN graph degree.
    #[arg(long, default_value_t = DEFAULT_GRAPH_K)]
    k: usize,
    /// Segments smaller than this are left unassigned; defaults to 0.2% of the non-edge points.
    #[arg(long)]
    min_size: Option<usize>,
    /// Give edge and pruned points the id of their nearest segment instead of -1.
    #[arg(long)]
    attach: bool,
    /// Output as `x y z segment` text, or PLY with a `segment` property.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[command(group(ArgGroup::new("mode").args(["noise", "keep"]).required(true)))]
struct PerturbArgs {
    #[arg(long)]
    cloud: PathBuf,
    /// Gaussian noise std as a multiple of the mean 16-NN distance.
    #[arg(long)]
    noise: Option<f64>,
    /// Fraction of points kept.
    #[arg(long)]
    keep: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InfoArgs {
    #[arg(long, conflicts_with = "k")]
    checkpoint: Option<PathBuf>,
    /// Describe a fresh model with this k instead of reading a checkpoint.
    #[arg(long)]
    k: Option<usize>,
}

fn parse_shape(s: &str) -> Result<ShapeKind, String> {
    s.parse::<ShapeKind>().map_err(|e| e.to_string())
}

enum Failure {
    Usage(String),
    Core(Error),
}

/// Prefixes I/O errors with the offending path.
fn at(path: &Path) -> impl Fn(Error) -> Failure + '_ {
    move |e| match e {
        Error::Io(io) => Failure::Core(Error::InvalidInput(format!("{}: {io}", path.display()))),
        e => Failure::Core(e),
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(e.into())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version.
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            // The message is the first paragraph; usage hints follow a blank line.
            let msg: Vec<&str> = text.lines().take_while(|l| !l.trim().is_empty()).map(str::trim).collect();
            eprintln!("osfe: usage error: {} (see --help)", msg.join(" ").trim_start_matches("error: "));
            return ExitCode::from(1);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let outcome = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => run_train(a),
        Command::Predict(a) => run_predict(a),
        Command::Eval(a) => run_eval(a),
        Command::Segment(a) => segment(a),
        Command::Perturb(a) => perturb(a),
        Command::Info(a) => info(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("osfe: usage error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Core(e)) => {
            let code = match e {
                Error::Numerical(_) => 3,
                _ => 2,
            };
            eprintln!("osfe: {e}");
            ExitCode::from(code)
        }
    }
}

/// Runs `f` on a dedicated pool when a thread count is given.
fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, Failure> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(Failure::Usage("--threads must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Failure::Usage(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

fn check_output(path: &Path) -> Outcome {
    Format::from_path(path).map(|_| ()).map_err(|e| Failure::Usage(e.to_string()))
}

fn load(path: &Path, dedup: bool) -> Result<PointCloud, Failure> {
    let cloud = read_cloud(path).map_err(at(path))?;
    if !dedup {
        return Ok(cloud);
    }
    let (cloud, removed) = cloud.dedup()?;
    if removed > 0 {
        log::info!("removed {removed} duplicate points from {}", path.display());
    }
    Ok(cloud)
}

fn synth(a: SynthArgs) -> Outcome {
    check_output(&a.out)?;
    let mut spec = match (a.density, a.points) {
        (Some(d), None) => ShapeSpec::new(a.shape, d, a.seed),
        (None, Some(n)) => ShapeSpec::with_point_budget(a.shape, n, a.seed)?,
        (None, None) => ShapeSpec::with_point_budget(a.shape, 20_000, a.seed)?,
        (Some(_), Some(_)) => unreachable!("clap enforces the group"),
    };
    spec.tau = a.tau;
    spec.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let synth = generate(&spec)?;
    write_cloud(&a.out, &synth.cloud)?;
    let meta = a.metadata.unwrap_or_else(|| {
        let stem = a.out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        a.out.with_file_name(format!("{stem}.meta.csv"))
    });
    let mut w = BufWriter::new(fs::File::create(&meta)?);
    synth.write_metadata(&mut w)?;
    w.flush()?;
    println!(
        "{}: {} points, {} edge, tau {:.6}, density {:.3}",
        spec.kind.name(),
        synth.cloud.len(),
        synth.cloud.edge_count(),
        synth.tau,
        spec.density
    );
    Ok(())
}

fn run_train(a: TrainArgs) -> Outcome {
    let mut cfg = match &a.config {
        Some(path) => TrainConfig::parse(&fs::read_to_string(path).map_err(|e| at(path)(e.into()))?)?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(epochs) = a.epochs {
        cfg.max_epochs = epochs;
    }
    if let Some(lr) = a.lr {
        cfg.lr = lr;
    }
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let cloud = load(&a.cloud, a.dedup)?;
    let (params, log) = with_threads(a.threads, || train(&cloud, &cfg))??;
    save_checkpoint(&params, &a.out_checkpoint)?;
    if let Some(path) = &a.log {
        fs::write(path, log.to_csv())?;
    }
    match (log.best_epoch, log.best_fscore()) {
        (Some(epoch), Some(f)) => println!("best validation F {f:.4} at epoch {epoch}"),
        _ => println!("no epoch improved on the initial model"),
    }
    Ok(())
}

fn run_predict(a: PredictArgs) -> Outcome {
    check_output(&a.out)?;
    if a.batch == 0 {
        return Err(Failure::Usage("--batch must be at least 1".into()));
    }
    let cloud = load(&a.cloud, a.dedup)?;
    let params = load_checkpoint(&a.checkpoint).map_err(at(&a.checkpoint))?;
    let started = Instant::now();
    let out = with_threads(a.threads, || predict(&cloud, &params, a.batch))??;
    let secs = started.elapsed().as_secs_f64();
    write_cloud(&a.out, &out)?;
    eprintln!(
        "predicted {} points ({} edge) in {secs:.2}s, {:.0} points/s",
        out.len(),
        out.edge_count(),
        out.len() as f64 / secs.max(1e-9)
    );
    Ok(())
}

fn run_eval(a: EvalArgs) -> Outcome {
    let pred = read_cloud(&a.pred).map_err(at(&a.pred))?;
    let gt = read_cloud(&a.gt).map_err(at(&a.gt))?;
    let report = evaluate(&pred, &gt)?;
    report.check()?;
    let line = report.to_json_line();
    println!("{line}");
    print!("{}", report.to_table());
    if let Some(path) = &a.out {
        fs::write(path, format!("{line}\n"))?;
    }
    Ok(())
}

fn segment(a: SegmentArgs) -> Outcome {
    let format = Format::from_path(&a.out).map_err(|e| Failure::Usage(e.to_string()))?;
    if a.k == 0 {
        return Err(Failure::Usage("--k must be at least 1".into()));
    }
    let cloud = read_cloud(&a.cloud).map_err(at(&a.cloud))?;
    let non_edge = cloud.len() - cloud.require_labels()?.iter().filter(|&&e| e).count();
    let min_size = a.min_size.unwrap_or_else(|| default_min_size(non_edge));
    let mut result = flood_segment_with(&cloud, a.k, min_size)?;
    if a.attach {
        result = result.attach_unassigned(&cloud)?;
    }
    let mut w = BufWriter::new(fs::File::create(&a.out)?);
    match format {
        Format::Xyz => result.write_xyz(&mut w, &cloud)?,
        Format::Ply => result.write_ply(&mut w, &cloud)?,
    }
    w.flush()?;
    let sizes: Vec<String> = result.sizes.iter().map(usize::to_string).collect();
    println!("{} segments, sizes [{}]", result.count, sizes.join(", "));
    Ok(())
}

fn perturb(a: PerturbArgs) -> Outcome {
    check_output(&a.out)?;
    let cloud = read_cloud(&a.cloud).map_err(at(&a.cloud))?;
    let out = match (a.noise, a.keep) {
        (Some(ratio), None) => add_gaussian_noise(&cloud, ratio, a.seed)?,
        (None, Some(keep)) => downsample(&cloud, keep, a.seed)?,
        _ => unreachable!("clap enforces exactly one mode"),
    };
    write_cloud(&a.out, &out)?;
    println!("{} -> {} points", cloud.len(), out.len());
    Ok(())
}

fn info(a: InfoArgs) -> Outcome {
    let params = match (&a.checkpoint, a.k) {
        (Some(path), _) => load_checkpoint(path).map_err(at(path))?,
        (None, k) => {
            let hyper = Hyper::with_heads(k.unwrap_or(16), DEFAULT_HEADS).map_err(|e| Failure::Usage(e.to_string()))?;
            ModelParameters::zeros(hyper)
        }
    };
    let hyper = params.hyper();
    println!("k {}", hyper.k);
    println!("heads {}", hyper.heads);
    for info in params.tensor_infos() {
        let dims: Vec<String> = info.shape.iter().map(usize::to_string).collect();
        println!("{:<32} [{}] {}", info.name, dims.join(", "), info.len());
    }
    println!("total parameters {}", params.param_count());
    Ok(())
}
