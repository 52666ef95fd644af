//! Command-line shell over the dskde library: bandwidth selection, model
//! fitting, density scoring, anomaly detection, the simulation benchmark,
//! and detection-quality evaluation.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::Array2;

use dskde::bandwidth::{self, BandwidthPlan};
use dskde::estimators::{self, FrameStack, Variant};
use dskde::eval::{evaluate, Detection};
use dskde::extract::{self, Connectivity, DetectionParams, MinArea};
use dskde::io::{self, text};
use dskde::simulate::{self, EstimatorKind, MeanField, SimConfig};

#[derive(Parser)]
#[command(
    name = "dskde",
    version,
    about = "Doubly smoothed density estimation and anomaly detection on fixed-camera image stacks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print rule-of-thumb bandwidths and MSE constants for a stack or for
    /// explicit (N, M, sigma).
    Bandwidth(BandwidthArgs),
    /// Fit a GPA table from PGM frames and write the model file.
    Fit(FitArgs),
    /// Score one frame against a fitted model, writing the density map.
    Score(ScoreArgs),
    /// Detect anomaly boxes in frames against a fitted model.
    Detect(DetectArgs),
    /// Run the synthetic MSE benchmark and emit the report CSV.
    Simulate(SimulateArgs),
    /// Evaluate detections against ground-truth annotations.
    Eval(EvalArgs),
}

#[derive(Args)]
struct BandwidthArgs {
    /// Frame directory or explicit PGM files.
    #[arg(long, num_args = 1.., conflicts_with_all = ["n", "m", "sigma"])]
    frames: Vec<PathBuf>,
    /// Take every stride-th frame.
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// Frame count N (with --m and --sigma instead of --frames).
    #[arg(long, requires_all = ["m", "sigma"])]
    n: Option<usize>,
    /// Lattice size M = p * q.
    #[arg(long)]
    m: Option<usize>,
    /// Pixel-value standard deviation.
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    Ds,
    Cd,
}

#[derive(Args)]
struct FitArgs {
    /// Frame directory or explicit PGM files.
    #[arg(long, required = true, num_args = 1..)]
    frames: Vec<PathBuf>,
    /// Number of value-grid points.
    #[arg(long, default_value_t = 500)]
    gstar: usize,
    /// Estimator precomputed in the table.
    #[arg(long, value_enum, default_value = "ds")]
    variant: VariantArg,
    /// RNG seed for drawing the value grid.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use an evenly spaced grid instead of a random one.
    #[arg(long)]
    even_grid: bool,
    /// Take every stride-th frame.
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// Output model path.
    #[arg(long, required = true)]
    out: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long, required = true)]
    model: PathBuf,
    /// Frame to score (PGM).
    #[arg(long, required = true)]
    frame: PathBuf,
    /// Output density map, rescaled to 8-bit PGM.
    #[arg(long, required = true)]
    out: PathBuf,
    /// Also write the raw density values as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long, required = true)]
    model: PathBuf,
    /// Frame directory or explicit PGM files.
    #[arg(long, required = true, num_args = 1..)]
    frames: Vec<PathBuf>,
    /// Take every stride-th frame.
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// Background threshold on the rescaled density map.
    #[arg(long, default_value_t = 0.06)]
    alpha1: f64,
    /// Binarization threshold on the blurred map.
    #[arg(long, default_value_t = 0.42)]
    alpha2: f64,
    /// Average-pooling window side (odd).
    #[arg(long, default_value_t = 33)]
    pool: usize,
    /// Minimum component area in pixels; defaults to 5500 rescaled by the
    /// lattice area relative to 540x960.
    #[arg(long)]
    min_area: Option<usize>,
    /// Component connectivity (4 or 8).
    #[arg(long, default_value_t = 8)]
    connectivity: u8,
    /// Output detections CSV.
    #[arg(long, required = true)]
    out: PathBuf,
    /// Dump intermediate stage maps as PGM files into this directory.
    #[arg(long)]
    dump_stages: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// `key = value` configuration file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    gstar: Option<usize>,
    #[arg(long)]
    gplus: Option<usize>,
    /// Replication count T.
    #[arg(long)]
    reps: Option<usize>,
    /// Comma-separated frame counts to benchmark, e.g. `100,400`.
    #[arg(long)]
    n_values: Option<String>,
    /// Comma-separated estimators from cd, ds, gpa-cd, gpa-ds.
    #[arg(long)]
    estimators: Option<String>,
    /// `synthetic` or a PGM file holding the mean field.
    #[arg(long)]
    mean_field: Option<String>,
    /// Report CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Detections CSV (`frame_id,r0,r1,c0,c1,seconds`).
    #[arg(long, required = true)]
    detections: PathBuf,
    /// Annotations file (`frame_id,label,r0,r1,c0,c1`).
    #[arg(long, required = true)]
    annotations: PathBuf,
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Bandwidth(args) => cmd_bandwidth(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Score(args) => cmd_score(args),
        Command::Detect(args) => cmd_detect(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Eval(args) => cmd_eval(args),
    }
}

fn load_stack(frames: &[PathBuf], stride: usize) -> Result<FrameStack> {
    io::load_frames(frames, stride).context("loading frames")
}

fn cmd_bandwidth(args: BandwidthArgs) -> Result<()> {
    let (n, m, sigma) = if !args.frames.is_empty() {
        let stack = load_stack(&args.frames, args.stride)?;
        let sigma = bandwidth::empirical_sigma(&stack)?;
        (stack.n(), stack.m(), sigma)
    } else {
        match (args.n, args.m, args.sigma) {
            (Some(n), Some(m), Some(sigma)) => (n, m, sigma),
            _ => bail!("provide either --frames or all of --n, --m, --sigma"),
        }
    };
    let h = bandwidth::ds_bandwidth(n, m, sigma)?;
    let h_star = bandwidth::gpa_bandwidth(h)?;
    let (c1, c2) = bandwidth::mse_constants(sigma)?;
    println!("n = {n}");
    println!("m = {m}");
    println!("sigma_hat = {sigma:.6}");
    println!("h = {h:.6}");
    println!("h_star = {h_star:.6}");
    println!("c1 = {c1:.6}");
    println!("c2 = {c2:.6}");
    Ok(())
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let stack = load_stack(&args.frames, args.stride)?;
    let variant = match args.variant {
        VariantArg::Ds => Variant::GpaDs,
        VariantArg::Cd => Variant::GpaCd,
    };
    let plan = match variant {
        Variant::GpaDs => BandwidthPlan::ds_for_stack(&stack)?,
        Variant::GpaCd => BandwidthPlan::cd_for_stack(&stack)?,
    };
    let t0 = Instant::now();
    let table = if args.even_grid {
        estimators::gpa_fit_even(&stack, args.gstar, &plan, variant)?
    } else {
        estimators::gpa_fit(&stack, args.gstar, &plan, variant, args.seed)?
    };
    io::save_model(&table, &args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "fitted {} table: {} frames, {}x{} lattice, g_star = {}, h = {:.6}, h_star = {:.6}, sigma_hat = {:.6}, {:.2}s",
        table.variant().name(),
        stack.n(),
        table.p(),
        table.q(),
        table.g_star(),
        table.plan().h(),
        table.plan().h_star(),
        table.plan().sigma_hat(),
        t0.elapsed().as_secs_f64()
    );
    Ok(())
}

fn cmd_score(args: ScoreArgs) -> Result<()> {
    let table = io::load_model(&args.model)
        .with_context(|| format!("loading {}", args.model.display()))?;
    let frame = io::read_pgm(&args.frame)?;
    let map = estimators::density_map(&table, frame.view())?;
    let rescaled = extract::rescale01(&map);
    io::write_pgm(&args.out, rescaled.values())
        .with_context(|| format!("writing {}", args.out.display()))?;
    if let Some(csv) = &args.csv {
        let mut out = String::new();
        for row in map.values().rows() {
            let fields: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        fs::write(csv, out).with_context(|| format!("writing {}", csv.display()))?;
    }
    Ok(())
}

fn frame_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn sorted_frame_paths(frames: &[PathBuf], stride: usize) -> Result<Vec<PathBuf>> {
    if stride == 0 {
        bail!("stride must be >= 1");
    }
    let mut files = Vec::new();
    for entry in frames {
        if entry.is_dir() {
            for item in fs::read_dir(entry)? {
                let path = item?.path();
                if path.is_file() {
                    files.push(path);
                }
            }
        } else {
            files.push(entry.clone());
        }
    }
    files.sort();
    Ok(files.into_iter().step_by(stride).collect())
}

fn dump_stage_maps(
    dir: &Path,
    id: &str,
    stages: &extract::DetectionStages,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    io::write_pgm(dir.join(format!("{id}_rescaled.pgm")), stages.rescaled.values())?;
    io::write_pgm(
        dir.join(format!("{id}_background_removed.pgm")),
        stages.background_removed.values(),
    )?;
    io::write_pgm(dir.join(format!("{id}_blurred.pgm")), stages.blurred.values())?;
    let mask = stages.mask.mapv(|b| if b { 1.0 } else { 0.0 });
    io::write_pgm(dir.join(format!("{id}_mask.pgm")), &mask)?;
    Ok(())
}

fn cmd_detect(args: DetectArgs) -> Result<()> {
    let table = io::load_model(&args.model)
        .with_context(|| format!("loading {}", args.model.display()))?;
    let params = DetectionParams {
        alpha1: args.alpha1,
        alpha2: args.alpha2,
        pool: args.pool,
        min_area: args.min_area.map_or(MinArea::AutoScaled, MinArea::Pixels),
        connectivity: match args.connectivity {
            4 => Connectivity::Four,
            8 => Connectivity::Eight,
            other => bail!("connectivity must be 4 or 8, got {other}"),
        },
    };
    params.validate()?;

    let paths = sorted_frame_paths(&args.frames, args.stride)?;
    if paths.is_empty() {
        bail!("no frames found");
    }
    let mut detections = Vec::with_capacity(paths.len());
    for path in &paths {
        let frame = io::read_pgm(path)?;
        let t0 = Instant::now();
        let bbox = if let Some(dump_dir) = &args.dump_stages {
            let stages = extract::detect_stages(&table, frame.view(), &params)?;
            dump_stage_maps(dump_dir, &frame_id(path), &stages)?;
            stages.bbox
        } else {
            extract::detect(&table, frame.view(), &params)?
        };
        detections.push(Detection {
            frame_id: frame_id(path),
            bbox,
            seconds: Some(t0.elapsed().as_secs_f64()),
        });
    }
    let mut out = Vec::new();
    text::write_detections(&mut out, &detections)?;
    fs::write(&args.out, out).with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "detected boxes in {}/{} frames",
        detections.iter().filter(|d| d.bbox.is_some()).count(),
        detections.len()
    );
    Ok(())
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<T>()
                .map_err(|_| anyhow!("malformed {what} entry `{tok}`"))
        })
        .collect()
}

fn mean_field_from(value: &str) -> Result<MeanField> {
    if value == "synthetic" {
        Ok(MeanField::Synthetic)
    } else {
        let field: Array2<f64> = io::read_pgm(Path::new(value))
            .with_context(|| format!("loading mean field {value}"))?;
        Ok(MeanField::Custom(field))
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let mut cfg = SimConfig::default();
    let mut n_values: Vec<usize> = vec![100, 400];
    let mut estimators = EstimatorKind::ALL.to_vec();

    // precedence: defaults, then config file, then flags
    if let Some(path) = &args.config {
        let content = fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let map = text::parse_key_values(&content)?;
        for (key, value) in &map {
            match key.as_str() {
                "p" => cfg.p = value.parse().context("config key p")?,
                "q" => cfg.q = value.parse().context("config key q")?,
                "n" => cfg.n = value.parse().context("config key n")?,
                "sigma" => cfg.sigma = value.parse().context("config key sigma")?,
                "seed" => cfg.seed = value.parse().context("config key seed")?,
                "g_star" => cfg.g_star = value.parse().context("config key g_star")?,
                "g_plus" => cfg.g_plus = value.parse().context("config key g_plus")?,
                "reps" => cfg.reps = value.parse().context("config key reps")?,
                "n_values" => n_values = parse_list(value, "n_values")?,
                "estimators" => {
                    estimators = value
                        .split(',')
                        .map(|tok| EstimatorKind::parse(tok.trim()))
                        .collect::<dskde::Result<_>>()?;
                }
                "mean_field" => cfg.mean_field = mean_field_from(value)?,
                other => bail!("unknown config key `{other}`"),
            }
        }
    }
    if let Some(p) = args.p {
        cfg.p = p;
    }
    if let Some(q) = args.q {
        cfg.q = q;
    }
    if let Some(sigma) = args.sigma {
        cfg.sigma = sigma;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(g) = args.gstar {
        cfg.g_star = g;
    }
    if let Some(g) = args.gplus {
        cfg.g_plus = g;
    }
    if let Some(reps) = args.reps {
        cfg.reps = reps;
    }
    if let Some(list) = &args.n_values {
        n_values = parse_list(list, "n_values")?;
    }
    if let Some(list) = &args.estimators {
        estimators = list
            .split(',')
            .map(|tok| EstimatorKind::parse(tok.trim()))
            .collect::<dskde::Result<_>>()?;
    }
    if let Some(value) = &args.mean_field {
        cfg.mean_field = mean_field_from(value)?;
    }

    let report = simulate::run_mse_benchmark(&cfg, &estimators, &n_values)?;
    match &args.out {
        Some(path) => {
            let mut buf = Vec::new();
            report.write_csv(&mut buf)?;
            fs::write(path, buf).with_context(|| format!("writing {}", path.display()))?;
        }
        None => {
            let stdout = std::io::stdout();
            report.write_csv(stdout.lock())?;
        }
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let detections = text::load_detections(&args.detections)?;
    let annotations = text::load_annotations(&args.annotations)?;
    let report = evaluate(&detections, &annotations)?;
    let mut out = std::io::stdout().lock();
    writeln!(
        out,
        "# iou aggregated over frames where both a detection and a ground-truth box exist"
    )?;
    writeln!(out, "frames = {}", report.frames)?;
    writeln!(out, "tp = {} fp = {} fn = {}", report.tp, report.fp, report.fn_)?;
    writeln!(out, "f1 = {:.6}", report.f1)?;
    match report.mean_iou {
        Some(v) => writeln!(out, "mean_iou = {:.6} ({} matched frames)", v, report.matched)?,
        None => writeln!(out, "mean_iou = n/a (0 matched frames)")?,
    }
    match report.median_iou {
        Some(v) => writeln!(out, "median_iou = {v:.6}")?,
        None => writeln!(out, "median_iou = n/a")?,
    }
    match report.mean_seconds {
        Some(v) => writeln!(out, "mean_seconds = {v:.6}")?,
        None => writeln!(out, "mean_seconds = n/a")?,
    }
    Ok(())
}
