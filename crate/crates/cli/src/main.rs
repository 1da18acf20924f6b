use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use superseg::dataset::{load_ground_truth, run_dataset, DatasetManifest};
use superseg::export::{write_contour_png, write_label_png, write_overlay_png};
use superseg::labels::LabelMap;
use superseg::metrics::{boundary_recall, evaluate_with_tolerance, undersegmentation_error, GroundTruth};
use superseg::pipeline::{oversegment, segment_image, PipelineParams};
use superseg::raster::load_image;

#[derive(Parser)]
#[command(name = "superseg", version, about = "Superpixel region-growing segmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment one image.
    Segment(SegmentArgs),
    /// SLIC and contour-split SLIC over-segmentations, with an optional K sweep.
    Oversegment(OversegmentArgs),
    /// Score a label map against one or more ground truths.
    Evaluate(EvaluateArgs),
    /// Run the pipeline and metrics over a manifest of images.
    Dataset(DatasetArgs),
}

#[derive(Args, Clone)]
struct ParamArgs {
    /// Desired number of superpixels.
    #[arg(short = 'k', long, default_value_t = 600)]
    k: usize,
    /// SLIC compactness.
    #[arg(short = 'm', long, default_value_t = 10.0)]
    m: f64,
    #[arg(long, default_value_t = 10)]
    slic_iters: usize,
    /// Gaussian blur before Canny.
    #[arg(long, default_value_t = 1.4)]
    sigma_canny: f64,
    /// Canny low threshold on the 0-255 lightness scale (default: 0.66 x median).
    #[arg(long)]
    canny_low: Option<f64>,
    /// Canny high threshold (default: 1.33 x median).
    #[arg(long)]
    canny_high: Option<f64>,
    /// Width of the similarity membership function.
    #[arg(long, default_value_t = 0.5)]
    sigma_mu: f64,
    /// Stopping similarity.
    #[arg(long, default_value_t = 0.4)]
    s0: f64,
    /// Threshold decay after an iteration without merges.
    #[arg(long, default_value_t = 0.95)]
    gamma_decay: f64,
}

impl ParamArgs {
    fn params(&self) -> Result<PipelineParams> {
        let mut p = PipelineParams::default();
        p.slic.k = self.k;
        p.slic.m = self.m;
        p.slic.max_iters = self.slic_iters;
        p.canny_sigma = self.sigma_canny;
        p.canny_low = self.canny_low;
        p.canny_high = self.canny_high;
        p.merge.similarity.sigma = self.sigma_mu;
        p.merge.s0 = self.s0;
        p.merge.gamma_decay = self.gamma_decay;
        p.merge.similarity.validate()?;
        p.validate()?;
        Ok(p)
    }
}

#[derive(Args)]
struct SegmentArgs {
    image: PathBuf,
    #[arg(short, long, default_value = "out")]
    output: PathBuf,
    /// Write a snapshot every N iterations.
    #[arg(long, value_name = "N")]
    snapshots: Option<usize>,
    /// Also write the Canny contour map.
    #[arg(long)]
    contours: bool,
    /// Also write per-superpixel descriptors as JSON.
    #[arg(long)]
    features: bool,
    /// Also write every scored region pair as JSON lines.
    #[arg(long)]
    trace: bool,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Args)]
struct OversegmentArgs {
    image: PathBuf,
    #[arg(short, long, default_value = "out")]
    output: PathBuf,
    /// Ground truth for the K sweep (`.seg` or 16-bit PNG); repeatable.
    #[arg(long = "gt")]
    ground_truth: Vec<PathBuf>,
    /// Values of K to sweep when ground truth is given.
    #[arg(long, value_delimiter = ',', default_value = "100,200,300,400,500,600,700,800,900,1000")]
    sweep: Vec<usize>,
    /// Boundary-recall tolerance in pixels.
    #[arg(long, default_value_t = 2)]
    delta: usize,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Predicted label map (16-bit PNG or `.seg`).
    prediction: PathBuf,
    /// Ground-truth segmentations.
    #[arg(required = true)]
    ground_truth: Vec<PathBuf>,
    #[arg(long, default_value_t = 2)]
    delta: usize,
}

#[derive(Args)]
struct DatasetArgs {
    manifest: PathBuf,
    #[arg(short, long, default_value = "out")]
    output: PathBuf,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Serialize)]
struct RunConfig<'a> {
    command: &'a str,
    input: &'a Path,
    params: &'a PipelineParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    canny_low: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    canny_high: Option<f64>,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut f = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn load_gt(paths: &[PathBuf]) -> Result<GroundTruth> {
    let maps = paths
        .iter()
        .map(|p| {
            if !p.exists() {
                bail!("ground truth not found: {}", p.display());
            }
            load_ground_truth(p).with_context(|| format!("reading ground truth {}", p.display()))
        })
        .collect::<Result<Vec<LabelMap>>>()?;
    Ok(GroundTruth::new(maps)?)
}

fn cmd_segment(args: &SegmentArgs) -> Result<()> {
    let mut params = args.params.params()?;
    params.merge.trace = args.trace;
    if args.snapshots == Some(0) {
        bail!("--snapshots must be at least 1");
    }
    let img = load_image(&args.image).with_context(|| format!("reading {}", args.image.display()))?;
    let seg = segment_image(&img, &params)?;
    let out = &args.output;
    create_dir(out)?;

    write_label_png(&seg.labels, out.join("labels.png"))?;
    write_overlay_png(&img, &seg.labels, out.join("overlay.png"))?;
    let mut hist = BufWriter::new(File::create(out.join("history.txt"))?);
    seg.history.write_jsonl(&mut hist)?;
    hist.flush()?;
    write_json(
        &out.join("run_config.json"),
        &RunConfig {
            command: "segment",
            input: &args.image,
            params: &params,
            canny_low: Some(seg.overseg.canny.low),
            canny_high: Some(seg.overseg.canny.high),
        },
    )?;

    if let Some(every) = args.snapshots {
        let dir = out.join("snapshots");
        create_dir(&dir)?;
        let total = seg.iterations();
        let mut its: Vec<usize> = (0..=total).step_by(every).collect();
        if its.last() != Some(&total) {
            its.push(total);
        }
        for it in its {
            let map = seg.snapshot(it)?;
            write_overlay_png(&img, &map, dir.join(format!("iter_{it:04}.png")))?;
        }
    }
    if args.contours {
        write_contour_png(&seg.overseg.contours, out.join("contours.png"))?;
    }
    if args.features {
        write_json(&out.join("features.json"), &seg.features)?;
    }
    if args.trace {
        let mut f = BufWriter::new(File::create(out.join("trace.jsonl"))?);
        for t in &seg.trace {
            serde_json::to_writer(&mut f, t)?;
            writeln!(f)?;
        }
        f.flush()?;
    }
    log::info!(
        "{}: {} regions after {} iterations",
        args.image.display(),
        seg.num_regions(),
        seg.iterations()
    );
    println!("{} regions, {} iterations", seg.num_regions(), seg.iterations());
    Ok(())
}

fn cmd_oversegment(args: &OversegmentArgs) -> Result<()> {
    let params = args.params.params()?;
    let gt = if args.ground_truth.is_empty() {
        None
    } else {
        Some(load_gt(&args.ground_truth)?)
    };
    let img = load_image(&args.image).with_context(|| format!("reading {}", args.image.display()))?;
    let o = oversegment(&img, &params)?;
    let out = &args.output;
    create_dir(out)?;
    write_label_png(&o.slic, out.join("slic.png"))?;
    write_label_png(&o.coslic, out.join("coslic.png"))?;
    write_overlay_png(&img, &o.slic, out.join("slic_overlay.png"))?;
    write_overlay_png(&img, &o.coslic, out.join("coslic_overlay.png"))?;
    write_contour_png(&o.contours, out.join("contours.png"))?;
    write_json(
        &out.join("run_config.json"),
        &RunConfig {
            command: "oversegment",
            input: &args.image,
            params: &params,
            canny_low: Some(o.canny.low),
            canny_high: Some(o.canny.high),
        },
    )?;

    if let Some(gt) = gt {
        let mut w = csv::Writer::from_path(out.join("sweep.csv"))?;
        w.write_record(["K", "br_slic", "br_coslic", "ue_slic", "ue_coslic"])?;
        for &k in &args.sweep {
            let mut p = params;
            p.slic.k = k;
            let o = oversegment(&img, &p)?;
            let mut row = [0.0f64; 4];
            for g in gt.maps() {
                row[0] += boundary_recall(&o.slic, g, args.delta)?;
                row[1] += boundary_recall(&o.coslic, g, args.delta)?;
                row[2] += undersegmentation_error(&o.slic, g)?;
                row[3] += undersegmentation_error(&o.coslic, g)?;
            }
            let n = gt.len() as f64;
            let mut rec = vec![k.to_string()];
            rec.extend(row.iter().map(|v| format!("{:.6}", v / n)));
            w.write_record(&rec)?;
        }
        w.flush()?;
    }
    println!("{} SLIC, {} CoSLIC superpixels", o.slic.count_distinct(), o.coslic.count_distinct());
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    if !args.prediction.exists() {
        bail!("prediction not found: {}", args.prediction.display());
    }
    let pred = load_ground_truth(&args.prediction)
        .with_context(|| format!("reading {}", args.prediction.display()))?;
    let gt = load_gt(&args.ground_truth)?;
    let report = evaluate_with_tolerance(&pred, &gt, args.delta)?;
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    serde_json::to_writer_pretty(&mut lock, &report)?;
    writeln!(lock)?;
    Ok(())
}

fn cmd_dataset(args: &DatasetArgs) -> Result<()> {
    let params = args.params.params()?;
    let manifest = DatasetManifest::load(&args.manifest, params)
        .with_context(|| format!("reading manifest {}", args.manifest.display()))?;
    let summary = run_dataset(&manifest)?;
    let out = &args.output;
    create_dir(out)?;
    summary.write_csv(File::create(out.join("summary.csv"))?)?;
    summary.write_table(File::create(out.join("means.txt"))?)?;
    write_json(
        &out.join("run_config.json"),
        &RunConfig {
            command: "dataset",
            input: &args.manifest,
            params: &params,
            canny_low: None,
            canny_high: None,
        },
    )?;
    summary.write_table(io::stdout().lock())?;
    if !summary.failures.is_empty() {
        for f in &summary.failures {
            eprintln!("failed: {}: {}", f.image.display(), f.error);
        }
    }
    if summary.results.is_empty() {
        bail!("every image failed");
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SUPERSEG_LOG", "warn")).init();
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Segment(a) => cmd_segment(a),
        Command::Oversegment(a) => cmd_oversegment(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Dataset(a) => cmd_dataset(a),
    };
    if let Err(e) = res {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
