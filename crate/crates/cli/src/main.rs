//! `fcp`: source detection with false cluster proportion control.
//!
//! Exit codes: 0 on success (an empty catalog included), 2 for configuration
//! errors, 3 for unreadable or malformed input data.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fcp_core::cluster::{Connectivity, FcpResult, SelectionRule};
use fcp_core::graph::{classify_phase, conservative_superset, graph_find_threshold, LocationSet};
use fcp_core::image::{load_image, save_image, ImageFormat, Mask};
use fcp_core::msd::{detection_statistic, msd_image, ScaleGrid};
use fcp_core::noise::SupersetMethod;
use fcp_core::pipeline::{
    background_rate, detect_image, evaluate, random_sources, synth_sky, Detector, Method, RunConfig,
};
use fcp_core::{Error, Result};

#[derive(Parser)]
#[command(name = "fcp", version, about = "Source detection with false cluster proportion control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate and cache the null maxima table for a detection configuration.
    Simulate(SimulateArgs),
    /// Detect sources in a count image (fcp-z or msfcp).
    Detect(DetectArgs),
    /// Write the multi-scale derivative statistic D = -M of an image.
    Msd(MsdArgs),
    /// Generate a synthetic sky with planted Gaussian sources.
    Synth(SynthArgs),
    /// Score a saved detection result against a truth mask.
    Evaluate(EvaluateArgs),
    /// False cluster proportion on a point set (CSV x,y,pvalue,phase).
    Graphfcp(GraphArgs),
}

/// Run parameters; each flag overrides the matching field of `--config`.
#[derive(Args)]
struct RunArgs {
    /// JSON file mirroring the run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Gaussian smoothing bandwidth applied before the square root.
    #[arg(long)]
    sigma: Option<f64>,
    /// Comma-separated MSD bandwidths, e.g. 1,2,4,8.
    #[arg(long, value_delimiter = ',')]
    scales: Option<Vec<f64>>,
    /// Null replicates.
    #[arg(long = "B")]
    replicates: Option<usize>,
    /// Removal depth for the per-area table (alg1).
    #[arg(long)]
    a: Option<usize>,
    /// alg1 or alg2.
    #[arg(long)]
    superset: Option<SupersetMethod>,
    /// four or eight.
    #[arg(long)]
    connectivity: Option<Connectivity>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    min_area: Option<usize>,
    /// Background Poisson rate; estimated from the counts when absent.
    #[arg(long)]
    lambda0: Option<f64>,
    /// first-crossing or smallest.
    #[arg(long)]
    selection: Option<SelectionRule>,
}

#[derive(Args)]
struct InputArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// ascii-matrix or raw-f64-le.
    #[arg(long)]
    format: Option<ImageFormat>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Image whose size (and mean count, without --lambda0) fixes the model.
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, requires = "cols", conflicts_with = "input")]
    rows: Option<usize>,
    #[arg(long, requires = "rows")]
    cols: Option<usize>,
    /// Where to write the table JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    input: InputArgs,
    /// Cached table from `simulate`.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Catalog CSV; written to stdout when omitted.
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Envelope curve CSV (t, envelope, k_t).
    #[arg(long)]
    envelope: Option<PathBuf>,
    /// Run metadata JSON.
    #[arg(long)]
    metadata: Option<PathBuf>,
    /// Full result JSON, the input of `evaluate`.
    #[arg(long)]
    result: Option<PathBuf>,
}

#[derive(Args)]
struct MsdArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "ascii-matrix")]
    format: ImageFormat,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    scales: Vec<f64>,
    #[arg(long)]
    output: PathBuf,
    /// Defaults to the input format.
    #[arg(long)]
    output_format: Option<ImageFormat>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 128)]
    rows: usize,
    #[arg(long, default_value_t = 128)]
    cols: usize,
    #[arg(long, default_value_t = 0.3)]
    lambda0: f64,
    /// Number of planted sources.
    #[arg(long, default_value_t = 10)]
    sources: usize,
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [2.0, 20.0])]
    amplitude: Vec<f64>,
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [1.0, 2.5])]
    width: Vec<f64>,
    /// Minimum distance of source centres from the edges.
    #[arg(long, default_value_t = 8.0)]
    margin: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value = "ascii-matrix")]
    format: ImageFormat,
    /// Truth mask as a 0/1 ascii matrix.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Source list as JSON.
    #[arg(long)]
    source_list: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Result JSON written by `detect --result`.
    #[arg(long)]
    result: PathBuf,
    /// Truth mask; nonzero pixels are sources.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, default_value = "ascii-matrix")]
    format: ImageFormat,
    /// Defaults to the epsilon stored in the result.
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Args)]
struct GraphArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0.10)]
    c: f64,
    #[arg(long, default_value_t = 0.99)]
    epsilon: f64,
    /// Maximum edge length.
    #[arg(long)]
    distance: f64,
    /// Number of phase classes.
    #[arg(long, default_value_t = 2)]
    classes: usize,
    /// Labelled points CSV; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Detect(a) => detect(a),
        Command::Msd(a) => msd(a),
        Command::Synth(a) => synth(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Graphfcp(a) => graphfcp(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fcp: {e}");
            ExitCode::from(if e.is_input_error() { 3 } else { 2 })
        }
    }
}

fn build_config(run: &RunArgs, input: &InputArgs) -> Result<RunConfig> {
    let mut cfg = match &run.config {
        Some(path) => RunConfig::load_json(path).map_err(|e| match e {
            Error::Config(_) => e,
            other => Error::Config(format!("{}: {other}", path.display())),
        })?,
        None => RunConfig::default(),
    };
    macro_rules! apply {
        ($($flag:expr => $field:ident),* $(,)?) => {
            $(if let Some(v) = $flag.clone() { cfg.$field = v; })*
        };
    }
    apply!(
        run.method => method,
        run.alpha => alpha,
        run.c => c,
        run.epsilon => epsilon,
        run.sigma => sigma_smooth,
        run.replicates => replicates,
        run.superset => superset,
        run.connectivity => connectivity,
        run.seed => seed,
        run.min_area => min_area,
        run.selection => selection,
        input.format => format,
    );
    if let Some(s) = &run.scales {
        cfg.scales = ScaleGrid::new(s.clone()).map_err(|e| Error::Config(e.to_string()))?;
    }
    if run.a.is_some() {
        cfg.a = run.a;
    }
    if run.lambda0.is_some() {
        cfg.lambda0 = run.lambda0;
    }
    if input.input.is_some() {
        cfg.input = input.input.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn require_input(cfg: &RunConfig) -> Result<&Path> {
    cfg.input.as_deref().ok_or_else(|| Error::Config("no input image (use --input or set it in --config)".into()))
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let cfg = build_config(&args.run, &args.input)?;
    let (rows, cols, lambda0) = match (args.rows, args.cols) {
        (Some(r), Some(c)) => {
            let l = cfg.lambda0.ok_or_else(|| Error::Config("--lambda0 is required with --rows/--cols".into()))?;
            (r, c, l)
        }
        _ => {
            let raw = load_image(require_input(&cfg)?, cfg.format)?;
            (raw.rows(), raw.cols(), background_rate(&cfg, &raw))
        }
    };
    let table = Detector::simulate_table(&cfg, rows, cols, lambda0)?;
    table.save_json(&args.out)?;
    eprintln!(
        "wrote {} replicates x {} areas for {rows}x{cols}, lambda0 = {lambda0}",
        table.replicates(),
        table.areas().len()
    );
    Ok(())
}

fn detect(args: DetectArgs) -> Result<()> {
    let mut cfg = build_config(&args.run, &args.input)?;
    if args.table.is_some() {
        cfg.table = args.table.clone();
    }
    for (flag, field) in [
        (&args.catalog, &mut cfg.outputs.catalog),
        (&args.envelope, &mut cfg.outputs.envelope),
        (&args.metadata, &mut cfg.outputs.metadata),
    ] {
        if flag.is_some() {
            *field = flag.clone();
        }
    }
    let raw = load_image(require_input(&cfg)?, cfg.format)?;
    let d = detect_image(&cfg, &raw)?;

    match &cfg.outputs.catalog {
        Some(p) => {
            let mut w = create(p)?;
            d.catalog.write_csv(&mut w)?;
            w.flush()?;
        }
        None => d.catalog.write_csv(io::stdout().lock())?,
    }
    if let Some(p) = &cfg.outputs.envelope {
        let mut w = create(p)?;
        d.result.write_envelope_csv(&mut w)?;
        w.flush()?;
    }
    if let Some(p) = &cfg.outputs.metadata {
        write_json(p, &d.catalog.metadata)?;
    }
    if let Some(p) = &args.result {
        write_json(p, &d.result)?;
    }
    match &d.result.note {
        Some(note) => eprintln!("{}: no detections ({note})", cfg.method),
        None => eprintln!("{}: {} detections at t_c = {}", cfg.method, d.catalog.len(), d.result.t_c),
    }
    Ok(())
}

fn msd(args: MsdArgs) -> Result<()> {
    let img = load_image(&args.input, args.format)?;
    let scales = ScaleGrid::new(args.scales).map_err(|e| Error::Config(e.to_string()))?;
    let d = detection_statistic(&msd_image(&img, &scales)?);
    save_image(&d, &args.output, args.output_format.unwrap_or(args.format))
}

fn synth(args: SynthArgs) -> Result<()> {
    let range = |v: &[f64], name: &str| match v {
        [lo, hi] if lo <= hi => Ok((*lo, *hi)),
        _ => Err(Error::Config(format!("--{name} needs LO,HI with LO <= HI"))),
    };
    let sources = random_sources(
        args.rows,
        args.cols,
        args.sources,
        range(&args.amplitude, "amplitude")?,
        range(&args.width, "width")?,
        args.margin,
        args.seed,
    );
    let sky =
        synth_sky(args.rows, args.cols, args.lambda0, &sources, args.seed).map_err(|e| Error::Config(e.to_string()))?;
    save_image(&sky.image, &args.output, args.format)?;
    if let Some(p) = &args.truth {
        let t =
            fcp_core::image::ImageGrid::from_fn(args.rows, args.cols, |r, c| f64::from(u8::from(sky.truth.get(r, c))));
        save_image(&t, p, ImageFormat::AsciiMatrix)?;
    }
    if let Some(p) = &args.source_list {
        write_json(p, &sky.sources)?;
    }
    Ok(())
}

fn evaluate_cmd(args: EvaluateArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.result)?;
    let result: FcpResult<f64> = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: args.result.clone(),
        location: format!("line {}, column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    let t = load_image(&args.truth, args.format)?;
    let truth = Mask::from_fn(t.rows(), t.cols(), |r, c| t.get(r, c) != 0.0);
    let report = evaluate(&result, &truth, args.epsilon.unwrap_or(result.epsilon))?;
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, &report)?;
    writeln!(out)?;
    Ok(())
}

fn graphfcp(args: GraphArgs) -> Result<()> {
    let points = LocationSet::read_csv(File::open(&args.input)?)?;
    let labels = classify_phase(&points, args.classes)?;
    let u = conservative_superset(&points, args.alpha)?;
    let res = graph_find_threshold(&points, &labels, &u, args.epsilon, args.c, args.distance)?;
    match &args.output {
        Some(p) => {
            let mut w = create(p)?;
            res.write_csv(&points, &labels, &mut w)?;
            w.flush()?;
        }
        None => res.write_csv(&points, &labels, io::stdout().lock())?,
    }
    match res.t_c {
        Some(t) => eprintln!("{} clusters at t_c = {t} ({} points in U)", res.clusters.len(), u.len()),
        None => eprintln!("no qualifying level ({} points in U)", u.len()),
    }
    Ok(())
}
