//! `wpc-clean`: command-line wind power curve cleaning.
//!
//! Subcommands: `clean` (label abnormal points), `sweep` (inspect the
//! structuring-element selection), `synth` (generate benchmark data with
//! ground truth), `bench` (compare cleaning methods) and `render` (write
//! the curve image). Exit codes: 0 success, 1 validation problem, 2 I/O
//! problem; diagnostics are single lines on stderr.

mod render;

use std::env;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use wpc_core::baselines::BaselineConfig;
use wpc_core::eval::{compare, Method};
use wpc_core::pipeline::{run_with_artifacts, EdgeSource, PipelineConfig, ReferenceSource};
use wpc_core::raster::{build_transform, rasterize, write_image, ImageFormat};
use wpc_core::scada::{
    parse_dataset, validate_spec, write_dataset, write_labeled, Dataset, Label, ScadaError,
    TurbineSpec,
};
use wpc_core::synth::{generate, reference_from_dataset, SynthConfig};

#[derive(Debug)]
enum CliError {
    /// Bad flags, malformed data, or impossible configurations; exit 1.
    Validation(String),
    /// Filesystem trouble; exit 2, message names the path.
    Io(String),
}

impl CliError {
    fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }
}

/// Sorts a SCADA error into the two exit classes: operating-system I/O
/// failures keep exit code 2, everything else is the file's content.
fn scada_error(path: &Path, err: ScadaError) -> CliError {
    let io_rooted = match &err {
        ScadaError::Io(_) => true,
        ScadaError::Csv(e) => e.is_io_error(),
        _ => false,
    };
    let msg = format!("{}: {err}", path.display());
    if io_rooted {
        CliError::Io(msg)
    } else {
        CliError::Validation(msg)
    }
}

fn io_error(path: &Path, err: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {err}", path.display()))
}

#[derive(Parser)]
#[command(
    name = "wpc-clean",
    version,
    about = "Wind power curve cleaning for wind turbine SCADA data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Label abnormal points and write the cleaned dataset.
    Clean(CleanArgs),
    /// Print the structuring-element sweep (n vs dissimilarity).
    Sweep(SweepArgs),
    /// Generate a synthetic dataset with a ground-truth column.
    Synth(SynthArgs),
    /// Compare cleaning methods on one dataset.
    Bench(BenchArgs),
    /// Write the rasterized wind power curve image.
    Render(RenderArgs),
}

/// Turbine parameters, either from a spec file or from flags. Flags
/// override file values key by key.
#[derive(Args)]
struct SpecArgs {
    /// Spec file with `key = value` lines: cut_in, rated_speed, cut_out,
    /// rated_power.
    #[arg(long, value_name = "FILE")]
    spec: Option<PathBuf>,
    /// Cut-in wind speed, m/s.
    #[arg(long, value_name = "M_S")]
    cut_in: Option<f64>,
    /// Rated wind speed, m/s.
    #[arg(long, value_name = "M_S")]
    rated_speed: Option<f64>,
    /// Cut-out wind speed, m/s.
    #[arg(long, value_name = "M_S")]
    cut_out: Option<f64>,
    /// Rated power, kW.
    #[arg(long, value_name = "KW")]
    rated_power: Option<f64>,
}

impl SpecArgs {
    fn resolve(&self) -> Result<TurbineSpec, CliError> {
        let mut spec = match &self.spec {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
                TurbineSpec::from_key_value(&text).map_err(|e| scada_error(path, e))?
            }
            None => {
                let all = [
                    self.cut_in,
                    self.rated_speed,
                    self.cut_out,
                    self.rated_power,
                ];
                if all.iter().any(Option::is_none) {
                    return Err(CliError::validation(
                        "turbine spec incomplete: pass --spec FILE or all of \
                         --cut-in --rated-speed --cut-out --rated-power",
                    ));
                }
                TurbineSpec::new(
                    all[0].unwrap(),
                    all[1].unwrap(),
                    all[2].unwrap(),
                    all[3].unwrap(),
                )
            }
        };
        if let Some(v) = self.cut_in {
            spec.cut_in = v;
        }
        if let Some(v) = self.rated_speed {
            spec.rated_speed = v;
        }
        if let Some(v) = self.cut_out {
            spec.cut_out = v;
        }
        if let Some(v) = self.rated_power {
            spec.rated_power = v;
        }
        let violations = validate_spec(&spec);
        if violations.is_empty() {
            Ok(spec)
        } else {
            Err(CliError::Validation(format!(
                "invalid turbine spec: {}",
                violations.join("; ")
            )))
        }
    }
}

/// Raster canvas shared by every image-producing command.
#[derive(Args)]
struct CanvasArgs {
    /// Canvas width in pixels.
    #[arg(long, default_value_t = 432)]
    width: usize,
    /// Canvas height in pixels.
    #[arg(long, default_value_t = 288)]
    height: usize,
    /// Side of the square block drawn per point, in pixels.
    #[arg(long, default_value_t = 2)]
    stamp: usize,
}

#[derive(Args)]
struct CleanArgs {
    /// Input SCADA CSV (timestamp, wind_speed, power, extras kept).
    #[arg(long, value_name = "CSV")]
    input: PathBuf,
    #[command(flatten)]
    spec: SpecArgs,
    #[command(flatten)]
    canvas: CanvasArgs,
    /// Reference curve: `builtin` or a CSV of known-clean SCADA data.
    #[arg(long, default_value = "builtin", value_name = "CSV|builtin")]
    reference: String,
    /// Largest structuring element size tried (sweep runs 2..=n).
    #[arg(long, default_value_t = 9, value_name = "N")]
    n_max: usize,
    /// Edge region source for marking: `raw` or `opened`.
    #[arg(long, default_value = "raw")]
    edge_source: String,
    /// Labeled output CSV.
    #[arg(long, value_name = "CSV")]
    output: PathBuf,
    /// Optional JSON run report.
    #[arg(long, value_name = "JSON")]
    report: Option<PathBuf>,
    /// Optional directory for stage images (raw, reference, openings,
    /// regions, label overlay).
    #[arg(long, value_name = "DIR")]
    render_dir: Option<PathBuf>,
    /// Stage image format: `png` or `pgm` (the label overlay is always
    /// PNG).
    #[arg(long, default_value = "png")]
    image_format: String,
}

#[derive(Args)]
struct SweepArgs {
    /// Input SCADA CSV.
    #[arg(long, value_name = "CSV")]
    input: PathBuf,
    #[command(flatten)]
    spec: SpecArgs,
    #[command(flatten)]
    canvas: CanvasArgs,
    /// Reference curve: `builtin` or a CSV of known-clean SCADA data.
    #[arg(long, default_value = "builtin", value_name = "CSV|builtin")]
    reference: String,
    /// Largest structuring element size tried.
    #[arg(long, default_value_t = 9, value_name = "N")]
    n_max: usize,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Number of points.
    #[arg(long, default_value_t = 30_000)]
    n: usize,
    /// Power noise sigma in kW (default: 1.5% of rated power).
    #[arg(long, value_name = "KW")]
    noise_sigma: Option<f64>,
    /// Wind measurement noise sigma in m/s (default: 0.8% of the ramp
    /// width).
    #[arg(long, value_name = "M_S")]
    wind_noise_sigma: Option<f64>,
    /// Fraction of stacked negative-power points.
    #[arg(long, default_value_t = 0.02)]
    type1: f64,
    /// Fraction of scattered outliers.
    #[arg(long, default_value_t = 0.05)]
    type2: f64,
    /// Fraction of stacked curtailment points.
    #[arg(long, default_value_t = 0.10)]
    type3: f64,
    /// Comma-separated curtailment band levels in kW (default: 40% of
    /// rated power).
    #[arg(long, value_name = "KW,KW,...")]
    levels: Option<String>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output CSV; ground truth goes into a `truth` column.
    #[arg(long, value_name = "CSV")]
    output: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Input SCADA CSV.
    #[arg(long, value_name = "CSV")]
    input: PathBuf,
    #[command(flatten)]
    spec: SpecArgs,
    #[command(flatten)]
    canvas: CanvasArgs,
    /// Reference curve: `builtin` or a CSV of known-clean SCADA data.
    #[arg(long, default_value = "builtin", value_name = "CSV|builtin")]
    reference: String,
    /// Largest structuring element size tried by the image method.
    #[arg(long, default_value_t = 9, value_name = "N")]
    n_max: usize,
    /// Edge region source for the image method: `raw` or `opened`.
    #[arg(long, default_value = "raw")]
    edge_source: String,
    /// Column holding ground-truth labels, e.g. the `truth` column
    /// written by `synth`.
    #[arg(long, value_name = "NAME")]
    truth_col: Option<String>,
    /// Comma-separated methods to run: image, lof, kmeans.
    #[arg(long, default_value = "image,lof,kmeans")]
    methods: String,
    /// Table format: `markdown` or `csv`.
    #[arg(long, default_value = "markdown")]
    format: String,
    /// LOF neighborhood size.
    #[arg(long, default_value_t = 300)]
    lof_k: usize,
    /// Fraction of points LOF flags.
    #[arg(long, default_value_t = 0.10)]
    lof_fraction: f64,
    /// Number of k-means clusters.
    #[arg(long, default_value_t = 13)]
    kmeans_k: usize,
    /// Distance threshold in cluster-sigma units.
    #[arg(long, default_value_t = 2.0)]
    kmeans_sigma: f64,
    /// Seed for the k-means initialization.
    #[arg(long, default_value_t = 1)]
    baseline_seed: u64,
}

#[derive(Args)]
struct RenderArgs {
    /// Input SCADA CSV.
    #[arg(long, value_name = "CSV")]
    input: PathBuf,
    #[command(flatten)]
    spec: SpecArgs,
    #[command(flatten)]
    canvas: CanvasArgs,
    /// Output image path.
    #[arg(long, value_name = "IMG")]
    output: PathBuf,
    /// Image format: `png` or `pgm`.
    #[arg(long, default_value = "png")]
    image_format: String,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            // First line only: clap appends usage hints we do not want on
            // a single-line diagnostic channel.
            let text = e.to_string();
            eprintln!("{}", text.lines().next().unwrap_or("invalid arguments"));
            return ExitCode::from(1);
        }
    };
    let result = init_threads().and_then(|()| match cli.command {
        Command::Clean(args) => cmd_clean(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Render(args) => cmd_render(args),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Honors `WPC_CLEAN_THREADS`: a positive value caps the worker pool, 0 or
/// unset means all cores.
fn init_threads() -> Result<(), CliError> {
    match env::var("WPC_CLEAN_THREADS") {
        Err(_) => Ok(()),
        Ok(raw) => {
            let n: usize = raw.trim().parse().map_err(|_| {
                CliError::Validation(format!(
                    "WPC_CLEAN_THREADS must be a non-negative integer, got `{raw}`"
                ))
            })?;
            if n == 0 {
                return Ok(());
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Validation(format!("thread pool: {e}")))
        }
    }
}

fn load_dataset(path: &Path, spec: TurbineSpec) -> Result<Dataset, CliError> {
    let file = File::open(path).map_err(|e| io_error(path, e))?;
    let source = path.file_stem().map(|s| s.to_string_lossy().into_owned());
    parse_dataset(
        BufReader::new(file),
        spec,
        source.unwrap_or_else(|| "input".into()),
    )
    .map_err(|e| scada_error(path, e))
}

fn resolve_reference(
    raw: &str,
    spec: TurbineSpec,
    canvas: &CanvasArgs,
) -> Result<ReferenceSource, CliError> {
    if raw.eq_ignore_ascii_case("builtin") {
        return Ok(ReferenceSource::Builtin);
    }
    let path = PathBuf::from(raw);
    let clean = load_dataset(&path, spec)?;
    let img = reference_from_dataset(&clean, canvas.width, canvas.height, canvas.stamp)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    Ok(ReferenceSource::Image(img))
}

fn pipeline_config(
    canvas: &CanvasArgs,
    n_max: usize,
    edge_source: &str,
    reference: ReferenceSource,
) -> Result<PipelineConfig, CliError> {
    let edge_source: EdgeSource = edge_source.parse().map_err(CliError::Validation)?;
    Ok(PipelineConfig {
        width: canvas.width,
        height: canvas.height,
        stamp: canvas.stamp,
        n_max,
        edge_source,
        reference,
    })
}

fn parse_format(raw: &str) -> Result<ImageFormat, CliError> {
    raw.parse()
        .map_err(|e: wpc_core::raster::RasterError| CliError::Validation(e.to_string()))
}

fn cmd_clean(args: CleanArgs) -> Result<(), CliError> {
    let spec = args.spec.resolve()?;
    let format = parse_format(&args.image_format)?;
    let reference = resolve_reference(&args.reference, spec, &args.canvas)?;
    let config = pipeline_config(&args.canvas, args.n_max, &args.edge_source, reference)?;
    let mut dataset = load_dataset(&args.input, spec)?;

    let (report, artifacts) = run_with_artifacts(&mut dataset, &config)
        .map_err(|e| CliError::Validation(e.to_string()))?;

    let out = File::create(&args.output).map_err(|e| io_error(&args.output, e))?;
    write_labeled(&dataset, BufWriter::new(out)).map_err(|e| scada_error(&args.output, e))?;

    if let Some(path) = &args.report {
        let file = File::create(path).map_err(|e| io_error(path, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, &report).map_err(|e| io_error(path, e))?;
        writeln!(w)
            .and_then(|()| w.flush())
            .map_err(|e| io_error(path, e))?;
    }
    if let Some(dir) = &args.render_dir {
        render::render_stages(dir, &dataset, &artifacts, format)?;
    }
    println!("{report}");
    println!("wrote {}", args.output.display());
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let spec = args.spec.resolve()?;
    let reference = resolve_reference(&args.reference, spec, &args.canvas)?;
    let config = pipeline_config(&args.canvas, args.n_max, "raw", reference)?;
    let mut dataset = load_dataset(&args.input, spec)?;
    let (report, _) = run_with_artifacts(&mut dataset, &config)
        .map_err(|e| CliError::Validation(e.to_string()))?;

    println!(" n  dissimilarity");
    for entry in &report.dissimilarities {
        println!("{:2}  {:>13.6}", entry.n, entry.dissimilarity);
    }
    let best = report
        .dissimilarities
        .iter()
        .find(|e| e.n == report.n_best)
        .map(|e| e.dissimilarity)
        .unwrap_or(f64::NAN);
    println!("best n = {} (dissimilarity {best:.6})", report.n_best);
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<(), CliError> {
    let spec = args.spec.resolve()?;
    let mut cfg = SynthConfig::for_spec(spec);
    cfg.n_points = args.n;
    cfg.seed = args.seed;
    cfg.type1_frac = args.type1;
    cfg.type2_frac = args.type2;
    cfg.type3_frac = args.type3;
    if let Some(sigma) = args.noise_sigma {
        cfg.noise_sigma = sigma;
    }
    if let Some(sigma) = args.wind_noise_sigma {
        cfg.wind_noise_sigma = sigma;
    }
    if let Some(levels) = &args.levels {
        cfg.type3_levels = levels
            .split(',')
            .map(|s| {
                s.trim().parse::<f64>().map_err(|_| {
                    CliError::Validation(format!("invalid band level `{}` in --levels", s.trim()))
                })
            })
            .collect::<Result<_, _>>()?;
    }
    let (mut dataset, truth) = generate(&cfg).map_err(|e| CliError::Validation(e.to_string()))?;
    let counts = |l: Label| truth.iter().filter(|t| **t == l).count();
    let summary = format!(
        "type1 {}, type2 {}, type3 {}",
        counts(Label::Type1),
        counts(Label::Type2),
        counts(Label::Type3)
    );
    dataset.push_extra_column(
        "truth",
        truth.iter().map(|l| l.as_str().to_string()).collect(),
    );
    let out = File::create(&args.output).map_err(|e| io_error(&args.output, e))?;
    let rows =
        write_dataset(&dataset, BufWriter::new(out)).map_err(|e| scada_error(&args.output, e))?;
    println!(
        "wrote {rows} points to {} ({summary})",
        args.output.display()
    );
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    let spec = args.spec.resolve()?;
    let reference = resolve_reference(&args.reference, spec, &args.canvas)?;
    let config = pipeline_config(&args.canvas, args.n_max, &args.edge_source, reference)?;
    let dataset = load_dataset(&args.input, spec)?;

    let truth: Option<Vec<Label>> = match &args.truth_col {
        None => None,
        Some(name) => {
            let idx = dataset.extra_column(name).ok_or_else(|| {
                CliError::Validation(format!(
                    "{}: no column named `{name}`",
                    args.input.display()
                ))
            })?;
            let labels = dataset
                .points
                .iter()
                .enumerate()
                .map(|(row, p)| {
                    p.extras[idx].parse::<Label>().map_err(|()| {
                        CliError::Validation(format!(
                            "{}: row {}: invalid label `{}` in column `{name}`",
                            args.input.display(),
                            row + 1,
                            p.extras[idx]
                        ))
                    })
                })
                .collect::<Result<_, _>>()?;
            Some(labels)
        }
    };

    let methods = args
        .methods
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.parse::<Method>().map_err(CliError::Validation))
        .collect::<Result<Vec<_>, _>>()?;
    if methods.is_empty() {
        return Err(CliError::validation(
            "--methods must name at least one method",
        ));
    }

    let baseline = BaselineConfig {
        lof_k: args.lof_k,
        lof_fraction: args.lof_fraction,
        kmeans_k: args.kmeans_k,
        kmeans_sigma: args.kmeans_sigma,
        seed: args.baseline_seed,
    };
    let report = compare(&dataset, truth.as_deref(), &methods, &config, &baseline)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    match args.format.trim().to_ascii_lowercase().as_str() {
        "markdown" => print!("{}", report.to_markdown()),
        "csv" => print!("{}", report.to_csv()),
        other => {
            return Err(CliError::Validation(format!(
                "unknown format `{other}`, expected `markdown` or `csv`"
            )))
        }
    }
    Ok(())
}

fn cmd_render(args: RenderArgs) -> Result<(), CliError> {
    let spec = args.spec.resolve()?;
    let format = parse_format(&args.image_format)?;
    let dataset = load_dataset(&args.input, spec)?;
    let transform = build_transform(
        &dataset,
        args.canvas.width,
        args.canvas.height,
        args.canvas.stamp,
    )
    .map_err(|e| CliError::Validation(e.to_string()))?;
    let img = rasterize(&dataset, &transform);
    let out = File::create(&args.output).map_err(|e| io_error(&args.output, e))?;
    write_image(&img, BufWriter::new(out), format).map_err(|e| io_error(&args.output, e))?;
    println!("wrote {}", args.output.display());
    Ok(())
}
