//! Command-line front end: synthetic data, flow caching, calibration,
//! classification, evaluation and plot data.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use harvest_activity::calibration::{calibrate, CalibrationModel};
use harvest_activity::descriptor::write_descriptor_csv;
use harvest_activity::flow::{read_flow_file, write_flow_file, FlowField};
use harvest_activity::io::{generate_synthetic, load_dataset, write_plot_csv, write_timeline_csv, Dataset, SynthConfig};
use harvest_activity::metrics::{run_variants, write_variant_csv, VariantSpec};
use harvest_activity::pipeline::{
    calibration_vectors, compute_flows, labeled_series, series_from_flows, timelines, PickerSeries,
    PipelineConfig,
};
use harvest_activity::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "harvest", version, about = "Picker activity recognition from masked optical flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a synthetic dataset with ground truth.
    Synth(SynthArgs),
    /// Compute flow for every frame pair, cache it and write descriptors.
    Flow(FlowArgs),
    /// Fit thresholds on a dataset without using its labels.
    Calibrate(DataArgs),
    /// Frame labels, batch labels and signals per picker.
    Classify(ModelArgs),
    /// Accuracy, specificity and sensitivity of the classifier and its variants.
    Eval(ModelArgs),
    /// Step series of frame label, batch label and truth.
    Plotdata(ModelArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 600)]
    frames: usize,
    #[arg(long, default_value_t = 2)]
    pickers: usize,
    /// Gaussian noise standard deviation, intensity in [0, 1].
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Box blur radius in pixels.
    #[arg(long, default_value_t = 0)]
    blur: usize,
    /// Fraction of frames in which each picker's mask is dropped.
    #[arg(long, default_value_t = 0.0)]
    occlusion: f64,
    /// Scene config JSON; replaces the schedule flags above.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    /// Dataset directory or manifest file.
    #[arg(long)]
    dataset: PathBuf,
    /// Pipeline config JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Frames in the CS mean and the rolling mode; overrides the config.
    #[arg(long)]
    window: Option<usize>,
    /// Directory of cached flows written by `flow`.
    #[arg(long)]
    flows: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FlowArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Output directory for `flows/` and `descriptors.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct DataArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Calibration JSON written by `calibrate`.
    #[arg(long)]
    calibration: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth(args) => synth(&args),
        Command::Flow(args) => flow(&args),
        Command::Calibrate(args) => {
            let (_, series, cfg) = prepare(&args.pipeline)?;
            let vectors = calibration_vectors(&series);
            info!("calibrating on {} vectors", vectors.len());
            let report = calibrate(&vectors, cfg.window)?;
            let mut text = report.model.to_json()?;
            text.push('\n');
            emit(args.out.as_deref(), |w| {
                w.write_all(text.as_bytes())
                    .map_err(|e| io_error(Path::new("calibration"), e))
            })
        }
        Command::Classify(args) => {
            let (_, series, cal, window) = prepare_model(&args)?;
            let tl = timelines(&series, &cal, window)?;
            emit(args.data.out.as_deref(), |w| write_timeline_csv(w, &tl))
        }
        Command::Eval(args) => {
            let (ds, series, cal, _) = prepare_model(&args)?;
            let truth = ds
                .manifest
                .truth
                .as_ref()
                .ok_or_else(|| Error::Manifest("dataset has no ground truth".into()))?;
            let labeled = labeled_series(&series, truth)?;
            let reports = run_variants(&labeled, &cal, &VariantSpec::standard_set())?;
            emit(args.data.out.as_deref(), |w| write_variant_csv(w, &reports))
        }
        Command::Plotdata(args) => {
            let (ds, series, cal, window) = prepare_model(&args)?;
            let tl = timelines(&series, &cal, window)?;
            emit(args.data.out.as_deref(), |w| {
                write_plot_csv(w, &tl, |p| ds.truth(p).map(<[_]>::to_vec))
            })
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn io_error(path: &Path, source: io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn synth(args: &SynthArgs) -> Result<()> {
    let cfg = match &args.config {
        Some(path) => read_json::<SynthConfig>(path)?,
        None => {
            let mut cfg = SynthConfig::mixed(args.frames, args.pickers, args.seed);
            cfg.noise_sigma = args.noise;
            cfg.blur_radius = args.blur;
            if args.occlusion > 0.0 {
                cfg = cfg.with_occlusion_fraction(args.occlusion, args.seed);
            }
            cfg
        }
    };
    fs::create_dir_all(&args.out).map_err(|e| io_error(&args.out, e))?;
    let manifest = generate_synthetic(&cfg, args.seed, &args.out)?;
    info!("wrote {} frames to {}", manifest.frames.len(), args.out.display());
    Ok(())
}

fn pipeline_config(args: &PipelineArgs) -> Result<PipelineConfig> {
    let mut cfg = match &args.config {
        Some(path) => read_json::<PipelineConfig>(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(window) = args.window {
        cfg.window = window;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn flow_path(dir: &Path, pair: usize) -> PathBuf {
    dir.join(format!("{pair:06}.hflw"))
}

fn load_flows(ds: &Dataset, args: &PipelineArgs, cfg: &PipelineConfig) -> Result<Vec<FlowField>> {
    match &args.flows {
        Some(dir) => {
            let pairs = ds.frames.len().saturating_sub(1);
            let flows = (0..pairs)
                .map(|i| read_flow_file(&flow_path(dir, i)))
                .collect::<Result<Vec<_>>>()?;
            if let Some(f) = flows.first() {
                if (f.width(), f.height()) != (ds.manifest.width, ds.manifest.height) {
                    return Err(Error::Dimension(format!(
                        "cached flow is {}x{}, dataset is {}x{}",
                        f.width(),
                        f.height(),
                        ds.manifest.width,
                        ds.manifest.height
                    )));
                }
            }
            Ok(flows)
        }
        None => compute_flows(&ds.frames, &cfg.pyramid),
    }
}

fn prepare(args: &PipelineArgs) -> Result<(Dataset, Vec<PickerSeries>, PipelineConfig)> {
    let cfg = pipeline_config(args)?;
    let ds = load_dataset(&args.dataset)?;
    info!("{} frames, pickers {:?}", ds.frames.len(), ds.pickers());
    let flows = load_flows(&ds, args, &cfg)?;
    let series = series_from_flows(&flows, &ds.masks, &cfg)?;
    Ok((ds, series, cfg))
}

fn prepare_model(args: &ModelArgs) -> Result<(Dataset, Vec<PickerSeries>, CalibrationModel, usize)> {
    let cal = CalibrationModel::load(&args.calibration)?;
    let (ds, series, cfg) = prepare(&args.data.pipeline)?;
    Ok((ds, series, cal, cfg.window))
}

fn flow(args: &FlowArgs) -> Result<()> {
    let cfg = pipeline_config(&args.pipeline)?;
    let ds = load_dataset(&args.pipeline.dataset)?;
    let flows = load_flows(&ds, &args.pipeline, &cfg)?;
    let dir = args.out.join("flows");
    fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
    for (i, f) in flows.iter().enumerate() {
        write_flow_file(f, &flow_path(&dir, i))?;
    }
    let series = series_from_flows(&flows, &ds.masks, &cfg)?;
    let mut descriptors: Vec<_> = series.iter().flat_map(|s| s.descriptors.iter().cloned()).collect();
    descriptors.sort_by(|a, b| (a.frame_index, &a.picker_id).cmp(&(b.frame_index, &b.picker_id)));
    emit(Some(&args.out.join("descriptors.csv")), |w| write_descriptor_csv(w, &descriptors))
}

/// Runs `write` against the file at `path`, or stdout.
fn emit(path: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
            }
            let file = File::create(path).map_err(|e| io_error(path, e))?;
            let mut out = BufWriter::new(file);
            write(&mut out)?;
            out.flush().map_err(|e| io_error(path, e))
        }
        None => {
            let stdout = io::stdout();
            let mut out = stdout.lock();
            write(&mut out)?;
            out.flush().map_err(|e| io_error(Path::new("<stdout>"), e))
        }
    }
}
