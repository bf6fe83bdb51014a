//! `chromafringe` command-line tool.
//!
//! Every subcommand reads its defaults from the pipeline config (`--config`,
//! TOML) and lets flags override individual parameters. Stages exchange
//! data through files so they can be run one at a time.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Result};
use chromafringe::figures::run_demo_figures;
use chromafringe::grid::wrap_cycles;
use chromafringe::io::{self, BitDepth};
use chromafringe::pattern::{ideal_phase, synthesize_pattern};
use chromafringe::pipeline::{run_pipeline, CrosstalkSource};
use chromafringe::reconstruct::{apply_mask, mean_smooth, phase_to_depth, threshold_mask, ReferencePhase};
use chromafringe::recovery::{estimate_crosstalk, recover, Crosstalk};
use chromafringe::simulator::{add_salt_noise, apply_camera, calibration_captures, observed_phase, reflect};
use chromafringe::unwrap::{correct_phase, initial_unwrap};
use chromafringe::{Error, Grid, Orientation, PhaseMap, PipelineConfig, UnwrappedPhaseMap};
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "chromafringe", version, about = "Single-shot color fringe range imaging")]
struct Cli {
    /// Pipeline config (TOML); built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the projected pattern and its ideal wrapped phase.
    #[command(allow_negative_numbers = true)]
    Pattern(PatternArgs),
    /// Render the configured scene through the camera model.
    #[command(allow_negative_numbers = true)]
    Simulate(SimulateArgs),
    /// Fit the crosstalk model to single-channel ramp captures.
    Calibrate(CalibrateArgs),
    /// Wrapped phase and validity mask from a capture.
    Recover(RecoverArgs),
    /// Unwrap a wrapped-phase raster and correct isolated period errors.
    Unwrap(UnwrapArgs),
    /// Convert unwrapped phase to depth and export a point cloud.
    #[command(allow_negative_numbers = true)]
    Reconstruct(ReconstructArgs),
    /// Simulate and reconstruct in one go, writing every intermediate.
    #[command(allow_negative_numbers = true)]
    Pipeline(PipelineArgs),
    /// Render the diagnostic figures.
    Demo,
}

#[derive(Args, Debug)]
struct PatternArgs {
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    cycles: Option<f64>,
    #[arg(long)]
    orientation: Option<Orientation>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    pattern: PatternArgs,
    /// Camera noise standard deviation.
    #[arg(long)]
    noise: Option<f64>,
    /// Fraction of pixels replaced by white salt.
    #[arg(long)]
    salt: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    /// Captures of the red, green and blue ramps; simulated from the
    /// configured camera when omitted.
    #[arg(long, num_args = 3, value_names = ["RED", "GREEN", "BLUE"])]
    ramps: Option<Vec<PathBuf>>,
}

#[derive(Args, Debug)]
struct RecoverArgs {
    capture: PathBuf,
    /// Crosstalk model (JSON, as written by `calibrate`).
    #[arg(long, conflicts_with = "camera_model")]
    crosstalk: Option<PathBuf>,
    /// Compensate with the configured camera's own crosstalk model.
    #[arg(long)]
    camera_model: bool,
    /// Color balance window; 0 disables balancing.
    #[arg(long)]
    balance_window: Option<usize>,
    #[arg(long)]
    bins: Option<usize>,
    /// Brightness threshold for adjustment samples.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Skip phase distribution adjustment.
    #[arg(long)]
    no_adjust: bool,
}

#[derive(Args, Debug)]
struct UnwrapArgs {
    /// Wrapped phase, 16-bit gray PNG scaled by 65535.
    phase: PathBuf,
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Brightness raster ordering the unwrap; the capture itself also works.
    #[arg(long)]
    brightness: PathBuf,
    #[arg(long)]
    threshold: Option<f64>,
    /// Correction window side.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    orientation: Option<Orientation>,
}

#[derive(Args, Debug)]
struct ReconstructArgs {
    /// Unwrapped phase raster (RF32).
    unwrapped: PathBuf,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    reference_depth: Option<f64>,
    /// Uniform reference phase in cycles; the configured pattern's phase
    /// is used otherwise.
    #[arg(long)]
    reference_phase: Option<f64>,
    /// Capture used for the brightness gate.
    #[arg(long)]
    capture: Option<PathBuf>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Mean filter window (1 disables).
    #[arg(long)]
    smooth: Option<usize>,
    /// Point cloud keeps every n-th pixel along each axis.
    #[arg(long)]
    stride: Option<usize>,
}

#[derive(Args, Debug)]
struct PipelineArgs {
    #[command(flatten)]
    sim: SimulateArgs,
    #[arg(long)]
    balance_window: Option<usize>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    no_adjust: bool,
    #[arg(long)]
    no_compensate: bool,
    /// Compensate with the camera model instead of a calibration fit.
    #[arg(long)]
    camera_model: bool,
    /// Unwrap intensity threshold.
    #[arg(long)]
    unwrap_threshold: Option<f64>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    smooth: Option<usize>,
    #[arg(long)]
    stride: Option<usize>,
}

fn stage<T>(stage: &'static str, r: chromafringe::Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(stage).into())
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => stage("config", PipelineConfig::load(path))?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn apply_pattern(cfg: &mut PipelineConfig, a: &PatternArgs) {
    let p = &mut cfg.pattern;
    p.width = a.width.unwrap_or(p.width);
    p.height = a.height.unwrap_or(p.height);
    p.cycles = a.cycles.unwrap_or(p.cycles);
    p.orientation = a.orientation.unwrap_or(p.orientation);
}

fn apply_simulate(cfg: &mut PipelineConfig, a: &SimulateArgs) -> Result<()> {
    apply_pattern(cfg, &a.pattern);
    if let Some(sigma) = a.noise {
        cfg.camera = stage("config", cfg.camera.clone().with_noise(sigma))?;
    }
    cfg.salt_fraction = a.salt.unwrap_or(cfg.salt_fraction);
    cfg.scene.kappa = a.kappa.unwrap_or(cfg.scene.kappa);
    Ok(())
}

fn balance_window(w: Option<usize>, current: Option<usize>) -> Option<usize> {
    match w {
        Some(0) => None,
        Some(w) => Some(w),
        None => current,
    }
}

fn create_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e).in_stage("export"))?;
    Ok(())
}

fn write_text(path: &Path, text: String) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e).in_stage("export"))?;
    Ok(())
}

fn phase_gray(p: &PhaseMap) -> chromafringe::Result<Grid<f64>> {
    Grid::from_vec(p.width(), p.height(), p.phases().iter().map(|v| if v.is_nan() { 0.0 } else { *v }).collect())
}

fn cmd_pattern(cfg: &mut PipelineConfig, a: &PatternArgs, out: &Path) -> Result<()> {
    apply_pattern(cfg, a);
    create_out(out)?;
    let pattern = stage("pattern", synthesize_pattern(&cfg.pattern))?;
    let phase = stage("pattern", ideal_phase(&cfg.pattern))?;
    stage("export", io::save_image(&pattern, out.join("pattern.png"), BitDepth::Eight))?;
    stage(
        "export",
        io::save_gray(&phase_gray(&phase)?, out.join("pattern_phase.png"), BitDepth::Sixteen),
    )?;
    println!("pattern {}x{}, {} cycles", cfg.pattern.width, cfg.pattern.height, cfg.pattern.cycles);
    Ok(())
}

fn cmd_simulate(cfg: &mut PipelineConfig, a: &SimulateArgs, out: &Path) -> Result<()> {
    apply_simulate(cfg, a)?;
    stage("config", cfg.validate())?;
    create_out(out)?;
    let spec = &cfg.pattern;
    let (w, h) = (spec.width, spec.height);
    let scene = stage("scene", cfg.scene.build(w, h))?;
    let reflected = stage("reflect", reflect(spec, &scene))?;
    let truth = stage("reflect", observed_phase(spec, &scene))?;
    let camera = cfg.camera.clone().with_seed(cfg.seed);
    let mut capture = apply_camera(&reflected, &camera);
    if cfg.salt_fraction > 0.0 {
        capture = stage("camera", add_salt_noise(&capture, cfg.salt_fraction, cfg.seed ^ 0x5a17_5a17))?;
    }
    let truth_values: Vec<f64> = truth.iter().map(|p| p.unwrap_or(f64::NAN)).collect();
    let wrapped = Grid::from_vec(w, h, truth.iter().map(|p| p.map(wrap_cycles).unwrap_or(0.0)).collect())?;
    stage("export", io::save_image(&capture, out.join("capture.png"), BitDepth::Sixteen))?;
    stage("export", io::save_gray(&wrapped, out.join("phase_truth.png"), BitDepth::Sixteen))?;
    stage("export", io::write_float_raster(w, h, &truth_values, out.join("phase_truth.rf32")))?;
    stage(
        "export",
        io::write_float_raster(w, h, scene.depth().depths(), out.join("depth_truth.rf32")),
    )?;
    println!("simulated {w}x{h} capture, seed {}", cfg.seed);
    Ok(())
}

fn cmd_calibrate(cfg: &PipelineConfig, a: &CalibrateArgs, out: &Path) -> Result<()> {
    create_out(out)?;
    let captures = match &a.ramps {
        Some(paths) => {
            let mut caps = Vec::with_capacity(3);
            for p in paths {
                caps.push(stage("calibrate", io::load_image(p))?);
            }
            <[_; 3]>::try_from(caps).expect("clap enforces three ramps")
        }
        None => {
            let cam = cfg.camera.clone().with_seed(cfg.seed.wrapping_add(0x00ca_1b00));
            let caps = stage("calibrate", calibration_captures(&cam, cfg.pattern.width, cfg.pattern.height))?;
            for (cap, name) in caps.iter().zip(["ramp_red.png", "ramp_green.png", "ramp_blue.png"]) {
                stage("export", io::save_image(cap, out.join(name), BitDepth::Sixteen))?;
            }
            caps
        }
    };
    let model = stage("calibrate", estimate_crosstalk(&captures))?;
    let json = serde_json::to_string_pretty(&model)?;
    write_text(&out.join("crosstalk.json"), json.clone() + "\n")?;
    println!("{json}");
    Ok(())
}

fn load_crosstalk(path: &Path) -> Result<Crosstalk> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e).in_stage("recover"))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())).in_stage("recover").into())
}

fn cmd_recover(cfg: &mut PipelineConfig, a: &RecoverArgs, out: &Path) -> Result<()> {
    let r = &mut cfg.recovery;
    r.balance_window = balance_window(a.balance_window, r.balance_window);
    r.bins = a.bins.unwrap_or(r.bins);
    r.threshold = a.threshold.unwrap_or(r.threshold);
    r.samples = a.samples.unwrap_or(r.samples);
    r.adjust &= !a.no_adjust;
    let model = match (&a.crosstalk, a.camera_model) {
        (Some(path), _) => Some(load_crosstalk(path)?),
        (None, true) => Some(Crosstalk {
            matrix: cfg.camera.crosstalk_rows(),
            offset: cfg.camera.offset(),
        }),
        (None, false) => None,
    };
    cfg.recovery.compensate = model.is_some();
    create_out(out)?;
    let capture = stage("recover", io::load_image(&a.capture))?;
    let rec = stage("recover", recover(&capture, model.as_ref(), &cfg.recovery))?;
    stage("export", io::save_gray(&phase_gray(&rec.phase)?, out.join("wrapped.png"), BitDepth::Sixteen))?;
    stage("export", io::save_mask(&rec.phase.mask_grid(), out.join("mask.png")))?;
    stage("export", io::save_gray(&rec.brightness, out.join("brightness.png"), BitDepth::Sixteen))?;
    println!("{} of {} pixels carry a phase", rec.phase.valid_count(), rec.phase.len());
    Ok(())
}

fn cmd_unwrap(cfg: &mut PipelineConfig, a: &UnwrapArgs, out: &Path) -> Result<()> {
    let u = &mut cfg.unwrap;
    u.intensity_threshold = a.threshold.unwrap_or(u.intensity_threshold);
    u.correction_window = a.window.unwrap_or(u.correction_window);
    u.orientation = a.orientation.unwrap_or(cfg.pattern.orientation);
    create_out(out)?;
    let gray = stage("unwrap", io::load_gray(&a.phase))?;
    let (w, h) = gray.dims();
    let mask = match &a.mask {
        Some(p) => stage("unwrap", io::load_mask(p))?,
        None => Grid::filled(w, h, true)?,
    };
    if mask.dims() != (w, h) {
        bail!(Error::DimensionMismatch {
            expected: (w, h),
            actual: mask.dims()
        }
        .in_stage("unwrap"));
    }
    // 16-bit codes reach 1.0 for phases just below a full cycle
    let wrapped = gray.data().iter().map(|&v| wrap_cycles(v)).collect();
    let phase = stage("unwrap", PhaseMap::new(w, h, wrapped, mask.into_vec()))?;
    let brightness = match stage("unwrap", io::load_gray(&a.brightness)) {
        Ok(b) => b,
        Err(_) => stage("unwrap", io::load_image(&a.brightness))?.brightness(),
    };
    let outcome = stage("unwrap", initial_unwrap(&phase, &brightness, &cfg.unwrap))?;
    let corrected = stage("correct", correct_phase(&outcome.phase, &cfg.unwrap))?;
    let values = corrected.values();
    stage("export", io::write_float_raster(w, h, &values, out.join("unwrapped.rf32")))?;
    stage("export", io::save_normalized(w, h, &values, out.join("unwrapped.png")))?;
    println!("{} pixels unwrapped in {} regions", corrected.valid_count(), outcome.region_count);
    Ok(())
}

fn cmd_reconstruct(cfg: &mut PipelineConfig, a: &ReconstructArgs, out: &Path) -> Result<()> {
    let kappa = a.kappa.unwrap_or(cfg.scene.kappa);
    let reference_depth = a.reference_depth.unwrap_or(cfg.scene.reference_depth);
    let rc = &mut cfg.reconstruct;
    rc.smooth_window = a.smooth.unwrap_or(rc.smooth_window);
    rc.threshold = a.threshold.unwrap_or(rc.threshold);
    rc.ply_stride = a.stride.unwrap_or(rc.ply_stride);
    create_out(out)?;
    let (w, h, values) = stage("depth", io::read_float_raster(&a.unwrapped))?;
    let unwrapped = stage("depth", UnwrappedPhaseMap::from_values(w, h, &values))?;
    let reference = match a.reference_phase {
        Some(v) => ReferencePhase::Uniform(v),
        None => stage("depth", ReferencePhase::from_pattern(&cfg.pattern))?,
    };
    let mut depth = stage("depth", phase_to_depth(&unwrapped, kappa, reference_depth, &reference))?;
    if let Some(path) = &a.capture {
        let capture = stage("depth", io::load_image(path))?;
        let gate = stage("depth", threshold_mask(&capture, cfg.reconstruct.threshold))?;
        depth = stage("depth", apply_mask(&depth, &gate))?;
    }
    let depth = stage("smooth", mean_smooth(&depth, cfg.reconstruct.smooth_window))?;
    stage("export", io::write_float_raster(w, h, depth.depths(), out.join("depth.rf32")))?;
    stage("export", io::save_normalized(w, h, depth.depths(), out.join("depth.png")))?;
    let points = stage("export", io::export_point_cloud(&depth, out.join("cloud.ply"), cfg.reconstruct.ply_stride))?;
    println!("{points} points written");
    Ok(())
}

fn cmd_pipeline(cfg: &mut PipelineConfig, a: &PipelineArgs, out: &Path) -> Result<()> {
    apply_simulate(cfg, &a.sim)?;
    let r = &mut cfg.recovery;
    r.balance_window = balance_window(a.balance_window, r.balance_window);
    r.bins = a.bins.unwrap_or(r.bins);
    r.samples = a.samples.unwrap_or(r.samples);
    r.adjust &= !a.no_adjust;
    r.compensate &= !a.no_compensate;
    if a.camera_model {
        cfg.crosstalk_source = CrosstalkSource::Model;
    }
    let u = &mut cfg.unwrap;
    u.intensity_threshold = a.unwrap_threshold.unwrap_or(u.intensity_threshold);
    u.correction_window = a.window.unwrap_or(u.correction_window);
    let rc = &mut cfg.reconstruct;
    rc.smooth_window = a.smooth.unwrap_or(rc.smooth_window);
    rc.ply_stride = a.stride.unwrap_or(rc.ply_stride);
    cfg.output_dir = Some(out.to_path_buf());
    let run = run_pipeline(cfg)?;
    write_text(&out.join("config.toml"), stage("export", cfg.to_toml())?)?;
    println!("{}", run.report.to_json());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli)?;
    let out = cli.out.as_path();
    match &cli.command {
        Command::Pattern(a) => cmd_pattern(&mut cfg, a, out),
        Command::Simulate(a) => cmd_simulate(&mut cfg, a, out),
        Command::Calibrate(a) => cmd_calibrate(&cfg, a, out),
        Command::Recover(a) => cmd_recover(&mut cfg, a, out),
        Command::Unwrap(a) => cmd_unwrap(&mut cfg, a, out),
        Command::Reconstruct(a) => cmd_reconstruct(&mut cfg, a, out),
        Command::Pipeline(a) => cmd_pipeline(&mut cfg, a, out),
        Command::Demo => {
            let summary = stage("demo", run_demo_figures(out))?;
            for f in &summary.files {
                println!("{}", f.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
