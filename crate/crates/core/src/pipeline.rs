//! End-to-end simulation and reconstruction run.
//!
//! A run synthesizes the pattern, renders it onto a procedural scene through
//! the camera model, recovers and unwraps the phase, converts it to depth
//! and scores every stage against the simulator's ground truth.
//!
//! The report (`report.json`) depends only on the configuration and seed.
//! Wall-clock stage timings go to a separate `timings.json`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{wrap_cycles, DepthMap, Grid, PhaseMap, RgbImage, Scalar, UnwrappedPhaseMap};
use crate::io::{self, BitDepth};
use crate::metrics;
use crate::pattern::{synthesize_pattern, PatternSpec};
use crate::reconstruct::{apply_mask, mean_smooth, phase_to_depth, threshold_mask, ReferencePhase};
use crate::recovery::{estimate_crosstalk, recover, Crosstalk, PhaseAdjustment, RecoveryParams};
use crate::simulator::{
    add_salt_noise, apply_camera, calibration_captures, observed_phase, reflect, CameraModel, SceneSpec,
};
use crate::unwrap::{correct_phase, initial_unwrap, UnwrapConfig};

/// Where the compensation model comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrosstalkSource {
    /// Fit to simulated calibration ramps.
    #[default]
    Estimate,
    /// Use the camera model's own matrix and offset.
    Model,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconstructParams {
    /// Mean filter window (odd; 1 disables smoothing).
    pub smooth_window: usize,
    /// Brightness below which depth pixels are rejected.
    pub threshold: f64,
    pub ply_stride: usize,
}

impl Default for ReconstructParams {
    fn default() -> Self {
        Self {
            smooth_window: 3,
            threshold: 0.1,
            ply_stride: 1,
        }
    }
}

fn default_camera() -> CameraModel {
    CameraModel::distorted().with_noise(0.005).expect("valid sigma")
}

/// Everything needed for one reproducible run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Governs every random draw in the run.
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub pattern: PatternSpec,
    pub scene: SceneSpec,
    pub camera: CameraModel,
    /// Fraction of capture pixels replaced by white salt noise.
    pub salt_fraction: f64,
    pub crosstalk_source: CrosstalkSource,
    pub recovery: RecoveryParams,
    /// The orientation field is taken from the pattern.
    pub unwrap: UnwrapConfig,
    pub reconstruct: ReconstructParams,
}

impl Default for PipelineConfig {
    /// Full distortion preset (gamma 2.2, crosstalk, offset, sigma 0.005)
    /// with every compensation stage enabled.
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: None,
            pattern: PatternSpec::default(),
            scene: SceneSpec::default(),
            camera: default_camera(),
            salt_fraction: 0.0,
            crosstalk_source: CrosstalkSource::Estimate,
            recovery: RecoveryParams::default(),
            unwrap: UnwrapConfig::default(),
            reconstruct: ReconstructParams::default(),
        }
    }
}

impl PipelineConfig {
    /// Linear, noiseless camera with the preset mixing matrix. Only crosstalk
    /// compensation is needed, so balance, adjustment and smoothing are off.
    pub fn linear_noiseless() -> Self {
        Self {
            camera: CameraModel::linear(crate::simulator::PRESET_CROSSTALK, crate::simulator::PRESET_OFFSET),
            recovery: RecoveryParams {
                balance_window: None,
                adjust: false,
                ..RecoveryParams::default()
            },
            reconstruct: ReconstructParams {
                smooth_window: 1,
                ..ReconstructParams::default()
            },
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.pattern.validate()?;
        self.unwrap_config().validate()?;
        if let Some(w) = self.recovery.balance_window {
            if w < 3 || w % 2 == 0 {
                return Err(Error::invalid("balance window must be odd and >= 3"));
            }
        }
        if self.recovery.bins < 2 || self.recovery.samples == 0 {
            return Err(Error::invalid("adjustment needs >= 2 bins and a positive sample count"));
        }
        if !(0.0..=1.0).contains(&self.salt_fraction) {
            return Err(Error::invalid("salt fraction must lie in [0, 1]"));
        }
        let r = &self.reconstruct;
        if r.smooth_window % 2 == 0 || r.ply_stride == 0 || !(0.0..=1.0).contains(&r.threshold) {
            return Err(Error::invalid("reconstruct needs an odd window, positive stride and threshold in [0, 1]"));
        }
        if self.scene.kappa == 0.0 || !self.scene.kappa.is_finite() {
            return Err(Error::invalid("scene kappa must be finite and nonzero"));
        }
        Ok(())
    }

    fn unwrap_config(&self) -> UnwrapConfig {
        UnwrapConfig {
            orientation: self.pattern.orientation,
            ..self.unwrap
        }
    }
}

/// Metrics of one run. Field order is the serialized order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    pub cycles: f64,
    pub kappa: f64,
    pub valid_pixels: usize,
    pub regions: u32,
    pub rms_wrapped_phase_error: Option<f64>,
    pub max_wrapped_phase_error: Option<f64>,
    pub rms_wrapped_phase_error_unadjusted: Option<f64>,
    pub fraction_correct_period_initial: Option<f64>,
    pub fraction_correct_period: Option<f64>,
    pub rms_depth_error_unsmoothed: Option<f64>,
    pub rms_depth_error: Option<f64>,
    pub rms_depth_error_cycles: Option<f64>,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Wall-clock duration of each stage in milliseconds, in execution order.
pub type Timings = Vec<(&'static str, f64)>;

/// All intermediates of a run.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub report: Report,
    pub timings: Timings,
    pub pattern: RgbImage,
    pub capture: RgbImage,
    pub truth_phase: Vec<Option<f64>>,
    pub truth_depth: DepthMap,
    pub crosstalk: Option<Crosstalk>,
    pub raw_phase: PhaseMap,
    pub phase: PhaseMap,
    pub adjustment: Option<PhaseAdjustment>,
    pub brightness: Scalar,
    pub initial: UnwrappedPhaseMap,
    pub unwrapped: UnwrappedPhaseMap,
    pub depth: DepthMap,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

struct Clock {
    timings: Timings,
    last: Instant,
}

impl Clock {
    fn new() -> Self {
        Self {
            timings: Vec::new(),
            last: Instant::now(),
        }
    }

    fn lap(&mut self, stage: &'static str) {
        let now = Instant::now();
        self.timings.push((stage, (now - self.last).as_secs_f64() * 1e3));
        self.last = now;
    }
}

/// Runs every stage in memory.
pub fn simulate_and_reconstruct(cfg: &PipelineConfig) -> Result<PipelineRun> {
    cfg.validate()?;
    let spec = &cfg.pattern;
    let (w, h) = (spec.width, spec.height);
    let mut clock = Clock::new();

    let pattern = synthesize_pattern(spec).map_err(|e| e.in_stage("pattern"))?;
    clock.lap("pattern");

    let scene = cfg.scene.build(w, h).map_err(|e| e.in_stage("scene"))?;
    let reflected = reflect(spec, &scene).map_err(|e| e.in_stage("reflect"))?;
    let truth_phase = observed_phase(spec, &scene).map_err(|e| e.in_stage("reflect"))?;
    clock.lap("reflect");

    let camera = cfg.camera.clone().with_seed(cfg.seed);
    let mut capture = apply_camera(&reflected, &camera);
    if cfg.salt_fraction > 0.0 {
        capture = add_salt_noise(&capture, cfg.salt_fraction, cfg.seed ^ 0x5a17_5a17)
            .map_err(|e| e.in_stage("camera"))?;
    }
    clock.lap("camera");

    let crosstalk = if cfg.recovery.compensate {
        let model = match cfg.crosstalk_source {
            CrosstalkSource::Model => Crosstalk {
                matrix: camera.crosstalk_rows(),
                offset: camera.offset(),
            },
            CrosstalkSource::Estimate => {
                let cal_cam = camera.clone().with_seed(cfg.seed.wrapping_add(0x00ca_1b00));
                let caps = calibration_captures(&cal_cam, w, h).map_err(|e| e.in_stage("calibrate"))?;
                estimate_crosstalk(&caps).map_err(|e| e.in_stage("calibrate"))?
            }
        };
        Some(model)
    } else {
        None
    };
    clock.lap("calibrate");

    let recovered = recover(&capture, crosstalk.as_ref(), &cfg.recovery).map_err(|e| e.in_stage("recover"))?;
    clock.lap("recover");

    let ucfg = cfg.unwrap_config();
    let outcome = initial_unwrap(&recovered.phase, &recovered.brightness, &ucfg).map_err(|e| e.in_stage("unwrap"))?;
    clock.lap("unwrap");
    let corrected = correct_phase(&outcome.phase, &ucfg).map_err(|e| e.in_stage("correct"))?;
    clock.lap("correct");

    let reference = ReferencePhase::from_pattern(spec).map_err(|e| e.in_stage("depth"))?;
    let raw_depth = phase_to_depth(&corrected, scene.kappa(), scene.reference_depth(), &reference)
        .and_then(|d| apply_mask(&d, &threshold_mask(&capture, cfg.reconstruct.threshold)?))
        .map_err(|e| e.in_stage("depth"))?;
    let depth = mean_smooth(&raw_depth, cfg.reconstruct.smooth_window).map_err(|e| e.in_stage("smooth"))?;
    clock.lap("depth");

    let wrapped_truth: Vec<Option<f64>> = truth_phase.iter().map(|p| p.map(wrap_cycles)).collect();
    let final_err = metrics::wrapped_phase_error(&recovered.phase, &wrapped_truth);
    let raw_err = metrics::wrapped_phase_error(&recovered.raw, &wrapped_truth);
    let (initial_frac, _) = metrics::period_accuracy(&outcome.phase, &truth_phase);
    let (corrected_frac, _) = metrics::period_accuracy(&corrected, &truth_phase);
    let truth_depth = scene.depth().clone();
    let (raw_depth_rms, _) = metrics::aligned_depth_rms(&raw_depth, &truth_depth);
    let (depth_rms, _) = metrics::aligned_depth_rms(&depth, &truth_depth);

    let report = Report {
        width: w,
        height: h,
        seed: cfg.seed,
        cycles: spec.cycles,
        kappa: scene.kappa(),
        valid_pixels: depth.valid_count(),
        regions: outcome.region_count,
        rms_wrapped_phase_error: finite(final_err.rms),
        max_wrapped_phase_error: finite(final_err.max),
        rms_wrapped_phase_error_unadjusted: finite(raw_err.rms),
        fraction_correct_period_initial: finite(initial_frac),
        fraction_correct_period: finite(corrected_frac),
        rms_depth_error_unsmoothed: finite(raw_depth_rms),
        rms_depth_error: finite(depth_rms),
        rms_depth_error_cycles: finite(depth_rms * scene.kappa().abs()),
    };
    clock.lap("metrics");

    Ok(PipelineRun {
        report,
        timings: clock.timings,
        pattern,
        capture,
        truth_phase,
        truth_depth,
        crosstalk,
        raw_phase: recovered.raw,
        phase: recovered.phase,
        adjustment: recovered.adjustment,
        brightness: recovered.brightness,
        initial: outcome.phase,
        unwrapped: corrected,
        depth,
    })
}

fn phase_plane(p: &PhaseMap) -> Result<Scalar> {
    Grid::from_vec(p.width(), p.height(), p.phases().iter().map(|v| if v.is_nan() { 0.0 } else { *v }).collect())
}

/// Writes every intermediate of a run into `dir`; the point cloud keeps
/// every `ply_stride`-th pixel along each axis.
pub fn write_outputs(run: &PipelineRun, dir: impl AsRef<Path>, ply_stride: usize) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (w, h) = run.capture.dims();
    io::save_image(&run.pattern, dir.join("pattern.png"), BitDepth::Eight)?;
    io::save_image(&run.capture, dir.join("capture.png"), BitDepth::Sixteen)?;
    let truth_wrapped = Grid::from_vec(
        w,
        h,
        run.truth_phase.iter().map(|p| p.map(wrap_cycles).unwrap_or(0.0)).collect(),
    )?;
    io::save_gray(&truth_wrapped, dir.join("phase_truth.png"), BitDepth::Sixteen)?;
    io::save_gray(&phase_plane(&run.raw_phase)?, dir.join("wrapped_raw.png"), BitDepth::Sixteen)?;
    io::save_gray(&phase_plane(&run.phase)?, dir.join("wrapped.png"), BitDepth::Sixteen)?;
    io::save_mask(&run.phase.mask_grid(), dir.join("mask.png"))?;
    io::save_gray(&run.brightness, dir.join("brightness.png"), BitDepth::Sixteen)?;
    let unwrapped = run.unwrapped.values();
    io::write_float_raster(w, h, &unwrapped, dir.join("unwrapped.rf32"))?;
    io::save_normalized(w, h, &unwrapped, dir.join("unwrapped.png"))?;
    io::write_float_raster(w, h, run.depth.depths(), dir.join("depth.rf32"))?;
    io::write_float_raster(w, h, run.truth_depth.depths(), dir.join("depth_truth.rf32"))?;
    io::save_normalized(w, h, run.depth.depths(), dir.join("depth.png"))?;
    io::export_point_cloud(&run.depth, dir.join("cloud.ply"), ply_stride)?;
    let report_path = dir.join("report.json");
    std::fs::write(&report_path, run.report.to_json() + "\n").map_err(|e| Error::io(&report_path, e))?;
    let timings: serde_json::Map<String, serde_json::Value> = run
        .timings
        .iter()
        .map(|(k, v)| (format!("{k}_ms"), serde_json::json!(v)))
        .collect();
    let timings_path = dir.join("timings.json");
    std::fs::write(&timings_path, serde_json::to_string_pretty(&timings).expect("json") + "\n")
        .map_err(|e| Error::io(&timings_path, e))?;
    Ok(())
}

/// Runs the pipeline and, when the config names an output directory,
/// writes all rasters, the point cloud and the report there.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineRun> {
    let mut run = simulate_and_reconstruct(cfg)?;
    if let Some(dir) = &cfg.output_dir {
        let start = Instant::now();
        write_outputs(&run, dir, cfg.reconstruct.ply_stride).map_err(|e| e.in_stage("export"))?;
        run.timings.push(("export", start.elapsed().as_secs_f64() * 1e3));
    }
    Ok(run)
}
