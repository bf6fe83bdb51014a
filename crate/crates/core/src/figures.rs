//! Diagnostic plots rendered from synthetic data.
//!
//! Plots are drawn directly into rasters: one column per sample, value `v`
//! drawn at row `round((1 - v) * (PLOT_HEIGHT - 1))` in the channel's color.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Grid, RgbImage};
use crate::io::{self, BitDepth};
use crate::metrics::histogram;
use crate::pattern::{synthesize_pattern, PatternSpec};
use crate::recovery::{recover, Crosstalk, RecoveryParams};
use crate::simulator::{apply_camera, calibration_captures, reflect, CameraModel, SceneSpec};

pub const PLOT_HEIGHT: usize = 256;
pub const HISTOGRAM_BINS: usize = 64;
const BAR_WIDTH: usize = 4;
const HISTOGRAM_HEIGHT: usize = 128;

/// Row at which a unit-interval value is plotted.
#[inline]
pub fn plot_row(v: f64) -> usize {
    ((1.0 - v.clamp(0.0, 1.0)) * (PLOT_HEIGHT - 1) as f64).round() as usize
}

/// Inverse of [`plot_row`].
#[inline]
pub fn row_value(row: usize) -> f64 {
    1.0 - row as f64 / (PLOT_HEIGHT - 1) as f64
}

fn plot_curves(curves: &[[f64; 3]]) -> Result<RgbImage> {
    let mut img = RgbImage::new(curves.len(), PLOT_HEIGHT)?;
    for (x, values) in curves.iter().enumerate() {
        for (c, &v) in values.iter().enumerate() {
            img.plane_mut(c)[plot_row(v) * curves.len() + x] = 1.0;
        }
    }
    Ok(img)
}

fn plot_histograms(panels: &[&[usize]]) -> Result<RgbImage> {
    let bins = panels[0].len();
    let peak = panels.iter().flat_map(|p| p.iter()).copied().max().unwrap_or(1).max(1) as f64;
    let mut img = RgbImage::new(bins * BAR_WIDTH, panels.len() * HISTOGRAM_HEIGHT)?;
    for (k, counts) in panels.iter().enumerate() {
        let base = (k + 1) * HISTOGRAM_HEIGHT;
        for (b, &n) in counts.iter().enumerate() {
            let bar = ((n as f64 / peak) * (HISTOGRAM_HEIGHT - 2) as f64).round() as usize;
            for y in base - bar..base {
                for x in b * BAR_WIDTH..(b + 1) * BAR_WIDTH - 1 {
                    img.set_pixel(x, y, [0.9; 3]);
                }
            }
        }
    }
    Ok(img)
}

/// What [`run_demo_figures`] produced.
#[derive(Debug, Clone, Serialize)]
pub struct DemoSummary {
    pub files: Vec<PathBuf>,
    pub pattern: PatternSpec,
    /// Column of the pattern whose profile was plotted.
    pub profile_column: usize,
    pub histogram_raw: Vec<usize>,
    /// Histogram of the adjusted adjustment samples.
    pub histogram_adjusted: Vec<usize>,
    pub adjustment_samples: usize,
}

/// Writes the four diagnostic figures plus `figures.json` into `dir`:
/// channel profiles of the pattern, camera responses to single-channel
/// ramps, phase histograms before and after adjustment, and the wrapped
/// phase of a distorted capture as a gray image.
pub fn run_demo_figures(dir: impl AsRef<Path>) -> Result<DemoSummary> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let spec = PatternSpec::default();
    let mut files = Vec::new();

    let pattern = synthesize_pattern(&spec)?;
    let column = spec.width / 2;
    let profile: Vec<[f64; 3]> = (0..spec.height).map(|y| pattern.pixel(column, y)).collect();
    let path = dir.join("pattern_profiles.png");
    io::save_image(&plot_curves(&profile)?, &path, BitDepth::Eight)?;
    files.push(path);

    let camera = CameraModel::distorted();
    let ramps = calibration_captures(&camera, PLOT_HEIGHT, 1)?;
    let responses: Vec<[f64; 3]> = ramps
        .iter()
        .flat_map(|cap| (0..cap.width()).map(move |x| cap.pixel(x, 0)))
        .collect();
    let path = dir.join("response_curves.png");
    io::save_image(&plot_curves(&responses)?, &path, BitDepth::Eight)?;
    files.push(path);

    let scene = SceneSpec::default().build(spec.width, spec.height)?;
    let noisy = camera.clone().with_noise(0.005)?;
    let capture = apply_camera(&reflect(&spec, &scene)?, &noisy);
    let model = Crosstalk {
        matrix: camera.crosstalk_rows(),
        offset: camera.offset(),
    };
    let recovered = recover(&capture, Some(&model), &RecoveryParams::default())?;
    let adj = recovered.adjustment.as_ref().expect("adjustment enabled by default");
    let raw_hist = histogram(recovered.raw.phases().iter().copied().filter(|p| !p.is_nan()), HISTOGRAM_BINS);
    let adj_hist = histogram(adj.quantiles().iter().map(|&q| adj.map(q)), HISTOGRAM_BINS);
    let path = dir.join("phase_histograms.png");
    io::save_image(&plot_histograms(&[&raw_hist, &adj_hist])?, &path, BitDepth::Eight)?;
    files.push(path);

    let gray = Grid::from_vec(
        spec.width,
        spec.height,
        recovered.phase.phases().iter().map(|p| if p.is_nan() { 0.0 } else { *p }).collect(),
    )?;
    let path = dir.join("wrapped_phase.png");
    io::save_gray(&gray, &path, BitDepth::Eight)?;
    files.push(path);

    let summary = DemoSummary {
        files,
        pattern: spec,
        profile_column: column,
        histogram_raw: raw_hist,
        histogram_adjusted: adj_hist,
        adjustment_samples: adj.quantiles().len(),
    };
    let path = dir.join("figures.json");
    std::fs::write(&path, serde_json::to_string_pretty(&summary).expect("json") + "\n")
        .map_err(|e| Error::io(&path, e))?;
    Ok(summary)
}
