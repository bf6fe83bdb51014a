//! Color-phase recovery from a distorted capture.
//!
//! The chain is: undo channel mixing with the inverse of a 3x3 crosstalk
//! matrix, divide each channel by its local mean to cancel albedo, take the
//! three-phase arctangent, then remap phases through their empirical CDF so
//! that their distribution becomes uniform.

use std::f64::consts::TAU;

use nalgebra::{Matrix4, Matrix4x3, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ensure_same, wrap_cycles, Grid, Mask, PhaseMap, RgbImage, Scalar};
use crate::simulator::{condition_number, matrix_from_rows, ramp_value, MAX_CONDITION};

/// Ramp values used by [`estimate_crosstalk`]; outside this band the response
/// curve bends too much for an affine fit.
pub const FIT_RANGE: (f64, f64) = (0.2, 0.8);

/// Mean below which a channel is considered unlit during color balance.
pub const BALANCE_EPSILON: f64 = 1e-4;

/// Both arctangent arguments below this magnitude leave the phase undefined.
pub const DEGENERATE_EPSILON: f64 = 1e-9;

/// Affine camera model `C_camera = matrix * C_projector + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crosstalk {
    pub matrix: [[f64; 3]; 3],
    pub offset: [f64; 3],
}

impl Crosstalk {
    pub const IDENTITY: Crosstalk = Crosstalk {
        matrix: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        offset: [0.0; 3],
    };
}

/// Fits the affine channel-mixing model to three ramp captures produced by
/// [`crate::simulator::calibration_captures`].
pub fn estimate_crosstalk(captures: &[RgbImage; 3]) -> Result<Crosstalk> {
    let dims = captures[0].dims();
    for c in &captures[1..] {
        ensure_same(dims, c.dims())?;
    }
    let (w, h) = dims;
    let mut ata = Matrix4::<f64>::zeros();
    let mut atb = Matrix4x3::<f64>::zeros();
    let mut samples = 0usize;
    for (k, cap) in captures.iter().enumerate() {
        for x in 0..w {
            let v = ramp_value(x, w);
            if v < FIT_RANGE.0 || v > FIT_RANGE.1 {
                continue;
            }
            let mut d = Vector4::zeros();
            d[k] = v;
            d[3] = 1.0;
            let mut column = [0.0; 3];
            for y in 0..h {
                let p = cap.pixel(x, y);
                for c in 0..3 {
                    column[c] += p[c];
                }
            }
            ata += d * d.transpose() * h as f64;
            for c in 0..3 {
                for r in 0..4 {
                    atb[(r, c)] += d[r] * column[c];
                }
            }
            samples += h;
        }
    }
    let solution = ata
        .cholesky()
        .map(|ch| ch.solve(&atb))
        .ok_or_else(|| Error::Unfittable(format!("rank-deficient design from {samples} ramp samples")))?;
    // solution row k = projector channel k, column c = camera channel c
    let matrix: [[f64; 3]; 3] = std::array::from_fn(|c| std::array::from_fn(|k| solution[(k, c)]));
    let offset: [f64; 3] = std::array::from_fn(|c| solution[(3, c)]);
    let cond = condition_number(&matrix_from_rows(matrix));
    if !(cond <= MAX_CONDITION) {
        return Err(Error::Unfittable(format!(
            "fitted mixing matrix is ill-conditioned (condition number {cond:.3e})"
        )));
    }
    Ok(Crosstalk { matrix, offset })
}

/// Applies `M^-1 (C - offset)` to every pixel. No clamping.
pub fn compensate_crosstalk(image: &RgbImage, model: &Crosstalk) -> Result<RgbImage> {
    let m = matrix_from_rows(model.matrix);
    if !(condition_number(&m) <= MAX_CONDITION) {
        return Err(Error::Singular("crosstalk matrix is not invertible".into()));
    }
    let inv = m
        .try_inverse()
        .ok_or_else(|| Error::Singular("crosstalk matrix is not invertible".into()))?;
    let offset = Vector3::from(model.offset);
    Ok(image.map(|p| (inv * (Vector3::from(p) - offset)).into()))
}

/// Color-balanced image together with the pixels whose local means were usable.
#[derive(Debug, Clone, PartialEq)]
pub struct Balanced {
    pub image: RgbImage,
    pub mask: Mask,
}

/// Inclusive-exclusive summed-area table with one extra row and column.
struct SummedArea {
    stride: usize,
    sums: Vec<f64>,
}

impl SummedArea {
    fn new(values: &[f64], width: usize, height: usize) -> Self {
        let stride = width + 1;
        let mut sums = vec![0.0; stride * (height + 1)];
        for y in 0..height {
            let mut row = 0.0;
            for x in 0..width {
                row += values[y * width + x];
                sums[(y + 1) * stride + x + 1] = sums[y * stride + x + 1] + row;
            }
        }
        Self { stride, sums }
    }

    /// Sum over `[x0, x1) x [y0, y1)`.
    fn sum(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> f64 {
        let s = &self.sums;
        s[y1 * self.stride + x1] - s[y0 * self.stride + x1] - s[y1 * self.stride + x0] + s[y0 * self.stride + x0]
    }
}

pub(crate) fn window_bounds(center: usize, half: usize, len: usize) -> (usize, usize) {
    (center.saturating_sub(half), (center + half + 1).min(len))
}

/// Divides each channel by its mean over a `window x window` neighborhood,
/// truncated at the borders. Pixels where any channel mean is at most
/// [`BALANCE_EPSILON`] are masked and set to zero.
pub fn local_color_balance(image: &RgbImage, window: usize) -> Result<Balanced> {
    if window < 3 || window % 2 == 0 {
        return Err(Error::invalid(format!("balance window must be odd and >= 3, got {window}")));
    }
    let (w, h) = image.dims();
    let half = window / 2;
    let tables: Vec<SummedArea> = (0..3).map(|c| SummedArea::new(image.plane(c), w, h)).collect();
    let mut out = RgbImage::new(w, h)?;
    let mut mask = Grid::filled(w, h, true)?;
    for y in 0..h {
        let (y0, y1) = window_bounds(y, half, h);
        for x in 0..w {
            let (x0, x1) = window_bounds(x, half, w);
            let n = ((x1 - x0) * (y1 - y0)) as f64;
            let p = image.pixel(x, y);
            let mut q = [0.0; 3];
            let mut ok = true;
            for c in 0..3 {
                let mean = tables[c].sum(x0, y0, x1, y1) / n;
                if mean > BALANCE_EPSILON {
                    q[c] = p[c] / mean;
                } else {
                    ok = false;
                }
            }
            if ok {
                out.set_pixel(x, y, q);
            } else {
                mask.set(x, y, false);
            }
        }
    }
    Ok(Balanced { image: out, mask })
}

/// Three-phase arctangent of one pixel in cycles, or `None` when undefined.
#[inline]
pub fn pixel_phase([c1, c2, c3]: [f64; 3]) -> Option<f64> {
    let num = 3f64.sqrt() * (c1 - c3);
    let den = 2.0 * c2 - c1 - c3;
    if num.abs() < DEGENERATE_EPSILON && den.abs() < DEGENERATE_EPSILON {
        return None;
    }
    Some(wrap_cycles(num.atan2(den) / TAU))
}

/// Wrapped phase of every pixel.
pub fn wrapped_phase(image: &RgbImage) -> PhaseMap {
    let n = image.len();
    let mut phase = vec![PhaseMap::SENTINEL; n];
    let mut mask = vec![false; n];
    for i in 0..n {
        if let Some(p) = pixel_phase(image.at(i)) {
            phase[i] = p;
            mask[i] = true;
        }
    }
    PhaseMap::new(image.width(), image.height(), phase, mask).expect("phases are wrapped")
}

/// Empirical phase distribution used to equalize phases.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseAdjustment {
    quantiles: Vec<f64>,
    bins: usize,
    threshold: f64,
    boundaries: Vec<f64>,
}

impl PhaseAdjustment {
    /// Builds from already-collected phase samples.
    pub fn from_samples(mut samples: Vec<f64>, bins: usize, threshold: f64) -> Result<Self> {
        if bins < 2 {
            return Err(Error::invalid("adjustment needs at least two bins"));
        }
        if samples.len() < bins {
            return Err(Error::TooFewPixels {
                needed: bins,
                found: samples.len(),
            });
        }
        if samples.iter().any(|p| !(0.0..1.0).contains(p)) {
            return Err(Error::invalid("phase samples must lie in [0, 1)"));
        }
        samples.sort_by(f64::total_cmp);
        let m = samples.len();
        let mut boundaries = Vec::with_capacity(bins + 1);
        boundaries.push(0.0);
        for j in 1..bins {
            boundaries.push(samples[j * m / bins]);
        }
        boundaries.push(1.0);
        Ok(Self {
            quantiles: samples,
            bins,
            threshold,
            boundaries,
        })
    }

    pub fn quantiles(&self) -> &[f64] {
        &self.quantiles
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Bin edges `0 = b_0 <= b_1 <= ... <= b_N = 1`.
    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    /// Maps one phase through the piecewise-linear empirical CDF.
    pub fn map(&self, phase: f64) -> f64 {
        let b = &self.boundaries;
        // first bin whose upper edge is >= phase; ties go to the lower bin
        let j = b[1..self.bins].partition_point(|&edge| edge < phase);
        let (lo, hi) = (b[j], b[j + 1]);
        let t = if hi > lo { ((phase - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.0 };
        let out = (j as f64 + t) / self.bins as f64;
        out.min(1.0 - f64::EPSILON / 2.0)
    }
}

/// Collects phases of valid pixels whose brightness is at least `threshold`,
/// subsamples about `sample_target` of them evenly in row-major order, and
/// builds an adjustment with `bins` bins.
pub fn build_adjustment(
    phase: &PhaseMap,
    brightness: &Scalar,
    threshold: f64,
    bins: usize,
    sample_target: usize,
) -> Result<PhaseAdjustment> {
    ensure_same(phase.dims(), brightness.dims())?;
    if sample_target == 0 {
        return Err(Error::invalid("sample target must be positive"));
    }
    let qualifying: Vec<f64> = (0..phase.len())
        .filter(|&i| brightness.data()[i] >= threshold)
        .filter_map(|i| phase.get(i))
        .collect();
    let q = qualifying.len();
    let samples = if q > sample_target {
        (0..sample_target).map(|j| qualifying[j * q / sample_target]).collect()
    } else {
        qualifying
    };
    PhaseAdjustment::from_samples(samples, bins, threshold)
}

/// Remaps every valid phase through the adjustment.
pub fn apply_adjustment(phase: &PhaseMap, adj: &PhaseAdjustment) -> PhaseMap {
    let mapped = phase
        .phases()
        .iter()
        .zip(phase.mask())
        .map(|(&p, &m)| if m { adj.map(p) } else { PhaseMap::SENTINEL })
        .collect();
    PhaseMap::new(phase.width(), phase.height(), mapped, phase.mask().to_vec()).expect("adjusted phases stay wrapped")
}

/// Recovery stage parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecoveryParams {
    /// Undo channel mixing with the camera's crosstalk model.
    pub compensate: bool,
    /// Local color balance window (odd, >= 3); `None` disables balancing.
    pub balance_window: Option<usize>,
    /// Run color balance before crosstalk compensation instead of after.
    pub balance_first: bool,
    /// Equalize the phase distribution.
    pub adjust: bool,
    pub bins: usize,
    /// Minimum channel-mean brightness of pixels sampled for adjustment.
    pub threshold: f64,
    pub samples: usize,
    /// Mask pixels whose capture is clipped at full scale in every channel.
    pub reject_saturated: bool,
}

impl Default for RecoveryParams {
    fn default() -> Self {
        Self {
            compensate: true,
            balance_window: Some(13),
            balance_first: false,
            adjust: true,
            bins: 256,
            threshold: 0.1,
            samples: 10_000,
            reject_saturated: true,
        }
    }
}

/// Output of [`recover`].
#[derive(Debug, Clone)]
pub struct Recovered {
    /// Phase straight from the arctangent, before adjustment.
    pub raw: PhaseMap,
    /// Final wrapped phase (adjusted when enabled).
    pub phase: PhaseMap,
    /// Channel-mean brightness of the capture.
    pub brightness: Scalar,
    pub adjustment: Option<PhaseAdjustment>,
}

/// Pixels with at least one channel below full scale. A pixel clipped in
/// all three channels carries no fringe information.
pub fn unsaturated(capture: &RgbImage) -> Result<Mask> {
    let (w, h) = capture.dims();
    Grid::from_vec(w, h, (0..w * h).map(|i| capture.at(i).iter().any(|&v| v < 1.0)).collect())
}

/// Runs the recovery chain on a capture.
pub fn recover(capture: &RgbImage, crosstalk: Option<&Crosstalk>, params: &RecoveryParams) -> Result<Recovered> {
    let brightness = capture.brightness();
    let compensate = |img: &RgbImage| -> Result<RgbImage> {
        match (params.compensate, crosstalk) {
            (true, Some(model)) => compensate_crosstalk(img, model),
            _ => Ok(img.clone()),
        }
    };
    let balance = |img: &RgbImage| -> Result<(RgbImage, Option<Mask>)> {
        match params.balance_window {
            Some(win) => {
                let b = local_color_balance(img, win)?;
                Ok((b.image, Some(b.mask)))
            }
            None => Ok((img.clone(), None)),
        }
    };
    let (image, balance_mask) = if params.balance_first {
        let (b, m) = balance(capture)?;
        (compensate(&b)?, m)
    } else {
        balance(&compensate(capture)?)?
    };
    let mut raw = wrapped_phase(&image);
    if let Some(m) = balance_mask {
        raw = raw.restricted(&m)?;
    }
    if params.reject_saturated {
        raw = raw.restricted(&unsaturated(capture)?)?;
    }
    let (phase, adjustment) = if params.adjust {
        let adj = build_adjustment(&raw, &brightness, params.threshold, params.bins, params.samples)?;
        (apply_adjustment(&raw, &adj), Some(adj))
    } else {
        (raw.clone(), None)
    };
    Ok(Recovered {
        raw,
        phase,
        brightness,
        adjustment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::{synthesize_pattern, PatternSpec};
    use crate::simulator::{apply_camera, calibration_captures, CameraModel, PRESET_CROSSTALK, PRESET_OFFSET};

    fn max_abs_diff(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> f64 {
        a.iter()
            .flatten()
            .zip(b.iter().flatten())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn clipped_white_pixels_are_rejected() {
        let spec = PatternSpec {
            width: 12,
            height: 24,
            cycles: 2.0,
            ..PatternSpec::default()
        };
        let mut capture = synthesize_pattern(&spec).unwrap();
        capture.set_pixel(3, 5, [1.0; 3]);
        assert_eq!(unsaturated(&capture).unwrap().count(), 12 * 24 - 1);
        let params = RecoveryParams {
            balance_window: None,
            adjust: false,
            ..RecoveryParams::default()
        };
        let r = recover(&capture, None, &params).unwrap();
        assert_eq!(r.phase.get(5 * 12 + 3), None);
        assert_eq!(r.phase.valid_count(), 12 * 24 - 1);
    }

    #[test]
    fn identity_camera_fits_identity() {
        let caps = calibration_captures(&CameraModel::identity(), 64, 8).unwrap();
        let fit = estimate_crosstalk(&caps).unwrap();
        assert!(max_abs_diff(&fit.matrix, &Crosstalk::IDENTITY.matrix) < 1e-9);
        assert!(fit.offset.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn preset_matrix_is_recovered_from_linear_captures() {
        let cam = CameraModel::linear(PRESET_CROSSTALK, PRESET_OFFSET);
        let fit = estimate_crosstalk(&calibration_captures(&cam, 101, 4).unwrap()).unwrap();
        assert!(max_abs_diff(&fit.matrix, &PRESET_CROSSTALK) < 1e-9);
        for c in 0..3 {
            assert!((fit.offset[c] - PRESET_OFFSET[c]).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_captures_are_unfittable() {
        let flat = RgbImage::filled(32, 4, [0.3; 3]).unwrap();
        let caps = [flat.clone(), flat.clone(), flat];
        assert!(matches!(estimate_crosstalk(&caps), Err(Error::Unfittable(_))));
    }

    #[test]
    fn too_narrow_captures_are_unfittable() {
        let caps = calibration_captures(&CameraModel::identity(), 2, 4).unwrap();
        assert!(matches!(estimate_crosstalk(&caps), Err(Error::Unfittable(_))));
    }

    #[test]
    fn compensation_inverts_scalar_gain() {
        let model = Crosstalk {
            matrix: [[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 2.0]],
            offset: [0.0; 3],
        };
        let out = compensate_crosstalk(&RgbImage::filled(2, 2, [0.5; 3]).unwrap(), &model).unwrap();
        assert!(out.plane(2).iter().all(|&v| (v - 0.25).abs() < 1e-15));
        let img = RgbImage::filled(2, 2, [0.1, 0.2, 0.3]).unwrap();
        assert_eq!(compensate_crosstalk(&img, &Crosstalk::IDENTITY).unwrap(), img);
    }

    #[test]
    fn singular_compensation_is_an_error() {
        let model = Crosstalk {
            matrix: [[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            offset: [0.0; 3],
        };
        let img = RgbImage::filled(2, 2, [0.5; 3]).unwrap();
        assert!(matches!(compensate_crosstalk(&img, &model), Err(Error::Singular(_))));
    }

    #[test]
    fn compensation_undoes_a_linear_camera() {
        let spec = PatternSpec {
            width: 32,
            height: 48,
            cycles: 4.0,
            ..PatternSpec::default()
        };
        let img = synthesize_pattern(&spec).unwrap();
        let cam = CameraModel::linear(PRESET_CROSSTALK, PRESET_OFFSET);
        let model = Crosstalk {
            matrix: PRESET_CROSSTALK,
            offset: PRESET_OFFSET,
        };
        let back = compensate_crosstalk(&apply_camera(&img, &cam), &model).unwrap();
        for i in 0..img.len() {
            for c in 0..3 {
                assert!((back.at(i)[c] - img.at(i)[c]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn balance_of_constant_is_one() {
        let b = local_color_balance(&RgbImage::filled(9, 7, [0.4, 0.2, 0.9]).unwrap(), 3).unwrap();
        assert_eq!(b.mask.count(), 63);
        for c in 0..3 {
            assert!(b.image.plane(c).iter().all(|&v| (v - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn balance_masks_dark_windows() {
        let mut img = RgbImage::filled(9, 9, [0.5; 3]).unwrap();
        for y in 0..4 {
            for x in 0..4 {
                img.set_pixel(x, y, [0.0; 3]);
            }
        }
        let b = local_color_balance(&img, 3).unwrap();
        assert!(!*b.mask.get(0, 0));
        assert!(!*b.mask.get(2, 2));
        assert!(*b.mask.get(4, 4));
        assert!(*b.mask.get(8, 8));
    }

    #[test]
    fn balance_window_must_be_odd() {
        let img = RgbImage::filled(5, 5, [0.5; 3]).unwrap();
        assert!(local_color_balance(&img, 4).is_err());
        assert!(local_color_balance(&img, 1).is_err());
    }

    #[test]
    fn balance_cancels_channel_albedo_over_one_cycle() {
        // 13-row cycle so that an odd window spans exactly one period
        let spec = PatternSpec {
            width: 40,
            height: 130,
            cycles: 10.0,
            ..PatternSpec::default()
        };
        let pattern = synthesize_pattern(&spec).unwrap();
        let tinted = pattern.map(|p| [0.9 * p[0], 0.6 * p[1], 0.3 * p[2]]);
        let b = local_color_balance(&tinted, 13).unwrap();
        let got = wrapped_phase(&b.image);
        let want = wrapped_phase(&pattern);
        // interior rows, where the window is not truncated
        for y in 6..spec.height - 6 {
            for x in 0..spec.width {
                let i = y * spec.width + x;
                let d = crate::grid::wrapped_difference(got.get(i).unwrap(), want.get(i).unwrap());
                assert!(d.abs() < 1e-3, "row {y}: {d}");
            }
        }
    }

    #[test]
    fn phase_of_reference_triples() {
        assert_eq!(pixel_phase([0.25, 1.0, 0.25]), Some(0.0));
        let p = pixel_phase([0.9, 0.3, 0.3]).unwrap();
        assert!((p - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(pixel_phase([0.7, 0.7, 0.7]), None);
    }

    #[test]
    fn adjustment_sorts_samples() {
        let adj = PhaseAdjustment::from_samples(vec![0.9, 0.0, 0.2, 0.1], 4, 0.0).unwrap();
        assert_eq!(adj.quantiles(), &[0.0, 0.1, 0.2, 0.9]);
    }

    #[test]
    fn adjustment_needs_enough_pixels() {
        let phase = PhaseMap::new(4, 1, vec![0.1, 0.2, 0.3, 0.4], vec![true; 4]).unwrap();
        let dark = Grid::filled(4, 1, 0.05).unwrap();
        assert!(matches!(
            build_adjustment(&phase, &dark, 0.1, 2, 100),
            Err(Error::TooFewPixels { found: 0, .. })
        ));
    }

    #[test]
    fn ramp_quantiles_are_near_uniform() {
        let m = 1000;
        let phase = PhaseMap::new(m, 1, (0..m).map(|i| i as f64 / m as f64).collect(), vec![true; m]).unwrap();
        let bright = Grid::filled(m, 1, 1.0).unwrap();
        let adj = build_adjustment(&phase, &bright, 0.5, 10, 10_000).unwrap();
        for (i, q) in adj.quantiles().iter().enumerate() {
            assert!((q - i as f64 / m as f64).abs() <= 1.0 / m as f64);
        }
    }

    #[test]
    fn subsampling_hits_the_target() {
        let n = 10_007;
        let phase = PhaseMap::new(n, 1, (0..n).map(|i| (i % 97) as f64 / 97.0).collect(), vec![true; n]).unwrap();
        let bright = Grid::filled(n, 1, 1.0).unwrap();
        assert_eq!(build_adjustment(&phase, &bright, 0.0, 8, 500).unwrap().quantiles().len(), 500);
    }

    #[test]
    fn uniform_phases_are_nearly_unchanged() {
        let n = 64;
        let m = 4096;
        let samples: Vec<f64> = (0..m).map(|i| (i as f64 + 0.5) / m as f64).collect();
        let adj = PhaseAdjustment::from_samples(samples, n, 0.0).unwrap();
        for k in 0..1000 {
            let p = k as f64 / 1000.0;
            assert!((adj.map(p) - p).abs() <= 1.0 / n as f64);
        }
    }

    #[test]
    fn compressed_median_maps_to_one_half() {
        let n = 32;
        let m = 2001;
        // gamma-compressed ramp: all samples land in [0, 0.5]
        let samples: Vec<f64> = (0..m).map(|i| 0.5 * (i as f64 / m as f64).powf(2.2)).collect();
        let mut sorted = samples.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[m / 2];
        let adj = PhaseAdjustment::from_samples(samples, n, 0.0).unwrap();
        assert!((adj.map(median) - 0.5).abs() <= 1.0 / n as f64);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn wrapped_phase_is_affine_invariant(
                phi in 0.0f64..1.0,
                a in 0.2f64..0.8,
                alpha in 0.01f64..10.0,
                beta in -1.0f64..1.0,
            ) {
                let spec = PatternSpec { mean: a, modulation: 0.2, ..PatternSpec::default() };
                let c = spec.intensities(phi);
                let p0 = pixel_phase(c).unwrap();
                let p1 = pixel_phase(c.map(|v| alpha * v + beta)).unwrap();
                prop_assert!(crate::grid::wrapped_difference(p0, p1).abs() < 1e-12);
            }

            #[test]
            fn adjustment_is_monotone_and_fills_bins(
                mut samples in prop::collection::vec(0.0f64..1.0, 64..400),
                bins in 2usize..32,
                probes in prop::collection::vec(0.0f64..1.0, 2..50),
            ) {
                samples.dedup();
                prop_assume!(samples.len() >= bins);
                let adj = PhaseAdjustment::from_samples(samples.clone(), bins, 0.0).unwrap();
                let mut probes = probes;
                probes.sort_by(f64::total_cmp);
                for w in probes.windows(2) {
                    prop_assert!(adj.map(w[0]) <= adj.map(w[1]));
                }
                for &p in &probes {
                    let out = adj.map(p);
                    prop_assert!((0.0..1.0).contains(&out));
                }
                let mut sorted = samples.clone();
                sorted.sort_by(f64::total_cmp);
                sorted.dedup();
                prop_assume!(sorted.len() == samples.len());
                let mut counts = vec![0usize; bins];
                for &s in &samples {
                    counts[((adj.map(s) * bins as f64 + 1e-9) as usize).min(bins - 1)] += 1;
                }
                let expect = samples.len() as f64 / bins as f64;
                for c in counts {
                    prop_assert!((c as f64 - expect).abs() <= 1.0, "count {} vs {}", c, expect);
                }
            }
        }
    }
}
