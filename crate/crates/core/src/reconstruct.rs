//! Unwrapped phase to depth, smoothing and reliability masking.

use crate::error::{Error, Result};
use crate::grid::{ensure_same, DepthMap, Grid, Mask, RgbImage, UnwrappedPhaseMap};
use crate::pattern::PatternSpec;
use crate::recovery::window_bounds;

/// Brightness gate: a pixel is kept when its channel mean is at least `tau`.
pub fn threshold_mask(image: &RgbImage, tau: f64) -> Result<Mask> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::invalid(format!("threshold must lie in [0, 1], got {tau}")));
    }
    let b = image.brightness();
    Grid::from_vec(b.width(), b.height(), b.data().iter().map(|&v| v >= tau).collect())
}

/// Phase observed on the reference plane.
#[derive(Debug, Clone, PartialEq)]
pub enum ReferencePhase {
    Uniform(f64),
    /// Per-pixel unwrapped reference phase, NaN where unknown.
    Map(Grid<f64>),
}

impl ReferencePhase {
    /// Unwrapped phase of the undisturbed pattern at every pixel.
    pub fn from_pattern(spec: &PatternSpec) -> Result<Self> {
        spec.validate()?;
        Ok(ReferencePhase::Map(Grid::from_fn(spec.width, spec.height, |x, y| {
            spec.unwrapped_phase_at(x, y)
        })?))
    }

    #[inline]
    fn at(&self, i: usize) -> f64 {
        match self {
            ReferencePhase::Uniform(v) => *v,
            ReferencePhase::Map(g) => g.data()[i],
        }
    }
}

/// `z = reference_depth + (phase - reference_phase) / kappa` per valid pixel.
pub fn phase_to_depth(
    u: &UnwrappedPhaseMap,
    kappa: f64,
    reference_depth: f64,
    reference_phase: &ReferencePhase,
) -> Result<DepthMap> {
    if kappa == 0.0 || !kappa.is_finite() {
        return Err(Error::invalid("kappa must be finite and nonzero"));
    }
    if let ReferencePhase::Map(g) = reference_phase {
        ensure_same(u.dims(), g.dims())?;
    }
    let (w, h) = u.dims();
    let mut depth = vec![f64::NAN; w * h];
    let mut mask = vec![false; w * h];
    for i in 0..w * h {
        if u.mask()[i] {
            // period and reference are subtracted first to keep precision
            let r = reference_phase.at(i);
            let rel = (u.periods()[i] as f64 - r.floor()) + (u.wrapped()[i] - (r - r.floor()));
            depth[i] = reference_depth + rel / kappa;
            mask[i] = true;
        }
    }
    DepthMap::new(w, h, depth, mask)
}

/// Mean of the valid depths inside a `window x window` neighborhood,
/// truncated at borders and masks. Masked pixels stay masked.
pub fn mean_smooth(depth: &DepthMap, window: usize) -> Result<DepthMap> {
    if window == 0 || window % 2 == 0 {
        return Err(Error::invalid(format!("smoothing window must be odd, got {window}")));
    }
    if window == 1 {
        return Ok(depth.clone());
    }
    let (w, h) = depth.dims();
    let half = window / 2;
    let mut out = vec![f64::NAN; w * h];
    for y in 0..h {
        let (y0, y1) = window_bounds(y, half, h);
        for x in 0..w {
            let i = y * w + x;
            if !depth.mask()[i] {
                continue;
            }
            let (x0, x1) = window_bounds(x, half, w);
            let mut sum = 0.0;
            let mut n = 0usize;
            for yy in y0..y1 {
                for j in yy * w + x0..yy * w + x1 {
                    if let Some(z) = depth.get(j) {
                        sum += z;
                        n += 1;
                    }
                }
            }
            out[i] = sum / n as f64;
        }
    }
    DepthMap::new(w, h, out, depth.mask().to_vec())
}

/// Invalidates depth pixels outside `mask`.
pub fn apply_mask(depth: &DepthMap, mask: &Mask) -> Result<DepthMap> {
    ensure_same(depth.dims(), mask.dims())?;
    let m: Vec<bool> = depth.mask().iter().zip(mask.data()).map(|(&a, &b)| a && b).collect();
    DepthMap::new(depth.width(), depth.height(), depth.depths().to_vec(), m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::synthesize_pattern;

    #[test]
    fn threshold_extremes() {
        let img = RgbImage::from_fn(4, 1, |x, _| [x as f64 / 3.0; 3]).unwrap();
        assert_eq!(threshold_mask(&img, 0.0).unwrap().count(), 4);
        assert_eq!(threshold_mask(&img, 1.0).unwrap().count(), 1);
        assert!(threshold_mask(&img, 1.01).is_err());
    }

    #[test]
    fn pattern_mean_clears_threshold() {
        let img = synthesize_pattern(&PatternSpec::default()).unwrap();
        assert_eq!(threshold_mask(&img, 0.4).unwrap().count(), img.len());
    }

    #[test]
    fn depth_from_phase() {
        let u = UnwrappedPhaseMap::from_values(2, 1, &[3.0, 4.0]).unwrap();
        let d = phase_to_depth(&u, 0.5, 10.0, &ReferencePhase::Uniform(3.0)).unwrap();
        assert_eq!(d.depths(), &[10.0, 12.0]);
        assert!(phase_to_depth(&u, 0.0, 0.0, &ReferencePhase::Uniform(0.0)).is_err());
    }

    #[test]
    fn reference_map_is_subtracted() {
        let spec = PatternSpec {
            width: 3,
            height: 12,
            cycles: 2.0,
            ..PatternSpec::default()
        };
        let reference = ReferencePhase::from_pattern(&spec).unwrap();
        let values: Vec<f64> = (0..36).map(|i| (i / 3) as f64 / 6.0 + 0.25).collect();
        let u = UnwrappedPhaseMap::from_values(3, 12, &values).unwrap();
        let d = phase_to_depth(&u, 0.25, 1.0, &reference).unwrap();
        assert!(d.depths().iter().all(|&z| (z - 2.0).abs() < 1e-12));
    }

    #[test]
    fn smoothing_examples() {
        let d = DepthMap::from_values(5, 1, vec![0.0, 0.0, 3.0, 0.0, 0.0]).unwrap();
        let s = mean_smooth(&d, 3).unwrap();
        let want = [0.0, 1.0, 1.0, 1.0, 0.0];
        for (a, b) in s.depths().iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(mean_smooth(&d, 1).unwrap(), d);
        assert!(mean_smooth(&d, 2).is_err());
        let flat = DepthMap::from_fn(6, 6, |_, _| 4.5).unwrap();
        assert_eq!(mean_smooth(&flat, 5).unwrap(), flat);
    }

    #[test]
    fn smoothing_skips_masked_neighbors() {
        let d = DepthMap::from_values(3, 1, vec![1.0, f64::NAN, 5.0]).unwrap();
        let s = mean_smooth(&d, 3).unwrap();
        assert_eq!(s.get(0), Some(1.0));
        assert_eq!(s.get(1), None);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn smoothing_preserves_affine_interiors(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -50.0f64..50.0) {
                let (w, h) = (12, 9);
                let d = DepthMap::from_fn(w, h, |x, y| a * x as f64 + b * y as f64 + c).unwrap();
                let s = mean_smooth(&d, 3).unwrap();
                let mut before = 0.0;
                let mut after = 0.0;
                for y in 1..h - 1 {
                    for x in 1..w - 1 {
                        let i = y * w + x;
                        prop_assert!((s.depths()[i] - d.depths()[i]).abs() < 1e-12);
                        before += d.depths()[i];
                        after += s.depths()[i];
                    }
                }
                prop_assert!((before - after).abs() / 70.0 < 1e-12);
            }

            #[test]
            fn threshold_is_monotone(vals in prop::collection::vec(0.0f64..1.0, 12), t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
                let img = RgbImage::from_fn(4, 3, |x, y| [vals[y * 4 + x]; 3]).unwrap();
                let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
                let a = threshold_mask(&img, lo).unwrap();
                let b = threshold_mask(&img, hi).unwrap();
                for i in 0..12 {
                    prop_assert!(!b.data()[i] || a.data()[i]);
                }
            }
        }
    }
}
