//! Three-phase color sinusoid synthesis.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{wrap_cycles, Orientation, PhaseMap, RgbImage};

/// Channel phase offsets in radians for R, G, B.
pub const CHANNEL_OFFSETS: [f64; 3] = [-TAU / 3.0, 0.0, TAU / 3.0];

/// Parameters of the projected sinusoid triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PatternSpec {
    pub width: usize,
    pub height: usize,
    /// Full periods across the image along the stripe-normal axis.
    pub cycles: f64,
    pub orientation: Orientation,
    /// Average intensity `a`.
    pub mean: f64,
    /// Intensity modulation `b`.
    pub modulation: f64,
}

impl Default for PatternSpec {
    /// 640x480 capture raster with 40 horizontal-stripe cycles, 12 rows each.
    fn default() -> Self {
        Self {
            width: 640,
            height: 480,
            cycles: 40.0,
            orientation: Orientation::Horizontal,
            mean: 0.5,
            modulation: 0.5,
        }
    }
}

impl PatternSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("pattern dimensions must be positive"));
        }
        if !(self.cycles >= 1.0) || !self.cycles.is_finite() {
            return Err(Error::invalid(format!("cycles must be >= 1, got {}", self.cycles)));
        }
        if !(self.modulation > 0.0) {
            return Err(Error::invalid("modulation must be positive"));
        }
        if self.mean - self.modulation < 0.0 || self.mean + self.modulation > 1.0 {
            return Err(Error::invalid(format!(
                "pattern range [{}, {}] leaves [0, 1]",
                self.mean - self.modulation,
                self.mean + self.modulation
            )));
        }
        Ok(())
    }

    /// Length in pixels of the axis the phase varies along.
    pub fn extent(&self) -> usize {
        match self.orientation {
            Orientation::Horizontal => self.height,
            Orientation::Vertical => self.width,
        }
    }

    /// Unwrapped pattern phase at a pixel, `cycles * coord / extent`.
    #[inline]
    pub fn unwrapped_phase_at(&self, x: usize, y: usize) -> f64 {
        let coord = match self.orientation {
            Orientation::Horizontal => y,
            Orientation::Vertical => x,
        };
        self.cycles * coord as f64 / self.extent() as f64
    }

    /// Phase step per pixel along the stripe-normal axis, in cycles.
    pub fn phase_step(&self) -> f64 {
        self.cycles / self.extent() as f64
    }

    /// The three channel intensities for a phase given in cycles.
    #[inline]
    pub fn intensities(&self, phase: f64) -> [f64; 3] {
        let theta = TAU * phase;
        CHANNEL_OFFSETS.map(|off| self.mean + self.modulation * (theta + off).cos())
    }
}

/// Ground-truth wrapped phase of the pattern; every pixel valid.
pub fn ideal_phase(spec: &PatternSpec) -> Result<PhaseMap> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mut phase = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            phase.push(wrap_cycles(spec.unwrapped_phase_at(x, y)));
        }
    }
    PhaseMap::new(w, h, phase, vec![true; w * h])
}

/// Renders the projected RGB pattern.
pub fn synthesize_pattern(spec: &PatternSpec) -> Result<RgbImage> {
    let phase = ideal_phase(spec)?;
    let mut img = RgbImage::new(spec.width, spec.height)?;
    for (i, &p) in phase.phases().iter().enumerate() {
        img.set_at(i, spec.intensities(p));
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> PatternSpec {
        PatternSpec::default()
    }

    #[test]
    fn ideal_phase_samples() {
        let p = ideal_phase(&spec()).unwrap();
        let w = spec().width;
        assert_eq!(p.get(0), Some(0.0));
        assert_eq!(p.get(6 * w), Some(0.5));
        assert_eq!(p.get(12 * w), Some(0.0));
        assert_eq!(p.get(12 * w + 17), Some(0.0));
    }

    #[test]
    fn vertical_orientation_varies_along_x() {
        let s = PatternSpec {
            orientation: Orientation::Vertical,
            width: 64,
            height: 8,
            cycles: 4.0,
            ..spec()
        };
        let p = ideal_phase(&s).unwrap();
        assert_eq!(p.get(8), Some(0.5));
        assert_eq!(p.get(64 + 8), Some(0.5));
    }

    #[test]
    fn phase_zero_gives_quarter_one_quarter() {
        let rgb = spec().intensities(0.0);
        for (got, want) in rgb.iter().zip([0.25, 1.0, 0.25]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn one_third_cycle_sample() {
        let s = PatternSpec {
            modulation: 0.4,
            ..spec()
        };
        let rgb = s.intensities(1.0 / 3.0);
        for (got, want) in rgb.iter().zip([0.9, 0.3, 0.3]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn validation() {
        assert!(PatternSpec { mean: 0.6, ..spec() }.validate().is_err());
        assert!(PatternSpec { modulation: 0.0, ..spec() }.validate().is_err());
        assert!(PatternSpec { cycles: 0.5, ..spec() }.validate().is_err());
        assert!(PatternSpec { cycles: f64::NAN, ..spec() }.validate().is_err());
        assert!(PatternSpec { cycles: 36.9, ..spec() }.validate().is_ok());
    }

    #[test]
    fn channel_sum_and_range() {
        let s = PatternSpec {
            width: 16,
            height: 100,
            cycles: 7.3,
            mean: 0.45,
            modulation: 0.3,
            ..spec()
        };
        let img = synthesize_pattern(&s).unwrap();
        for i in 0..img.len() {
            let [r, g, b] = img.at(i);
            assert!((r + g + b - 3.0 * s.mean).abs() < 1e-12);
            for v in [r, g, b] {
                assert!(v >= s.mean - s.modulation - 1e-12 && v <= s.mean + s.modulation + 1e-12);
            }
        }
    }
}
