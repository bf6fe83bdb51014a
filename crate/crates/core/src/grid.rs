//! Raster types shared by every stage.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wraps a phase in cycles into `[0, 1)`.
#[inline]
pub fn wrap_cycles(x: f64) -> f64 {
    let f = x - x.floor();
    // x slightly below an integer can round up to exactly 1.0
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// Signed distance between two phases in cycles, folded into `[-0.5, 0.5)`.
#[inline]
pub fn wrapped_difference(a: f64, b: f64) -> f64 {
    wrap_cycles(a - b + 0.5) - 0.5
}

/// Stripe orientation of the projected pattern.
///
/// Horizontal stripes vary along `y`, so the phase changes slowly along `x`
/// (the low-gradient axis) and quickly along `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    #[default]
    Horizontal,
    Vertical,
}

impl std::str::FromStr for Orientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "horizontal" | "horizontal-stripes" | "h" => Ok(Orientation::Horizontal),
            "vertical" | "vertical-stripes" | "v" => Ok(Orientation::Vertical),
            other => Err(Error::invalid(format!("unknown orientation `{other}`"))),
        }
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::invalid(format!(
            "raster dimensions must be positive, got {width}x{height}"
        )));
    }
    Ok(())
}

fn check_len(width: usize, height: usize, len: usize) -> Result<()> {
    if len != width * height {
        return Err(Error::invalid(format!(
            "buffer of {len} elements does not match {width}x{height}"
        )));
    }
    Ok(())
}

/// A row-major single-plane raster.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

/// Per-pixel validity.
pub type Mask = Grid<bool>;
/// Per-pixel real value (brightness, for instance).
pub type Scalar = Grid<f64>;

impl<T: Clone> Grid<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Result<Self> {
        check_dims(width, height)?;
        Ok(Self {
            width,
            height,
            data: vec![value; width * height],
        })
    }
}

impl<T> Grid<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        check_dims(width, height)?;
        check_len(width, height, data.len())?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        check_dims(width, height)?;
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        self.data[y * self.width + x] = value;
    }
}

impl Mask {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    /// Pixelwise AND of two masks of equal size.
    pub fn and(&self, other: &Mask) -> Result<Mask> {
        ensure_same(self.dims(), other.dims())?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a && b).collect();
        Grid::from_vec(self.width, self.height, data)
    }
}

pub(crate) fn ensure_same(expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// Three-plane raster of linear intensities, nominally in `[0, 1]`.
///
/// Values outside the unit interval are representable; only operations that
/// document a clamp bring them back into range.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    planes: [Vec<f64>; 3],
}

impl RgbImage {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        Self::filled(width, height, [0.0; 3])
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Result<Self> {
        check_dims(width, height)?;
        let n = width * height;
        Ok(Self {
            width,
            height,
            planes: rgb.map(|v| vec![v; n]),
        })
    }

    pub fn from_planes(width: usize, height: usize, planes: [Vec<f64>; 3]) -> Result<Self> {
        check_dims(width, height)?;
        for p in &planes {
            check_len(width, height, p.len())?;
        }
        Ok(Self {
            width,
            height,
            planes,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Result<Self> {
        let mut img = Self::new(width, height)?;
        for y in 0..height {
            for x in 0..width {
                img.set_pixel(x, y, f(x, y));
            }
        }
        Ok(img)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn plane(&self, channel: usize) -> &[f64] {
        &self.planes[channel]
    }

    pub fn plane_mut(&mut self, channel: usize) -> &mut [f64] {
        &mut self.planes[channel]
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        self.at(y * self.width + x)
    }

    /// Pixel by row-major index.
    #[inline]
    pub fn at(&self, i: usize) -> [f64; 3] {
        [self.planes[0][i], self.planes[1][i], self.planes[2][i]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f64; 3]) {
        self.set_at(y * self.width + x, rgb);
    }

    #[inline]
    pub fn set_at(&mut self, i: usize, rgb: [f64; 3]) {
        for (plane, v) in self.planes.iter_mut().zip(rgb) {
            plane[i] = v;
        }
    }

    /// Applies `f` to every pixel, returning a new image.
    pub fn map(&self, mut f: impl FnMut([f64; 3]) -> [f64; 3]) -> RgbImage {
        let mut out = self.clone();
        for i in 0..self.len() {
            out.set_at(i, f(self.at(i)));
        }
        out
    }

    pub fn clamped(&self) -> RgbImage {
        self.map(|p| p.map(|v| v.clamp(0.0, 1.0)))
    }

    /// Channel mean `(C1 + C2 + C3) / 3` per pixel.
    pub fn brightness(&self) -> Scalar {
        let data = (0..self.len())
            .map(|i| {
                let [r, g, b] = self.at(i);
                (r + g + b) / 3.0
            })
            .collect();
        Grid::from_vec(self.width, self.height, data).expect("dimensions already validated")
    }
}

/// Wrapped phase in cycles with a validity mask.
///
/// Masked pixels hold [`PhaseMap::SENTINEL`].
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMap {
    width: usize,
    height: usize,
    phase: Vec<f64>,
    mask: Vec<bool>,
}

impl PhaseMap {
    pub const SENTINEL: f64 = f64::NAN;

    /// Builds a map from raw buffers. Valid phases must lie in `[0, 1)`;
    /// masked entries are overwritten with the sentinel.
    pub fn new(width: usize, height: usize, mut phase: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        check_dims(width, height)?;
        check_len(width, height, phase.len())?;
        check_len(width, height, mask.len())?;
        for (p, &m) in phase.iter_mut().zip(&mask) {
            if m {
                if !(0.0..1.0).contains(p) {
                    return Err(Error::invalid(format!("wrapped phase {p} outside [0, 1)")));
                }
            } else {
                *p = Self::SENTINEL;
            }
        }
        Ok(Self {
            width,
            height,
            phase,
            mask,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.phase.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phase.is_empty()
    }

    pub fn phases(&self) -> &[f64] {
        &self.phase
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    #[inline]
    pub fn get(&self, i: usize) -> Option<f64> {
        self.mask[i].then(|| self.phase[i])
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Returns a copy with pixels outside `mask` invalidated.
    pub fn restricted(&self, mask: &Mask) -> Result<PhaseMap> {
        ensure_same(self.dims(), mask.dims())?;
        let m: Vec<bool> = self.mask.iter().zip(mask.data()).map(|(&a, &b)| a && b).collect();
        PhaseMap::new(self.width, self.height, self.phase.clone(), m)
    }

    pub fn mask_grid(&self) -> Mask {
        Grid::from_vec(self.width, self.height, self.mask.clone()).expect("validated")
    }
}

/// Unwrapped phase in cycles, stored as wrapped phase plus an integer
/// period index so that `value = period + wrapped` with `wrapped` bit-exact.
#[derive(Debug, Clone, PartialEq)]
pub struct UnwrappedPhaseMap {
    width: usize,
    height: usize,
    wrapped: Vec<f64>,
    period: Vec<i64>,
    mask: Vec<bool>,
}

impl UnwrappedPhaseMap {
    pub fn new(width: usize, height: usize, wrapped: Vec<f64>, period: Vec<i64>, mask: Vec<bool>) -> Result<Self> {
        check_dims(width, height)?;
        check_len(width, height, wrapped.len())?;
        check_len(width, height, period.len())?;
        check_len(width, height, mask.len())?;
        Ok(Self {
            width,
            height,
            wrapped,
            period,
            mask,
        })
    }

    /// Splits real-valued phases into period index and wrapped part.
    /// Non-finite entries become masked.
    pub fn from_values(width: usize, height: usize, values: &[f64]) -> Result<Self> {
        check_dims(width, height)?;
        check_len(width, height, values.len())?;
        let mut wrapped = vec![0.0; values.len()];
        let mut period = vec![0; values.len()];
        let mut mask = vec![false; values.len()];
        for (i, &v) in values.iter().enumerate() {
            if v.is_finite() {
                let n = v.floor();
                wrapped[i] = wrap_cycles(v);
                // wrap_cycles folds 1.0 - ulp rounding back to zero
                period[i] = if v - n >= 1.0 { n as i64 + 1 } else { n as i64 };
                mask[i] = true;
            }
        }
        Self::new(width, height, wrapped, period, mask)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.wrapped.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wrapped.is_empty()
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn wrapped(&self) -> &[f64] {
        &self.wrapped
    }

    pub fn periods(&self) -> &[i64] {
        &self.period
    }

    pub(crate) fn periods_mut(&mut self) -> &mut [i64] {
        &mut self.period
    }

    #[inline]
    pub fn value(&self, i: usize) -> Option<f64> {
        self.mask[i].then(|| self.period[i] as f64 + self.wrapped[i])
    }

    /// Real-valued phases with NaN at masked pixels.
    pub fn values(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.value(i).unwrap_or(f64::NAN)).collect()
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Shifts every valid pixel by `k` whole cycles.
    pub fn offset_periods(&mut self, k: i64) {
        for (p, &m) in self.period.iter_mut().zip(&self.mask) {
            if m {
                *p += k;
            }
        }
    }
}

/// Per-pixel depth in scene units with a validity mask (NaN when masked).
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    depth: Vec<f64>,
    mask: Vec<bool>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, mut depth: Vec<f64>, mut mask: Vec<bool>) -> Result<Self> {
        check_dims(width, height)?;
        check_len(width, height, depth.len())?;
        check_len(width, height, mask.len())?;
        for (d, m) in depth.iter_mut().zip(mask.iter_mut()) {
            if !d.is_finite() {
                *m = false;
            }
            if !*m {
                *d = f64::NAN;
            }
        }
        Ok(Self {
            width,
            height,
            depth,
            mask,
        })
    }

    /// A fully valid map from a depth function.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let g = Grid::from_fn(width, height, &mut f)?;
        Self::new(width, height, g.into_vec(), vec![true; width * height])
    }

    /// Builds from values, treating non-finite entries as masked.
    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        let mask = values.iter().map(|v| v.is_finite()).collect();
        Self::new(width, height, values, mask)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.depth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depth.is_empty()
    }

    pub fn depths(&self) -> &[f64] {
        &self.depth
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    #[inline]
    pub fn get(&self, i: usize) -> Option<f64> {
        self.mask[i].then(|| self.depth[i])
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_stays_in_unit_interval() {
        assert_eq!(wrap_cycles(0.0), 0.0);
        assert_eq!(wrap_cycles(1.0), 0.0);
        assert_eq!(wrap_cycles(-0.25), 0.75);
        assert_eq!(wrap_cycles(3.5), 0.5);
        let tiny = wrap_cycles(-1e-18);
        assert!((0.0..1.0).contains(&tiny));
    }

    #[test]
    fn wrapped_difference_is_centered() {
        assert!((wrapped_difference(0.95, 0.05) + 0.1).abs() < 1e-12);
        assert!((wrapped_difference(0.05, 0.95) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn zero_sized_rasters_are_rejected() {
        assert!(RgbImage::new(0, 3).is_err());
        assert!(Grid::filled(3, 0, 1.0).is_err());
    }

    #[test]
    fn phase_map_rejects_out_of_range() {
        assert!(PhaseMap::new(1, 1, vec![1.0], vec![true]).is_err());
        let m = PhaseMap::new(2, 1, vec![1.5, 0.5], vec![false, true]).unwrap();
        assert!(m.phases()[0].is_nan());
        assert_eq!(m.get(1), Some(0.5));
    }

    #[test]
    fn unwrapped_split_is_exact() {
        let u = UnwrappedPhaseMap::from_values(3, 1, &[2.25, -0.75, f64::NAN]).unwrap();
        assert_eq!(u.periods()[..2], [2, -1]);
        assert_eq!(u.wrapped()[..2], [0.25, 0.25]);
        assert_eq!(u.value(2), None);
    }

    #[test]
    fn depth_map_masks_non_finite() {
        let d = DepthMap::from_values(2, 1, vec![1.0, f64::INFINITY]).unwrap();
        assert_eq!(d.valid_count(), 1);
    }
}
