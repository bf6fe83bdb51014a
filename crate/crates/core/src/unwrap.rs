//! Period-index recovery for multi-cycle fringe phase.
//!
//! [`initial_unwrap`] grows the solution best-first from a bright pixel near
//! the image center, assigning each pixel the period that brings it closest
//! to the neighbor it was reached from. [`correct_phase`] then sweeps a
//! window-mean filter over the result in a fixed center-out order, snapping
//! isolated period errors back onto their surroundings.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ensure_same, Grid, Orientation, PhaseMap, Scalar, UnwrappedPhaseMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UnwrapConfig {
    /// Pixels darker than this (channel mean) are left masked.
    pub intensity_threshold: f64,
    /// Side of the correction window; odd, at least 3.
    pub correction_window: usize,
    /// Stripe orientation; the phase changes slowest along the stripes.
    pub orientation: Orientation,
    /// How many extra seeds may be planted for disconnected regions.
    pub max_seed_restarts: usize,
}

impl Default for UnwrapConfig {
    fn default() -> Self {
        Self {
            intensity_threshold: 0.1,
            correction_window: 11,
            orientation: Orientation::Horizontal,
            max_seed_restarts: 100_000,
        }
    }
}

impl UnwrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.correction_window < 3 || self.correction_window % 2 == 0 {
            return Err(Error::invalid(format!(
                "correction window must be odd and >= 3, got {}",
                self.correction_window
            )));
        }
        if !(0.0..=1.0).contains(&self.intensity_threshold) {
            return Err(Error::invalid("intensity threshold must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Result of [`initial_unwrap`].
#[derive(Debug, Clone, PartialEq)]
pub struct UnwrapOutcome {
    pub phase: UnwrappedPhaseMap,
    /// Region label per pixel (0 = unassigned). Regions grown from
    /// different seeds carry independent global offsets.
    pub regions: Grid<u32>,
    pub region_count: u32,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    intensity: f64,
    along_stripes: bool,
    index: usize,
    from: usize,
    seq: u64,
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.intensity
            .total_cmp(&other.intensity)
            .then(self.along_stripes.cmp(&other.along_stripes))
            .then(other.index.cmp(&self.index))
            .then(other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

/// Middle third of an axis of length `n`, never empty.
fn middle_third(n: usize) -> (usize, usize) {
    let lo = n / 3;
    let hi = ((2 * n + 2) / 3).max(lo + 1).min(n);
    (lo, hi)
}

/// Brighter first, then lower row-major index.
fn brighter(intensity: &[f64], a: usize, b: usize) -> bool {
    match intensity[a].total_cmp(&intensity[b]) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => a < b,
    }
}

/// Best-first initial unwrapping. Seeds get period zero.
pub fn initial_unwrap(phase: &PhaseMap, intensity: &Scalar, cfg: &UnwrapConfig) -> Result<UnwrapOutcome> {
    initial_unwrap_with_seed_period(phase, intensity, cfg, 0)
}

/// [`initial_unwrap`] with every seed starting at period `seed_period`.
pub fn initial_unwrap_with_seed_period(
    phase: &PhaseMap,
    intensity: &Scalar,
    cfg: &UnwrapConfig,
    seed_period: i64,
) -> Result<UnwrapOutcome> {
    cfg.validate()?;
    ensure_same(phase.dims(), intensity.dims())?;
    let (w, h) = phase.dims();
    let n = w * h;
    let bright = intensity.data();
    let qualifies: Vec<bool> = (0..n)
        .map(|i| phase.mask()[i] && bright[i] >= cfg.intensity_threshold)
        .collect();
    if !qualifies.iter().any(|&q| q) {
        return Err(Error::NoValidPixels);
    }
    let wrapped: Vec<f64> = phase.phases().iter().map(|&p| if p.is_nan() { 0.0 } else { p }).collect();

    let (x0, x1) = middle_third(w);
    let (y0, y1) = middle_third(h);
    let mut first_seed: Option<usize> = None;
    for y in y0..y1 {
        for x in x0..x1 {
            let i = y * w + x;
            if qualifies[i] && first_seed.is_none_or(|s| brighter(bright, i, s)) {
                first_seed = Some(i);
            }
        }
    }

    // Restart seeds in priority order. When the frontier empties, every
    // qualifying neighbor of an assigned pixel has been assigned, so the
    // brightest remaining qualifying pixel is the next starting point.
    let mut by_brightness: Vec<usize> = (0..n).filter(|&i| qualifies[i]).collect();
    by_brightness.sort_by(|&a, &b| bright[b].total_cmp(&bright[a]).then(a.cmp(&b)));
    let mut next_restart = 0usize;

    let mut period = vec![0i64; n];
    let mut assigned = vec![false; n];
    let mut region = vec![0u32; n];
    let mut region_count = 0u32;
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    let mut restarts = 0usize;
    // with nothing usable near the center, start from the brightest pixel
    let mut seed = first_seed.or(Some(by_brightness[0]));

    let horizontal = cfg.orientation == Orientation::Horizontal;

    loop {
        let s = match seed.take() {
            Some(s) => s,
            None => {
                while next_restart < by_brightness.len() && assigned[by_brightness[next_restart]] {
                    next_restart += 1;
                }
                if next_restart == by_brightness.len() || restarts >= cfg.max_seed_restarts {
                    break;
                }
                restarts += 1;
                by_brightness[next_restart]
            }
        };
        region_count += 1;
        assigned[s] = true;
        region[s] = region_count;
        period[s] = seed_period;
        let mut current = s;
        loop {
            let (cx, cy) = (current % w, current / w);
            let neighbors = [
                (cx > 0).then(|| (current - 1, horizontal)),
                (cx + 1 < w).then(|| (current + 1, horizontal)),
                (cy > 0).then(|| (current - w, !horizontal)),
                (cy + 1 < h).then(|| (current + w, !horizontal)),
            ];
            for (nb, along) in neighbors.into_iter().flatten() {
                if qualifies[nb] && !assigned[nb] {
                    heap.push(Candidate {
                        intensity: bright[nb],
                        along_stripes: along,
                        index: nb,
                        from: current,
                        seq,
                    });
                    seq += 1;
                }
            }
            let next = loop {
                match heap.pop() {
                    Some(c) if assigned[c.index] => continue,
                    other => break other,
                }
            };
            let Some(c) = next else { break };
            let p = c.index;
            let q = c.from;
            period[p] = period[q] + (wrapped[q] - wrapped[p]).round() as i64;
            assigned[p] = true;
            region[p] = region_count;
            current = p;
        }
    }

    let mask = assigned;
    let out_wrapped = (0..n).map(|i| if mask[i] { wrapped[i] } else { f64::NAN }).collect();
    Ok(UnwrapOutcome {
        phase: UnwrappedPhaseMap::new(w, h, out_wrapped, period, mask)?,
        regions: Grid::from_vec(w, h, region)?,
        region_count,
    })
}

/// Pixel visiting order of the correction sweep: the center line along the
/// stripes first (toward lower coordinates, then higher), then the remaining
/// lines moving outward (lower side first), each line swept center-out.
pub fn sweep_order(width: usize, height: usize, orientation: Orientation) -> Vec<usize> {
    fn center_out(n: usize) -> impl Iterator<Item = usize> {
        let c = n / 2;
        std::iter::once(c).chain((0..c).rev()).chain(c + 1..n)
    }
    let mut order = Vec::with_capacity(width * height);
    match orientation {
        Orientation::Horizontal => {
            for y in center_out(height) {
                order.extend(center_out(width).map(|x| y * width + x));
            }
        }
        Orientation::Vertical => {
            for x in center_out(width) {
                order.extend(center_out(height).map(|y| y * width + x));
            }
        }
    }
    order
}

/// Window-mean period correction, applied in place along [`sweep_order`].
/// Each valid pixel moves by `round(mean(window) - value)` whole cycles,
/// where the window mean sees already-corrected values for visited pixels.
pub fn correct_phase(u: &UnwrappedPhaseMap, cfg: &UnwrapConfig) -> Result<UnwrappedPhaseMap> {
    cfg.validate()?;
    let (w, h) = u.dims();
    let half = cfg.correction_window / 2;
    let mut out = u.clone();
    let mask = u.mask().to_vec();
    let wrapped = u.wrapped().to_vec();
    for i in sweep_order(w, h, cfg.orientation) {
        if !mask[i] {
            continue;
        }
        let (x, y) = (i % w, i / w);
        let (xa, xb) = crate::recovery::window_bounds(x, half, w);
        let (ya, yb) = crate::recovery::window_bounds(y, half, h);
        let periods = out.periods();
        let (pi, wi) = (periods[i], wrapped[i]);
        let mut sum = 0.0;
        let mut count = 0usize;
        for yy in ya..yb {
            for j in yy * w + xa..yy * w + xb {
                if mask[j] {
                    sum += (periods[j] - pi) as f64 + (wrapped[j] - wi);
                    count += 1;
                }
            }
        }
        let shift = (sum / count as f64).round() as i64;
        if shift != 0 {
            out.periods_mut()[i] += shift;
        }
    }
    Ok(out)
}
