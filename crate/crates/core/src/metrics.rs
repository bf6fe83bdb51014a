//! Error measures against simulator ground truth.
//!
//! Every measure discounts one global offset: unwrapping fixes the period
//! index only up to a constant, and phase adjustment may rotate the phase.

use std::f64::consts::TAU;

use crate::grid::{wrapped_difference, DepthMap, PhaseMap, UnwrappedPhaseMap};

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mid = v.len() / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    Some(*m)
}

/// Wrapped-phase error after removing the circular-mean offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseError {
    /// RMS in cycles.
    pub rms: f64,
    /// Maximum absolute error in cycles.
    pub max: f64,
    /// Removed offset in cycles.
    pub offset: f64,
    pub count: usize,
}

/// Compares wrapped phases with truth (`None` = no ground truth).
pub fn wrapped_phase_error(estimate: &PhaseMap, truth: &[Option<f64>]) -> PhaseError {
    wrapped_phase_error_with(estimate, truth, true)
}

/// Like [`wrapped_phase_error`] without offset removal.
pub fn wrapped_phase_error_raw(estimate: &PhaseMap, truth: &[Option<f64>]) -> PhaseError {
    wrapped_phase_error_with(estimate, truth, false)
}

fn wrapped_phase_error_with(estimate: &PhaseMap, truth: &[Option<f64>], align: bool) -> PhaseError {
    let diffs: Vec<f64> = (0..estimate.len())
        .filter_map(|i| Some(wrapped_difference(estimate.get(i)?, truth[i]?)))
        .collect();
    let offset = if align && !diffs.is_empty() {
        let (s, c) = diffs
            .iter()
            .fold((0.0, 0.0), |(s, c), d| (s + (TAU * d).sin(), c + (TAU * d).cos()));
        s.atan2(c) / TAU
    } else {
        0.0
    };
    let mut sq = 0.0;
    let mut max = 0.0f64;
    for d in &diffs {
        let e = wrapped_difference(*d, offset);
        sq += e * e;
        max = max.max(e.abs());
    }
    PhaseError {
        rms: if diffs.is_empty() { f64::NAN } else { (sq / diffs.len() as f64).sqrt() },
        max,
        offset,
        count: diffs.len(),
    }
}

/// Fraction of valid pixels whose unwrapped phase sits within half a cycle
/// of the truth after removing the median offset, i.e. whose period index
/// is right up to one global integer.
pub fn period_accuracy(u: &UnwrappedPhaseMap, truth: &[Option<f64>]) -> (f64, usize) {
    let diffs: Vec<f64> = (0..u.len()).filter_map(|i| Some(u.value(i)? - truth[i]?)).collect();
    let Some(m) = median(diffs.clone()) else {
        return (f64::NAN, 0);
    };
    let good = diffs.iter().filter(|d| (*d - m).abs() < 0.5).count();
    (good as f64 / diffs.len() as f64, diffs.len())
}

/// RMS depth error after median offset alignment.
pub fn aligned_depth_rms(depth: &DepthMap, truth: &DepthMap) -> (f64, usize) {
    let diffs: Vec<f64> = (0..depth.len())
        .filter_map(|i| Some(depth.get(i)? - truth.get(i)?))
        .collect();
    let Some(m) = median(diffs.clone()) else {
        return (f64::NAN, 0);
    };
    let sq: f64 = diffs.iter().map(|d| (d - m) * (d - m)).sum();
    ((sq / diffs.len() as f64).sqrt(), diffs.len())
}

/// Counts of `[0, 1)` values in `bins` equal bins.
pub fn histogram(values: impl IntoIterator<Item = f64>, bins: usize) -> Vec<usize> {
    let mut counts = vec![0usize; bins];
    for v in values {
        // bin edges j / bins are hit exactly by the adjustment map
        let b = ((v * bins as f64 + 1e-9).floor() as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_phase_offset_is_removed() {
        let truth: Vec<Option<f64>> = (0..100).map(|i| Some(i as f64 / 100.0)).collect();
        let est: Vec<f64> = (0..100).map(|i| crate::grid::wrap_cycles(i as f64 / 100.0 + 0.3)).collect();
        let map = PhaseMap::new(100, 1, est, vec![true; 100]).unwrap();
        let e = wrapped_phase_error(&map, &truth);
        assert!(e.rms < 1e-12);
        assert!((e.offset - 0.3).abs() < 1e-12);
        assert!((wrapped_phase_error_raw(&map, &truth).rms - 0.3).abs() < 1e-12);
    }

    #[test]
    fn period_errors_are_counted() {
        let truth: Vec<Option<f64>> = (0..10).map(|i| Some(i as f64 * 0.3 + 7.0)).collect();
        let mut values: Vec<f64> = (0..10).map(|i| i as f64 * 0.3).collect();
        values[4] += 1.0;
        let u = UnwrappedPhaseMap::from_values(10, 1, &values).unwrap();
        let (frac, n) = period_accuracy(&u, &truth);
        assert_eq!(n, 10);
        assert!((frac - 0.9).abs() < 1e-12);
    }

    #[test]
    fn depth_offset_is_removed() {
        let a = DepthMap::from_fn(4, 4, |x, y| (x + y) as f64).unwrap();
        let b = DepthMap::from_fn(4, 4, |x, y| (x + y) as f64 + 2.5).unwrap();
        assert!(aligned_depth_rms(&a, &b).0 < 1e-12);
    }

    #[test]
    fn histogram_edges() {
        assert_eq!(histogram([0.0, 0.25, 0.5, 0.999], 4), vec![1, 1, 1, 1]);
    }
}
