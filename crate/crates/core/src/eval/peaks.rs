use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeakParams {
    pub min_height: f64,
    /// Minimum separation of accepted peaks, in trace samples.
    pub min_distance_samples: usize,
    /// Largest |prediction − truth| counted as a hit, in seconds.
    pub tolerance_s: f64,
}

impl Default for PeakParams {
    fn default() -> Self {
        Self { min_height: 0.25, min_distance_samples: 30, tolerance_s: 0.15 }
    }
}

impl PeakParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_height > 0.0 && self.min_height < 1.0) {
            return Err(Error::invalid(format!("min_height {} outside (0, 1)", self.min_height)));
        }
        if self.min_distance_samples == 0 {
            return Err(Error::invalid("min_distance_samples must be at least 1"));
        }
        if !(self.tolerance_s > 0.0) {
            return Err(Error::invalid(format!("tolerance {} must be positive", self.tolerance_s)));
        }
        Ok(())
    }
}

/// Local maxima of `trace` that reach `min_height`, thinned so that no two
/// are closer than `min_distance` samples.
///
/// A candidate is a sample (or a flat run of samples, represented by its
/// left-of-center index) strictly higher than both neighbours; the first and
/// last samples never qualify. Candidates are then accepted in order of
/// decreasing height, each suppressing the others within `min_distance`.
/// The result is sorted ascending.
pub fn find_peaks(trace: &[f64], min_height: f64, min_distance: usize) -> Vec<usize> {
    let mut candidates = Vec::new();
    let n = trace.len();
    let mut i = 1;
    while i + 1 < n {
        if trace[i] <= trace[i - 1] {
            i += 1;
            continue;
        }
        let mut j = i;
        while j + 1 < n && trace[j + 1] == trace[i] {
            j += 1;
        }
        if j + 1 < n && trace[j + 1] < trace[i] && trace[i] >= min_height {
            candidates.push(i + (j - i) / 2);
        }
        i = j + 1;
    }
    let mut order = candidates;
    order.sort_by(|&a, &b| trace[b].total_cmp(&trace[a]).then(a.cmp(&b)));
    let mut accepted: Vec<usize> = Vec::new();
    for c in order {
        if accepted.iter().all(|&a| a.abs_diff(c) >= min_distance) {
            accepted.push(c);
        }
    }
    accepted.sort_unstable();
    accepted
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn triangle(len: usize, at: usize, h: f64) -> Vec<f64> {
        (0..len).map(|i| (h - 0.01 * i.abs_diff(at) as f64).max(0.0)).collect()
    }

    #[test]
    fn zero_trace_has_no_peaks() {
        assert!(find_peaks(&[0.0; 100], 0.25, 30).is_empty());
        assert!(find_peaks(&[], 0.25, 30).is_empty());
    }

    #[test]
    fn single_triangle() {
        assert_eq!(find_peaks(&triangle(100, 50, 0.3), 0.25, 30), vec![50]);
        assert!(find_peaks(&triangle(100, 50, 0.2), 0.25, 30).is_empty());
    }

    #[test]
    fn higher_peak_wins() {
        let mut t = vec![0.0; 60];
        t[10] = 0.4;
        t[25] = 0.5;
        assert_eq!(find_peaks(&t, 0.25, 30), vec![25]);
        assert_eq!(find_peaks(&t, 0.25, 15), vec![10, 25]);
    }

    #[test]
    fn plateau_uses_left_center() {
        let t = [0.0, 0.5, 0.5, 0.5, 0.5, 0.0];
        assert_eq!(find_peaks(&t, 0.25, 1), vec![2]);
        let t = [0.0, 0.5, 0.5, 0.5, 0.0];
        assert_eq!(find_peaks(&t, 0.25, 1), vec![2]);
        // A rising shoulder is not a peak.
        let t = [0.0, 0.5, 0.5, 0.7, 0.0];
        assert_eq!(find_peaks(&t, 0.25, 1), vec![3]);
    }

    #[test]
    fn edges_are_not_peaks() {
        assert!(find_peaks(&[0.9, 0.1, 0.0], 0.25, 1).is_empty());
        assert!(find_peaks(&[0.0, 0.1, 0.9], 0.25, 1).is_empty());
    }

    proptest! {
        #[test]
        fn peaks_respect_height_and_distance(
            trace in prop::collection::vec(0.0f64..1.0, 0..300),
            h in 0.05f64..0.95,
            d in 1usize..40,
        ) {
            let p = find_peaks(&trace, h, d);
            prop_assert!(p.windows(2).all(|w| w[1] - w[0] >= d));
            prop_assert!(p.iter().all(|&i| trace[i] >= h));
        }

        #[test]
        fn higher_threshold_never_adds_peaks(
            trace in prop::collection::vec(0.0f64..1.0, 0..300),
            h in 0.05f64..0.5,
            dh in 0.0f64..0.45,
            d in 1usize..40,
        ) {
            prop_assert!(find_peaks(&trace, h + dh, d).len() <= find_peaks(&trace, h, d).len());
        }
    }
}
