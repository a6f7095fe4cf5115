use ndarray::{s, Array2};

use super::Recording;
use crate::error::{Error, Result};

/// Fixed-length, evenly hopped windows cut from one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    pub windows: Vec<(usize, Array2<f64>)>,
    pub window_len: usize,
    pub hop: usize,
    pub window_len_s: f64,
    pub overlap_fraction: f64,
}

impl WindowSet {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn starts(&self) -> Vec<usize> {
        self.windows.iter().map(|(s, _)| *s).collect()
    }
}

/// Window length and hop in samples for `len_s` seconds at `overlap`.
pub(crate) fn window_geometry(fs: f64, len_s: f64, overlap: f64) -> Result<(usize, usize)> {
    let window_len = (len_s * fs).round();
    if !(window_len >= 2.0) {
        return Err(Error::invalid(format!("window of {len_s} s is shorter than 2 samples")));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::invalid(format!("overlap {overlap} outside [0, 1)")));
    }
    let hop = (len_s * (1.0 - overlap) * fs).round().max(1.0);
    Ok((window_len as usize, hop as usize))
}

/// Splits a recording into windows of `len_s` seconds overlapping by the
/// fraction `overlap`. A trailing partial window is dropped.
pub fn window(rec: &Recording, len_s: f64, overlap: f64) -> Result<WindowSet> {
    let (window_len, hop) = window_geometry(rec.fs(), len_s, overlap)?;
    let n = rec.n_samples();
    let count = if n >= window_len { (n - window_len) / hop + 1 } else { 0 };
    let windows = (0..count)
        .map(|i| {
            let start = i * hop;
            (start, rec.data().slice(s![.., start..start + window_len]).to_owned())
        })
        .collect();
    Ok(WindowSet { windows, window_len, hop, window_len_s: len_s, overlap_fraction: overlap })
}
