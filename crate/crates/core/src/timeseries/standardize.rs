use ndarray::Axis;
use serde::{Deserialize, Serialize};

use super::{mean_std, Recording};
use crate::error::{Error, Result};

/// Per-channel mean and population standard deviation used for z-scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl StandardizationParams {
    /// Maps standardized data back to the original scale.
    pub fn invert(&self, rec: &Recording) -> Result<Recording> {
        if rec.n_channels() != self.mean.len() {
            return Err(Error::shape("channel count differs from parameters"));
        }
        let mut out = rec.data().clone();
        for ((mut row, m), s) in out.axis_iter_mut(Axis(0)).zip(&self.mean).zip(&self.std) {
            row.mapv_inplace(|v| v * s + m);
        }
        rec.with_data(out)
    }

    /// Applies previously fitted parameters to another recording.
    pub fn apply(&self, rec: &Recording) -> Result<Recording> {
        if rec.n_channels() != self.mean.len() {
            return Err(Error::shape("channel count differs from parameters"));
        }
        let mut out = rec.data().clone();
        for ((mut row, m), s) in out.axis_iter_mut(Axis(0)).zip(&self.mean).zip(&self.std) {
            row.mapv_inplace(|v| (v - m) / s);
        }
        rec.with_data(out)
    }
}

/// Z-scores each channel with its own mean and population standard deviation.
pub fn standardize(rec: &Recording) -> Result<(Recording, StandardizationParams)> {
    let mut mean = Vec::with_capacity(rec.n_channels());
    let mut std = Vec::with_capacity(rec.n_channels());
    for (row, name) in rec.data().axis_iter(Axis(0)).zip(rec.channels()) {
        let (m, s) = mean_std(row.iter().copied());
        if !(s > 0.0) {
            return Err(Error::ZeroVariance(name.clone()));
        }
        mean.push(m);
        std.push(s);
    }
    let params = StandardizationParams { mean, std };
    Ok((params.apply(rec)?, params))
}
