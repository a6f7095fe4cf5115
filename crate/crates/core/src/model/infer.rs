use serde::{Deserialize, Serialize};

use super::arch::{DeepMatchModel, HeadKind};
use crate::error::{Error, Result};
use crate::nn::{Scalar, Tensor};
use crate::timeseries::Recording;

const INFER_BATCH: usize = 32;

/// Detector scores on a fixed grid aligned with recording time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionTrace {
    pub points_per_s: f64,
    pub scores: Vec<f64>,
}

impl DetectionTrace {
    pub fn time_of(&self, index: usize) -> f64 {
        index as f64 / self.points_per_s
    }
}

/// Places each window's outputs at `round(start_s · points_per_s) + j` on a
/// grid of `total_len` points and averages wherever windows overlap. Points
/// no window covers are zero.
pub fn aggregate_windows(outputs: &[(f64, Vec<f64>)], points_per_s: f64, total_len: usize) -> Vec<f64> {
    let mut sum = vec![0.0; total_len];
    let mut count = vec![0u32; total_len];
    for (start_s, out) in outputs {
        let offset = (start_s * points_per_s).round() as usize;
        for (j, &v) in out.iter().enumerate() {
            if let Some(slot) = sum.get_mut(offset + j) {
                *slot += v;
                count[offset + j] += 1;
            }
        }
    }
    sum.iter().zip(&count).map(|(&s, &c)| if c > 0 { s / c as f64 } else { 0.0 }).collect()
}

/// Slides the detector over the whole recording with a `hop_s` hop (plus a
/// final window flush with the end) and averages overlapping outputs.
pub fn infer<T: Scalar>(model: &DeepMatchModel<T>, rec: &Recording, hop_s: f64) -> Result<DetectionTrace> {
    if model.head_kind != HeadKind::Detector {
        return Err(Error::invalid("inference needs a detector model"));
    }
    let arch = &model.arch;
    if rec.n_channels() != arch.input_channels {
        return Err(Error::shape(format!(
            "recording has {} channels, model expects {}",
            rec.n_channels(),
            arch.input_channels
        )));
    }
    let (win, n) = (arch.window_len_samples, rec.n_samples());
    if n < win {
        return Err(Error::invalid(format!("recording of {n} samples is shorter than one {win}-sample window")));
    }
    let fs = rec.fs();
    let hop = ((hop_s * fs).round() as usize).max(1);
    let mut starts: Vec<usize> = (0..=(n - win) / hop).map(|i| i * hop).collect();
    if *starts.last().expect("at least one window") != n - win {
        starts.push(n - win);
    }
    let points_per_s = arch.output_len as f64 * fs / win as f64;
    let data = rec.data();
    let mut outputs = Vec::with_capacity(starts.len());
    for chunk in starts.chunks(INFER_BATCH) {
        let x = Tensor::from_fn([chunk.len(), arch.input_channels, win], |b, c, t| {
            crate::nn::cast(data[[c, chunk[b] + t]])
        });
        let y = model.forward(&x)?;
        for (b, &s) in chunk.iter().enumerate() {
            let row = y.row(b, 0).iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect();
            outputs.push((s as f64 / fs, row));
        }
    }
    let total_len = (n as f64 / fs * points_per_s).round() as usize;
    Ok(DetectionTrace { points_per_s, scores: aggregate_windows(&outputs, points_per_s, total_len) })
}
