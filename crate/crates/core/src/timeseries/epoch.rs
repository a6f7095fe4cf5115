use ndarray::{s, Axis};
use serde::{Deserialize, Serialize};

use super::{mean_std, Epoch, EventList, Recording};
use crate::error::{Error, Result};

/// Samples in an epoch spanning `[t_start, t_end)` seconds at `fs`.
pub fn epoch_len(t_start: f64, t_end: f64, fs: f64) -> usize {
    ((t_end - t_start) * fs).round() as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochExtraction {
    pub epochs: Vec<Epoch>,
    /// Event times whose window ran past either end of the recording.
    pub skipped: Vec<f64>,
}

/// Cuts one epoch per event. Events whose window does not fit inside the
/// recording are skipped and reported, never padded.
pub fn extract_epochs(
    rec: &Recording,
    events: &EventList,
    t_start: f64,
    t_end: f64,
) -> Result<EpochExtraction> {
    if !(t_start < 0.0 && t_end > 0.0) {
        return Err(Error::invalid(format!(
            "epoch window must straddle the event, got ({t_start}, {t_end})"
        )));
    }
    let fs = rec.fs();
    let len = epoch_len(t_start, t_end, fs);
    let mut epochs = Vec::with_capacity(events.len());
    let mut skipped = Vec::new();
    for ev in events.events() {
        let start = ((ev.time_s + t_start) * fs).round();
        if start < 0.0 || start as usize + len > rec.n_samples() {
            skipped.push(ev.time_s);
            continue;
        }
        let start = start as usize;
        epochs.push(Epoch {
            data: rec.data().slice(s![.., start..start + len]).to_owned(),
            t_start,
            fs,
            event_time_s: ev.time_s,
            rejected: false,
        });
    }
    if !skipped.is_empty() {
        log::info!("{} event(s) skipped: epoch window outside recording", skipped.len());
    }
    Ok(EpochExtraction { epochs, skipped })
}

/// Subtracts each channel's mean over the pre-event interval.
pub fn baseline_correct(ep: &Epoch) -> Result<Epoch> {
    let n_pre = ep.n_pre_event().min(ep.n_samples());
    if n_pre == 0 {
        return Err(Error::invalid("epoch has no pre-event samples"));
    }
    let baseline = ep
        .data
        .slice(s![.., ..n_pre])
        .mean_axis(Axis(1))
        .expect("non-empty baseline");
    let mut out = ep.clone();
    out.data -= &baseline.insert_axis(Axis(1));
    Ok(out)
}

/// Threshold-based epoch rejection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RejectionParams {
    /// Any |sample| above this rejects the epoch.
    pub amp_limit_uv: f64,
    /// A channel whose std exceeds this multiple of that channel's median
    /// std across epochs rejects the epoch.
    pub std_factor: f64,
}

impl Default for RejectionParams {
    fn default() -> Self {
        Self { amp_limit_uv: 100.0, std_factor: 5.0 }
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Flags epochs by amplitude and per-channel variance outliers. The variance
/// rule needs at least two epochs and is skipped otherwise. Flags already set
/// are kept.
pub fn reject_artifacts(epochs: &[Epoch], params: &RejectionParams) -> Result<Vec<Epoch>> {
    if !(params.amp_limit_uv > 0.0 && params.std_factor > 0.0) {
        return Err(Error::invalid("rejection thresholds must be positive"));
    }
    let mut out = epochs.to_vec();
    for ep in out.iter_mut() {
        if ep.data.iter().any(|v| v.abs() > params.amp_limit_uv) {
            ep.rejected = true;
        }
    }
    if epochs.len() < 2 {
        return Ok(out);
    }
    let n_ch = epochs[0].n_channels();
    if epochs.iter().any(|e| e.n_channels() != n_ch) {
        return Err(Error::shape("epochs differ in channel count"));
    }
    let stds: Vec<Vec<f64>> = epochs
        .iter()
        .map(|e| e.data.axis_iter(Axis(0)).map(|r| mean_std(r.iter().copied()).1).collect())
        .collect();
    for ch in 0..n_ch {
        let med = median(stds.iter().map(|s| s[ch]).collect());
        for (ep, s) in out.iter_mut().zip(&stds) {
            if s[ch] > params.std_factor * med {
                ep.rejected = true;
            }
        }
    }
    Ok(out)
}
