//! Recordings, event lists and the deterministic DSP applied to them.

mod epoch;
mod filter;
mod reference;
mod resample;
mod standardize;
mod window;

pub use epoch::{
    baseline_correct, epoch_len, extract_epochs, reject_artifacts, EpochExtraction, RejectionParams,
};
pub use filter::{bandpass, design_bandpass, fir_zero_phase};
pub(crate) use filter::reflect_index as filter_reflect_index;
pub use reference::rereference;
pub use resample::resample;
pub use standardize::{standardize, StandardizationParams};
pub use window::{window, WindowSet};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A uniformly sampled multichannel signal, stored channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    fs: f64,
    channels: Vec<String>,
    data: Array2<f64>,
}

impl Recording {
    pub fn new(fs: f64, channels: Vec<String>, data: Array2<f64>) -> Result<Self> {
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::invalid(format!("sampling rate must be positive, got {fs}")));
        }
        if channels.len() != data.nrows() {
            return Err(Error::shape(format!(
                "{} channel names for {} data rows",
                channels.len(),
                data.nrows()
            )));
        }
        for (i, name) in channels.iter().enumerate() {
            if channels[..i].contains(name) {
                return Err(Error::invalid(format!("duplicate channel name `{name}`")));
            }
        }
        if let Some((idx, _)) = data.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "sample {} of channel `{}`",
                idx.1, channels[idx.0]
            )));
        }
        Ok(Self { fs, channels, data })
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    pub fn n_channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.data.ncols()
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.fs
    }

    pub fn channel_index(&self, name: &str) -> Result<usize> {
        self.channels
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::ChannelNotFound {
                name: name.to_string(),
                candidates: self.channels.clone(),
            })
    }

    /// Keeps only the named channels, in the order given.
    pub fn select_channels<S: AsRef<str>>(&self, names: &[S]) -> Result<Recording> {
        let idx = names
            .iter()
            .map(|n| self.channel_index(n.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        let data = self.data.select(ndarray::Axis(0), &idx);
        let channels = idx.iter().map(|&i| self.channels[i].clone()).collect();
        Recording::new(self.fs, channels, data)
    }

    /// Same channels and rate, new samples. Shape and finiteness are re-checked.
    pub(crate) fn with_data(&self, data: Array2<f64>) -> Result<Recording> {
        Recording::new(self.fs, self.channels.clone(), data)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time_s: f64,
    pub label: String,
}

/// Labelled event onsets in seconds from recording start, strictly increasing.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EventList {
    events: Vec<Event>,
}

impl EventList {
    pub fn new(events: Vec<Event>) -> Result<Self> {
        for e in &events {
            if !e.time_s.is_finite() || e.time_s < 0.0 {
                return Err(Error::invalid(format!("event time {} out of range", e.time_s)));
            }
        }
        if let Some(w) = events.windows(2).find(|w| w[1].time_s <= w[0].time_s) {
            return Err(Error::invalid(format!(
                "event times not strictly increasing: {} then {}",
                w[0].time_s, w[1].time_s
            )));
        }
        Ok(Self { events })
    }

    /// Events sharing one label.
    pub fn from_times(times: &[f64], label: &str) -> Result<Self> {
        Self::new(
            times
                .iter()
                .map(|&time_s| Event { time_s, label: label.to_string() })
                .collect(),
        )
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn times(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.time_s).collect()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Checks every event lies inside `[0, duration_s]`.
    pub fn check_within(&self, duration_s: f64) -> Result<()> {
        match self.events.iter().find(|e| e.time_s > duration_s) {
            Some(e) => Err(Error::invalid(format!(
                "event at {} s beyond recording end {duration_s} s",
                e.time_s
            ))),
            None => Ok(()),
        }
    }
}

/// A fixed window of signal cut around one event.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    pub data: Array2<f64>,
    /// Window start relative to the event, in seconds (negative).
    pub t_start: f64,
    pub fs: f64,
    pub event_time_s: f64,
    pub rejected: bool,
}

impl Epoch {
    pub fn n_channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.data.ncols()
    }

    /// Number of samples before the event onset.
    pub fn n_pre_event(&self) -> usize {
        ((-self.t_start) * self.fs).round().max(0.0) as usize
    }
}

/// Population mean and standard deviation of a slice.
pub(crate) fn mean_std(x: impl IntoIterator<Item = f64> + Clone) -> (f64, f64) {
    let (n, sum) = x.clone().into_iter().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = sum / n as f64;
    let var = x.into_iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_duplicate_channels_and_bad_rate() {
        let d = array![[1.0], [2.0]];
        assert!(Recording::new(250.0, vec!["a".into(), "a".into()], d.clone()).is_err());
        assert!(Recording::new(0.0, vec!["a".into(), "b".into()], d.clone()).is_err());
        assert!(Recording::new(250.0, vec!["a".into(), "b".into()], d).is_ok());
    }

    #[test]
    fn rejects_non_finite_samples() {
        let d = array![[1.0, f64::NAN]];
        assert!(matches!(
            Recording::new(1.0, vec!["x".into()], d),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn event_list_requires_increasing_times() {
        assert!(EventList::from_times(&[1.0, 1.0], "e").is_err());
        assert!(EventList::from_times(&[2.0, 1.0], "e").is_err());
        let ev = EventList::from_times(&[0.5, 1.0], "e").unwrap();
        assert!(ev.check_within(0.9).is_err());
        assert!(ev.check_within(1.0).is_ok());
    }

    #[test]
    fn select_channels_reorders() {
        let d = array![[1.0], [2.0], [3.0]];
        let rec = Recording::new(1.0, vec!["a".into(), "b".into(), "c".into()], d).unwrap();
        let sel = rec.select_channels(&["c", "a"]).unwrap();
        assert_eq!(sel.channels(), &["c".to_string(), "a".to_string()]);
        assert_eq!(sel.data()[[0, 0]], 3.0);
        assert!(matches!(
            rec.select_channels(&["z"]),
            Err(Error::ChannelNotFound { .. })
        ));
    }
}
