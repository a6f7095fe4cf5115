use log::warn;
use ndarray::s;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::{EventList, Recording};

/// One subject's preprocessed recording with its event times.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRecording {
    pub subject: String,
    pub recording: Recording,
    pub events: EventList,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionConfig {
    pub window_s: f64,
    /// Resolution of the detector output grid.
    pub output_points_per_s: f64,
    pub positives_per_event: usize,
    pub step_s: f64,
    /// Minimum distance between a positive window's edges and its event.
    pub edge_margin_s: f64,
    /// Number of ones around each event index in the target; odd.
    pub label_width: usize,
    /// Negative windows keep this far from every event.
    pub negative_tolerance_s: f64,
    pub seed: u64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            window_s: 2.0,
            output_points_per_s: 150.0,
            positives_per_event: 12,
            step_s: 0.1,
            edge_margin_s: 0.05,
            label_width: 1,
            negative_tolerance_s: 0.15,
            seed: 0,
        }
    }
}

impl DetectionConfig {
    pub fn output_len(&self) -> usize {
        (self.window_s * self.output_points_per_s).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.window_s > 0.0 && self.output_points_per_s > 0.0 && self.step_s >= 0.0) {
            return Err(Error::invalid("window, grid resolution and step must be positive"));
        }
        if !(0.0..self.window_s / 2.0).contains(&self.edge_margin_s) {
            return Err(Error::invalid(format!(
                "edge margin {} s must lie in [0, {})",
                self.edge_margin_s,
                self.window_s / 2.0
            )));
        }
        if self.label_width == 0 || self.label_width % 2 == 0 {
            return Err(Error::invalid(format!("label width {} must be odd", self.label_width)));
        }
        if self.negative_tolerance_s < 0.0 {
            return Err(Error::invalid("negative tolerance must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionSample {
    /// Channel-major `channels × window` values.
    pub input: Vec<f32>,
    pub target: Vec<f32>,
    pub subject: String,
    pub start_s: f64,
    /// The event this window was cut around; `None` for negatives.
    pub event_time_s: Option<f64>,
}

impl DetectionSample {
    pub fn is_positive(&self) -> bool {
        self.event_time_s.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectionDataset {
    pub samples: Vec<DetectionSample>,
    pub channels: usize,
    pub window_len: usize,
    pub output_len: usize,
    /// `(subject, reason)` for subjects that contributed no samples.
    pub skipped: Vec<(String, String)>,
}

impl DetectionDataset {
    pub fn n_positive(&self) -> usize {
        self.samples.iter().filter(|s| s.is_positive()).count()
    }

    pub fn n_negative(&self) -> usize {
        self.samples.len() - self.n_positive()
    }
}

/// Window starts (in seconds) for one event: `t − (step·k + offsets[k])`,
/// clipped so the event sits at least `edge_margin_s` inside the window and
/// the window stays within `[0, duration_s]`. Returns `None` when no window
/// can hold the event.
pub fn positive_starts(
    event_s: f64,
    offsets: &[f64],
    step_s: f64,
    window_s: f64,
    edge_margin_s: f64,
    duration_s: f64,
) -> Option<Vec<f64>> {
    let lo = (event_s - window_s + edge_margin_s).max(0.0);
    let hi = (event_s - edge_margin_s).min(duration_s - window_s);
    if lo > hi {
        return None;
    }
    Some(
        offsets
            .iter()
            .enumerate()
            .map(|(k, u)| (event_s - (step_s * k as f64 + u)).clamp(lo, hi))
            .collect(),
    )
}

/// Ones of width `width` centered at every event that maps inside the grid.
fn make_target(events: &[f64], start_s: f64, cfg: &DetectionConfig, len: usize) -> Vec<f32> {
    let mut target = vec![0f32; len];
    let half = (cfg.label_width / 2) as isize;
    for &t in events {
        let idx = ((t - start_s) * cfg.output_points_per_s).round() as isize;
        if !(0..len as isize).contains(&idx) {
            continue;
        }
        for j in (idx - half).max(0)..=(idx + half).min(len as isize - 1) {
            target[j as usize] = 1.0;
        }
    }
    target
}

fn cut(rec: &Recording, start: usize, len: usize) -> Vec<f32> {
    rec.data().slice(s![.., start..start + len]).iter().map(|&v| v as f32).collect()
}

/// Balanced positive/negative windows from every subject.
///
/// Each event yields `positives_per_event` windows at jittered offsets; each
/// subject then contributes as many event-free windows, drawn uniformly.
/// Every event falling inside a window is labelled in its target.
pub fn make_detection_dataset(
    subjects: &[SubjectRecording],
    cfg: &DetectionConfig,
) -> Result<DetectionDataset> {
    cfg.validate()?;
    let output_len = cfg.output_len();
    let mut ds = DetectionDataset { output_len, ..Default::default() };
    for (si, subj) in subjects.iter().enumerate() {
        let rec = &subj.recording;
        let fs = rec.fs();
        let window_len = (cfg.window_s * fs).round() as usize;
        if ds.channels == 0 {
            ds.channels = rec.n_channels();
            ds.window_len = window_len;
        } else if ds.channels != rec.n_channels() || ds.window_len != window_len {
            return Err(Error::shape(format!(
                "subject {} has {} channels / {window_len}-sample windows, expected {} / {}",
                subj.subject,
                rec.n_channels(),
                ds.channels,
                ds.window_len
            )));
        }
        if rec.n_samples() < window_len {
            warn!("subject {}: recording shorter than one window, skipped", subj.subject);
            ds.skipped.push((subj.subject.clone(), "recording shorter than one window".into()));
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(si as u64);
        let times = subj.events.times();
        let max_start = rec.n_samples() - window_len;
        let duration = max_start as f64 / fs + cfg.window_s;
        let in_window = |start_s: f64| -> Vec<f64> {
            times.iter().copied().filter(|&t| t >= start_s && t < start_s + cfg.window_s).collect()
        };

        let mut n_pos = 0;
        for &t in &times {
            let offsets: Vec<f64> =
                (0..cfg.positives_per_event).map(|_| rng.random::<f64>() * cfg.step_s).collect();
            let Some(starts) =
                positive_starts(t, &offsets, cfg.step_s, cfg.window_s, cfg.edge_margin_s, duration)
            else {
                warn!("subject {}: event at {t:.3} s cannot be windowed", subj.subject);
                continue;
            };
            let first = ((t - cfg.window_s + cfg.edge_margin_s) * fs).ceil().max(0.0) as usize;
            let last = (((t - cfg.edge_margin_s) * fs).floor() as usize).min(max_start);
            for s in starts {
                let start = ((s * fs).round() as usize).clamp(first, last.max(first));
                let start_s = start as f64 / fs;
                ds.samples.push(DetectionSample {
                    input: cut(rec, start, window_len),
                    target: make_target(&in_window(start_s), start_s, cfg, output_len),
                    subject: subj.subject.clone(),
                    start_s,
                    event_time_s: Some(t),
                });
                n_pos += 1;
            }
        }

        let clear = |start_s: f64| {
            let (a, b) = (start_s - cfg.negative_tolerance_s, start_s + cfg.window_s + cfg.negative_tolerance_s);
            !times.iter().any(|&t| t >= a && t <= b)
        };
        let mut n_neg = 0;
        let max_attempts = 1000 * n_pos.max(1);
        for _ in 0..max_attempts {
            if n_neg == n_pos {
                break;
            }
            let start = rng.random_range(0..=max_start);
            let start_s = start as f64 / fs;
            if clear(start_s) {
                ds.samples.push(DetectionSample {
                    input: cut(rec, start, window_len),
                    target: vec![0.0; output_len],
                    subject: subj.subject.clone(),
                    start_s,
                    event_time_s: None,
                });
                n_neg += 1;
            }
        }
        if n_neg < n_pos {
            warn!("subject {}: only {n_neg} of {n_pos} negative windows found", subj.subject);
        }
        if n_pos + n_neg == 0 {
            ds.skipped.push((subj.subject.clone(), "no event or event-free window fits".into()));
        }
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_subject, SynthConfig};

    #[test]
    fn starts_for_zero_offsets() {
        let starts = positive_starts(5.0, &[0.0; 12], 0.1, 2.0, 0.0, 100.0).unwrap();
        let expected: Vec<f64> = (0..12).map(|k| 5.0 - 0.1 * k as f64).collect();
        for (a, b) in starts.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
        let cfg = DetectionConfig { edge_margin_s: 0.0, ..Default::default() };
        let idx: Vec<usize> = starts
            .iter()
            .map(|&s| make_target(&[5.0], s, &cfg, 300).iter().position(|&v| v == 1.0).unwrap())
            .collect();
        assert_eq!(idx, (0..12).map(|k| 15 * k).collect::<Vec<_>>());
    }

    #[test]
    fn starts_respect_margin_and_bounds() {
        let s = positive_starts(5.0, &[0.0, 0.01], 0.1, 2.0, 0.05, 100.0).unwrap();
        assert!((s[0] - 4.95).abs() < 1e-12);
        let s = positive_starts(0.5, &[0.0; 12], 0.1, 2.0, 0.05, 100.0).unwrap();
        assert!(s.iter().all(|&v| v >= 0.0));
        assert!(positive_starts(0.01, &[0.0], 0.1, 2.0, 0.05, 100.0).is_none());
    }

    #[test]
    fn target_round_trip() {
        let cfg = DetectionConfig::default();
        for i in 0..200 {
            let t = 10.0 + i as f64 * 0.0137;
            let s = t - 0.05 - (i as f64 * 0.0091) % 1.9;
            let target = make_target(&[t], s, &cfg, 300);
            let idx = target.iter().position(|&v| v == 1.0).unwrap();
            assert!((s + idx as f64 / 150.0 - t).abs() <= 1.0 / 300.0 + 1e-12);
        }
    }

    #[test]
    fn label_width_widens() {
        let cfg = DetectionConfig { label_width: 3, ..Default::default() };
        let t = make_target(&[1.0], 0.0, &cfg, 300);
        assert_eq!(t.iter().filter(|&&v| v == 1.0).count(), 3);
        assert_eq!(&t[149..152], &[1.0, 1.0, 1.0]);
        assert!(DetectionConfig { label_width: 2, ..Default::default() }.validate().is_err());
    }

    fn subjects(n: usize) -> Vec<SubjectRecording> {
        (0..n)
            .map(|i| {
                let s = generate_subject(&SynthConfig { seed: i as u64, ..Default::default() }).unwrap();
                SubjectRecording { subject: format!("s{i}"), recording: s.recording, events: s.events }
            })
            .collect()
    }

    #[test]
    fn balanced_counts_and_targets() {
        let subs = subjects(1);
        let ds = make_detection_dataset(&subs, &DetectionConfig::default()).unwrap();
        assert_eq!(ds.n_positive(), 192);
        assert_eq!(ds.n_negative(), 192);
        assert_eq!((ds.channels, ds.window_len, ds.output_len), (4, 500, 300));
        for s in &ds.samples {
            assert_eq!(s.input.len(), 2000);
            let ones = s.target.iter().filter(|&&v| v == 1.0).count();
            if let Some(t) = s.event_time_s {
                assert_eq!(ones, 1);
                let off = t - s.start_s;
                assert!((0.05 - 1e-9..=1.95 + 1e-9).contains(&(off)), "offset {off}");
            } else {
                assert_eq!(ones, 0);
                let times = subs[0].events.times();
                assert!(times.iter().all(|&t| t < s.start_s - 0.15 || t > s.start_s + 2.15));
            }
        }
    }

    #[test]
    fn deterministic_and_seed_dependent() {
        let subs = subjects(2);
        let a = make_detection_dataset(&subs, &DetectionConfig::default()).unwrap();
        let b = make_detection_dataset(&subs, &DetectionConfig::default()).unwrap();
        assert_eq!(a, b);
        let c = make_detection_dataset(&subs, &DetectionConfig { seed: 1, ..Default::default() }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn short_recording_is_skipped() {
        let mut subs = subjects(1);
        let rec = &subs[0].recording;
        let short = Recording::new(
            rec.fs(),
            rec.channels().to_vec(),
            rec.data().slice(s![.., ..100]).to_owned(),
        )
        .unwrap();
        subs.push(SubjectRecording { subject: "short".into(), recording: short, events: EventList::default() });
        let ds = make_detection_dataset(&subs, &DetectionConfig::default()).unwrap();
        assert_eq!(ds.skipped.len(), 1);
        assert_eq!(ds.skipped[0].0, "short");
    }
}
