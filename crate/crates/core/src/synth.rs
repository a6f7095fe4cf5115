//! Synthetic responses embedded in coloured noise, with exact ground truth.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::{EventList, Recording};

/// Relative weights of the unit-RMS noise components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseMix {
    pub pink: f64,
    pub alpha: f64,
    pub white: f64,
}

impl Default for NoiseMix {
    fn default() -> Self {
        Self { pink: 1.0, alpha: 0.5, white: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub fs: f64,
    pub duration_s: f64,
    pub channels: Vec<String>,
    /// Response gain per channel.
    pub channel_gains: Vec<f64>,
    pub n_events: usize,
    pub min_event_gap_s: f64,
    /// Events keep this distance from both recording ends.
    pub edge_margin_s: f64,
    pub snr_db: f64,
    /// Per-event amplitude scale is drawn from `1 ± amplitude_jitter_fraction`.
    pub amplitude_jitter_fraction: f64,
    /// Per-event latency offset is drawn from `± latency_jitter_s`.
    pub latency_jitter_s: f64,
    pub noise: NoiseMix,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            fs: 250.0,
            duration_s: 100.0,
            channels: ["C3", "Cz", "Pz", "C4"].map(String::from).to_vec(),
            channel_gains: vec![1.0, 1.0, 0.8, 0.8],
            n_events: 16,
            min_event_gap_s: 5.0,
            edge_margin_s: 2.0,
            snr_db: 0.0,
            amplitude_jitter_fraction: 0.1,
            latency_jitter_s: 0.02,
            noise: NoiseMix::default(),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn n_samples(&self) -> usize {
        (self.duration_s * self.fs).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fs > 0.0 && self.duration_s > 0.0) {
            return Err(Error::invalid("sampling rate and duration must be positive"));
        }
        if self.channels.is_empty() || self.channels.len() != self.channel_gains.len() {
            return Err(Error::invalid("need one gain per channel"));
        }
        if self.n_events as f64 * self.min_event_gap_s >= self.duration_s {
            return Err(Error::invalid(format!(
                "{} events with {} s gaps do not fit in {} s",
                self.n_events, self.min_event_gap_s, self.duration_s
            )));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::invalid("SNR must be finite"));
        }
        if self.amplitude_jitter_fraction < 0.0 || self.latency_jitter_s < 0.0 {
            return Err(Error::invalid("jitter must be non-negative"));
        }
        let m = self.noise;
        if m.pink < 0.0 || m.alpha < 0.0 || m.white < 0.0 || m.pink + m.alpha + m.white <= 0.0 {
            return Err(Error::invalid("noise weights must be non-negative and not all zero"));
        }
        Ok(())
    }
}

/// Exact placement of every embedded response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub event_times: Vec<f64>,
    pub amplitude_scales: Vec<f64>,
    pub latency_offsets_s: Vec<f64>,
    /// Base amplitude chosen to hit the requested SNR.
    pub amplitude: f64,
    pub snr_db: f64,
}

impl GroundTruth {
    pub fn events(&self) -> Result<EventList> {
        EventList::from_times(&self.event_times, "stim")
    }
}

/// Epoch window of the canonical waveform, seconds relative to onset.
pub const WAVEFORM_T_START: f64 = -0.2;
pub const WAVEFORM_T_END: f64 = 1.0;

/// Biphasic response: a negative Gaussian lobe at 0.2 s (σ 0.05 s, peak −1)
/// followed by a positive one at 0.4 s (σ 0.08 s, peak +1.5), sampled over
/// `[-0.2, 1.0)` s and zero before onset.
pub fn gen_erp_waveform(fs: f64) -> Result<Vec<f64>> {
    if !(fs > 0.0) {
        return Err(Error::invalid("sampling rate must be positive"));
    }
    let n = ((WAVEFORM_T_END - WAVEFORM_T_START) * fs).round() as usize;
    let lobe = |t: f64, c: f64, w: f64| (-(t - c) * (t - c) / (2.0 * w * w)).exp();
    Ok((0..n)
        .map(|i| {
            let t = WAVEFORM_T_START + i as f64 / fs;
            if t < 0.0 {
                0.0
            } else {
                -lobe(t, 0.2, 0.05) + 1.5 * lobe(t, 0.4, 0.08)
            }
        })
        .collect())
}

fn unit_rms(x: &mut [f64]) {
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt();
    if rms > 0.0 {
        x.iter_mut().for_each(|v| *v /= rms);
    }
}

fn white(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Gaussian noise shaped to a 1/f power spectrum.
fn pink(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = white(n, rng).into_iter().map(|v| Complex::new(v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let f = k.min(n - k);
        *c = if f == 0 { Complex::new(0.0, 0.0) } else { *c / (f as f64).sqrt() };
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let mut out: Vec<f64> = buf.into_iter().map(|c| c.re).collect();
    unit_rms(&mut out);
    out
}

/// Per channel: unit-RMS pink noise, a 10 Hz sinusoid with random phase and
/// white noise, mixed by weight and rescaled to unit RMS.
pub fn gen_noise(cfg: &SynthConfig) -> Result<Recording> {
    cfg.validate()?;
    let n = cfg.n_samples();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut data = Array2::zeros((cfg.channels.len(), n));
    for mut row in data.rows_mut() {
        let p = pink(n, &mut rng);
        let phase = rng.random_range(0.0..2.0 * PI);
        let w = white(n, &mut rng);
        let mut mix: Vec<f64> = (0..n)
            .map(|i| {
                let alpha = 2f64.sqrt() * (2.0 * PI * 10.0 * i as f64 / cfg.fs + phase).sin();
                cfg.noise.pink * p[i] + cfg.noise.alpha * alpha + cfg.noise.white * w[i]
            })
            .collect();
        unit_rms(&mut mix);
        row.iter_mut().zip(mix).for_each(|(d, v)| *d = v);
    }
    Recording::new(cfg.fs, cfg.channels.clone(), data)
}

/// Event onsets in samples, at least `min_gap` apart and `margin` from both ends.
fn place_events(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    let n = cfg.n_samples();
    let gap = (cfg.min_event_gap_s * cfg.fs).ceil() as usize;
    let margin = (cfg.edge_margin_s * cfg.fs).ceil() as usize;
    let needed = 2 * margin + cfg.n_events.saturating_sub(1) * gap;
    if cfg.n_events == 0 {
        return Ok(Vec::new());
    }
    if needed >= n {
        return Err(Error::invalid(format!(
            "cannot place {} events {} s apart with {} s margins in {} s",
            cfg.n_events, cfg.min_event_gap_s, cfg.edge_margin_s, cfg.duration_s
        )));
    }
    let slack = n - 1 - needed;
    let mut offsets: Vec<usize> = (0..cfg.n_events).map(|_| rng.random_range(0..=slack)).collect();
    offsets.sort_unstable();
    Ok(offsets.iter().enumerate().map(|(i, o)| margin + o + i * gap).collect())
}

/// Adds the scaled, jittered waveform at each event and calibrates the base
/// amplitude so the epoch-window SNR equals `cfg.snr_db`.
///
/// SNR is `10·log10(P_signal / P_noise)` with both powers taken as mean
/// squares over every event's `[-0.2, 1.0)` s window on every channel.
pub fn embed_events(
    noise: &Recording,
    template: &[f64],
    cfg: &SynthConfig,
) -> Result<(Recording, GroundTruth)> {
    cfg.validate()?;
    if noise.n_channels() != cfg.channel_gains.len() {
        return Err(Error::shape("noise channels differ from configured gains"));
    }
    if template.len() >= noise.n_samples() {
        return Err(Error::invalid("template longer than recording"));
    }
    let fs = noise.fs();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5EED_E7E7);
    let onsets = place_events(cfg, &mut rng)?;
    let pre = ((-WAVEFORM_T_START) * fs).round() as usize;
    let jit = (cfg.latency_jitter_s * fs).round() as i64;
    let mut scales = Vec::with_capacity(onsets.len());
    let mut shifts = Vec::with_capacity(onsets.len());
    for _ in &onsets {
        let a = cfg.amplitude_jitter_fraction;
        scales.push(if a > 0.0 { 1.0 + rng.random_range(-a..=a) } else { 1.0 });
        shifts.push(if jit > 0 { rng.random_range(-jit..=jit) } else { 0 });
    }

    // Unit-amplitude response, then the scalar that sets the SNR.
    let n = noise.n_samples();
    let mut signal = Array2::<f64>::zeros((noise.n_channels(), n));
    for ((&onset, &scale), &shift) in onsets.iter().zip(&scales).zip(&shifts) {
        let start = onset as i64 + shift - pre as i64;
        for (c, gain) in cfg.channel_gains.iter().enumerate() {
            for (k, v) in template.iter().enumerate() {
                let idx = start + k as i64;
                if idx >= 0 && (idx as usize) < n {
                    signal[[c, idx as usize]] += gain * scale * v;
                }
            }
        }
    }
    let (p_sig, p_noise) = epoch_powers(&signal, noise.data(), &onsets, pre, template.len());
    let amplitude = if p_sig > 0.0 && p_noise > 0.0 {
        (10f64.powf(cfg.snr_db / 10.0) * p_noise / p_sig).sqrt()
    } else {
        1.0
    };
    let data = noise.data() + &(signal * amplitude);
    let truth = GroundTruth {
        event_times: onsets.iter().map(|&o| o as f64 / fs).collect(),
        amplitude_scales: scales,
        latency_offsets_s: shifts.iter().map(|&s| s as f64 / fs).collect(),
        amplitude,
        snr_db: cfg.snr_db,
    };
    Ok((noise.with_data(data)?, truth))
}

/// Mean-square power of `signal` and `noise` over the epoch windows.
pub(crate) fn epoch_powers(
    signal: &Array2<f64>,
    noise: &Array2<f64>,
    onsets: &[usize],
    pre: usize,
    len: usize,
) -> (f64, f64) {
    let (mut ps, mut pn, mut count) = (0.0, 0.0, 0usize);
    for &onset in onsets {
        let start = onset.saturating_sub(pre);
        let end = (start + len).min(signal.ncols());
        for c in 0..signal.nrows() {
            for t in start..end {
                ps += signal[[c, t]] * signal[[c, t]];
                pn += noise[[c, t]] * noise[[c, t]];
                count += 1;
            }
        }
    }
    let k = count.max(1) as f64;
    (ps / k, pn / k)
}

/// Measured epoch-window SNR in dB of `signal_plus_noise` given the noise alone.
pub fn measure_epoch_snr(noise: &Recording, with_events: &Recording, truth: &GroundTruth) -> f64 {
    let fs = noise.fs();
    let signal = with_events.data() - noise.data();
    let onsets: Vec<usize> = truth.event_times.iter().map(|t| (t * fs).round() as usize).collect();
    let pre = ((-WAVEFORM_T_START) * fs).round() as usize;
    let len = ((WAVEFORM_T_END - WAVEFORM_T_START) * fs).round() as usize;
    let (ps, pn) = epoch_powers(&signal, noise.data(), &onsets, pre, len);
    10.0 * (ps / pn).log10()
}

/// A complete synthetic subject.
#[derive(Debug, Clone)]
pub struct SyntheticSubject {
    pub recording: Recording,
    pub events: EventList,
    pub truth: GroundTruth,
}

pub fn generate_subject(cfg: &SynthConfig) -> Result<SyntheticSubject> {
    let noise = gen_noise(cfg)?;
    let template = gen_erp_waveform(cfg.fs)?;
    let (recording, truth) = embed_events(&noise, &template, cfg)?;
    Ok(SyntheticSubject { events: truth.events()?, recording, truth })
}

/// `n` subjects named `sub00`, `sub01`, ... whose seeds are derived from
/// `base.seed`, so cohorts with different base seeds share no subject.
pub fn generate_cohort(base: &SynthConfig, n: usize) -> Result<Vec<(String, SyntheticSubject)>> {
    (0..n)
        .map(|i| {
            let seed = base.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64);
            Ok((format!("sub{i:02}"), generate_subject(&SynthConfig { seed, ..base.clone() })?))
        })
        .collect()
}
