use std::f64::consts::PI;

use ndarray::{Array2, Axis};

use super::Recording;
use crate::error::{Error, Result};

/// Transition width for one band edge: 25% of the edge frequency with a
/// 2 Hz floor, capped so the half-edge frequency still lands in the stopband.
fn transition_width(edge: f64, room: f64) -> f64 {
    (0.25 * edge).max(2.0).min(0.5 * edge).min(room)
}

fn hamming(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Hamming-windowed sinc low-pass with unit DC gain.
fn lowpass_kernel(cutoff: f64, fs: f64, n_taps: usize) -> Vec<f64> {
    let mid = (n_taps / 2) as f64;
    let fc = cutoff / fs;
    let win = hamming(n_taps);
    let mut h: Vec<f64> = (0..n_taps)
        .map(|i| 2.0 * fc * sinc(2.0 * fc * (i as f64 - mid)) * win[i])
        .collect();
    let sum: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= sum);
    h
}

/// Designs the linear-phase band-pass kernel used by [`bandpass`].
///
/// Each edge gets its own transition band placed outside the passband
/// `[lo, hi]`; the tap count follows the narrower one (`3.3 · fs / width`,
/// forced odd).
pub fn design_bandpass(lo: f64, hi: f64, fs: f64) -> Result<Vec<f64>> {
    let nyq = fs / 2.0;
    if !(lo > 0.0 && lo < hi && hi < nyq) {
        return Err(Error::invalid(format!(
            "band edges must satisfy 0 < lo < hi < fs/2, got lo={lo} hi={hi} fs={fs}"
        )));
    }
    let tw_lo = transition_width(lo, f64::INFINITY);
    let tw_hi = transition_width(hi, nyq - hi);
    let mut n_taps = (3.3 * fs / tw_lo.min(tw_hi)).ceil() as usize;
    if n_taps % 2 == 0 {
        n_taps += 1;
    }
    let low = lowpass_kernel(lo - tw_lo / 2.0, fs, n_taps);
    let high = lowpass_kernel(hi + tw_hi / 2.0, fs, n_taps);
    Ok(high.iter().zip(&low).map(|(h, l)| h - l).collect())
}

/// Index into a signal of length `n` extended by mirror reflection about
/// the end samples (edge samples are not repeated).
pub(crate) fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Applies an odd-length symmetric kernel with its group delay removed,
/// reflecting the signal at both ends.
pub fn fir_zero_phase(x: &[f64], kernel: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let half = kernel.len() / 2;
    let padded: Vec<f64> = (-(half as isize)..(n + half) as isize)
        .map(|i| x[reflect_index(i, n)])
        .collect();
    (0..n)
        .map(|t| crate::nn::dot(&padded[t..t + kernel.len()], kernel))
        .collect()
}

/// Zero-phase FIR band-pass over every channel.
pub fn bandpass(rec: &Recording, lo: f64, hi: f64) -> Result<Recording> {
    let kernel = design_bandpass(lo, hi, rec.fs())?;
    let mut out = Array2::zeros(rec.data().raw_dim());
    for (src, mut dst) in rec.data().axis_iter(Axis(0)).zip(out.axis_iter_mut(Axis(0))) {
        let row: Vec<f64> = src.to_vec();
        let filtered = fir_zero_phase(&row, &kernel);
        dst.iter_mut().zip(filtered).for_each(|(d, v)| *d = v);
    }
    rec.with_data(out)
}
