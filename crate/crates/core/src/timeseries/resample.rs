use std::f64::consts::PI;

use ndarray::{Array2, Axis};

use super::filter::reflect_index;
use super::Recording;
use crate::error::{Error, Result};

const KAISER_BETA: f64 = 8.0;
/// Zero crossings of the interpolation sinc on each side.
const ZERO_CROSSINGS: usize = 32;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Reduced `(up, down)` with `up / down ≈ to / from`.
fn rational_ratio(from: f64, to: f64) -> (usize, usize) {
    let scale = if from.fract() == 0.0 && to.fract() == 0.0 { 1.0 } else { 1000.0 };
    let a = (to * scale).round() as u64;
    let b = (from * scale).round() as u64;
    let g = gcd(a, b).max(1);
    ((a / g) as usize, (b / g) as usize)
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Kaiser-windowed sinc prototype at the upsampled rate, indexed `-half..=half`.
fn prototype(up: usize, down: usize) -> Vec<f64> {
    let m = up.max(down);
    let half = ZERO_CROSSINGS * m;
    let fc = 0.5 / m as f64;
    let i0b = bessel_i0(KAISER_BETA);
    let mut h: Vec<f64> = (0..=2 * half)
        .map(|i| {
            let j = i as f64 - half as f64;
            let r = j / half as f64;
            let w = bessel_i0(KAISER_BETA * (1.0 - r * r).max(0.0).sqrt()) / i0b;
            let x = 2.0 * fc * j;
            let s = if x.abs() < 1e-12 { 1.0 } else { (PI * x).sin() / (PI * x) };
            2.0 * fc * s * w
        })
        .collect();
    let sum: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v *= up as f64 / sum);
    h
}

fn resample_row(x: &[f64], up: usize, down: usize, h: &[f64], n_out: usize) -> Vec<f64> {
    let half = (h.len() / 2) as isize;
    let n = x.len();
    let (up_i, down_i) = (up as isize, down as isize);
    (0..n_out as isize)
        .map(|m| {
            let pos = m * down_i;
            let first = (pos - half).div_euclid(up_i) + isize::from((pos - half).rem_euclid(up_i) != 0);
            let last = (pos + half).div_euclid(up_i);
            (first..=last)
                .map(|k| x[reflect_index(k, n)] * h[(pos - k * up_i + half) as usize])
                .sum()
        })
        .collect()
}

/// Rational-factor polyphase resampling with a Kaiser-windowed sinc
/// (β = 8) whose cutoff sits at the lower of the two Nyquist rates.
///
/// Output length is `round(n · target_fs / fs)`. An unchanged rate returns a
/// copy.
pub fn resample(rec: &Recording, target_fs: f64) -> Result<Recording> {
    if !(target_fs.is_finite() && target_fs > 0.0) {
        return Err(Error::invalid(format!("target rate must be positive, got {target_fs}")));
    }
    if target_fs == rec.fs() {
        return Ok(rec.clone());
    }
    let (up, down) = rational_ratio(rec.fs(), target_fs);
    let n_out = (rec.n_samples() as f64 * target_fs / rec.fs()).round() as usize;
    let h = prototype(up, down);
    let mut out = Array2::zeros((rec.n_channels(), n_out));
    if rec.n_samples() > 0 {
        for (src, mut dst) in rec.data().axis_iter(Axis(0)).zip(out.axis_iter_mut(Axis(0))) {
            let row = resample_row(&src.to_vec(), up, down, &h, n_out);
            dst.iter_mut().zip(row).for_each(|(d, v)| *d = v);
        }
    }
    Recording::new(target_fs, rec.channels().to_vec(), out)
}
