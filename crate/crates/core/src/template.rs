//! Response templates and their conversion into convolution kernels.
//!
//! Templates are built per channel: epochs of one subject are averaged,
//! subject averages are averaged again, and the result is smoothed with a
//! centered moving mean. [`to_kernels`] then removes each kernel's mean,
//! divides by its standard deviation and multiplies by
//! `σ = √(2 / (height · width · in_channels))`.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::{filter_reflect_index, mean_std, Epoch};

/// Grand-averaged, smoothed per-channel response waveforms.
#[derive(Debug, Clone, PartialEq)]
pub struct ErpTemplate {
    pub fs: f64,
    pub channels: Vec<String>,
    /// `n_channels × n_epoch_samples`
    pub waveforms: Array2<f64>,
    pub n_subjects_averaged: usize,
    /// Epoch start relative to the event, seconds.
    pub t_start: f64,
}

impl ErpTemplate {
    /// Samples before the event onset.
    pub fn n_pre_event(&self) -> usize {
        ((-self.t_start) * self.fs).round().max(0.0) as usize
    }
}

pub const DEFAULT_TEMPLATE_CHANNELS: [&str; 4] = ["C3", "Cz", "Pz", "C4"];

/// Element-wise mean over the non-rejected epochs.
pub fn average_epochs(epochs: &[Epoch]) -> Result<Array2<f64>> {
    let kept: Vec<&Epoch> = epochs.iter().filter(|e| !e.rejected).collect();
    let first = kept.first().ok_or(Error::AllRejected)?;
    let shape = first.data.raw_dim();
    let mut sum = Array2::<f64>::zeros(shape);
    for e in &kept {
        if e.data.raw_dim() != shape {
            return Err(Error::shape(format!(
                "epoch shape {:?} differs from {:?}",
                e.data.dim(),
                first.data.dim()
            )));
        }
        sum += &e.data;
    }
    Ok(sum / kept.len() as f64)
}

/// Unweighted mean of per-subject average waveforms.
pub fn grand_average(
    subject_waveforms: &[Array2<f64>],
    fs: f64,
    channels: Vec<String>,
    t_start: f64,
) -> Result<ErpTemplate> {
    let first = subject_waveforms
        .first()
        .ok_or_else(|| Error::invalid("no subject waveforms to average"))?;
    if first.nrows() != channels.len() {
        return Err(Error::shape(format!(
            "{} channel names for {} waveform rows",
            channels.len(),
            first.nrows()
        )));
    }
    let mut sum = Array2::<f64>::zeros(first.raw_dim());
    for w in subject_waveforms {
        if w.raw_dim() != first.raw_dim() {
            return Err(Error::shape(format!("waveform {:?} vs {:?}", w.dim(), first.dim())));
        }
        sum += w;
    }
    Ok(ErpTemplate {
        fs,
        channels,
        waveforms: sum / subject_waveforms.len() as f64,
        n_subjects_averaged: subject_waveforms.len(),
        t_start,
    })
}

/// Centered moving mean over `window` samples with mirrored edges.
pub fn smooth(template: &ErpTemplate, window: usize) -> Result<ErpTemplate> {
    let len = template.waveforms.ncols();
    if window % 2 == 0 || window == 0 {
        return Err(Error::invalid(format!("smoothing window must be odd, got {window}")));
    }
    if window > len {
        return Err(Error::invalid(format!("smoothing window {window} exceeds length {len}")));
    }
    let half = (window / 2) as isize;
    let mut out = template.clone();
    for (src, mut dst) in template
        .waveforms
        .axis_iter(Axis(0))
        .zip(out.waveforms.axis_iter_mut(Axis(0)))
    {
        for (t, v) in dst.iter_mut().enumerate() {
            let t = t as isize;
            *v = (t - half..=t + half)
                .map(|i| src[filter_reflect_index(i, len)])
                .sum::<f64>()
                / window as f64;
        }
    }
    Ok(out)
}

/// `σ = √(2 / (height · width · in_channels))`
pub fn scale_factor(height: usize, width: usize, in_channels: usize) -> Result<f64> {
    if height == 0 || width == 0 || in_channels == 0 {
        return Err(Error::invalid(format!(
            "kernel dimensions must be >= 1, got ({height}, {width}, {in_channels})"
        )));
    }
    Ok((2.0 / (height * width * in_channels) as f64).sqrt())
}

/// How template channels map onto input-layer kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelLayout {
    /// One `(1, len, 1)` kernel per channel, matched against its own channel.
    Depthwise,
    /// A single `(n_channels, len, 1)` kernel spanning all channels.
    FullSpatial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    /// `(height, width, in_channels)`
    pub shape: (usize, usize, usize),
    /// Row-major over `height × width`.
    pub values: Vec<f64>,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelBank {
    pub layout: KernelLayout,
    pub kernels: Vec<Kernel>,
}

fn normalized_kernel(values: Vec<f64>, shape: (usize, usize, usize), what: &str) -> Result<Kernel> {
    let (mean, std) = mean_std(values.iter().copied());
    // Relative test: a constant waveform leaves only rounding noise.
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(std > 1e-12 * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::ZeroVariance(what.to_string()));
    }
    let sigma = scale_factor(shape.0, shape.1, shape.2)?;
    let values = values.iter().map(|v| (v - mean) / std * sigma).collect();
    Ok(Kernel { shape, values, sigma })
}

/// Zero-mean, unit-variance kernels scaled to standard deviation `σ`.
pub fn to_kernels(template: &ErpTemplate, layout: KernelLayout) -> Result<KernelBank> {
    let (n_ch, len) = template.waveforms.dim();
    let kernels = match layout {
        KernelLayout::Depthwise => template
            .waveforms
            .axis_iter(Axis(0))
            .zip(&template.channels)
            .map(|(row, name)| normalized_kernel(row.to_vec(), (1, len, 1), name))
            .collect::<Result<Vec<_>>>()?,
        KernelLayout::FullSpatial => vec![normalized_kernel(
            template.waveforms.iter().copied().collect(),
            (n_ch, len, 1),
            "all channels",
        )?],
    };
    Ok(KernelBank { layout, kernels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn tmpl(w: Array2<f64>) -> ErpTemplate {
        let channels = (0..w.nrows()).map(|i| format!("c{i}")).collect();
        ErpTemplate { fs: 250.0, channels, waveforms: w, n_subjects_averaged: 1, t_start: -0.2 }
    }

    fn ep(data: Array2<f64>, rejected: bool) -> Epoch {
        Epoch { data, t_start: -0.2, fs: 250.0, event_time_s: 1.0, rejected }
    }

    #[test]
    fn average_examples() {
        let x = array![[1.0, -2.0, 0.5]];
        assert_eq!(average_epochs(&[ep(x.clone(), false)]).unwrap(), x);
        let sym = average_epochs(&[ep(x.clone(), false), ep(-&x, false)]).unwrap();
        assert!(sym.iter().all(|v| *v == 0.0));
        let three = [array![[1.0]], array![[2.0]], array![[6.0]]]
            .into_iter()
            .map(|d| ep(d, false))
            .collect::<Vec<_>>();
        assert_eq!(average_epochs(&three).unwrap(), array![[3.0]]);
    }

    #[test]
    fn average_skips_rejected() {
        let eps = [ep(array![[1.0]], false), ep(array![[100.0]], true)];
        assert_eq!(average_epochs(&eps).unwrap(), array![[1.0]]);
        assert!(matches!(average_epochs(&[ep(array![[1.0]], true)]), Err(Error::AllRejected)));
    }

    #[test]
    fn grand_average_examples() {
        let w = array![[1.0, 2.0], [3.0, -1.0]];
        let names = vec!["a".to_string(), "b".to_string()];
        let one = grand_average(&[w.clone()], 250.0, names.clone(), -0.2).unwrap();
        assert_eq!(one.waveforms, w);
        let two = grand_average(&[w.clone(), 3.0 * &w], 250.0, names.clone(), -0.2).unwrap();
        assert_eq!(two.waveforms, 2.0 * &w);
        assert_eq!(two.n_subjects_averaged, 2);
        let v = array![[0.5, 0.25], [-3.0, 8.0]];
        let ab = grand_average(&[w.clone(), v.clone()], 250.0, names.clone(), -0.2).unwrap();
        let ba = grand_average(&[v, w.clone()], 250.0, names.clone(), -0.2).unwrap();
        assert_eq!(ab, ba);
        assert!(grand_average(&[w, array![[1.0]]], 250.0, names, -0.2).is_err());
    }

    #[test]
    fn smoothing_examples() {
        let imp = tmpl(array![[0.0, 0.0, 1.0, 0.0, 0.0]]);
        assert_eq!(smooth(&imp, 1).unwrap(), imp);
        let s = smooth(&imp, 3).unwrap();
        let third = 1.0 / 3.0;
        for (a, b) in s.waveforms.iter().zip([0.0, third, third, third, 0.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        let c = tmpl(Array2::from_elem((2, 20), 4.2));
        let sc = smooth(&c, 13).unwrap();
        assert!(sc.waveforms.iter().all(|v| (v - 4.2).abs() < 1e-12));
        assert!(smooth(&c, 4).is_err());
        assert!(smooth(&c, 21).is_err());
    }

    #[test]
    fn scale_factor_values() {
        assert!((scale_factor(1, 300, 1).unwrap() - 0.0816497).abs() < 1e-7);
        assert!((scale_factor(4, 300, 1).unwrap() - 0.0408248).abs() < 1e-7);
        assert_eq!(scale_factor(1, 2, 1).unwrap(), 1.0);
        assert!(scale_factor(0, 3, 1).is_err());
    }

    #[test]
    fn kernel_from_ramp() {
        let bank = to_kernels(&tmpl(array![[1.0, 2.0, 3.0]]), KernelLayout::Depthwise).unwrap();
        let k = &bank.kernels[0];
        assert_eq!(k.shape, (1, 3, 1));
        assert!((k.sigma - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        for (a, b) in k.values.iter().zip([-1.0, 0.0, 1.0]) {
            assert!((a - b).abs() < 1e-12, "{:?}", k.values);
        }
    }

    #[test]
    fn constant_waveform_rejected() {
        let r = to_kernels(&tmpl(Array2::from_elem((1, 10), 3.0)), KernelLayout::Depthwise);
        assert!(matches!(r, Err(Error::ZeroVariance(_))));
    }

    #[test]
    fn full_spatial_single_kernel() {
        let w = Array2::from_shape_fn((4, 300), |(c, t)| ((c * 300 + t) as f64 * 0.01).sin());
        let bank = to_kernels(&tmpl(w), KernelLayout::FullSpatial).unwrap();
        assert_eq!(bank.kernels.len(), 1);
        let k = &bank.kernels[0];
        assert_eq!(k.shape, (4, 300, 1));
        let (m, s) = mean_std(k.values.iter().copied());
        assert!(m.abs() < 1e-9 && (s - 0.0408248).abs() < 1e-7);
    }

    proptest! {
        #[test]
        fn kernels_have_zero_mean_and_sigma_std(
            vals in proptest::collection::vec(-50.0f64..50.0, 8..64),
            c in 0.01f64..100.0,
        ) {
            let n = vals.len();
            let w = Array2::from_shape_vec((1, n), vals).unwrap();
            prop_assume!(mean_std(w.iter().copied()).1 > 1e-3);
            let bank = to_kernels(&tmpl(w.clone()), KernelLayout::Depthwise).unwrap();
            let k = &bank.kernels[0];
            let (m, s) = mean_std(k.values.iter().copied());
            prop_assert!(m.abs() < 1e-9);
            prop_assert!((s - k.sigma).abs() < 1e-9);
            // Amplitude drops out.
            let scaled = to_kernels(&tmpl(&w * c), KernelLayout::Depthwise).unwrap();
            for (a, b) in scaled.kernels[0].values.iter().zip(&k.values) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn sigma_decreases_in_each_dimension(h in 1usize..20, w in 1usize..400, c in 1usize..20) {
            let s = scale_factor(h, w, c).unwrap();
            prop_assert!(scale_factor(h + 1, w, c).unwrap() < s);
            prop_assert!(scale_factor(h, w + 1, c).unwrap() < s);
            prop_assert!(scale_factor(h, w, c + 1).unwrap() < s);
        }
    }
}
