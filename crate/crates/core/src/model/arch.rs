use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{weighted_bce_logit_grad, Grads, LayerSpec, Loss, Network, Padding, Scalar, Tensor};
use crate::template::{KernelBank, KernelLayout};

/// Stream offsets keep the three parameter groups on disjoint random streams.
const ENCODER_STREAM: u64 = 0;
const DECODER_STREAM: u64 = 1000;
const DETECTOR_STREAM: u64 = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureConfig {
    pub input_channels: usize,
    pub window_len_samples: usize,
    pub output_len: usize,
    pub encoder: Vec<LayerSpec>,
    pub decoder: Vec<LayerSpec>,
    pub detector: Vec<LayerSpec>,
}

impl Default for ArchitectureConfig {
    /// 4 × 500 input; depthwise 300-tap matched layer anchored 50 samples
    /// (0.2 s) before the kernel start; two stride-2 convs to a 32 × 125
    /// latent; mirrored transposed-conv decoder; two-conv detector resampled
    /// to 300 points.
    fn default() -> Self {
        Self::scaled(4, 500, 300, 300, 50, [16, 32], 15, 9)
    }
}

impl ArchitectureConfig {
    /// The default topology with every size as a parameter.
    #[allow(clippy::too_many_arguments)]
    pub fn scaled(
        input_channels: usize,
        window_len_samples: usize,
        output_len: usize,
        template_len: usize,
        template_anchor: usize,
        widths: [usize; 2],
        conv_kernel: usize,
        detector_kernel: usize,
    ) -> Self {
        let [w1, w2] = widths;
        let conv = |i, o, k, s| LayerSpec::Conv {
            in_channels: i,
            out_channels: o,
            kernel_len: k,
            stride: s,
            padding: Padding::Same,
        };
        Self {
            input_channels,
            window_len_samples,
            output_len,
            encoder: vec![
                LayerSpec::DepthwiseConv {
                    channels: input_channels,
                    kernel_len: template_len,
                    stride: 1,
                    padding: Padding::Offset(template_anchor),
                },
                conv(input_channels, w1, conv_kernel, 2),
                LayerSpec::Relu,
                conv(w1, w2, conv_kernel, 2),
                LayerSpec::Relu,
            ],
            decoder: vec![
                LayerSpec::TransposedConv { in_channels: w2, out_channels: w1, kernel_len: conv_kernel, stride: 2 },
                LayerSpec::Relu,
                LayerSpec::TransposedConv {
                    in_channels: w1,
                    out_channels: input_channels,
                    kernel_len: conv_kernel,
                    stride: 2,
                },
            ],
            detector: vec![
                conv(w2, w1, detector_kernel, 1),
                LayerSpec::Relu,
                conv(w1, 1, detector_kernel, 1),
                LayerSpec::ResampleLinear { target_len: output_len },
                LayerSpec::Sigmoid,
            ],
        }
    }

    /// Same layer kinds at toy sizes, for finite-difference checks.
    pub fn tiny() -> Self {
        Self::scaled(2, 24, 18, 9, 3, [3, 4], 5, 3)
    }

    pub fn validate(&self) -> Result<()> {
        let enc = Network::<f64>::init(&self.encoder, 0, 0)?;
        if !self.encoder.first().is_some_and(LayerSpec::has_params) {
            return Err(Error::invalid("encoder must start with a convolution"));
        }
        let (lc, ll) = enc.output_shape(self.input_channels, self.window_len_samples)?;
        let dec = Network::<f64>::init(&self.decoder, 0, 0)?.output_shape(lc, ll)?;
        if dec != (self.input_channels, self.window_len_samples) {
            return Err(Error::invalid(format!(
                "decoder produces {dec:?}, expected ({}, {})",
                self.input_channels, self.window_len_samples
            )));
        }
        let det = Network::<f64>::init(&self.detector, 0, 0)?.output_shape(lc, ll)?;
        if det != (1, self.output_len) {
            return Err(Error::invalid(format!(
                "detector produces {det:?}, expected (1, {})",
                self.output_len
            )));
        }
        if self.detector.last() != Some(&LayerSpec::Sigmoid) {
            return Err(Error::invalid("detector must end in a sigmoid"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelVariant {
    /// Matched-filter layer initialized from templates.
    DeepMf,
    /// Matched-filter layer initialized at random.
    Standard,
}

impl ModelVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelVariant::DeepMf => "deepmf",
            ModelVariant::Standard => "standard",
        }
    }
}

impl std::str::FromStr for ModelVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "deepmf" | "deep-mf" | "deep_mf" => Ok(ModelVariant::DeepMf),
            "standard" => Ok(ModelVariant::Standard),
            other => Err(Error::invalid(format!("unknown variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    Decoder,
    Detector,
}

impl HeadKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            HeadKind::Decoder => "decoder",
            HeadKind::Detector => "detector",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeepMatchModel<T> {
    pub arch: ArchitectureConfig,
    pub variant: ModelVariant,
    pub head_kind: HeadKind,
    pub encoder: Network<T>,
    pub head: Network<T>,
}

impl<T: Scalar> DeepMatchModel<T> {
    /// Encoder + decoder. Every layer is He-initialized from `seed`; for
    /// [`ModelVariant::DeepMf`] the first encoder layer is then overwritten
    /// with `kernels` and its bias zeroed.
    pub fn build(
        arch: &ArchitectureConfig,
        variant: ModelVariant,
        kernels: Option<&KernelBank>,
        seed: u64,
    ) -> Result<Self> {
        arch.validate()?;
        let mut encoder = Network::init(&arch.encoder, seed, ENCODER_STREAM)?;
        let head = Network::init(&arch.decoder, seed, DECODER_STREAM)?;
        if variant == ModelVariant::DeepMf {
            let bank = kernels.ok_or_else(|| Error::invalid("DeepMF variant needs a kernel bank"))?;
            load_kernels(&mut encoder, bank)?;
        }
        Ok(Self { arch: arch.clone(), variant, head_kind: HeadKind::Decoder, encoder, head })
    }

    /// Keeps the encoder and replaces the head with a fresh detector.
    pub fn attach_detector(&self, seed: u64) -> Result<Self> {
        let head = Network::init(&self.arch.detector, seed, DETECTOR_STREAM)?;
        Ok(Self {
            arch: self.arch.clone(),
            variant: self.variant,
            head_kind: HeadKind::Detector,
            encoder: self.encoder.clone(),
            head,
        })
    }

    pub fn cast<U: Scalar>(&self) -> DeepMatchModel<U> {
        DeepMatchModel {
            arch: self.arch.clone(),
            variant: self.variant,
            head_kind: self.head_kind,
            encoder: self.encoder.cast(),
            head: self.head.cast(),
        }
    }

    pub fn input_layer_weights(&self) -> &[T] {
        &self.encoder.layers[0].weight
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x)?;
        self.head.forward(&self.encoder.forward(x)?)
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        if x.channels() != self.arch.input_channels || x.length() != self.arch.window_len_samples {
            return Err(Error::shape(format!(
                "model expects (_, {}, {}), got {:?}",
                self.arch.input_channels,
                self.arch.window_len_samples,
                x.shape()
            )));
        }
        Ok(())
    }

    /// Loss and gradients of every parameter block, encoder first.
    pub fn loss_and_grads(&self, x: &Tensor<T>, target: &Tensor<T>, loss: Loss) -> Result<(f64, Grads<T>)> {
        self.check_input(x)?;
        let enc = self.encoder.forward_traced(x)?;
        let head = self.head.forward_traced(enc.output())?;
        let n_head = self.head.layers.len();
        let ends_in_sigmoid = self.head.layers.last().is_some_and(|l| l.spec == LayerSpec::Sigmoid);
        let (value, head_grads, g_latent) = match loss {
            Loss::WeightedBce { pos_weight } if ends_in_sigmoid => {
                let (value, g) = weighted_bce_logit_grad(head.output(), target, pos_weight)?;
                let (grads, gl) = self.head.backward_below(&head, n_head - 1, &g, true)?;
                (value, grads, gl)
            }
            _ => {
                let (value, g) = loss.eval(head.output(), target)?;
                let (grads, gl) = self.head.backward(&head, &g, true)?;
                (value, grads, gl)
            }
        };
        let g_latent = g_latent.expect("requested latent gradient");
        let (enc_grads, _) = self.encoder.backward(&enc, &g_latent, false)?;
        Ok((value, enc_grads.concat(head_grads)))
    }

    pub fn loss(&self, x: &Tensor<T>, target: &Tensor<T>, loss: Loss) -> Result<f64> {
        Ok(loss.eval(&self.forward(x)?, target)?.0)
    }

    pub fn params(&self) -> Vec<&[T]> {
        let mut p = self.encoder.params();
        p.extend(self.head.params());
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<T>> {
        let mut p = self.encoder.params_mut();
        p.extend(self.head.params_mut());
        p
    }

    /// `(name, dims)` aligned with [`DeepMatchModel::params`].
    pub fn param_layout(&self) -> Vec<(String, Vec<usize>)> {
        let mut l = self.encoder.param_layout("encoder");
        l.extend(self.head.param_layout(self.head_kind.as_str()));
        l
    }

    /// Number of parameter blocks belonging to the matched-filter layer.
    pub fn input_layer_blocks(&self) -> usize {
        2
    }
}

/// Writes a kernel bank into the first encoder layer.
fn load_kernels<T: Scalar>(encoder: &mut Network<T>, bank: &KernelBank) -> Result<()> {
    let layer = &mut encoder.layers[0];
    let dims = layer.spec.weight_dims().expect("validated: first layer has weights");
    let values: Vec<f64> = match (bank.layout, &layer.spec) {
        (KernelLayout::Depthwise, LayerSpec::DepthwiseConv { channels, kernel_len, .. }) => {
            if bank.kernels.len() != *channels
                || bank.kernels.iter().any(|k| k.shape != (1, *kernel_len, 1))
            {
                return Err(Error::shape(format!(
                    "depthwise layer needs {channels} kernels of shape (1, {kernel_len}, 1)"
                )));
            }
            bank.kernels.iter().flat_map(|k| k.values.iter().copied()).collect()
        }
        (
            KernelLayout::FullSpatial,
            LayerSpec::Conv { in_channels, out_channels: 1, kernel_len, .. },
        ) => {
            if bank.kernels.len() != 1 || bank.kernels[0].shape != (*in_channels, *kernel_len, 1) {
                return Err(Error::shape(format!(
                    "full-spatial layer needs one kernel of shape ({in_channels}, {kernel_len}, 1)"
                )));
            }
            bank.kernels[0].values.clone()
        }
        (layout, spec) => {
            return Err(Error::shape(format!("{layout:?} kernels do not fit input layer {spec:?}")))
        }
    };
    debug_assert_eq!(values.len(), dims.iter().product::<usize>());
    layer.weight = values.into_iter().map(crate::nn::cast).collect();
    layer.bias.iter_mut().for_each(|b| *b = T::zero());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::template::{to_kernels, ErpTemplate};
    use ndarray::Array2;

    fn bank(arch: &ArchitectureConfig) -> KernelBank {
        let (k, c) = match arch.encoder[0] {
            LayerSpec::DepthwiseConv { kernel_len, channels, .. } => (kernel_len, channels),
            _ => unreachable!(),
        };
        let w = Array2::from_shape_fn((c, k), |(ch, t)| ((t + 3 * ch) as f64 * 0.05).sin());
        let t = ErpTemplate {
            fs: 250.0,
            channels: (0..c).map(|i| format!("c{i}")).collect(),
            waveforms: w,
            n_subjects_averaged: 1,
            t_start: -0.2,
        };
        to_kernels(&t, KernelLayout::Depthwise).unwrap()
    }

    #[test]
    fn default_arch_is_valid() {
        let a = ArchitectureConfig::default();
        a.validate().unwrap();
        let enc = Network::<f32>::init(&a.encoder, 0, 0).unwrap();
        assert_eq!(enc.output_shape(4, 500).unwrap(), (32, 125));
        ArchitectureConfig::tiny().validate().unwrap();
    }

    #[test]
    fn deepmf_loads_kernels_exactly() {
        let a = ArchitectureConfig::default();
        let b = bank(&a);
        let m = DeepMatchModel::<f32>::build(&a, ModelVariant::DeepMf, Some(&b), 5).unwrap();
        let expected: Vec<f32> = b.kernels.iter().flat_map(|k| k.values.iter().map(|&v| v as f32)).collect();
        assert_eq!(m.input_layer_weights(), expected.as_slice());
        assert!(m.encoder.layers[0].bias.iter().all(|v| *v == 0.0));
        assert!(DeepMatchModel::<f32>::build(&a, ModelVariant::DeepMf, None, 5).is_err());
    }

    #[test]
    fn kernel_shape_mismatch_rejected() {
        let a = ArchitectureConfig::default();
        let b = bank(&ArchitectureConfig::tiny());
        assert!(DeepMatchModel::<f32>::build(&a, ModelVariant::DeepMf, Some(&b), 5).is_err());
    }

    #[test]
    fn variants_differ_only_in_input_layer() {
        let a = ArchitectureConfig::default();
        let b = bank(&a);
        let mf = DeepMatchModel::<f32>::build(&a, ModelVariant::DeepMf, Some(&b), 9).unwrap();
        let st = DeepMatchModel::<f32>::build(&a, ModelVariant::Standard, None, 9).unwrap();
        let (pm, ps) = (mf.params(), st.params());
        assert_ne!(pm[0], ps[0]);
        for (x, y) in pm.iter().zip(&ps).skip(1) {
            assert_eq!(x, y);
        }
        let st2 = DeepMatchModel::<f32>::build(&a, ModelVariant::Standard, None, 9).unwrap();
        assert_eq!(st, st2);
    }

    #[test]
    fn standard_input_layer_std_matches_sigma() {
        let a = ArchitectureConfig::default();
        let m = DeepMatchModel::<f64>::build(&a, ModelVariant::Standard, None, 21).unwrap();
        let (_, s) = crate::timeseries::mean_std(m.input_layer_weights().iter().copied());
        assert!((s - 0.0816497).abs() < 0.05 * 0.0816497, "std {s}");
    }

    #[test]
    fn attach_detector_keeps_encoder() {
        let a = ArchitectureConfig::default();
        let m = DeepMatchModel::<f32>::build(&a, ModelVariant::Standard, None, 1).unwrap();
        let d1 = m.attach_detector(7).unwrap();
        let d2 = m.attach_detector(7).unwrap();
        assert_eq!(d1.encoder, m.encoder);
        assert_eq!(d1, d2);
        assert_eq!(d1.head_kind, HeadKind::Detector);
        assert!(d1.param_layout().iter().all(|(n, _)| !n.starts_with("decoder")));
        let x = Tensor::<f32>::zeros([2, 4, 500]);
        assert_eq!(d1.forward(&x).unwrap().shape(), [2, 1, 300]);
        assert_eq!(m.forward(&x).unwrap().shape(), [2, 4, 500]);
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("deepmf".parse::<ModelVariant>().unwrap(), ModelVariant::DeepMf);
        assert_eq!("Standard".parse::<ModelVariant>().unwrap(), ModelVariant::Standard);
        assert!("other".parse::<ModelVariant>().is_err());
    }
}
