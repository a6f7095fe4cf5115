use ndarray::linalg::general_mat_mul;
use ndarray::{ArrayView2, ArrayViewMut2};
use serde::{Deserialize, Serialize};

use super::{axpy, cast, dot, Scalar, Tensor};
use crate::error::{Error, Result};

/// Border handling of convolution layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    /// No padding; output length `(L - k) / stride + 1`.
    Valid,
    /// Output length `ceil(L / stride)`, padding split evenly (extra on the right).
    Same,
    /// Output length `ceil(L / stride)` with exactly this many zeros on the
    /// left. Output `t` then reads inputs `t·stride - left .. t·stride - left + k`.
    Offset(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    Conv {
        in_channels: usize,
        out_channels: usize,
        kernel_len: usize,
        stride: usize,
        padding: Padding,
    },
    /// One kernel per channel, no cross-channel mixing.
    DepthwiseConv { channels: usize, kernel_len: usize, stride: usize, padding: Padding },
    /// Adjoint of a `same`-padded conv; output length `L · stride`.
    TransposedConv { in_channels: usize, out_channels: usize, kernel_len: usize, stride: usize },
    Relu,
    Sigmoid,
    ResampleLinear { target_len: usize },
}

/// `(left_pad, out_len)` of a forward convolution.
fn conv_geometry(len: usize, k: usize, stride: usize, padding: Padding) -> Result<(usize, usize)> {
    match padding {
        Padding::Valid => {
            if len < k {
                return Err(Error::shape(format!("input length {len} shorter than kernel {k}")));
            }
            Ok((0, (len - k) / stride + 1))
        }
        Padding::Same => {
            let out = len.div_ceil(stride);
            let total = ((out.max(1) - 1) * stride + k).saturating_sub(len);
            Ok((total / 2, out))
        }
        Padding::Offset(left) => {
            if left >= k {
                return Err(Error::shape(format!("left padding {left} not below kernel {k}")));
            }
            Ok((left, len.div_ceil(stride)))
        }
    }
}

impl LayerSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            LayerSpec::Conv { in_channels, out_channels, kernel_len, stride, .. } => {
                in_channels > 0 && out_channels > 0 && kernel_len > 0 && stride > 0
            }
            LayerSpec::DepthwiseConv { channels, kernel_len, stride, .. } => {
                channels > 0 && kernel_len > 0 && stride > 0
            }
            LayerSpec::TransposedConv { in_channels, out_channels, kernel_len, stride } => {
                in_channels > 0 && out_channels > 0 && kernel_len > 0 && stride > 0
            }
            LayerSpec::ResampleLinear { target_len } => target_len >= 2,
            LayerSpec::Relu | LayerSpec::Sigmoid => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid layer spec {self:?}")))
        }
    }

    /// `(channels, length)` produced from an input of `(channels, length)`.
    pub fn output_shape(&self, channels: usize, len: usize) -> Result<(usize, usize)> {
        let expect = |want: usize| {
            if channels == want {
                Ok(())
            } else {
                Err(Error::shape(format!("{self:?} expects {want} channels, got {channels}")))
            }
        };
        match *self {
            LayerSpec::Conv { in_channels, out_channels, kernel_len, stride, padding } => {
                expect(in_channels)?;
                let (_, out) = conv_geometry(len, kernel_len, stride, padding)?;
                Ok((out_channels, out))
            }
            LayerSpec::DepthwiseConv { channels: ch, kernel_len, stride, padding } => {
                expect(ch)?;
                let (_, out) = conv_geometry(len, kernel_len, stride, padding)?;
                Ok((ch, out))
            }
            LayerSpec::TransposedConv { in_channels, out_channels, stride, .. } => {
                expect(in_channels)?;
                Ok((out_channels, len * stride))
            }
            LayerSpec::Relu | LayerSpec::Sigmoid => Ok((channels, len)),
            LayerSpec::ResampleLinear { target_len } => {
                if len < 2 {
                    return Err(Error::shape("linear resampling needs at least 2 input samples"));
                }
                Ok((channels, target_len))
            }
        }
    }

    /// Weight tensor dimensions, if the layer has parameters.
    pub fn weight_dims(&self) -> Option<[usize; 3]> {
        match *self {
            LayerSpec::Conv { in_channels, out_channels, kernel_len, .. } => {
                Some([out_channels, in_channels, kernel_len])
            }
            LayerSpec::DepthwiseConv { channels, kernel_len, .. } => Some([channels, 1, kernel_len]),
            LayerSpec::TransposedConv { in_channels, out_channels, kernel_len, .. } => {
                Some([in_channels, out_channels, kernel_len])
            }
            _ => None,
        }
    }

    pub fn bias_len(&self) -> usize {
        match *self {
            LayerSpec::Conv { out_channels, .. } => out_channels,
            LayerSpec::DepthwiseConv { channels, .. } => channels,
            LayerSpec::TransposedConv { out_channels, .. } => out_channels,
            _ => 0,
        }
    }

    /// `(height, width, in_channels)` of one kernel, for variance scaling.
    pub fn kernel_dims(&self) -> Option<(usize, usize, usize)> {
        match *self {
            LayerSpec::Conv { in_channels, kernel_len, .. } => Some((1, kernel_len, in_channels)),
            LayerSpec::DepthwiseConv { kernel_len, .. } => Some((1, kernel_len, 1)),
            LayerSpec::TransposedConv { in_channels, kernel_len, .. } => {
                Some((1, kernel_len, in_channels))
            }
            _ => None,
        }
    }

    pub fn has_params(&self) -> bool {
        self.weight_dims().is_some()
    }
}

/// One layer and its parameters. Weights are stored flat in the order given
/// by [`LayerSpec::weight_dims`].
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub spec: LayerSpec,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

/// Gradients of one layer call.
pub(crate) struct LayerGrad<T> {
    pub input: Option<Tensor<T>>,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

fn view<T>(data: &[T], rows: usize, cols: usize) -> ArrayView2<'_, T> {
    ArrayView2::from_shape((rows, cols), data).expect("matrix view")
}

fn view_mut<T>(data: &mut [T], rows: usize, cols: usize) -> ArrayViewMut2<'_, T> {
    ArrayViewMut2::from_shape((rows, cols), data).expect("matrix view")
}

/// Unfolds channels `c0..c0+nc` of `x` into a `(nc·k) × (batch·out_len)` matrix.
fn im2col<T: Scalar>(
    x: &Tensor<T>,
    nc: usize,
    k: usize,
    stride: usize,
    left: usize,
    out_len: usize,
) -> Vec<T> {
    let (nb, len) = (x.batch(), x.length());
    let cols = nb * out_len;
    let mut col = vec![T::zero(); nc * k * cols];
    for c in 0..nc {
        for kk in 0..k {
            let dst = &mut col[(c * k + kk) * cols..(c * k + kk + 1) * cols];
            for b in 0..nb {
                let src = x.row(b, c);
                let d = &mut dst[b * out_len..(b + 1) * out_len];
                for (t, v) in d.iter_mut().enumerate() {
                    let p = (t * stride + kk) as isize - left as isize;
                    if p >= 0 && (p as usize) < len {
                        *v = src[p as usize];
                    }
                }
            }
        }
    }
    col
}

/// Scatter-adds a column matrix back onto a `(batch, nc, len)` tensor.
fn col2im_add<T: Scalar>(
    col: &[T],
    out: &mut Tensor<T>,
    nc: usize,
    k: usize,
    stride: usize,
    left: usize,
    col_len: usize,
) {
    let (nb, len) = (out.batch(), out.length());
    let cols = nb * col_len;
    for c in 0..nc {
        for kk in 0..k {
            let src = &col[(c * k + kk) * cols..(c * k + kk + 1) * cols];
            for b in 0..nb {
                let s = &src[b * col_len..(b + 1) * col_len];
                let dst = out.row_mut(b, c);
                for (t, v) in s.iter().enumerate() {
                    let p = (t * stride + kk) as isize - left as isize;
                    if p >= 0 && (p as usize) < len {
                        dst[p as usize] = dst[p as usize] + *v;
                    }
                }
            }
        }
    }
}

/// `(batch, ch, len)` tensor → `ch × (batch·len)` matrix.
fn to_channel_major<T: Scalar>(x: &Tensor<T>) -> Vec<T> {
    let [nb, nc, len] = x.shape();
    let mut m = vec![T::zero(); nc * nb * len];
    for c in 0..nc {
        for b in 0..nb {
            m[c * nb * len + b * len..c * nb * len + (b + 1) * len].copy_from_slice(x.row(b, c));
        }
    }
    m
}

fn from_channel_major<T: Scalar>(m: &[T], shape: [usize; 3]) -> Tensor<T> {
    let [nb, nc, len] = shape;
    let mut x = Tensor::zeros(shape);
    for c in 0..nc {
        for b in 0..nb {
            x.row_mut(b, c)
                .copy_from_slice(&m[c * nb * len + b * len..c * nb * len + (b + 1) * len]);
        }
    }
    x
}

fn linear_positions(len: usize, target: usize) -> Vec<(usize, f64)> {
    let scale = (len - 1) as f64 / (target - 1) as f64;
    (0..target)
        .map(|i| {
            let pos = i as f64 * scale;
            let j = (pos.floor() as usize).min(len - 2);
            (j, pos - j as f64)
        })
        .collect()
}

impl<T: Scalar> Layer<T> {
    /// A layer with all parameters zero.
    pub fn zeros(spec: LayerSpec) -> Self {
        let n_w = spec.weight_dims().map_or(0, |d| d.iter().product());
        let n_b = spec.bias_len();
        Layer { spec, weight: vec![T::zero(); n_w], bias: vec![T::zero(); n_b] }
    }

    pub fn cast<U: Scalar>(&self) -> Layer<U> {
        Layer {
            spec: self.spec.clone(),
            weight: self.weight.iter().map(|&v| cast(v)).collect(),
            bias: self.bias.iter().map(|&v| cast(v)).collect(),
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (out_c, out_len) = self.spec.output_shape(x.channels(), x.length())?;
        let nb = x.batch();
        let y = match self.spec {
            LayerSpec::Conv { in_channels, out_channels, kernel_len: k, stride, padding } => {
                let (left, _) = conv_geometry(x.length(), k, stride, padding)?;
                let col = im2col(x, in_channels, k, stride, left, out_len);
                let mut m = vec![T::zero(); out_channels * nb * out_len];
                general_mat_mul(
                    T::one(),
                    &view(&self.weight, out_channels, in_channels * k),
                    &view(&col, in_channels * k, nb * out_len),
                    T::zero(),
                    &mut view_mut(&mut m, out_channels, nb * out_len),
                );
                for (o, row) in m.chunks_mut(nb * out_len).enumerate() {
                    row.iter_mut().for_each(|v| *v = *v + self.bias[o]);
                }
                from_channel_major(&m, [nb, out_c, out_len])
            }
            LayerSpec::DepthwiseConv { channels, kernel_len: k, stride, padding } => {
                let (left, _) = conv_geometry(x.length(), k, stride, padding)?;
                let span = (out_len - 1) * stride + k;
                let mut y = Tensor::zeros([nb, channels, out_len]);
                let mut xpad = vec![T::zero(); span];
                for b in 0..nb {
                    for c in 0..channels {
                        pad_row(x.row(b, c), left, &mut xpad);
                        let w = &self.weight[c * k..(c + 1) * k];
                        let bias = self.bias[c];
                        for (t, v) in y.row_mut(b, c).iter_mut().enumerate() {
                            *v = dot(w, &xpad[t * stride..t * stride + k]) + bias;
                        }
                    }
                }
                y
            }
            LayerSpec::TransposedConv { in_channels, out_channels, kernel_len: k, stride } => {
                let len = x.length();
                let left = ((len - 1) * stride + k).saturating_sub(out_len) / 2;
                let xm = to_channel_major(x);
                let mut col = vec![T::zero(); out_channels * k * nb * len];
                general_mat_mul(
                    T::one(),
                    &view(&self.weight, in_channels, out_channels * k).t(),
                    &view(&xm, in_channels, nb * len),
                    T::zero(),
                    &mut view_mut(&mut col, out_channels * k, nb * len),
                );
                let mut y = Tensor::zeros([nb, out_channels, out_len]);
                col2im_add(&col, &mut y, out_channels, k, stride, left, len);
                for b in 0..nb {
                    for o in 0..out_channels {
                        let bias = self.bias[o];
                        y.row_mut(b, o).iter_mut().for_each(|v| *v = *v + bias);
                    }
                }
                y
            }
            LayerSpec::Relu => x.map(|v| if v > T::zero() { v } else { T::zero() }),
            LayerSpec::Sigmoid => x.map(|v| T::one() / (T::one() + (-v).exp())),
            LayerSpec::ResampleLinear { target_len } => {
                let pos = linear_positions(x.length(), target_len);
                let mut y = Tensor::zeros([nb, x.channels(), target_len]);
                for b in 0..nb {
                    for c in 0..x.channels() {
                        let src = x.row(b, c);
                        for (v, &(j, f)) in y.row_mut(b, c).iter_mut().zip(&pos) {
                            let f: T = cast(f);
                            *v = (T::one() - f) * src[j] + f * src[j + 1];
                        }
                    }
                }
                y
            }
        };
        debug_assert_eq!(y.shape(), [nb, out_c, out_len]);
        Ok(y)
    }

    /// Gradients given the layer input `x`, its output `y` and `dL/dy`.
    pub(crate) fn backward(
        &self,
        x: &Tensor<T>,
        y: &Tensor<T>,
        gy: &Tensor<T>,
        need_input: bool,
    ) -> Result<LayerGrad<T>> {
        if gy.shape() != y.shape() {
            return Err(Error::shape(format!(
                "output gradient {:?} vs output {:?}",
                gy.shape(),
                y.shape()
            )));
        }
        let nb = x.batch();
        let out_len = y.length();
        let mut gw = vec![T::zero(); self.weight.len()];
        let mut gb = vec![T::zero(); self.bias.len()];
        let input = match self.spec {
            LayerSpec::Conv { in_channels, out_channels, kernel_len: k, stride, padding } => {
                let (left, _) = conv_geometry(x.length(), k, stride, padding)?;
                let col = im2col(x, in_channels, k, stride, left, out_len);
                let g = to_channel_major(gy);
                general_mat_mul(
                    T::one(),
                    &view(&g, out_channels, nb * out_len),
                    &view(&col, in_channels * k, nb * out_len).t(),
                    T::zero(),
                    &mut view_mut(&mut gw, out_channels, in_channels * k),
                );
                for (o, row) in g.chunks(nb * out_len).enumerate() {
                    gb[o] = row.iter().copied().sum();
                }
                need_input.then(|| {
                    let mut gcol = vec![T::zero(); col.len()];
                    general_mat_mul(
                        T::one(),
                        &view(&self.weight, out_channels, in_channels * k).t(),
                        &view(&g, out_channels, nb * out_len),
                        T::zero(),
                        &mut view_mut(&mut gcol, in_channels * k, nb * out_len),
                    );
                    let mut gx = Tensor::zeros(x.shape());
                    col2im_add(&gcol, &mut gx, in_channels, k, stride, left, out_len);
                    gx
                })
            }
            LayerSpec::DepthwiseConv { channels, kernel_len: k, stride, padding } => {
                let (left, _) = conv_geometry(x.length(), k, stride, padding)?;
                let span = (out_len - 1) * stride + k;
                let mut xpad = vec![T::zero(); span];
                let mut gpad = vec![T::zero(); span];
                let mut gx = need_input.then(|| Tensor::zeros(x.shape()));
                for b in 0..nb {
                    for c in 0..channels {
                        pad_row(x.row(b, c), left, &mut xpad);
                        let g = gy.row(b, c);
                        let gwc = &mut gw[c * k..(c + 1) * k];
                        if stride == 1 {
                            for (kk, v) in gwc.iter_mut().enumerate() {
                                *v = *v + dot(g, &xpad[kk..kk + out_len]);
                            }
                        } else {
                            for (t, &gt) in g.iter().enumerate() {
                                axpy(gt, &xpad[t * stride..t * stride + k], gwc);
                            }
                        }
                        gb[c] = gb[c] + g.iter().copied().sum();
                        if let Some(gx) = gx.as_mut() {
                            gpad.iter_mut().for_each(|v| *v = T::zero());
                            let w = &self.weight[c * k..(c + 1) * k];
                            for (t, &gt) in g.iter().enumerate() {
                                axpy(gt, w, &mut gpad[t * stride..t * stride + k]);
                            }
                            for (p, v) in gx.row_mut(b, c).iter_mut().enumerate() {
                                if p + left < span {
                                    *v = gpad[p + left];
                                }
                            }
                        }
                    }
                }
                gx
            }
            LayerSpec::TransposedConv { in_channels, out_channels, kernel_len: k, stride } => {
                let len = x.length();
                let left = ((len - 1) * stride + k).saturating_sub(out_len) / 2;
                let gcol = im2col(gy, out_channels, k, stride, left, len);
                let xm = to_channel_major(x);
                general_mat_mul(
                    T::one(),
                    &view(&xm, in_channels, nb * len),
                    &view(&gcol, out_channels * k, nb * len).t(),
                    T::zero(),
                    &mut view_mut(&mut gw, in_channels, out_channels * k),
                );
                for b in 0..nb {
                    for (o, v) in gb.iter_mut().enumerate() {
                        *v = *v + gy.row(b, o).iter().copied().sum();
                    }
                }
                need_input.then(|| {
                    let mut gxm = vec![T::zero(); in_channels * nb * len];
                    general_mat_mul(
                        T::one(),
                        &view(&self.weight, in_channels, out_channels * k),
                        &view(&gcol, out_channels * k, nb * len),
                        T::zero(),
                        &mut view_mut(&mut gxm, in_channels, nb * len),
                    );
                    from_channel_major(&gxm, x.shape())
                })
            }
            LayerSpec::Relu => need_input.then(|| {
                let mut gx = gy.clone();
                for (g, &v) in gx.data_mut().iter_mut().zip(x.data()) {
                    if v <= T::zero() {
                        *g = T::zero();
                    }
                }
                gx
            }),
            LayerSpec::Sigmoid => need_input.then(|| {
                let mut gx = gy.clone();
                for (g, &s) in gx.data_mut().iter_mut().zip(y.data()) {
                    *g = *g * s * (T::one() - s);
                }
                gx
            }),
            LayerSpec::ResampleLinear { target_len } => need_input.then(|| {
                let pos = linear_positions(x.length(), target_len);
                let mut gx = Tensor::zeros(x.shape());
                for b in 0..nb {
                    for c in 0..x.channels() {
                        let g = gy.row(b, c);
                        let dst = gx.row_mut(b, c);
                        for (&gt, &(j, f)) in g.iter().zip(&pos) {
                            let f: T = cast(f);
                            dst[j] = dst[j] + (T::one() - f) * gt;
                            dst[j + 1] = dst[j + 1] + f * gt;
                        }
                    }
                }
                gx
            }),
        };
        Ok(LayerGrad { input, weight: gw, bias: gb })
    }
}

/// Copies `src` into `dst` shifted right by `left`, zero elsewhere.
fn pad_row<T: Scalar>(src: &[T], left: usize, dst: &mut [T]) {
    dst.iter_mut().for_each(|v| *v = T::zero());
    let n = src.len().min(dst.len().saturating_sub(left));
    dst[left..left + n].copy_from_slice(&src[..n]);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conv(w: Vec<f64>, k: usize, padding: Padding) -> Layer<f64> {
        Layer {
            spec: LayerSpec::Conv { in_channels: 1, out_channels: 1, kernel_len: k, stride: 1, padding },
            weight: w,
            bias: vec![0.0],
        }
    }

    fn t1(v: &[f64]) -> Tensor<f64> {
        Tensor::new([1, 1, v.len()], v.to_vec()).unwrap()
    }

    #[test]
    fn valid_conv_sums_neighbours() {
        let y = conv(vec![1.0, 1.0], 2, Padding::Valid).forward(&t1(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(y.data(), &[3.0, 5.0]);
    }

    #[test]
    fn identity_kernel() {
        let x = t1(&[4.0, -1.0, 2.5]);
        let y = conv(vec![1.0], 1, Padding::Valid).forward(&x).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn cross_correlation_convention() {
        // No kernel flip: an impulse at the start only meets w[0].
        let y = conv(vec![1.0, 2.0], 2, Padding::Valid).forward(&t1(&[1.0, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(y.data(), &[1.0, 0.0, 0.0]);
        let y = conv(vec![1.0, 2.0], 2, Padding::Valid).forward(&t1(&[0.0, 0.0, 0.0, 1.0])).unwrap();
        assert_eq!(y.data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn same_padding_preserves_length() {
        for len in 1..=64 {
            for k in [1, 2, 3, 8, 15] {
                let x = Tensor::<f64>::from_fn([1, 1, len], |_, _, t| t as f64);
                let y = conv(vec![0.5; k], k, Padding::Same).forward(&x).unwrap();
                assert_eq!(y.length(), len, "len {len} k {k}");
                let dw = Layer {
                    spec: LayerSpec::DepthwiseConv { channels: 1, kernel_len: k, stride: 1, padding: Padding::Same },
                    weight: vec![0.5; k],
                    bias: vec![0.0],
                };
                assert_eq!(dw.forward(&x).unwrap(), y);
            }
        }
    }

    #[test]
    fn offset_padding_anchors_kernel() {
        // With left padding 1, output t sees x[t-1], x[t], x[t+1].
        let l = conv(vec![0.0, 0.0, 1.0], 3, Padding::Offset(1));
        let y = l.forward(&t1(&[1.0, 2.0, 3.0, 4.0])).unwrap();
        assert_eq!(y.data(), &[2.0, 3.0, 4.0, 0.0]);
    }

    #[test]
    fn strided_same_and_transposed_lengths() {
        let spec = LayerSpec::Conv { in_channels: 4, out_channels: 16, kernel_len: 15, stride: 2, padding: Padding::Same };
        assert_eq!(spec.output_shape(4, 500).unwrap(), (16, 250));
        let t = LayerSpec::TransposedConv { in_channels: 32, out_channels: 16, kernel_len: 15, stride: 2 };
        assert_eq!(t.output_shape(32, 125).unwrap(), (16, 250));
        assert!(t.output_shape(31, 125).is_err());
    }

    #[test]
    fn transposed_conv_is_adjoint_of_same_conv() {
        // <conv(u), v> == <u, convT(v)> with shared weights and zero bias.
        let (ci, co, k, s) = (3usize, 2usize, 5usize, 2usize);
        let w: Vec<f64> = (0..co * ci * k).map(|i| ((i * 37 % 11) as f64 - 5.0) / 7.0).collect();
        let c = Layer {
            spec: LayerSpec::Conv { in_channels: ci, out_channels: co, kernel_len: k, stride: s, padding: Padding::Same },
            weight: w.clone(),
            bias: vec![0.0; co],
        };
        let tc = Layer {
            spec: LayerSpec::TransposedConv { in_channels: co, out_channels: ci, kernel_len: k, stride: s },
            weight: w,
            bias: vec![0.0; ci],
        };
        let u = Tensor::<f64>::from_fn([2, ci, 12], |b, c, t| ((b + 2 * c + 3 * t) as f64).sin());
        let v = Tensor::<f64>::from_fn([2, co, 6], |b, c, t| ((b * 5 + c + t) as f64).cos());
        let cu = c.forward(&u).unwrap();
        let tv = tc.forward(&v).unwrap();
        let lhs: f64 = cu.data().iter().zip(v.data()).map(|(a, b)| a * b).sum();
        let rhs: f64 = u.data().iter().zip(tv.data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
    }

    #[test]
    fn resample_linear_cases() {
        let l = Layer::<f64>::zeros(LayerSpec::ResampleLinear { target_len: 3 });
        assert_eq!(l.forward(&t1(&[0.0, 2.0])).unwrap().data(), &[0.0, 1.0, 2.0]);
        let same = Layer::<f64>::zeros(LayerSpec::ResampleLinear { target_len: 4 });
        let x = t1(&[1.0, -2.0, 3.0, 0.5]);
        assert_eq!(same.forward(&x).unwrap(), x);
        let up = Layer::<f64>::zeros(LayerSpec::ResampleLinear { target_len: 9 });
        assert!(up.forward(&t1(&[2.5; 4])).unwrap().data().iter().all(|v| (*v - 2.5).abs() < 1e-15));
        assert!(up.forward(&t1(&[1.0])).is_err());
    }

    #[test]
    fn relu_gradient_zero_for_negative_input() {
        let l = Layer::<f64>::zeros(LayerSpec::Relu);
        let x = t1(&[-1.0, 2.0]);
        let y = l.forward(&x).unwrap();
        let g = l.backward(&x, &y, &t1(&[1.0, 1.0]), true).unwrap();
        assert_eq!(g.input.unwrap().data(), &[0.0, 1.0]);
    }
}
