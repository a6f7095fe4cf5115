use super::init::{he_uniform, layer_rng};
use super::layer::{Layer, LayerSpec};
use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Activations recorded by a forward pass: the input followed by every
/// layer output.
#[derive(Debug, Clone)]
pub struct Tape<T> {
    acts: Vec<Tensor<T>>,
}

impl<T: Scalar> Tape<T> {
    pub fn output(&self) -> &Tensor<T> {
        self.acts.last().expect("tape holds the input at least")
    }

    pub fn input(&self) -> &Tensor<T> {
        &self.acts[0]
    }

    /// Output of layer `i`.
    pub fn activation(&self, i: usize) -> &Tensor<T> {
        &self.acts[i + 1]
    }
}

/// Parameter gradients, one block per weight and per bias in
/// [`Network::params`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads<T> {
    pub blocks: Vec<Vec<T>>,
}

impl<T: Scalar> Grads<T> {
    pub fn zeros_like(params: &[&[T]]) -> Self {
        Grads { blocks: params.iter().map(|p| vec![T::zero(); p.len()]).collect() }
    }

    pub fn add_assign(&mut self, other: &Grads<T>) {
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            for (x, y) in a.iter_mut().zip(b) {
                *x = *x + *y;
            }
        }
    }

    pub fn scale(&mut self, s: T) {
        self.blocks.iter_mut().flatten().for_each(|v| *v = *v * s);
    }

    pub fn concat(mut self, other: Grads<T>) -> Grads<T> {
        self.blocks.extend(other.blocks);
        self
    }
}

/// A feed-forward stack of layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    pub layers: Vec<Layer<T>>,
}

impl<T: Scalar> Network<T> {
    /// He-uniform weights and zero biases. Layer `i` draws from stream
    /// `stream_base + i` of `seed`.
    pub fn init(specs: &[LayerSpec], seed: u64, stream_base: u64) -> Result<Self> {
        let mut layers = Vec::with_capacity(specs.len());
        for (i, spec) in specs.iter().enumerate() {
            spec.validate()?;
            let mut layer = Layer::zeros(spec.clone());
            if let Some((h, w, c)) = spec.kernel_dims() {
                let mut rng = layer_rng(seed, stream_base + i as u64);
                layer.weight = he_uniform(layer.weight.len(), h, w, c, &mut rng);
            }
            layers.push(layer);
        }
        Ok(Network { layers })
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec.clone()).collect()
    }

    /// Output `(channels, length)` for an input of `(channels, length)`.
    pub fn output_shape(&self, channels: usize, len: usize) -> Result<(usize, usize)> {
        self.layers.iter().try_fold((channels, len), |(c, l), layer| layer.spec.output_shape(c, l))
    }

    pub fn params(&self) -> Vec<&[T]> {
        self.layers
            .iter()
            .filter(|l| l.spec.has_params())
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<T>> {
        self.layers
            .iter_mut()
            .filter(|l| l.spec.has_params())
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    /// `(name, dims)` for every block of [`Network::params`].
    pub fn param_layout(&self, prefix: &str) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            if let Some(dims) = l.spec.weight_dims() {
                out.push((format!("{prefix}.{i}.weight"), dims.to_vec()));
                out.push((format!("{prefix}.{i}.bias"), vec![l.spec.bias_len()]));
            }
        }
        out
    }

    pub fn n_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network { layers: self.layers.iter().map(Layer::cast).collect() }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut cur = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            cur = layer.forward(&cur)?;
            cur.check_finite(&format!("layer {i} output"))?;
        }
        Ok(cur)
    }

    pub fn forward_traced(&self, x: &Tensor<T>) -> Result<Tape<T>> {
        x.check_finite("network input")?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.clone());
        for (i, layer) in self.layers.iter().enumerate() {
            let y = layer.forward(acts.last().expect("non-empty"))?;
            y.check_finite(&format!("layer {i} output"))?;
            acts.push(y);
        }
        Ok(Tape { acts })
    }

    /// Reverse pass over `tape` given `dL/d(output)`. The input gradient is
    /// only computed when `need_input` is set.
    pub fn backward(
        &self,
        tape: &Tape<T>,
        grad_out: &Tensor<T>,
        need_input: bool,
    ) -> Result<(Grads<T>, Option<Tensor<T>>)> {
        self.backward_below(tape, self.layers.len(), grad_out, need_input)
    }

    /// Like [`Network::backward`], but starts from `dL/d(activation top)`,
    /// the output of layer `top − 1`. Layers at or above `top` must be
    /// parameter-free.
    pub fn backward_below(
        &self,
        tape: &Tape<T>,
        top: usize,
        grad_top: &Tensor<T>,
        need_input: bool,
    ) -> Result<(Grads<T>, Option<Tensor<T>>)> {
        if tape.acts.len() != self.layers.len() + 1 {
            return Err(Error::shape("tape was recorded on a different network"));
        }
        if top > self.layers.len() || self.layers[top..].iter().any(|l| l.spec.has_params()) {
            return Err(Error::invalid(format!("cannot start the reverse pass below layer {top}")));
        }
        let mut blocks: Vec<Vec<T>> = Vec::new();
        let mut g = grad_top.clone();
        let mut input_grad = None;
        for (i, layer) in self.layers[..top].iter().enumerate().rev() {
            let want_input = i > 0 || need_input;
            let lg = layer.backward(&tape.acts[i], &tape.acts[i + 1], &g, want_input)?;
            if layer.spec.has_params() {
                blocks.push(lg.bias);
                blocks.push(lg.weight);
            }
            match lg.input {
                Some(gx) if i > 0 => g = gx,
                other => input_grad = other,
            }
        }
        blocks.reverse();
        Ok((Grads { blocks }, input_grad))
    }
}

/// Stateful forward/backward pairing for callers that do not want to hold
/// the tape themselves.
pub struct GradSession<'a, T> {
    net: &'a Network<T>,
    tape: Option<Tape<T>>,
}

impl<'a, T: Scalar> GradSession<'a, T> {
    pub fn new(net: &'a Network<T>) -> Self {
        Self { net, tape: None }
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Result<&Tensor<T>> {
        self.tape = Some(self.net.forward_traced(x)?);
        Ok(self.tape.as_ref().expect("just set").output())
    }

    pub fn backward(&self, grad_out: &Tensor<T>) -> Result<(Grads<T>, Tensor<T>)> {
        let tape = self.tape.as_ref().ok_or(Error::NoForwardPass)?;
        let (grads, gx) = self.net.backward(tape, grad_out, true)?;
        Ok((grads, gx.expect("input gradient requested")))
    }
}
