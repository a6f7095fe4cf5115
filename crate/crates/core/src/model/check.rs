use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::arch::{ArchitectureConfig, DeepMatchModel, HeadKind, ModelVariant};
use crate::error::Result;
use crate::nn::{grad_check, GradCheckReport, Loss, Objective, Tensor};

/// A model, one batch and a loss, exposed to the finite-difference checker.
pub struct ModelObjective {
    pub model: DeepMatchModel<f64>,
    pub input: Tensor<f64>,
    pub target: Tensor<f64>,
    pub loss: Loss,
}

impl Objective for ModelObjective {
    fn param_blocks(&mut self) -> Vec<&mut Vec<f64>> {
        self.model.params_mut()
    }

    fn loss(&self) -> Result<f64> {
        self.model.loss(&self.input, &self.target, self.loss)
    }

    fn gradients(&self) -> Result<Vec<Vec<f64>>> {
        Ok(self.model.loss_and_grads(&self.input, &self.target, self.loss)?.1.blocks)
    }
}

impl ModelObjective {
    /// Random input, and a random target matching the head: Gaussian values
    /// for the decoder, sparse binary labels for the detector.
    pub fn random(arch: &ArchitectureConfig, head: HeadKind, batch: usize, seed: u64) -> Result<Self> {
        let mut model = DeepMatchModel::<f64>::build(arch, ModelVariant::Standard, None, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input = Tensor::from_fn([batch, arch.input_channels, arch.window_len_samples], |_, _, _| {
            rng.random::<f64>() * 2.0 - 1.0
        });
        let (target, loss) = match head {
            HeadKind::Decoder => (
                Tensor::from_fn(input.shape(), |_, _, _| rng.random::<f64>() * 2.0 - 1.0),
                Loss::Mse,
            ),
            HeadKind::Detector => {
                model = model.attach_detector(seed)?;
                (
                    Tensor::from_fn([batch, 1, arch.output_len], |_, _, _| {
                        if rng.random::<f64>() < 0.1 { 1.0 } else { 0.0 }
                    }),
                    Loss::WeightedBce { pos_weight: 3.0 },
                )
            }
        };
        Ok(Self { model, input, target, loss })
    }
}

/// Checks both training graphs (encoder–decoder with MSE, encoder–detector
/// with weighted BCE) against central differences. `max_coords` bounds the
/// number of sampled coordinates per graph.
pub fn check_model_gradients(
    arch: &ArchitectureConfig,
    max_coords: Option<usize>,
    seed: u64,
) -> Result<Vec<(HeadKind, GradCheckReport)>> {
    [HeadKind::Decoder, HeadKind::Detector]
        .into_iter()
        .map(|head| {
            let mut obj = ModelObjective::random(arch, head, 2, seed)?;
            Ok((head, grad_check(&mut obj, 1e-5, max_coords, seed)?))
        })
        .collect()
}
