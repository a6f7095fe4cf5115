use serde::{Deserialize, Serialize};

use super::{cast, Scalar, Tensor};
use crate::error::{Error, Result};

/// Probabilities are clamped to `[BCE_EPS, 1 - BCE_EPS]` inside the BCE.
pub const BCE_EPS: f64 = 1e-7;

fn same_shape<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<()> {
    if a.shape() == b.shape() {
        Ok(())
    } else {
        Err(Error::shape(format!("prediction {:?} vs target {:?}", a.shape(), b.shape())))
    }
}

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse_loss<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(f64, Tensor<T>)> {
    same_shape(pred, target)?;
    let n = pred.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad = Tensor::zeros(pred.shape());
    let scale = 2.0 / n;
    for ((g, &p), &t) in grad.data_mut().iter_mut().zip(pred.data()).zip(target.data()) {
        let d = p.to_f64().unwrap_or(f64::NAN) - t.to_f64().unwrap_or(f64::NAN);
        loss += d * d;
        *g = cast::<f64, T>(scale * d);
    }
    Ok((loss / n, grad))
}

/// Mean of `-[w·y·ln p + (1-y)·ln(1-p)]` and its gradient with respect to `p`.
///
/// The gradient is evaluated at the clamped probability and passed through
/// the clamp unchanged, so saturated wrong predictions still get a signal.
pub fn weighted_bce_loss<T: Scalar>(
    p: &Tensor<T>,
    y: &Tensor<T>,
    pos_weight: f64,
) -> Result<(f64, Tensor<T>)> {
    same_shape(p, y)?;
    if !(pos_weight > 0.0 && pos_weight.is_finite()) {
        return Err(Error::invalid(format!("positive class weight must be > 0, got {pos_weight}")));
    }
    let n = p.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad = Tensor::zeros(p.shape());
    for ((g, &pv), &yv) in grad.data_mut().iter_mut().zip(p.data()).zip(y.data()) {
        let yv = yv.to_f64().unwrap_or(f64::NAN);
        if yv != 0.0 && yv != 1.0 {
            return Err(Error::invalid(format!("BCE target {yv} not in {{0, 1}}")));
        }
        let pc = pv.to_f64().unwrap_or(f64::NAN).clamp(BCE_EPS, 1.0 - BCE_EPS);
        loss -= pos_weight * yv * pc.ln() + (1.0 - yv) * (1.0 - pc).ln();
        *g = cast::<f64, T>(-(pos_weight * yv / pc - (1.0 - yv) / (1.0 - pc)) / n);
    }
    Ok((loss / n, grad))
}

/// Weighted BCE of `sigmoid(logit)` with the gradient taken with respect to
/// the logit: `(w·y·(p−1) + (1−y)·p) / n`. The loss value uses the same
/// clamp as [`weighted_bce_loss`]; the gradient needs none and stays nonzero
/// when the sigmoid saturates.
pub fn weighted_bce_logit_grad<T: Scalar>(
    p: &Tensor<T>,
    y: &Tensor<T>,
    pos_weight: f64,
) -> Result<(f64, Tensor<T>)> {
    let (loss, mut grad) = weighted_bce_loss(p, y, pos_weight)?;
    let n = p.len().max(1) as f64;
    for ((g, &pv), &yv) in grad.data_mut().iter_mut().zip(p.data()).zip(y.data()) {
        let (pv, yv) = (pv.to_f64().unwrap_or(f64::NAN), yv.to_f64().unwrap_or(f64::NAN));
        *g = cast::<f64, T>((pos_weight * yv * (pv - 1.0) + (1.0 - yv) * pv) / n);
    }
    Ok((loss, grad))
}

/// Training objective of a network head.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Loss {
    Mse,
    WeightedBce { pos_weight: f64 },
}

impl Loss {
    pub fn eval<T: Scalar>(&self, pred: &Tensor<T>, target: &Tensor<T>) -> Result<(f64, Tensor<T>)> {
        match *self {
            Loss::Mse => mse_loss(pred, target),
            Loss::WeightedBce { pos_weight } => weighted_bce_loss(pred, target, pos_weight),
        }
    }
}
