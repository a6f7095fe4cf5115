use serde::{Deserialize, Serialize};

use super::{cast, Scalar};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moment estimates for a list of parameter blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig, block_sizes: &[usize]) -> Self {
        Self {
            config,
            step: 0,
            m: block_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: block_sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// One bias-corrected Adam update. Blocks whose `trainable` flag is
    /// false are left untouched.
    pub fn step<T: Scalar>(
        &mut self,
        params: &mut [&mut Vec<T>],
        grads: &[Vec<T>],
        trainable: Option<&[bool]>,
    ) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::shape(format!(
                "optimizer tracks {} blocks, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.m[i].len() || g.len() != self.m[i].len() {
                return Err(Error::shape(format!("block {i} size changed")));
            }
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            if trainable.is_some_and(|t| !t[i]) {
                continue;
            }
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for j in 0..p.len() {
                let gj = g[j].to_f64().unwrap_or(f64::NAN);
                m[j] = beta1 * m[j] + (1.0 - beta1) * gj;
                v[j] = beta2 * v[j] + (1.0 - beta2) * gj * gj;
                let update = lr * (m[j] / bc1) / ((v[j] / bc2).sqrt() + eps);
                p[j] = p[j] - cast::<f64, T>(update);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        for g in [-3.0, -1e-3, 0.5, 42.0] {
            let mut p = vec![1.0f64; 3];
            let mut st = AdamState::new(AdamConfig::default(), &[3]);
            st.step(&mut [&mut p], &[vec![g; 3]], None).unwrap();
            for v in &p {
                assert!((v - 1.0 + 1e-3 * f64::signum(g)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn zero_gradient_keeps_params() {
        let mut p = vec![0.25f32, -4.0];
        let mut st = AdamState::new(AdamConfig::default(), &[2]);
        for _ in 0..5 {
            st.step(&mut [&mut p], &[vec![0.0, 0.0]], None).unwrap();
        }
        assert_eq!(p, vec![0.25, -4.0]);
    }

    #[test]
    fn frozen_blocks_untouched() {
        let mut a = vec![1.0f64];
        let mut b = vec![1.0f64];
        let mut st = AdamState::new(AdamConfig::default(), &[1, 1]);
        st.step(&mut [&mut a, &mut b], &[vec![1.0], vec![1.0]], Some(&[false, true])).unwrap();
        assert_eq!(a, vec![1.0]);
        assert!(b[0] < 1.0);
    }

    #[test]
    fn size_mismatch_is_an_error() {
        let mut p = vec![1.0f64; 2];
        let mut st = AdamState::new(AdamConfig::default(), &[3]);
        assert!(st.step(&mut [&mut p], &[vec![0.0; 2]], None).is_err());
    }
}
