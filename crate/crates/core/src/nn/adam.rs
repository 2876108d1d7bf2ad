//! Adam optimizer with bias-corrected moment estimates.

use crate::error::{Error, Result};
use crate::nn::mlp::{Gradients, Mlp};

/// Optimizer state for one network: first/second moment buffers and the
/// step count.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Gradients,
    v: Gradients,
    t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    /// Fresh state with the customary defaults `beta1 = 0.9`,
    /// `beta2 = 0.999`, `eps = 1e-8`.
    pub fn new(like: &Mlp) -> Self {
        AdamState {
            m: Gradients::zeros_like(like),
            v: Gradients::zeros_like(like),
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One update of `mlp`'s parameters from `grads` at learning rate `lr`.
    ///
    /// Moments are updated as `m = b1*m + (1-b1)*g`, `v = b2*v + (1-b2)*g^2`
    /// and bias-corrected by `1 - b^t`; the parameter step is
    /// `lr * m_hat / (sqrt(v_hat) + eps)`.
    pub fn step(&mut self, mlp: &mut Mlp, grads: &Gradients, lr: f64) -> Result<()> {
        if !grads.is_finite() {
            return Err(Error::Training {
                message: "non-finite gradient in optimizer step".to_string(),
                epoch: 0,
                batch: 0,
            });
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (layer_idx, layer) in mlp.layers_mut().iter_mut().enumerate() {
            let gw = grads.weights[layer_idx].data();
            let mw = self.m.weights[layer_idx].data_mut();
            let vw = self.v.weights[layer_idx].data_mut();
            for (((p, &g), m), v) in layer
                .weight
                .data_mut()
                .iter_mut()
                .zip(gw.iter())
                .zip(mw.iter_mut())
                .zip(vw.iter_mut())
            {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
            let gb = &grads.biases[layer_idx];
            let mb = &mut self.m.biases[layer_idx];
            let vb = &mut self.v.biases[layer_idx];
            for (((p, &g), m), v) in layer
                .bias
                .iter_mut()
                .zip(gb.iter())
                .zip(mb.iter_mut())
                .zip(vb.iter_mut())
            {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
