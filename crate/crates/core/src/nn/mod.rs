//! Multilayer perceptrons with hand-written reverse-mode gradients.
//!
//! Only MLP-shaped graphs are needed here, so there is no general tape:
//! [`Mlp::forward_with`] records per-layer pre-activations, activations
//! and dropout masks into a [`Cache`], and [`Mlp::backward`] replays them
//! in reverse. Optimization is Adam with bias correction; controller
//! outputs are squashed by [`bound_output`].

mod adam;
pub(crate) mod checkpoint;
mod mlp;

pub use adam::AdamState;
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_SCHEMA};
pub use mlp::{Activation, Cache, Gradients, Layer, Mlp};

/// Dropout behavior for a forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropoutMode {
    /// No units are dropped; the pass is deterministic.
    Off,
    /// Inverted dropout for training: hidden units are zeroed with
    /// probability `p` and survivors are scaled by `1/(1-p)`.
    Train,
    /// Same stochastic pass as `Train`, used at evaluation time to sample
    /// model uncertainty (Monte-Carlo dropout).
    McInference,
}

/// Dropout probability plus mode.
#[derive(Debug, Clone, Copy)]
pub struct DropoutSpec {
    pub p: f64,
    pub mode: DropoutMode,
}

impl DropoutSpec {
    pub const OFF: DropoutSpec = DropoutSpec {
        p: 0.0,
        mode: DropoutMode::Off,
    };

    pub fn train(p: f64) -> Self {
        DropoutSpec {
            p,
            mode: DropoutMode::Train,
        }
    }

    pub fn mc_inference(p: f64) -> Self {
        DropoutSpec {
            p,
            mode: DropoutMode::McInference,
        }
    }

    /// True when a pass under this spec actually draws masks.
    pub fn active(&self) -> bool {
        self.p > 0.0 && self.mode != DropoutMode::Off
    }
}

/// Squashes `y` element-wise into `(-cap_i, cap_i)` via `cap * tanh(y/cap)`.
///
/// The bound is strict for every finite input: `tanh` saturates to 1.0 in
/// floating point for large arguments, so the factor is clamped just
/// inside the open interval.
pub fn bound_output(y: &[f64], caps: &[f64]) -> Vec<f64> {
    debug_assert_eq!(y.len(), caps.len());
    let limit = 1.0 - f64::EPSILON;
    y.iter()
        .zip(caps.iter())
        .map(|(&yi, &cap)| {
            debug_assert!(cap > 0.0, "output bound must be positive");
            let t = (yi / cap).tanh().clamp(-limit, limit);
            cap * t
        })
        .collect()
}

/// Vector-Jacobian product of [`bound_output`]: `upstream * d(out)/dy`,
/// with `d(out_i)/dy_i = 1 - tanh^2(y_i / cap_i)`.
pub fn bound_output_vjp(y: &[f64], caps: &[f64], upstream: &[f64]) -> Vec<f64> {
    debug_assert_eq!(y.len(), caps.len());
    debug_assert_eq!(y.len(), upstream.len());
    y.iter()
        .zip(caps.iter())
        .zip(upstream.iter())
        .map(|((&yi, &cap), &up)| {
            let t = (yi / cap).tanh();
            up * (1.0 - t * t)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_output_matches_scaled_tanh() {
        // At y = cap the squash evaluates to cap * tanh(1).
        let out = bound_output(&[10.0], &[10.0]);
        assert!((out[0] - 10.0 * 1.0f64.tanh()).abs() < 1e-15);
        assert!((out[0] - 7.615941559557649).abs() < 1e-12);
        // Near the origin the squash has unit slope: small raw outputs
        // pass through almost unchanged.
        let small = bound_output(&[0.01], &[10.0]);
        assert!((small[0] - 0.01).abs() < 1e-8);
    }

    #[test]
    fn bound_output_is_strict_for_huge_inputs() {
        for &cap in &[1.0, 10.0, 50.0, std::f64::consts::PI / 6.0] {
            for &y in &[1e3, 1e9, 1e300, -1e3, -1e300, f64::MAX, f64::MIN] {
                let out = bound_output(&[y], &[cap]);
                assert!(
                    out[0].abs() < cap,
                    "|bound({y})| = {} not strictly below {cap}",
                    out[0].abs()
                );
            }
        }
    }

    #[test]
    fn bound_output_is_odd_and_monotone_near_zero() {
        let caps = [2.0];
        let a = bound_output(&[0.3], &caps)[0];
        let b = bound_output(&[-0.3], &caps)[0];
        assert!((a + b).abs() < 1e-15);
        assert!(bound_output(&[0.0], &caps)[0] == 0.0);
        assert!(bound_output(&[0.5], &caps)[0] > a);
    }

    #[test]
    fn bound_vjp_matches_finite_difference()  {
        let y = [0.7, -1.3, 4.0];
        let caps = [10.0, 2.0, 50.0];
        let up = [1.0, 1.0, 1.0];
        let grad = bound_output_vjp(&y, &caps, &up);
        let h = 1e-6;
        for i in 0..y.len() {
            let mut yp = y;
            yp[i] += h;
            let mut ym = y;
            ym[i] -= h;
            let fd =
                (bound_output(&yp, &caps)[i] - bound_output(&ym, &caps)[i]) / (2.0 * h);
            assert!(
                (grad[i] - fd).abs() / fd.abs().max(1e-9) < 1e-6,
                "component {i}: analytic {} vs fd {fd}",
                grad[i]
            );
        }
    }
}
