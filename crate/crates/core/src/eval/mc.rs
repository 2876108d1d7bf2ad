//! Monte-Carlo dropout robustness maps.
//!
//! With dropout left on at evaluation time, each rollout samples one
//! plausible controller from the training posterior. Repeating rollouts
//! from the same start and counting how many converge gives an empirical
//! convergence probability per start; mapped over a set of starts it
//! shows where the learned controller is robust rather than merely
//! nominally stable.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::nn::DropoutSpec;
use crate::plants::Plant;
use crate::rng::Rng;
use crate::stability::StabilityConfig;
use crate::train::Controller;

use super::roa::{classify, RoaThresholds, Verdict};
use super::sim::{simulate_closed_loop, SimConfig};

/// Empirical convergence probabilities over a set of starts.
#[derive(Debug, Clone)]
pub struct McMap {
    pub points: Vec<Vector>,
    /// `probs[i]` = fraction of stochastic rollouts from `points[i]` that
    /// converged.
    pub probs: Vec<f64>,
    pub n_mc: usize,
}

/// Runs `n_mc` dropout-perturbed rollouts from every start and records
/// the converged fraction.
///
/// Every control query inside a rollout draws fresh dropout masks, so a
/// rollout sees a control law that jitters within the model's own
/// uncertainty rather than one fixed thinned network. The verdict per
/// rollout is the region-of-attraction one; pass the `tau_v` of the
/// deterministic estimate so the probabilities are comparable with it.
///
/// Rollout `(i, j)` draws from `rng.derive(i).derive(j)`, so results are
/// independent of the worker count.
#[allow(clippy::too_many_arguments)]
pub fn mc_dropout_map(
    plant: &dyn Plant,
    controller: &Controller,
    stab: &StabilityConfig,
    sim: &SimConfig,
    points: &[Vector],
    n_mc: usize,
    dropout_p: f64,
    tau_v: f64,
    th: &RoaThresholds,
    rng: &Rng,
) -> Result<McMap> {
    sim.validate()?;
    th.validate()?;
    if points.is_empty() || n_mc == 0 {
        return Err(Error::Config(
            "need at least one start and one repetition".to_string(),
        ));
    }
    if !(0.0..1.0).contains(&dropout_p) || dropout_p == 0.0 {
        return Err(Error::Config(format!(
            "dropout probability must lie in (0, 1), got {dropout_p}"
        )));
    }
    if !(tau_v.is_finite() && tau_v > 0.0) {
        return Err(Error::Config(format!(
            "energy threshold must be positive, got {tau_v}"
        )));
    }
    let domain = plant.state_domain();
    let mask = plant.convergence_mask();
    let spec = DropoutSpec::mc_inference(dropout_p);

    let results: Vec<Result<f64>> = points
        .par_iter()
        .enumerate()
        .map(|(i, x0)| {
            let point_rng = rng.derive(i as u64);
            let mut converged = 0usize;
            for j in 0..n_mc {
                let mut sim_rng = point_rng.derive(j as u64);
                let mut policy =
                    |x: &[f64]| controller.act_with(x, &spec, Some(&mut sim_rng));
                let traj = simulate_closed_loop(plant, &mut policy, x0, stab, sim)?;
                if classify(&traj, domain, &mask, tau_v, th) == Verdict::Converged {
                    converged += 1;
                }
            }
            Ok(converged as f64 / n_mc as f64)
        })
        .collect();

    let mut probs = Vec::with_capacity(points.len());
    for r in results {
        probs.push(r?);
    }
    Ok(McMap {
        points: points.to_vec(),
        probs,
        n_mc,
    })
}
