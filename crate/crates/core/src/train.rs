//! Two-stage learning of a stabilizing controller.
//!
//! Stage 1 ([`train_ghat`]) fits the input-effect model: `g(x, u)` is
//! regressed onto `f(x, u) - f(x, 0)` from sampled derivative pairs.
//!
//! Stage 2 ([`train_controller`]) freezes `g` and jointly trains the
//! stability head and the controller so that the modeled closed loop
//! `f(x, 0) + g(x, pi(x))` tracks the decaying hypothesis `f_s(x)`.
//! The controller's raw output is squashed through a per-axis `tanh`
//! bound, so the learned policy respects the actuator limits for every
//! input, not just on the training set.
//!
//! Both stages run minibatch Adam with a per-epoch decayed learning
//! rate, optional inverted dropout, and global gradient-norm clipping.
//! Per-sample gradients inside a batch are computed in parallel but
//! merged in index order, so results are bit-identical for any worker
//! count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::nn::{bound_output, bound_output_vjp, AdamState, DropoutSpec, Gradients, Mlp};
use crate::plants::{Dataset, DynamicsSample};
use crate::rng::Rng;
use crate::stability::{fs_backward, fs_forward, StabilityConfig, StabilityHead};

// Stream ids carving the seed into independent purposes.
const STREAM_GHAT_INIT: u64 = 1;
const STREAM_HEAD_INIT: u64 = 2;
const STREAM_PI_INIT: u64 = 3;
const STREAM_SHUFFLE: u64 = 4;
const STREAM_DROPOUT_NET: u64 = 5;
const STREAM_DROPOUT_HEAD: u64 = 6;
const STREAM_DROPOUT_PI: u64 = 7;
const STREAM_VAL_MASKS: u64 = 8;

/// Optimizer and architecture settings shared by both stages.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Number of passes over the training set.
    pub epochs: usize,
    /// Minibatch size; the final batch of an epoch may be smaller.
    pub batch_size: usize,
    /// Initial learning rate.
    pub lr: f64,
    /// Per-epoch multiplicative decay: epoch `e` runs at `lr * decay^e`.
    pub lr_decay: f64,
    /// Hidden layer widths (shared by every network trained here).
    pub hidden: Vec<usize>,
    /// Dropout probability on hidden layers; zero disables dropout.
    pub dropout_p: f64,
    /// Global gradient-norm ceiling per batch.
    pub grad_clip: f64,
    /// Seed for initialization, shuffling, and dropout masks.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 300,
            batch_size: 32,
            lr: 1e-3,
            lr_decay: 0.99,
            hidden: vec![64, 64, 64],
            dropout_p: 0.0,
            grad_clip: 100.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".to_string()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".to_string()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if !(self.lr_decay.is_finite() && self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::Config(format!(
                "lr_decay must lie in (0, 1], got {}",
                self.lr_decay
            )));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Config(
                "hidden widths must be nonempty and positive".to_string(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Config(format!(
                "dropout_p must lie in [0, 1), got {}",
                self.dropout_p
            )));
        }
        if !(self.grad_clip.is_finite() && self.grad_clip > 0.0) {
            return Err(Error::Config(format!(
                "grad_clip must be positive, got {}",
                self.grad_clip
            )));
        }
        Ok(())
    }

    fn lr_at(&self, epoch: usize) -> f64 {
        self.lr * self.lr_decay.powi(epoch as i32)
    }

    fn dropout(&self) -> DropoutSpec {
        if self.dropout_p > 0.0 {
            DropoutSpec::train(self.dropout_p)
        } else {
            DropoutSpec::OFF
        }
    }
}

/// Per-epoch loss curves and the location of the best validation loss.
/// The returned networks hold the parameters from `best_epoch`, not from
/// the final epoch.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub train_losses: Vec<f64>,
    /// Stage 2 with dropout enabled evaluates these with dropout active
    /// on the controller (fixed masks); otherwise they are deterministic.
    pub val_losses: Vec<f64>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    /// Batches whose gradient norm hit the clipping ceiling.
    pub clipped_batches: usize,
    /// Seed the run was trained with, echoed for provenance.
    pub seed: u64,
}

/// Result of stage 1: the input-effect network and its loss history.
#[derive(Debug)]
pub struct GhatTraining {
    pub net: Mlp,
    pub report: TrainReport,
}

/// A trained policy: a network plus the per-axis output bound that its
/// raw output is squashed through.
#[derive(Debug, Clone)]
pub struct Controller {
    net: Mlp,
    caps: Vec<f64>,
}

impl Controller {
    pub fn new(net: Mlp, caps: Vec<f64>) -> Result<Self> {
        if caps.len() != net.output_dim() {
            return Err(Error::Config(format!(
                "{} output bounds for a network with {} outputs",
                caps.len(),
                net.output_dim()
            )));
        }
        if caps.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::Config("output bounds must be positive".to_string()));
        }
        Ok(Controller { net, caps })
    }

    /// Control input for a state; always within the per-axis bounds.
    pub fn act(&self, x: &[f64]) -> Vector {
        bound_output(&self.net.forward(x), &self.caps)
    }

    /// Like [`Controller::act`] but with an explicit dropout mode, used
    /// by Monte-Carlo dropout evaluation.
    pub fn act_with(&self, x: &[f64], dropout: &DropoutSpec, rng: Option<&mut Rng>) -> Vector {
        let cache = self.net.forward_with(x, dropout, rng);
        bound_output(cache.output(), &self.caps)
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn caps(&self) -> &[f64] {
        &self.caps
    }

    pub fn into_parts(self) -> (Mlp, Vec<f64>) {
        (self.net, self.caps)
    }
}

/// Result of stage 2: the stability head, the bounded controller, and
/// the loss history of the joint optimization.
#[derive(Debug)]
pub struct ControllerTraining {
    pub head: StabilityHead,
    pub controller: Controller,
    pub report: TrainReport,
}

fn check_datasets(train: &Dataset, val: &Dataset) -> Result<()> {
    if train.samples.is_empty() || val.samples.is_empty() {
        return Err(Error::Config("datasets must be nonempty".to_string()));
    }
    if train.state_dim() != val.state_dim() || train.input_dim() != val.input_dim() {
        return Err(Error::Config(format!(
            "train ({} states, {} inputs) and val ({} states, {} inputs) disagree",
            train.state_dim(),
            train.input_dim(),
            val.state_dim(),
            val.input_dim()
        )));
    }
    Ok(())
}

fn ghat_input(s: &DynamicsSample, u: &[f64]) -> Vector {
    let mut z = Vec::with_capacity(s.x.len() + u.len());
    z.extend_from_slice(&s.x);
    z.extend_from_slice(u);
    z
}

/// Squared-error loss of the input-effect model on one sample, plus the
/// upstream derivative `dL/d out = 2 (out - target)`.
fn ghat_sample(
    net: &Mlp,
    s: &DynamicsSample,
    dropout: &DropoutSpec,
    rng: Option<&mut Rng>,
) -> (f64, Vector, crate::nn::Cache) {
    let input = ghat_input(s, &s.u);
    let cache = net.forward_with(&input, dropout, rng);
    let out = cache.output();
    let mut upstream = Vec::with_capacity(out.len());
    let mut loss = 0.0;
    for i in 0..out.len() {
        let r = out[i] - (s.dxdt_u[i] - s.dxdt_0[i]);
        loss += r * r;
        upstream.push(2.0 * r);
    }
    (loss, upstream, cache)
}

/// Mean squared residual of the input-effect model over a sample set.
pub fn ghat_loss(net: &Mlp, samples: &[DynamicsSample]) -> f64 {
    let losses: Vec<f64> = samples
        .par_iter()
        .map(|s| ghat_sample(net, s, &DropoutSpec::OFF, None).0)
        .collect();
    losses.iter().sum::<f64>() / samples.len() as f64
}

/// Stage 1: fit `g(x, u)` to the sampled input effect `f(x, u) - f(x, 0)`.
pub fn train_ghat(train: &Dataset, val: &Dataset, cfg: &TrainConfig) -> Result<GhatTraining> {
    cfg.validate()?;
    check_datasets(train, val)?;
    let n = train.state_dim();
    let m = train.input_dim();
    let mut dims = vec![n + m];
    dims.extend_from_slice(&cfg.hidden);
    dims.push(n);

    let root = Rng::new(cfg.seed);
    let mut net = Mlp::glorot(&dims, &mut root.derive(STREAM_GHAT_INIT));
    let mut adam = AdamState::new(&net);
    let dropout = cfg.dropout();

    let mut report = TrainReport {
        train_losses: Vec::with_capacity(cfg.epochs),
        val_losses: Vec::with_capacity(cfg.epochs),
        best_epoch: 0,
        best_val_loss: f64::INFINITY,
        clipped_batches: 0,
        seed: cfg.seed,
    };
    let mut best_params = net.params_flat();

    let mut perm: Vec<usize> = (0..train.samples.len()).collect();
    for epoch in 0..cfg.epochs {
        let mut shuffle_rng = root.derive(STREAM_SHUFFLE).derive(epoch as u64);
        shuffle_rng.shuffle(&mut perm);
        let drop_epoch = root.derive(STREAM_DROPOUT_NET).derive(epoch as u64);
        let lr = cfg.lr_at(epoch);

        let mut loss_sum = 0.0;
        for (b, chunk) in perm.chunks(cfg.batch_size).enumerate() {
            let base = b * cfg.batch_size;
            let results: Vec<(f64, Gradients)> = chunk
                .par_iter()
                .enumerate()
                .map(|(k, &idx)| {
                    let mut sample_rng = drop_epoch.derive((base + k) as u64);
                    let (loss, upstream, cache) =
                        ghat_sample(&net, &train.samples[idx], &dropout, Some(&mut sample_rng));
                    let (grads, _) = net.backward(&cache, &upstream);
                    (loss, grads)
                })
                .collect();
            let mut grads = Gradients::zeros_like(&net);
            for (l, g) in &results {
                loss_sum += l;
                grads.add_assign(g);
            }
            grads.scale(1.0 / chunk.len() as f64);
            let gnorm = grads.norm();
            if !gnorm.is_finite() {
                return Err(Error::Training {
                    message: "non-finite gradient".to_string(),
                    epoch,
                    batch: b,
                });
            }
            if gnorm > cfg.grad_clip {
                grads.scale(cfg.grad_clip / gnorm);
                report.clipped_batches += 1;
            }
            adam.step(&mut net, &grads, lr).map_err(|e| match e {
                Error::Training { message, .. } => Error::Training { message, epoch, batch: b },
                other => other,
            })?;
        }
        report.train_losses.push(loss_sum / train.samples.len() as f64);

        let val_loss = ghat_loss(&net, &val.samples);
        report.val_losses.push(val_loss);
        if val_loss < report.best_val_loss {
            report.best_val_loss = val_loss;
            report.best_epoch = epoch;
            best_params = net.params_flat();
        }
    }
    net.set_params_flat(&best_params);
    Ok(GhatTraining { net, report })
}

struct Stage2Sample {
    loss: f64,
    head: Gradients,
    pi: Gradients,
}

/// One sample of the stage-2 loss `|f(x,0) + g(x, pi(x)) - f_s(x)|^2`
/// with gradients for the head and the controller. The input-effect
/// model is frozen: gradients flow through its input `u`, never into
/// its parameters.
#[allow(clippy::too_many_arguments)]
fn stage2_sample(
    stab: &StabilityConfig,
    head: &StabilityHead,
    pi: &Mlp,
    caps: &[f64],
    ghat: &Mlp,
    s: &DynamicsSample,
    dropout: &DropoutSpec,
    rng_head: Option<&mut Rng>,
    rng_pi: Option<&mut Rng>,
) -> Stage2Sample {
    let n = s.x.len();
    let pi_cache = pi.forward_with(&s.x, dropout, rng_pi);
    let y = pi_cache.output();
    let u = bound_output(y, caps);
    let ghat_in = ghat_input(s, &u);
    let ghat_cache = ghat.forward_with(&ghat_in, &DropoutSpec::OFF, None);
    let fs = fs_forward(stab, head, &s.x, dropout, rng_head);

    let ghat_out = ghat_cache.output();
    let mut upstream = Vec::with_capacity(n);
    let mut loss = 0.0;
    for i in 0..n {
        let r = s.dxdt_0[i] + ghat_out[i] - fs.fs[i];
        loss += r * r;
        upstream.push(2.0 * r);
    }

    // The hypothesis enters the residual negatively.
    let neg_upstream: Vector = upstream.iter().map(|v| -v).collect();
    let head_grads = fs_backward(head, &fs, &neg_upstream);

    // Chain through the frozen model's input, keep only the `u` block,
    // then through the output squashing into the controller.
    let dinput = ghat.backward_input(&ghat_cache, &upstream);
    let dy = bound_output_vjp(y, caps, &dinput[n..]);
    let (pi_grads, _) = pi.backward(&pi_cache, &dy);

    Stage2Sample {
        loss,
        head: head_grads,
        pi: pi_grads,
    }
}

/// When `pi_masks` is set, the controller runs with dropout active and
/// sample `i` draws its masks from `pi_masks.derive(i)`; the head and
/// the frozen model stay deterministic either way.
fn stage2_loss_parts(
    stab: &StabilityConfig,
    head: &StabilityHead,
    pi: &Mlp,
    caps: &[f64],
    ghat: &Mlp,
    samples: &[DynamicsSample],
    pi_dropout: &DropoutSpec,
    pi_masks: Option<&Rng>,
) -> f64 {
    let losses: Vec<f64> = samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let u = match pi_masks {
                Some(root) => {
                    let mut mask_rng = root.derive(i as u64);
                    let cache = pi.forward_with(&s.x, pi_dropout, Some(&mut mask_rng));
                    bound_output(cache.output(), caps)
                }
                None => bound_output(&pi.forward(&s.x), caps),
            };
            let g = ghat.forward(&ghat_input(s, &u));
            let fs = fs_forward(stab, head, &s.x, &DropoutSpec::OFF, None);
            (0..s.x.len())
                .map(|i| {
                    let r = s.dxdt_0[i] + g[i] - fs.fs[i];
                    r * r
                })
                .sum::<f64>()
        })
        .collect();
    losses.iter().sum::<f64>() / samples.len() as f64
}

/// Mean squared stage-2 residual over a sample set, dropout off.
pub fn stage2_loss(
    stab: &StabilityConfig,
    head: &StabilityHead,
    controller: &Controller,
    ghat: &Mlp,
    samples: &[DynamicsSample],
) -> f64 {
    stage2_loss_parts(
        stab,
        head,
        &controller.net,
        &controller.caps,
        ghat,
        samples,
        &DropoutSpec::OFF,
        None,
    )
}

/// Stage 2: jointly train the stability head and the controller against
/// the frozen input-effect model.
///
/// The controller's per-axis bounds come from the training set's input
/// bound, so the learned policy cannot exceed what the data collection
/// was allowed to apply.
///
/// With dropout enabled, the per-epoch validation loss runs the
/// controller with dropout active (one fixed mask draw per validation
/// sample, identical every epoch), so checkpoint selection favors
/// weights whose whole mask ensemble tracks the hypothesis, not just
/// the mean network. Evaluation under Monte Carlo dropout samples
/// exactly that ensemble. With dropout off the metric is the plain
/// deterministic loss.
pub fn train_controller(
    train: &Dataset,
    val: &Dataset,
    ghat: &Mlp,
    stab: &StabilityConfig,
    cfg: &TrainConfig,
) -> Result<ControllerTraining> {
    cfg.validate()?;
    check_datasets(train, val)?;
    let n = train.state_dim();
    let m = train.input_dim();
    if stab.dim() != n {
        return Err(Error::Config(format!(
            "stability weight is {}-dimensional but the plant has {} states",
            stab.dim(),
            n
        )));
    }
    if ghat.input_dim() != n + m || ghat.output_dim() != n {
        return Err(Error::Config(format!(
            "input-effect model maps {} -> {}, expected {} -> {}",
            ghat.input_dim(),
            ghat.output_dim(),
            n + m,
            n
        )));
    }
    let caps = train.input_bound.per_axis_caps(m);

    let root = Rng::new(cfg.seed);
    let mut head = StabilityHead::init(stab, &cfg.hidden, &mut root.derive(STREAM_HEAD_INIT));
    let mut pi_dims = vec![n];
    pi_dims.extend_from_slice(&cfg.hidden);
    pi_dims.push(m);
    let mut pi = Mlp::glorot(&pi_dims, &mut root.derive(STREAM_PI_INIT));

    let mut adam_head = AdamState::new(head.net());
    let mut adam_pi = AdamState::new(&pi);
    let dropout = cfg.dropout();
    let val_dropout = DropoutSpec::mc_inference(cfg.dropout_p);
    let val_masks = root.derive(STREAM_VAL_MASKS);
    let val_masks = if cfg.dropout_p > 0.0 { Some(&val_masks) } else { None };

    let mut report = TrainReport {
        train_losses: Vec::with_capacity(cfg.epochs),
        val_losses: Vec::with_capacity(cfg.epochs),
        best_epoch: 0,
        best_val_loss: f64::INFINITY,
        clipped_batches: 0,
        seed: cfg.seed,
    };
    let mut best_head = head.net().params_flat();
    let mut best_pi = pi.params_flat();

    let mut perm: Vec<usize> = (0..train.samples.len()).collect();
    for epoch in 0..cfg.epochs {
        let mut shuffle_rng = root.derive(STREAM_SHUFFLE).derive(epoch as u64);
        shuffle_rng.shuffle(&mut perm);
        let drop_head = root.derive(STREAM_DROPOUT_HEAD).derive(epoch as u64);
        let drop_pi = root.derive(STREAM_DROPOUT_PI).derive(epoch as u64);
        let lr = cfg.lr_at(epoch);

        let mut loss_sum = 0.0;
        for (b, chunk) in perm.chunks(cfg.batch_size).enumerate() {
            let base = b * cfg.batch_size;
            let results: Vec<Stage2Sample> = chunk
                .par_iter()
                .enumerate()
                .map(|(k, &idx)| {
                    let mut rng_h = drop_head.derive((base + k) as u64);
                    let mut rng_p = drop_pi.derive((base + k) as u64);
                    stage2_sample(
                        stab,
                        &head,
                        &pi,
                        &caps,
                        ghat,
                        &train.samples[idx],
                        &dropout,
                        Some(&mut rng_h),
                        Some(&mut rng_p),
                    )
                })
                .collect();
            let mut grads_head = Gradients::zeros_like(head.net());
            let mut grads_pi = Gradients::zeros_like(&pi);
            for r in &results {
                loss_sum += r.loss;
                grads_head.add_assign(&r.head);
                grads_pi.add_assign(&r.pi);
            }
            let inv = 1.0 / chunk.len() as f64;
            grads_head.scale(inv);
            grads_pi.scale(inv);
            // Clip the joint norm so the two networks stay in lockstep.
            let joint = (grads_head.norm().powi(2) + grads_pi.norm().powi(2)).sqrt();
            if !joint.is_finite() {
                return Err(Error::Training {
                    message: "non-finite gradient".to_string(),
                    epoch,
                    batch: b,
                });
            }
            if joint > cfg.grad_clip {
                let s = cfg.grad_clip / joint;
                grads_head.scale(s);
                grads_pi.scale(s);
                report.clipped_batches += 1;
            }
            let fix = |e: Error, b: usize| match e {
                Error::Training { message, .. } => Error::Training { message, epoch, batch: b },
                other => other,
            };
            adam_head
                .step(head.net_mut(), &grads_head, lr)
                .map_err(|e| fix(e, b))?;
            adam_pi.step(&mut pi, &grads_pi, lr).map_err(|e| fix(e, b))?;
        }
        report.train_losses.push(loss_sum / train.samples.len() as f64);

        let val_loss = stage2_loss_parts(
            stab,
            &head,
            &pi,
            &caps,
            ghat,
            &val.samples,
            &val_dropout,
            val_masks,
        );
        report.val_losses.push(val_loss);
        if val_loss < report.best_val_loss {
            report.best_val_loss = val_loss;
            report.best_epoch = epoch;
            best_head = head.net().params_flat();
            best_pi = pi.params_flat();
        }
    }
    head.net_mut().set_params_flat(&best_head);
    pi.set_params_flat(&best_pi);
    let controller = Controller::new(pi, caps)?;
    Ok(ControllerTraining {
        head,
        controller,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::ode::rk4_step;
    use crate::plants::{generate_dataset, DomainBox, InputBound, LinearPlant, Plant, Split};
    use crate::stability::lyapunov_value;

    /// An unstable linear plant `dx/dt = x + u` on the unit box. The
    /// input effect is exactly `u`, so stage 1 has a perfectly
    /// learnable target and stage 2 has enough authority to realize
    /// the hypothesis.
    fn unstable_linear() -> LinearPlant {
        LinearPlant::new(
            Matrix::identity(2),
            Matrix::identity(2),
            DomainBox::symmetric(1.0, 2),
            InputBound::PerAxis(vec![4.0, 4.0]),
        )
        .unwrap()
    }

    fn quick_cfg(seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: 30,
            batch_size: 32,
            lr: 2e-3,
            hidden: vec![32, 32],
            seed,
            ..TrainConfig::default()
        }
    }

    fn datasets(plant: &dyn Plant, n_train: usize, n_val: usize, seed: u64) -> (Dataset, Dataset) {
        let rng = Rng::new(seed);
        let train =
            generate_dataset(plant, n_train, &mut rng.derive(1), false, Split::Train).unwrap();
        let val = generate_dataset(plant, n_val, &mut rng.derive(2), false, Split::Val).unwrap();
        (train, val)
    }

    #[test]
    fn ghat_learns_a_linear_input_effect() {
        let plant = unstable_linear();
        let (train, val) = datasets(&plant, 400, 200, 9);
        let got = train_ghat(&train, &val, &quick_cfg(1)).unwrap();
        let r = &got.report;
        assert_eq!(r.train_losses.len(), 30);
        assert_eq!(r.val_losses.len(), 30);
        assert!(
            r.best_val_loss < 1e-2,
            "best val loss {} never reached 1e-2",
            r.best_val_loss
        );
        assert!(r.best_val_loss < 0.05 * r.val_losses[0]);
        // The returned network carries the best-epoch parameters.
        let recomputed = ghat_loss(&got.net, &val.samples);
        assert!((recomputed - r.best_val_loss).abs() < 1e-12);
    }

    #[test]
    fn controller_realizes_the_hypothesis_on_a_linear_plant() {
        let plant = unstable_linear();
        let (train, val) = datasets(&plant, 800, 200, 17);
        let mut ghat_cfg = quick_cfg(2);
        ghat_cfg.epochs = 50;
        let ghat = train_ghat(&train, &val, &ghat_cfg).unwrap().net;
        let stab = StabilityConfig::diagonal(&[0.5, 0.5], 1.0, 1e-12).unwrap();
        let mut cfg = quick_cfg(3);
        cfg.epochs = 120;
        let got = train_controller(&train, &val, &ghat, &stab, &cfg).unwrap();
        assert!(
            got.report.best_val_loss < 1e-2,
            "stage-2 val loss {}",
            got.report.best_val_loss
        );

        // Roll out the true closed loop dx/dt = x + pi(x) from a ring of
        // starts. The hypothesis decays V at rate 1, so after 6 time
        // units V should have dropped by orders of magnitude.
        for k in 0..8 {
            let angle = std::f64::consts::TAU * k as f64 / 8.0;
            let mut x = vec![0.8 * angle.cos(), 0.8 * angle.sin()];
            let v0 = lyapunov_value(&stab, &x);
            for _ in 0..600 {
                let u = got.controller.act(&x);
                x = rk4_step(|s| plant.deriv(s, &u), &x, 0.01).unwrap();
            }
            let v_end = lyapunov_value(&stab, &x);
            assert!(
                v_end < 0.05 * v0,
                "start {k}: V went {v0:.3e} -> {v_end:.3e}"
            );
        }
    }

    #[test]
    fn controller_outputs_respect_the_bound() {
        let plant = unstable_linear();
        let (train, val) = datasets(&plant, 200, 100, 5);
        let ghat = train_ghat(&train, &val, &quick_cfg(2)).unwrap().net;
        let stab = StabilityConfig::diagonal(&[0.5, 0.5], 1.0, 1e-12).unwrap();
        let mut cfg = quick_cfg(4);
        cfg.epochs = 5;
        let got = train_controller(&train, &val, &ghat, &stab, &cfg).unwrap();
        let mut rng = Rng::new(50);
        for _ in 0..200 {
            // Probe far outside the training domain: the bound is
            // structural, not learned.
            let x = rng.uniform_box(&[-30.0, -30.0], &[30.0, 30.0]);
            let u = got.controller.act(&x);
            assert!(u.iter().zip(got.controller.caps()).all(|(ui, c)| ui.abs() < *c));
        }
    }

    #[test]
    fn training_is_deterministic_for_a_seed() {
        let plant = unstable_linear();
        let (train, val) = datasets(&plant, 128, 64, 3);
        let mut cfg = quick_cfg(11);
        cfg.epochs = 4;
        cfg.dropout_p = 0.2;
        let a = train_ghat(&train, &val, &cfg).unwrap();
        let b = train_ghat(&train, &val, &cfg).unwrap();
        assert_eq!(a.net.params_flat(), b.net.params_flat());
        assert_eq!(a.report.train_losses, b.report.train_losses);

        cfg.seed = 12;
        let c = train_ghat(&train, &val, &cfg).unwrap();
        assert_ne!(a.net.params_flat(), c.net.params_flat());
    }

    #[test]
    fn stage2_is_deterministic_with_dropout() {
        let plant = unstable_linear();
        let (train, val) = datasets(&plant, 96, 48, 3);
        let ghat_cfg = TrainConfig {
            epochs: 3,
            hidden: vec![16],
            ..quick_cfg(1)
        };
        let ghat = train_ghat(&train, &val, &ghat_cfg).unwrap().net;
        let stab = StabilityConfig::diagonal(&[0.5, 0.5], 1.0, 1e-12).unwrap();
        let cfg = TrainConfig {
            epochs: 3,
            hidden: vec![16],
            dropout_p: 0.2,
            ..quick_cfg(7)
        };
        let a = train_controller(&train, &val, &ghat, &stab, &cfg).unwrap();
        let b = train_controller(&train, &val, &ghat, &stab, &cfg).unwrap();
        assert_eq!(
            a.controller.net().params_flat(),
            b.controller.net().params_flat()
        );
        assert_eq!(a.head.net().params_flat(), b.head.net().params_flat());
        assert_eq!(a.report.val_losses, b.report.val_losses);
    }

    #[test]
    fn gradient_clipping_engages_on_exploding_targets() {
        let plant = unstable_linear();
        let (mut train, mut val) = datasets(&plant, 64, 32, 21);
        for s in train.samples.iter_mut().chain(val.samples.iter_mut()) {
            for v in s.dxdt_u.iter_mut() {
                *v *= 1e8;
            }
        }
        let mut cfg = quick_cfg(2);
        cfg.epochs = 2;
        let got = train_ghat(&train, &val, &cfg).unwrap();
        assert!(got.report.clipped_batches > 0);
        assert!(got.net.params_flat().iter().all(|p| p.is_finite()));
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let ok = TrainConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            TrainConfig { epochs: 0, ..ok.clone() },
            TrainConfig { batch_size: 0, ..ok.clone() },
            TrainConfig { lr: 0.0, ..ok.clone() },
            TrainConfig { lr_decay: 0.0, ..ok.clone() },
            TrainConfig { lr_decay: 1.5, ..ok.clone() },
            TrainConfig { hidden: vec![], ..ok.clone() },
            TrainConfig { hidden: vec![32, 0], ..ok.clone() },
            TrainConfig { dropout_p: 1.0, ..ok.clone() },
            TrainConfig { grad_clip: 0.0, ..ok.clone() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn dimension_mismatches_are_rejected() {
        let plant = unstable_linear();
        let (train, val) = datasets(&plant, 32, 16, 3);
        let cfg = TrainConfig { epochs: 1, hidden: vec![8], ..quick_cfg(1) };
        let ghat = train_ghat(&train, &val, &cfg).unwrap().net;

        // Wrong stability dimension.
        let stab3 = StabilityConfig::diagonal(&[0.5, 0.5, 0.5], 1.0, 1e-12).unwrap();
        assert!(train_controller(&train, &val, &ghat, &stab3, &cfg).is_err());

        // Wrong model shape.
        let stab = StabilityConfig::diagonal(&[0.5, 0.5], 1.0, 1e-12).unwrap();
        let wrong = Mlp::glorot(&[3, 8, 2], &mut Rng::new(1));
        assert!(train_controller(&train, &val, &wrong, &stab, &cfg).is_err());

        // Empty dataset.
        let mut empty = train.clone();
        empty.samples.clear();
        assert!(train_ghat(&empty, &val, &cfg).is_err());
    }

    #[test]
    fn controller_new_validates_caps() {
        let net = Mlp::glorot(&[2, 8, 2], &mut Rng::new(1));
        assert!(Controller::new(net.clone(), vec![1.0]).is_err());
        assert!(Controller::new(net.clone(), vec![1.0, 0.0]).is_err());
        assert!(Controller::new(net, vec![1.0, 2.0]).is_ok());
    }

    /// Wraps a plant and counts derivative queries, split by whether the
    /// input was actuated. Training must never touch the plant: all its
    /// queries happen up front, during data collection.
    struct AuditedPlant<'a> {
        inner: &'a dyn Plant,
        actuated: std::sync::atomic::AtomicUsize,
        total: std::sync::atomic::AtomicUsize,
    }

    impl<'a> AuditedPlant<'a> {
        fn new(inner: &'a dyn Plant) -> Self {
            AuditedPlant {
                inner,
                actuated: std::sync::atomic::AtomicUsize::new(0),
                total: std::sync::atomic::AtomicUsize::new(0),
            }
        }
    }

    impl Plant for AuditedPlant<'_> {
        fn name(&self) -> &str {
            self.inner.name()
        }
        fn state_dim(&self) -> usize {
            self.inner.state_dim()
        }
        fn input_dim(&self) -> usize {
            self.inner.input_dim()
        }
        fn deriv(&self, x: &[f64], u: &[f64]) -> Vector {
            use std::sync::atomic::Ordering;
            self.total.fetch_add(1, Ordering::SeqCst);
            if u.iter().any(|v| *v != 0.0) {
                self.actuated.fetch_add(1, Ordering::SeqCst);
            }
            self.inner.deriv(x, u)
        }
        fn state_domain(&self) -> &DomainBox {
            self.inner.state_domain()
        }
        fn input_bound(&self) -> &InputBound {
            self.inner.input_bound()
        }
    }

    #[test]
    fn training_never_queries_the_plant() {
        use std::sync::atomic::Ordering;
        let plant = unstable_linear();
        let audited = AuditedPlant::new(&plant);
        let (train, val) = datasets(&audited, 64, 32, 11);
        let after_data = audited.total.load(Ordering::SeqCst);
        assert!(audited.actuated.load(Ordering::SeqCst) > 0);
        assert!(after_data > 0);

        let cfg = TrainConfig { epochs: 2, hidden: vec![8], ..quick_cfg(5) };
        let ghat = train_ghat(&train, &val, &cfg).unwrap().net;
        let stab = StabilityConfig::diagonal(&[0.5, 0.5], 1.0, 1e-12).unwrap();
        train_controller(&train, &val, &ghat, &stab, &cfg).unwrap();

        // Both stages run entirely from the recorded samples.
        assert_eq!(audited.total.load(Ordering::SeqCst), after_data);
    }
}
