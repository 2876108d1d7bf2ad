//! Learning stabilizing feedback control for black-box dynamical systems.
//!
//! The library trains, from sampled derivative data alone, a feedback
//! controller `u = pi(x)` that drives an unknown control-affine system
//! `dx/dt = f(x, u)` to the origin. Three networks cooperate:
//!
//! * `NN_g` models the effect of the input, `g(x, u) ~ f(x, u) - f(x, 0)`;
//! * a stability head `NN_P` parameterizes a closed-loop hypothesis
//!   `f_s(x)` that decays a quadratic Lyapunov function `V(x) = x^T Q x`
//!   at rate `alpha` by construction;
//! * `NN_pi` is the controller, trained jointly with `NN_P` so that the
//!   modeled closed loop `f(x, 0) + g(x, pi(x))` tracks `f_s(x)`.
//!
//! Everything downstream of a seed is bit-reproducible: the RNG is a small
//! counter-based generator, parallel sweeps derive one child stream per
//! sample index, and all file writers emit full-precision decimal text.
//!
//! Modules:
//! * [`linalg`], [`rng`], [`ode`] - dense small-dimension numerics,
//!   seedable streams, fixed-step RK4;
//! * [`nn`] - multilayer perceptrons with hand-written backprop, Adam,
//!   inverted dropout, bounded outputs, text checkpoints;
//! * [`stability`] - the Lyapunov function and the stable hypothesis
//!   `f_s`, with gradients for training;
//! * [`plants`] - benchmark systems (n-link pendulum, cart-pole, wheeled
//!   vehicle) and dataset generation;
//! * [`train`] - the two-stage learning procedure;
//! * [`eval`] - closed-loop simulation, region-of-attraction estimation,
//!   an LQR baseline, Monte-Carlo dropout robustness maps, and iterative
//!   domain-growing retraining.

pub mod error;
pub mod eval;
pub mod linalg;
pub mod nn;
pub mod ode;
pub mod plants;
pub mod rng;
pub mod stability;
pub mod train;

pub use error::{Error, Result};
pub use eval::iterate::{iterative_learning, IterateConfig, IterationOutcome, IterationRound};
pub use eval::lqr::{linearize, lqr_gain, solve_dare, LqrGain};
pub use eval::mc::{mc_dropout_map, McMap};
pub use eval::roa::{
    classify, estimate_roa, estimate_roa_in, RoaEstimate, RoaSample, RoaThresholds, Verdict,
};
pub use eval::sim::{simulate_closed_loop, SimConfig, Trajectory};
pub use linalg::{quad_form, Matrix, Vector};
pub use nn::{
    bound_output, load_checkpoint, save_checkpoint, Activation, AdamState, DropoutMode,
    DropoutSpec, Mlp,
};
pub use plants::{
    generate_dataset, generate_dataset_with, load_dataset, save_dataset, CartPole, Dataset,
    DomainBox, DynamicsSample, InputBound, LinearPlant, PendulumNLink, Plant, Split,
    WheeledVehicle,
};
pub use rng::Rng;
pub use stability::{
    decay_rate, lyapunov_grad, lyapunov_value, stable_hypothesis, StabilityConfig, StabilityHead,
};
pub use train::{
    train_controller, train_ghat, Controller, ControllerTraining, GhatTraining, TrainConfig,
    TrainReport,
};
