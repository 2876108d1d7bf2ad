//! Closed-loop evaluation: simulation, region-of-attraction estimation,
//! an LQR baseline, Monte-Carlo dropout robustness maps, and iterative
//! domain-growing retraining.

pub mod iterate;
pub mod lqr;
pub mod mc;
pub mod roa;
pub mod sim;

pub use iterate::{iterative_learning, IterateConfig, IterationOutcome, IterationRound};
pub use lqr::{lqr_gain, solve_dare, LqrGain};
pub use mc::{mc_dropout_map, McMap};
pub use roa::{estimate_roa, RoaEstimate, RoaSample, RoaThresholds, Verdict};
pub use sim::{simulate_closed_loop, SimConfig, Trajectory};
