//! Iterative retraining: alternate data collection, training and region
//! estimation, shrinking the sampling box onto what converged. Each round
//! gets its own subdirectory of checkpoints and verdicts.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use lyapctl_core::{iterative_learning, save_checkpoint, IterateConfig, IterationRound, Vector};

use crate::artifacts::{write_json, write_losses_csv, write_roa_csv};
use crate::commands::{ensure_dir, roa::membership_count};
use crate::config::load_experiment;
use crate::error::Result;

#[derive(Serialize)]
struct RoundSummary {
    index: usize,
    sample_lo: Vector,
    sample_hi: Vector,
    ghat_best_val_loss: f64,
    controller_best_val_loss: f64,
    membership_count: usize,
    converged_fraction: f64,
    valid: bool,
    tau_v: f64,
}

#[derive(Serialize)]
struct IterateSummary<'a> {
    schema: &'static str,
    plant: &'a str,
    seed: u64,
    rounds_requested: usize,
    rounds_completed: usize,
    halted: Option<String>,
    membership_counts: Vec<usize>,
    wall_clock_seconds: f64,
}

fn write_round(dir: &Path, round: &IterationRound, state_dim: usize) -> Result<()> {
    ensure_dir(dir)?;
    save_checkpoint(&round.ghat.net, None, &dir.join("ghat.json"))?;
    save_checkpoint(round.control.head.net(), None, &dir.join("head.json"))?;
    save_checkpoint(
        round.control.controller.net(),
        Some(round.control.controller.caps()),
        &dir.join("pi.json"),
    )?;
    write_losses_csv(&dir.join("losses.csv"), &round.ghat.report, &round.control.report)?;
    write_roa_csv(&dir.join("roa.csv"), &round.roa, state_dim)?;
    write_json(
        &dir.join("round_summary.json"),
        &RoundSummary {
            index: round.index,
            sample_lo: round.sample_domain.lo().to_vec(),
            sample_hi: round.sample_domain.hi().to_vec(),
            ghat_best_val_loss: round.ghat.report.best_val_loss,
            controller_best_val_loss: round.control.report.best_val_loss,
            membership_count: membership_count(&round.roa),
            converged_fraction: round.roa.converged_fraction,
            valid: round.roa.valid,
            tau_v: round.roa.tau_v,
        },
    )
}

pub fn run(config: &Path, out: &Path, seed: Option<u64>, rounds: Option<usize>) -> Result<()> {
    let (doc, plant, stab) = load_experiment(config)?;
    let sec = doc.iterate.clone().unwrap_or_default();
    ensure_dir(out)?;

    let cfg = IterateConfig {
        rounds: rounds.unwrap_or(sec.rounds),
        n_train: doc.data.n_train,
        n_val: doc.data.n_val,
        n_roa: doc.roa.n_starts,
        shrink: sec.shrink,
        train: doc.train_config(None),
        sim: doc.sim_config(),
        thresholds: doc.thresholds(),
        seed: seed.unwrap_or(sec.seed),
    };

    let started = Instant::now();
    let mut write_err: Option<crate::error::CliError> = None;
    let mut dirs: Vec<PathBuf> = Vec::new();
    let outcome = iterative_learning(plant.as_ref(), &stab, &cfg, |round| {
        if write_err.is_some() {
            return;
        }
        let dir = out.join(format!("round_{}", round.index));
        if let Err(e) = write_round(&dir, round, plant.state_dim()) {
            write_err = Some(e);
        } else {
            dirs.push(dir);
        }
    })?;
    if let Some(e) = write_err {
        return Err(e);
    }
    let wall = started.elapsed().as_secs_f64();

    let counts: Vec<usize> = outcome
        .rounds
        .iter()
        .map(|r| membership_count(&r.roa))
        .collect();
    write_json(
        &out.join("iterate_summary.json"),
        &IterateSummary {
            schema: "lyapctl-iterate-summary-v1",
            plant: plant.name(),
            seed: cfg.seed,
            rounds_requested: cfg.rounds,
            rounds_completed: outcome.rounds.len(),
            halted: outcome.halted.clone(),
            membership_counts: counts.clone(),
            wall_clock_seconds: wall,
        },
    )?;

    match &outcome.halted {
        Some(reason) => println!(
            "iterate: halted after {} round(s), memberships {:?} ({reason}) -> {}",
            outcome.rounds.len(),
            counts,
            out.display()
        ),
        None => println!(
            "iterate: {} round(s) complete, memberships {:?} -> {}",
            outcome.rounds.len(),
            counts,
            out.display()
        ),
    }
    Ok(())
}
