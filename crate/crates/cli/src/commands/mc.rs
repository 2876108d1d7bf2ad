//! Failure-probability map: repeats every rollout with dropout active in
//! the controller and counts how often it fails to converge.

use std::path::Path;
use std::time::Instant;

use serde::Deserialize;
use serde::Serialize;

use lyapctl_core::{mc_dropout_map, Rng};

use crate::artifacts::{plane_lattice, write_json, write_mc_csv};
use crate::commands::{ensure_dir, load_controller};
use crate::config::load_experiment;
use crate::error::{CliError, Result};

/// The one field this command needs back from the roa run; everything
/// else in the summary is ignored here.
#[derive(Deserialize)]
struct RoaTail {
    tau_v: f64,
}

#[derive(Serialize)]
struct McSummary<'a> {
    schema: &'static str,
    plant: &'a str,
    n_mc: usize,
    dropout_p: f64,
    grid_side: usize,
    seed: u64,
    tau_v: f64,
    max_failure_probability: f64,
    origin_failure_probability: Option<f64>,
    wall_clock_seconds: f64,
}

pub fn run(config: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let (doc, plant, stab) = load_experiment(config)?;
    let mc = doc.mc.clone().ok_or_else(|| {
        CliError::Config("mc: section required by the mc-dropout command".to_string())
    })?;
    ensure_dir(out)?;
    let controller = load_controller(out, plant.as_ref())?;

    // The verdicts must be comparable with the deterministic estimate,
    // so the energy threshold comes from the roa run, not from scratch.
    let summary_path = out.join("roa_summary.json");
    let text = std::fs::read_to_string(&summary_path)
        .map_err(|_| CliError::missing(summary_path.clone(), "run the roa command first"))?;
    let tail: RoaTail = serde_json::from_str(&text).map_err(|e| {
        CliError::Config(format!("{}: {e}", summary_path.display()))
    })?;

    let seed = seed.unwrap_or(mc.seed);
    let coords = plant.plot_coords();
    let points = plane_lattice(plant.state_domain(), plant.state_dim(), coords, mc.grid);

    let started = Instant::now();
    let map = mc_dropout_map(
        plant.as_ref(),
        &controller,
        &stab,
        &doc.sim_config(),
        &points,
        mc.n_mc,
        mc.dropout_p,
        tail.tau_v,
        &doc.thresholds(),
        &Rng::new(seed),
    )?;
    let wall = started.elapsed().as_secs_f64();

    // The library reports the converged fraction; the artifact reports
    // failure. Recover the integer count first so every written value is
    // an exact multiple of 1/n_mc.
    let n = map.n_mc as f64;
    let failure = |p: f64| (n - (p * n).round()) / n;
    let rows: Vec<(f64, f64, f64)> = map
        .points
        .iter()
        .zip(map.probs.iter())
        .map(|(x, p)| (x[coords.0], x[coords.1], failure(*p)))
        .collect();
    write_mc_csv(&out.join("mc_grid.csv"), coords, &rows)?;

    let origin = rows
        .iter()
        .find(|(a, b, _)| *a == 0.0 && *b == 0.0)
        .map(|(_, _, p)| *p);
    let max = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    write_json(
        &out.join("mc_summary.json"),
        &McSummary {
            schema: "lyapctl-mc-summary-v1",
            plant: plant.name(),
            n_mc: mc.n_mc,
            dropout_p: mc.dropout_p,
            grid_side: mc.grid,
            seed,
            tau_v: tail.tau_v,
            max_failure_probability: max,
            origin_failure_probability: origin,
            wall_clock_seconds: wall,
        },
    )?;

    println!(
        "mc-dropout: {} grid points x {} repetitions on {}, max failure probability {:.2} -> {}",
        rows.len(),
        mc.n_mc,
        plant.name(),
        max,
        out.display()
    );
    Ok(())
}
