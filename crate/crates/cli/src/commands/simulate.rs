//! Rolls out the closed loop from chosen starts and writes one
//! trajectory file per start.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use lyapctl_core::{simulate_closed_loop, Vector};

use crate::artifacts::{plane_rings, write_json, write_traj_csv};
use crate::commands::{build_policy, ensure_dir, Baseline};
use crate::config::load_experiment;
use crate::error::Result;

#[derive(Serialize)]
struct RolloutSummary {
    file: String,
    x0: Vector,
    left_domain: bool,
    v0: f64,
    v_end: f64,
    v_tail_avg: f64,
    final_state: Vector,
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    schema: &'static str,
    plant: &'a str,
    controller: &'static str,
    horizon: f64,
    dt: f64,
    rollouts: Vec<RolloutSummary>,
    wall_clock_seconds: f64,
}

/// Default starts when the config has no `[simulate]` section: a ring
/// halfway out in the plot plane.
fn default_starts(plant: &dyn lyapctl_core::Plant) -> Vec<Vector> {
    plane_rings(
        plant.state_domain(),
        plant.state_dim(),
        plant.plot_coords(),
        &[0.5],
        8,
    )
}

pub fn run(config: &Path, out: &Path, baseline: Option<Baseline>) -> Result<()> {
    let (doc, plant, stab) = load_experiment(config)?;
    ensure_dir(out)?;
    let (policy, label) = build_policy(baseline, out, &doc, plant.as_ref())?;
    let sim = doc.sim_config();
    let starts = match &doc.simulate {
        Some(sec) => sec.x0.clone(),
        None => default_starts(plant.as_ref()),
    };

    let started = Instant::now();
    let mut rollouts = Vec::with_capacity(starts.len());
    for (k, x0) in starts.iter().enumerate() {
        let mut pol = |x: &[f64]| policy(x);
        let traj = simulate_closed_loop(plant.as_ref(), &mut pol, x0, &stab, &sim)?;
        let file = format!("traj_{k:03}.csv");
        write_traj_csv(&out.join(&file), &traj, plant.state_dim(), plant.input_dim())?;
        rollouts.push(RolloutSummary {
            file,
            x0: x0.clone(),
            left_domain: traj.left_domain,
            v0: traj.lyap[0],
            v_end: *traj.lyap.last().expect("nonempty"),
            v_tail_avg: traj.lyap_tail_avg(doc.roa.tail_frac),
            final_state: traj.final_state().to_vec(),
        });
    }
    let wall = started.elapsed().as_secs_f64();

    let stayed = rollouts.iter().filter(|r| !r.left_domain).count();
    println!(
        "simulate: {} rollouts of {} under {} policy, {} stayed in the domain -> {}",
        rollouts.len(),
        plant.name(),
        label,
        stayed,
        out.display()
    );
    write_json(
        &out.join("simulate_summary.json"),
        &SimulateSummary {
            schema: "lyapctl-simulate-summary-v1",
            plant: plant.name(),
            controller: label,
            horizon: sim.horizon,
            dt: sim.dt,
            rollouts,
            wall_clock_seconds: wall,
        },
    )?;
    Ok(())
}
