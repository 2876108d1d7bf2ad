//! Region-of-attraction estimation: scores random starts, then sweeps a
//! plot-plane grid with the same energy threshold for plotting.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use lyapctl_core::{
    classify, estimate_roa_in, simulate_closed_loop, RoaEstimate, Rng, Verdict,
};

use crate::artifacts::{plane_lattice, write_grid_csv, write_json, write_roa_csv};
use crate::commands::{build_policy, ensure_dir, Baseline};
use crate::config::load_experiment;
use crate::error::Result;

#[derive(Serialize)]
struct ThresholdSummary {
    tau_v_factor: f64,
    tail_frac: f64,
    final_norm_frac: f64,
    min_converged_frac: f64,
}

#[derive(Serialize)]
pub(crate) struct RoaSummary<'a> {
    schema: &'static str,
    plant: &'a str,
    controller: &'static str,
    n_starts: usize,
    sample_frac: f64,
    seed: u64,
    membership_count: usize,
    converged_fraction: f64,
    valid: bool,
    tau_v: f64,
    thresholds: ThresholdSummary,
    grid_side: usize,
    wall_clock_seconds: f64,
}

pub(crate) fn membership_count(est: &RoaEstimate) -> usize {
    est.samples
        .iter()
        .filter(|s| s.verdict == Verdict::Converged)
        .count()
}

pub fn run(config: &Path, out: &Path, seed: Option<u64>, baseline: Option<Baseline>) -> Result<()> {
    let (doc, plant, stab) = load_experiment(config)?;
    ensure_dir(out)?;
    let (policy, label) = build_policy(baseline, out, &doc, plant.as_ref())?;
    let sim = doc.sim_config();
    let th = doc.thresholds();
    let seed = seed.unwrap_or(doc.roa.seed);
    let sample_box = plant.state_domain().scaled(doc.roa.sample_frac);

    let started = Instant::now();
    let est = estimate_roa_in(
        plant.as_ref(),
        policy.as_ref(),
        &stab,
        &sim,
        doc.roa.n_starts,
        &Rng::new(seed),
        &th,
        &sample_box,
    )?;
    write_roa_csv(&out.join("roa.csv"), &est, plant.state_dim())?;

    // Verdict grid over the plot plane, judged with the same threshold
    // as the random starts so the two files agree with each other.
    if doc.roa.grid > 0 {
        let coords = plant.plot_coords();
        let points = plane_lattice(plant.state_domain(), plant.state_dim(), coords, doc.roa.grid);
        let domain = plant.state_domain();
        let mask = plant.convergence_mask();
        let rows: Vec<lyapctl_core::Result<(f64, f64, Verdict, f64)>> = points
            .par_iter()
            .map(|x0| {
                let mut pol = |x: &[f64]| policy(x);
                let traj = simulate_closed_loop(plant.as_ref(), &mut pol, x0, &stab, &sim)?;
                let verdict = classify(&traj, domain, &mask, est.tau_v, &th);
                Ok((
                    x0[coords.0],
                    x0[coords.1],
                    verdict,
                    traj.lyap_tail_avg(th.tail_frac),
                ))
            })
            .collect();
        let rows = rows.into_iter().collect::<lyapctl_core::Result<Vec<_>>>()?;
        write_grid_csv(&out.join("roa_grid.csv"), coords, &rows)?;
    }
    let wall = started.elapsed().as_secs_f64();

    let members = membership_count(&est);
    write_json(
        &out.join("roa_summary.json"),
        &RoaSummary {
            schema: "lyapctl-roa-summary-v1",
            plant: plant.name(),
            controller: label,
            n_starts: doc.roa.n_starts,
            sample_frac: doc.roa.sample_frac,
            seed,
            membership_count: members,
            converged_fraction: est.converged_fraction,
            valid: est.valid,
            tau_v: est.tau_v,
            thresholds: ThresholdSummary {
                tau_v_factor: th.tau_v_factor,
                tail_frac: th.tail_frac,
                final_norm_frac: th.final_norm_frac,
                min_converged_frac: th.min_converged_frac,
            },
            grid_side: doc.roa.grid,
            wall_clock_seconds: wall,
        },
    )?;

    println!(
        "roa: {}/{} starts converged ({:.1}%) under {} policy, controller {} -> {}",
        members,
        doc.roa.n_starts,
        100.0 * est.converged_fraction,
        label,
        if est.valid { "valid" } else { "INVALID" },
        out.display()
    );
    Ok(())
}
