//! Phase portraits: trajectories in the plot plane rendered to SVG,
//! either of the plant under a controller or of the stable hypothesis
//! flow on its own.

use std::path::Path;

use rayon::prelude::*;

use lyapctl_core::ode::rk4_step;
use lyapctl_core::{
    classify, simulate_closed_loop, stable_hypothesis, Rng, StabilityHead, Trajectory, Vector,
    Verdict,
};

use crate::artifacts::{
    median, plane_rings, render_portrait, verdict_color, write_text, Portrait,
};
use crate::commands::{build_policy, ensure_dir, Baseline, PortraitSource};
use crate::config::load_experiment;
use crate::error::Result;

fn project(states: &[Vector], coords: (usize, usize)) -> Vec<(f64, f64)> {
    states.iter().map(|x| (x[coords.0], x[coords.1])).collect()
}

pub fn run(
    config: &Path,
    out: &Path,
    seed: Option<u64>,
    source: PortraitSource,
    baseline: Option<Baseline>,
) -> Result<()> {
    let (doc, plant, stab) = load_experiment(config)?;
    ensure_dir(out)?;
    let sec = doc.portrait.clone().unwrap_or_default();
    let sim = doc.sim_config();
    let coords = plant.plot_coords();
    let starts = plane_rings(
        plant.state_domain(),
        plant.state_dim(),
        coords,
        &sec.rings,
        sec.per_ring,
    );

    match source {
        PortraitSource::ClosedLoop => {
            let (policy, label) = build_policy(baseline, out, &doc, plant.as_ref())?;
            let th = doc.thresholds();
            let trajs: Vec<lyapctl_core::Result<Trajectory>> = starts
                .par_iter()
                .map(|x0| {
                    let mut pol = |x: &[f64]| policy(x);
                    simulate_closed_loop(plant.as_ref(), &mut pol, x0, &stab, &sim)
                })
                .collect();
            let trajs = trajs.into_iter().collect::<lyapctl_core::Result<Vec<_>>>()?;
            let v0s: Vec<f64> = trajs.iter().map(|t| t.lyap[0]).collect();
            let tau_v = th.tau_v_factor * median(&v0s);
            let mask = plant.convergence_mask();
            let mut counts = [0usize; 3];
            let paths = trajs
                .iter()
                .map(|t| {
                    let verdict = classify(t, plant.state_domain(), &mask, tau_v, &th);
                    counts[match verdict {
                        Verdict::Converged => 0,
                        Verdict::LeftDomain => 1,
                        Verdict::EnergyAboveThreshold => 2,
                    }] += 1;
                    (project(&t.states, coords), verdict_color(verdict))
                })
                .collect();
            let title = format!(
                "{} under the {} policy: {} starts, horizon {}s",
                plant.name(),
                label,
                starts.len(),
                sim.horizon
            );
            let svg = render_portrait(&Portrait {
                title: &title,
                domain: plant.state_domain(),
                coords,
                paths,
                legend: vec![
                    ("converged", verdict_color(Verdict::Converged)),
                    ("left domain", verdict_color(Verdict::LeftDomain)),
                    ("did not settle", verdict_color(Verdict::EnergyAboveThreshold)),
                ],
            });
            let file = out.join("phase_closed_loop.svg");
            write_text(&file, &svg)?;
            println!(
                "phase-portrait: {} rollouts ({} converged, {} left, {} unsettled) -> {}",
                starts.len(),
                counts[0],
                counts[1],
                counts[2],
                file.display()
            );
        }
        PortraitSource::Hypothesis => {
            // A trained head when one is on disk; otherwise a fresh
            // random head, which is the whole point of the construction:
            // the hypothesis flow is stable before any training.
            let head_path = out.join("head.json");
            let (head, origin) = match lyapctl_core::load_checkpoint(&head_path) {
                Ok((net, _)) => (StabilityHead::from_net(net, &stab)?, "trained head"),
                Err(e) if e.is_not_found() => {
                    let hidden = doc.train.hidden.clone();
                    let head_seed = seed.unwrap_or(doc.train.seed);
                    let mut rng = Rng::new(head_seed);
                    (
                        StabilityHead::init(&stab, &hidden, &mut rng),
                        "random head",
                    )
                }
                Err(e) => return Err(e.into()),
            };

            let steps = sim.steps();
            let paths: Vec<lyapctl_core::Result<Vec<(f64, f64)>>> = starts
                .par_iter()
                .map(|x0| {
                    let mut x = x0.clone();
                    let mut line = Vec::with_capacity(steps + 1);
                    line.push((x[coords.0], x[coords.1]));
                    for _ in 0..steps {
                        x = rk4_step(|s| stable_hypothesis(&stab, &head, s), &x, sim.dt)?;
                        line.push((x[coords.0], x[coords.1]));
                    }
                    Ok(line)
                })
                .collect();
            let paths = paths.into_iter().collect::<lyapctl_core::Result<Vec<_>>>()?;
            let color = verdict_color(Verdict::Converged);
            let title = format!(
                "stable hypothesis flow ({origin}): {} starts, horizon {}s",
                starts.len(),
                sim.horizon
            );
            let svg = render_portrait(&Portrait {
                title: &title,
                domain: plant.state_domain(),
                coords,
                paths: paths.into_iter().map(|p| (p, color)).collect(),
                legend: vec![("hypothesis trajectory", color)],
            });
            let file = out.join("phase_hypothesis.svg");
            write_text(&file, &svg)?;
            println!(
                "phase-portrait: {} hypothesis trajectories ({origin}) -> {}",
                starts.len(),
                file.display()
            );
        }
    }
    Ok(())
}
