//! One module per subcommand, plus the plumbing they share: output
//! directories, checkpoint loading, and the three policy sources
//! (learned network, LQR baseline, zero input).

pub mod generate;
pub mod iterate;
pub mod mc;
pub mod portrait;
pub mod roa;
pub mod simulate;
pub mod train;

use std::fs;
use std::path::Path;

use lyapctl_core::{load_checkpoint, lqr_gain, Controller, Matrix, Plant, Vector};

use crate::config::ConfigDoc;
use crate::error::{io_err, CliError, Result};

/// Alternative controllers for baseline comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Baseline {
    /// Linear-quadratic regulator about the origin, clamped to the
    /// input bound.
    Lqr,
    /// No actuation at all; shows the open-loop behavior.
    Zero,
}

/// What the phase portrait integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PortraitSource {
    /// The plant under the trained controller.
    #[value(alias = "closed_loop")]
    ClosedLoop,
    /// The stable hypothesis itself, no plant involved.
    Hypothesis,
}

pub(crate) fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

/// Loads the trained controller from `pi.json` in the output directory.
pub(crate) fn load_controller(out: &Path, plant: &dyn Plant) -> Result<Controller> {
    let path = out.join("pi.json");
    let (net, caps) = load_checkpoint(&path)?;
    if net.input_dim() != plant.state_dim() || net.output_dim() != plant.input_dim() {
        return Err(CliError::Config(format!(
            "{}: maps {} -> {}, plant {} needs {} -> {}",
            path.display(),
            net.input_dim(),
            net.output_dim(),
            plant.name(),
            plant.state_dim(),
            plant.input_dim()
        )));
    }
    let caps = match caps {
        Some(c) => c,
        None => plant.input_bound().per_axis_caps(plant.input_dim()),
    };
    Ok(Controller::new(net, caps)?)
}

/// The control law a command evaluates: the trained network unless a
/// baseline was requested on the command line.
pub(crate) fn build_policy(
    baseline: Option<Baseline>,
    out: &Path,
    doc: &ConfigDoc,
    plant: &dyn Plant,
) -> Result<(Box<dyn Fn(&[f64]) -> Vector + Sync>, &'static str)> {
    match baseline {
        None => {
            let controller = load_controller(out, plant)?;
            Ok((Box::new(move |x: &[f64]| controller.act(x)), "learned"))
        }
        Some(Baseline::Lqr) => {
            let sec = doc.lqr_section();
            let n = plant.state_dim();
            let m = plant.input_dim();
            let q = Matrix::diag(&sec.q_diag.unwrap_or_else(|| vec![1.0; n]));
            let r = Matrix::diag(&sec.r_diag.unwrap_or_else(|| vec![1.0; m]));
            let gain = lqr_gain(plant, &q, &r, sec.fd_step, sec.dt)?;
            Ok((Box::new(move |x: &[f64]| gain.control(x)), "lqr"))
        }
        Some(Baseline::Zero) => {
            let m = plant.input_dim();
            Ok((Box::new(move |_: &[f64]| vec![0.0; m]), "zero"))
        }
    }
}
