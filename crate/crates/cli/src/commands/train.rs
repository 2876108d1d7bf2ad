//! Two-stage training from previously generated dataset files: first the
//! input-effect model, then the stability head and controller jointly.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use lyapctl_core::{
    load_dataset, save_checkpoint, train_controller, train_ghat, Dataset, Plant, Split,
    TrainReport,
};

use crate::artifacts::{write_json, write_losses_csv};
use crate::commands::ensure_dir;
use crate::config::load_experiment;
use crate::error::{CliError, Result};

#[derive(Serialize)]
struct StageSummary {
    epochs: usize,
    best_epoch: usize,
    best_val_loss: f64,
    first_val_loss: f64,
    final_train_loss: f64,
    clipped_batches: usize,
}

impl StageSummary {
    fn from_report(r: &TrainReport) -> Self {
        StageSummary {
            epochs: r.train_losses.len(),
            best_epoch: r.best_epoch,
            best_val_loss: r.best_val_loss,
            first_val_loss: r.val_losses[0],
            final_train_loss: *r.train_losses.last().expect("at least one epoch"),
            clipped_batches: r.clipped_batches,
        }
    }
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    schema: &'static str,
    plant: &'a str,
    seed: u64,
    n_train: usize,
    n_val: usize,
    ghat: StageSummary,
    controller: StageSummary,
    output_caps: &'a [f64],
    wall_clock_seconds: f64,
}

fn check_dataset(ds: &Dataset, split: Split, plant: &dyn Plant, path: &Path) -> Result<()> {
    if ds.split != split {
        return Err(CliError::Config(format!(
            "{}: holds the {} split, expected {}",
            path.display(),
            ds.split.as_str(),
            split.as_str()
        )));
    }
    if ds.plant != plant.name() {
        return Err(CliError::Config(format!(
            "{}: generated for plant \"{}\", config builds \"{}\"",
            path.display(),
            ds.plant,
            plant.name()
        )));
    }
    if ds.state_dim() != plant.state_dim() || ds.input_dim() != plant.input_dim() {
        return Err(CliError::Config(format!(
            "{}: dimensions ({}, {}) do not match the plant's ({}, {})",
            path.display(),
            ds.state_dim(),
            ds.input_dim(),
            plant.state_dim(),
            plant.input_dim()
        )));
    }
    Ok(())
}

pub fn run(config: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let (doc, plant, stab) = load_experiment(config)?;
    ensure_dir(out)?;

    let train_path = out.join("train.csv");
    let val_path = out.join("val.csv");
    let train_ds = load_dataset(&train_path)?;
    let val_ds = load_dataset(&val_path)?;
    check_dataset(&train_ds, Split::Train, plant.as_ref(), &train_path)?;
    check_dataset(&val_ds, Split::Val, plant.as_ref(), &val_path)?;

    let cfg = doc.train_config(seed);
    // Dropout regularizes the controller so Monte Carlo dropout has a
    // posterior to sample. The control-effect model is plain system
    // identification and never evaluated stochastically, so it always
    // trains clean; dropout there only costs accuracy.
    let ghat_cfg = lyapctl_core::TrainConfig { dropout_p: 0.0, ..cfg.clone() };
    let started = Instant::now();
    let ghat = train_ghat(&train_ds, &val_ds, &ghat_cfg)?;
    let trained = train_controller(&train_ds, &val_ds, &ghat.net, &stab, &cfg)?;
    let wall = started.elapsed().as_secs_f64();

    save_checkpoint(&ghat.net, None, &out.join("ghat.json"))?;
    save_checkpoint(trained.head.net(), None, &out.join("head.json"))?;
    save_checkpoint(
        trained.controller.net(),
        Some(trained.controller.caps()),
        &out.join("pi.json"),
    )?;
    write_losses_csv(&out.join("losses.csv"), &ghat.report, &trained.report)?;
    write_json(
        &out.join("train_summary.json"),
        &TrainSummary {
            schema: "lyapctl-train-summary-v1",
            plant: plant.name(),
            seed: cfg.seed,
            n_train: train_ds.samples.len(),
            n_val: val_ds.samples.len(),
            ghat: StageSummary::from_report(&ghat.report),
            controller: StageSummary::from_report(&trained.report),
            output_caps: trained.controller.caps(),
            wall_clock_seconds: wall,
        },
    )?;

    println!(
        "train: stage-1 best val {:.3e} (epoch {}), stage-2 best val {:.3e} (epoch {}), {:.1}s -> {}",
        ghat.report.best_val_loss,
        ghat.report.best_epoch,
        trained.report.best_val_loss,
        trained.report.best_epoch,
        wall,
        out.display()
    );
    Ok(())
}
