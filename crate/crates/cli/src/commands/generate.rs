//! Samples plant derivatives and writes the train/val dataset files.

use std::path::Path;

use lyapctl_core::{generate_dataset_with, save_dataset, Rng, Split};

use crate::commands::ensure_dir;
use crate::config::load_experiment;
use crate::error::Result;

/// Stream indices under the data seed; fixed so the files are a pure
/// function of (config, seed).
const STREAM_TRAIN: u64 = 1;
const STREAM_VAL: u64 = 2;

pub fn run(config: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let (doc, plant, _) = load_experiment(config)?;
    ensure_dir(out)?;
    let seed = seed.unwrap_or(doc.data.seed);
    let root = Rng::new(seed);

    // States come from the domain shrunk by sample_frac about its
    // center (1.0 means the whole domain); inputs always span the full
    // admissible set so the control-effect model sees every input the
    // controller may later command.
    let domain = plant.state_domain().scaled(doc.data.sample_frac);
    let sample_input =
        |_x: &[f64], rng: &mut Rng| plant.input_bound().sample(plant.input_dim(), rng);

    let mut train = generate_dataset_with(
        plant.as_ref(),
        doc.data.n_train,
        &mut root.derive(STREAM_TRAIN),
        &domain,
        Split::Train,
        sample_input,
    )?;
    train.seed = seed;
    let mut val = generate_dataset_with(
        plant.as_ref(),
        doc.data.n_val,
        &mut root.derive(STREAM_VAL),
        &domain,
        Split::Val,
        sample_input,
    )?;
    val.seed = seed;

    save_dataset(&train, &out.join("train.csv"))?;
    save_dataset(&val, &out.join("val.csv"))?;
    println!(
        "generate: {} train + {} val samples of {} (seed {}) -> {}",
        doc.data.n_train,
        doc.data.n_val,
        plant.name(),
        seed,
        out.display()
    );
    Ok(())
}
