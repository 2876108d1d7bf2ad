//! Dataset generation and on-disk format.
//!
//! A dataset is a delimited text table plus a JSON metadata sidecar
//! (`<stem>.meta.json`). The table's header names the columns
//! `x0..x{n-1}, u0..u{m-1}, fu0..fu{n-1}, f00..f0{n-1}`, where `fu` is
//! the derivative at `(x, u)` and `f0` the derivative at `(x, 0)`.
//! Floats carry 17 significant digits, so reading a file back
//! reconstructs every value bit-exactly.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::nn::checkpoint::fmt_f64;
use crate::plants::{Dataset, DomainBox, DynamicsSample, InputBound, Plant, Split};
use crate::rng::Rng;

/// Samples `n` derivative pairs from the plant's own domain.
///
/// States are uniform over the state domain; inputs are uniform over the
/// admissible set, or identically zero when `zero_input` is set. Each
/// sample records both `f(x, u)` and `f(x, 0)`.
pub fn generate_dataset(
    plant: &dyn Plant,
    n: usize,
    rng: &mut Rng,
    zero_input: bool,
    split: Split,
) -> Result<Dataset> {
    let domain = plant.state_domain().clone();
    generate_dataset_with(plant, n, rng, &domain, split, |_x, rng| {
        if zero_input {
            vec![0.0; plant.input_dim()]
        } else {
            plant.input_bound().sample(plant.input_dim(), rng)
        }
    })
}

/// Dataset generation with a custom sampling domain and input policy.
/// Used by iterative retraining, where states come from the previous
/// round's estimated region of attraction and inputs from the previous
/// controller.
pub fn generate_dataset_with(
    plant: &dyn Plant,
    n: usize,
    rng: &mut Rng,
    domain: &DomainBox,
    split: Split,
    mut input_for: impl FnMut(&[f64], &mut Rng) -> Vector,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Config("dataset size must be positive".to_string()));
    }
    if domain.dim() != plant.state_dim() {
        return Err(Error::Config(format!(
            "sampling domain dimension {} does not match plant state dimension {}",
            domain.dim(),
            plant.state_dim()
        )));
    }
    let zero_u = vec![0.0; plant.input_dim()];
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let x = domain.sample(rng);
        let u = input_for(&x, rng);
        debug_assert_eq!(u.len(), plant.input_dim());
        let dxdt_u = plant.deriv(&x, &u);
        let dxdt_0 = plant.deriv(&x, &zero_u);
        if dxdt_u.iter().chain(dxdt_0.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Simulation {
                message: "plant returned a non-finite derivative during sampling".to_string(),
                state: x,
            });
        }
        samples.push(DynamicsSample {
            x,
            u,
            dxdt_u,
            dxdt_0,
        });
    }
    Ok(Dataset {
        samples,
        plant: plant.name().to_string(),
        domain: domain.clone(),
        input_bound: plant.input_bound().clone(),
        seed: 0,
        split,
    })
}

fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

fn header(n: usize, m: usize) -> String {
    let mut cols = Vec::with_capacity(3 * n + m);
    for i in 0..n {
        cols.push(format!("x{i}"));
    }
    for i in 0..m {
        cols.push(format!("u{i}"));
    }
    for i in 0..n {
        cols.push(format!("fu{i}"));
    }
    for i in 0..n {
        cols.push(format!("f0{i}"));
    }
    cols.join(",")
}

/// Writes the table to `path` and the metadata sidecar next to it.
pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let n = ds.state_dim();
    let m = ds.input_dim();
    let mut text = String::with_capacity(ds.samples.len() * (3 * n + m) * 25);
    text.push_str(&header(n, m));
    text.push('\n');
    for s in &ds.samples {
        let mut first = true;
        for v in s.x.iter().chain(s.u.iter()).chain(s.dxdt_u.iter()).chain(s.dxdt_0.iter()) {
            if !first {
                text.push(',');
            }
            let _ = write!(text, "{}", fmt_f64(*v));
            first = false;
        }
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;

    let bound_json = match &ds.input_bound {
        InputBound::Norm(c) => format!("{{\"norm\": {}}}", fmt_f64(*c)),
        InputBound::PerAxis(caps) => {
            let entries: Vec<String> = caps.iter().map(|c| fmt_f64(*c)).collect();
            format!("{{\"per_axis\": [{}]}}", entries.join(","))
        }
    };
    let lo: Vec<String> = ds.domain.lo().iter().map(|v| fmt_f64(*v)).collect();
    let hi: Vec<String> = ds.domain.hi().iter().map(|v| fmt_f64(*v)).collect();
    let meta = format!(
        "{{\n  \"schema\": \"lyapctl-dataset-v1\",\n  \"plant\": \"{}\",\n  \"split\": \"{}\",\n  \"seed\": {},\n  \"n_samples\": {},\n  \"state_dim\": {},\n  \"input_dim\": {},\n  \"domain_lo\": [{}],\n  \"domain_hi\": [{}],\n  \"input_bound\": {}\n}}\n",
        ds.plant,
        ds.split.as_str(),
        ds.seed,
        ds.samples.len(),
        n,
        m,
        lo.join(","),
        hi.join(","),
        bound_json
    );
    let meta_path = sidecar_path(path);
    std::fs::write(&meta_path, meta).map_err(|e| Error::io(&meta_path, e))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MetaDoc {
    schema: String,
    plant: String,
    split: String,
    seed: u64,
    n_samples: usize,
    state_dim: usize,
    input_dim: usize,
    domain_lo: Vec<f64>,
    domain_hi: Vec<f64>,
    input_bound: BoundDoc,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundDoc {
    #[serde(default)]
    norm: Option<f64>,
    #[serde(default)]
    per_axis: Option<Vec<f64>>,
}

/// Loads a dataset written by [`save_dataset`], revalidating the invariants:
/// every state lies in the recorded domain and every input is admissible.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let meta_path = sidecar_path(path);
    let meta_text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: MetaDoc =
        serde_json::from_str(&meta_text).map_err(|e| Error::parse(&meta_path, format!("{e}")))?;
    if meta.schema != "lyapctl-dataset-v1" {
        return Err(Error::parse(
            &meta_path,
            format!("unexpected schema tag {:?}", meta.schema),
        ));
    }
    let split = Split::from_str(&meta.split)
        .ok_or_else(|| Error::parse(&meta_path, format!("unknown split {:?}", meta.split)))?;
    let domain = DomainBox::new(meta.domain_lo, meta.domain_hi)?;
    if domain.dim() != meta.state_dim {
        return Err(Error::parse(&meta_path, "domain does not match state_dim"));
    }
    let bound = match (meta.input_bound.norm, meta.input_bound.per_axis) {
        (Some(c), None) => InputBound::Norm(c),
        (None, Some(caps)) => InputBound::PerAxis(caps),
        _ => {
            return Err(Error::parse(
                &meta_path,
                "input_bound must have exactly one of `norm` or `per_axis`",
            ))
        }
    };
    bound.validate(meta.input_dim)?;

    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (n, m) = (meta.state_dim, meta.input_dim);
    let expected_header = header(n, m);
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first == expected_header => {}
        Some((_, first)) => {
            return Err(Error::parse(
                path,
                format!("header {first:?} does not match expected {expected_header:?}"),
            ))
        }
        None => return Err(Error::parse(path, "empty file")),
    }
    let mut samples = Vec::with_capacity(meta.n_samples);
    for (line_no, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 * n + m {
            return Err(Error::parse(
                path,
                format!(
                    "line {}: {} fields, expected {}",
                    line_no + 1,
                    fields.len(),
                    3 * n + m
                ),
            ));
        }
        let mut values = Vec::with_capacity(fields.len());
        for f in &fields {
            let v: f64 = f.trim().parse().map_err(|_| {
                Error::parse(path, format!("line {}: bad number {f:?}", line_no + 1))
            })?;
            values.push(v);
        }
        let x = values[..n].to_vec();
        let u = values[n..n + m].to_vec();
        let dxdt_u = values[n + m..2 * n + m].to_vec();
        let dxdt_0 = values[2 * n + m..].to_vec();
        if !domain.contains(&x) {
            return Err(Error::parse(
                path,
                format!("line {}: state outside the recorded domain", line_no + 1),
            ));
        }
        if !bound.contains_with_slack(&u) {
            return Err(Error::parse(
                path,
                format!("line {}: input violates the recorded bound", line_no + 1),
            ));
        }
        samples.push(DynamicsSample {
            x,
            u,
            dxdt_u,
            dxdt_0,
        });
    }
    if samples.len() != meta.n_samples {
        return Err(Error::parse(
            path,
            format!(
                "{} rows but sidecar declares {}",
                samples.len(),
                meta.n_samples
            ),
        ));
    }
    Ok(Dataset {
        samples,
        plant: meta.plant,
        domain,
        input_bound: bound,
        seed: meta.seed,
        split,
    })
}

impl InputBound {
    /// Containment check with a one-ulp-scale tolerance; guards against
    /// rounding at the boundary of the admissible set.
    fn contains_with_slack(&self, u: &[f64]) -> bool {
        match self {
            InputBound::Norm(c) => crate::linalg::norm(u) <= c * (1.0 + 1e-12),
            InputBound::PerAxis(caps) => u
                .iter()
                .zip(caps.iter())
                .all(|(&ui, &ci)| ui.abs() <= ci * (1.0 + 1e-12)),
        }
    }
}
