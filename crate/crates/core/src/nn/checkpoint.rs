//! Human-readable network checkpoints.
//!
//! A checkpoint is a JSON document carrying a schema tag, the
//! architecture (layer dimensions, activations, optional output bound)
//! and full-precision parameters. Floats are written in scientific
//! notation with 17 significant digits, which round-trips every `f64`
//! bit-exactly through parsing.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::nn::mlp::{Activation, Layer, Mlp};

/// Schema tag checked on load.
pub const CHECKPOINT_SCHEMA: &str = "lyapctl-mlp-v1";

/// Formats one float with 17 significant digits.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_float_array(out: &mut String, values: &[f64]) {
    out.push('[');
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{}", fmt_f64(*v));
    }
    out.push(']');
}

/// Serializes a network (plus an optional controller output bound) to `path`.
///
/// Non-finite parameters are rejected: a checkpoint must always be loadable.
pub fn save_checkpoint(mlp: &Mlp, output_bound: Option<&[f64]>, path: &Path) -> Result<()> {
    for layer in mlp.layers() {
        if layer.weight.data().iter().any(|v| !v.is_finite())
            || layer.bias.iter().any(|v| !v.is_finite())
        {
            return Err(Error::Config(
                "refusing to save checkpoint with non-finite parameters".to_string(),
            ));
        }
    }
    if let Some(b) = output_bound {
        if b.len() != mlp.output_dim() {
            return Err(Error::Config(format!(
                "output bound has {} entries for a {}-output network",
                b.len(),
                mlp.output_dim()
            )));
        }
    }
    let mut doc = String::new();
    doc.push_str("{\n");
    let _ = writeln!(doc, "  \"schema\": \"{CHECKPOINT_SCHEMA}\",");
    let _ = writeln!(doc, "  \"input_dim\": {},", mlp.input_dim());
    let _ = writeln!(doc, "  \"output_dim\": {},", mlp.output_dim());
    match output_bound {
        Some(b) => {
            doc.push_str("  \"output_bound\": ");
            write_float_array(&mut doc, b);
            doc.push_str(",\n");
        }
        None => doc.push_str("  \"output_bound\": null,\n"),
    }
    doc.push_str("  \"layers\": [\n");
    for (i, layer) in mlp.layers().iter().enumerate() {
        doc.push_str("    {");
        let _ = write!(
            doc,
            "\"in_dim\": {}, \"out_dim\": {}, \"activation\": \"{}\", ",
            layer.weight.cols(),
            layer.weight.rows(),
            layer.activation.name()
        );
        doc.push_str("\"weight\": ");
        write_float_array(&mut doc, layer.weight.data());
        doc.push_str(", \"bias\": ");
        write_float_array(&mut doc, &layer.bias);
        doc.push('}');
        if i + 1 < mlp.layers().len() {
            doc.push(',');
        }
        doc.push('\n');
    }
    doc.push_str("  ]\n}\n");
    std::fs::write(path, doc).map_err(|e| Error::io(path, e))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointDoc {
    schema: String,
    input_dim: usize,
    output_dim: usize,
    output_bound: Option<Vec<f64>>,
    layers: Vec<LayerDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerDoc {
    in_dim: usize,
    out_dim: usize,
    activation: String,
    weight: Vec<f64>,
    bias: Vec<f64>,
}

/// Loads a checkpoint written by [`save_checkpoint`].
///
/// Malformed JSON reports the position of the defect; a well-formed
/// document with an inconsistent architecture is rejected without
/// constructing a partial model.
pub fn load_checkpoint(path: &Path) -> Result<(Mlp, Option<Vector>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: CheckpointDoc = serde_json::from_str(&text)
        .map_err(|e| Error::parse(path, format!("{e}")))?;
    if doc.schema != CHECKPOINT_SCHEMA {
        return Err(Error::parse(
            path,
            format!(
                "schema tag {:?} does not match expected {CHECKPOINT_SCHEMA:?}",
                doc.schema
            ),
        ));
    }
    if doc.layers.is_empty() {
        return Err(Error::parse(path, "checkpoint has no layers"));
    }
    let mut layers = Vec::with_capacity(doc.layers.len());
    let mut expected_in = doc.input_dim;
    for (i, l) in doc.layers.iter().enumerate() {
        if l.in_dim != expected_in {
            return Err(Error::parse(
                path,
                format!(
                    "layer {i} declares in_dim {} but the chain expects {expected_in}",
                    l.in_dim
                ),
            ));
        }
        if l.weight.len() != l.in_dim * l.out_dim {
            return Err(Error::parse(
                path,
                format!(
                    "layer {i} weight has {} entries, expected {}",
                    l.weight.len(),
                    l.in_dim * l.out_dim
                ),
            ));
        }
        if l.bias.len() != l.out_dim {
            return Err(Error::parse(
                path,
                format!(
                    "layer {i} bias has {} entries, expected {}",
                    l.bias.len(),
                    l.out_dim
                ),
            ));
        }
        let activation = Activation::from_name(&l.activation).ok_or_else(|| {
            Error::parse(path, format!("layer {i}: unknown activation {:?}", l.activation))
        })?;
        if l.weight.iter().chain(l.bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::parse(path, format!("layer {i} has non-finite parameters")));
        }
        layers.push(Layer {
            weight: Matrix::from_vec(l.out_dim, l.in_dim, l.weight.clone()),
            bias: l.bias.clone(),
            activation,
        });
        expected_in = l.out_dim;
    }
    if expected_in != doc.output_dim {
        return Err(Error::parse(
            path,
            format!(
                "declared output_dim {} does not match final layer ({expected_in})",
                doc.output_dim
            ),
        ));
    }
    if let Some(b) = &doc.output_bound {
        if b.len() != doc.output_dim {
            return Err(Error::parse(
                path,
                format!(
                    "output_bound has {} entries for a {}-output network",
                    b.len(),
                    doc.output_dim
                ),
            ));
        }
        if b.iter().any(|&c| !(c > 0.0)) {
            return Err(Error::parse(path, "output_bound entries must be positive"));
        }
    }
    Ok((Mlp::from_layers(layers), doc.output_bound))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        let mut rng = Rng::new(17);
        let net = Mlp::glorot(&[3, 64, 64, 2], &mut rng);
        save_checkpoint(&net, Some(&[7.0710678118654755, 7.0710678118654755]), &path).unwrap();
        let (loaded, bound) = load_checkpoint(&path).unwrap();
        assert_eq!(loaded, net);
        assert_eq!(bound, Some(vec![7.0710678118654755, 7.0710678118654755]));
        // A second save of the loaded network writes identical bytes.
        let path2 = dir.path().join("net2.json");
        save_checkpoint(&loaded, bound.as_deref(), &path2).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn awkward_floats_survive() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        let mut net = Mlp::glorot(&[1, 2, 1], &mut Rng::new(1));
        let mut flat = net.params_flat();
        flat[0] = f64::MIN_POSITIVE;
        flat[1] = -0.0;
        flat[2] = 0.1 + 0.2;
        flat[3] = 1e300;
        net.set_params_flat(&flat);
        save_checkpoint(&net, None, &path).unwrap();
        let (loaded, _) = load_checkpoint(&path).unwrap();
        for (a, b) in loaded.params_flat().iter().zip(flat.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn malformed_json_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("broken.json");
        std::fs::write(&path, "{\n  \"schema\": \"lyapctl-mlp-v1\",\n  oops\n}").unwrap();
        let err = load_checkpoint(&path).unwrap_err();
        match err {
            Error::Parse { message, .. } => {
                assert!(message.contains("line"), "no position in: {message}")
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        let net = Mlp::glorot(&[2, 4, 1], &mut Rng::new(3));
        save_checkpoint(&net, None, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        // Corrupt the declared input dimension.
        let bad = text.replace("\"input_dim\": 2", "\"input_dim\": 3");
        std::fs::write(&path, bad).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Parse { .. })));
    }

    #[test]
    fn wrong_schema_tag_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        let net = Mlp::glorot(&[2, 4, 1], &mut Rng::new(3));
        save_checkpoint(&net, None, &path).unwrap();
        let text = std::fs::read_to_string(&path)
            .unwrap()
            .replace(CHECKPOINT_SCHEMA, "lyapctl-mlp-v0");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Parse { .. })));
    }

    #[test]
    fn frozen_document_from_earlier_writer_still_loads() {
        // A document written by the first release of this format; the load
        // path must keep accepting it verbatim.
        let frozen = r#"{
  "schema": "lyapctl-mlp-v1",
  "input_dim": 2,
  "output_dim": 1,
  "output_bound": [1.0e1],
  "layers": [
    {"in_dim": 2, "out_dim": 2, "activation": "relu",
     "weight": [5.0000000000000000e-1,-2.5000000000000000e-1,1.2500000000000000e-1,1.0000000000000000e0],
     "bias": [0.0000000000000000e0,1.0000000000000000e-2]},
    {"in_dim": 2, "out_dim": 1, "activation": "identity",
     "weight": [1.0000000000000000e0,-1.0000000000000000e0],
     "bias": [3.0000000000000000e-1]}
  ]
}"#;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("frozen.json");
        std::fs::write(&path, frozen).unwrap();
        let (net, bound) = load_checkpoint(&path).unwrap();
        assert_eq!(net.input_dim(), 2);
        assert_eq!(net.output_dim(), 1);
        assert_eq!(bound, Some(vec![10.0]));
        // hidden pre-activations: [0.5*0.4 - 0.25*1.0, 0.125*0.4 + 1.0*1.0 + 0.01]
        //                       = [-0.05, 1.06], relu -> [0, 1.06]
        // output = 1*0 - 1*1.06 + 0.3 = -0.76
        let out = net.forward(&[0.4, 1.0]);
        assert!((out[0] + 0.76).abs() < 1e-12, "got {}", out[0]);
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_checkpoint(Path::new("/nonexistent/net.json")).unwrap_err();
        assert!(err.is_not_found());
    }
}
