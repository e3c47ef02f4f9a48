//! Model checkpoints.
//!
//! A checkpoint is a UTF-8 JSON document:
//!
//! ```text
//! {
//!   "format": "scl-mlp",
//!   "format_version": 1,
//!   "activation": "tanh",
//!   "output_activation": "identity",
//!   "widths": [3, 50, 50, 1],
//!   "input_shift": [...],            // one per input coordinate
//!   "input_scale": [...],
//!   "layers": [ { "weights": [[...], ...], "biases": [...] }, ... ]
//! }
//! ```
//!
//! `weights` is `out x in`, one inner array per output unit. Floats are
//! written in shortest round-trip form, so save/load is lossless.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{JetError, Mlp};

pub const CHECKPOINT_VERSION: u32 = 1;
const FORMAT: &str = "scl-mlp";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointDoc {
    format: String,
    format_version: u32,
    activation: String,
    output_activation: String,
    widths: Vec<usize>,
    input_shift: Vec<f64>,
    input_scale: Vec<f64>,
    layers: Vec<LayerDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerDoc {
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
}

pub fn write_checkpoint<W: Write>(model: &Mlp, mut out: W) -> Result<(), JetError> {
    let layers = (0..model.n_layers())
        .map(|l| {
            let (w, b) = model.layer(l);
            let n_in = model.widths()[l];
            LayerDoc { weights: w.chunks(n_in).map(<[f64]>::to_vec).collect(), biases: b.to_vec() }
        })
        .collect();
    let doc = CheckpointDoc {
        format: FORMAT.into(),
        format_version: CHECKPOINT_VERSION,
        activation: "tanh".into(),
        output_activation: "identity".into(),
        widths: model.widths().to_vec(),
        input_shift: model.input_shift().to_vec(),
        input_scale: model.input_scale().to_vec(),
        layers,
    };
    serde_json::to_writer_pretty(&mut out, &doc).map_err(|e| JetError::Checkpoint(e.to_string()))?;
    out.write_all(b"\n").map_err(|e| JetError::Checkpoint(e.to_string()))
}

pub fn read_checkpoint<R: Read>(input: R) -> Result<Mlp, JetError> {
    let doc: CheckpointDoc = serde_json::from_reader(input).map_err(|e| JetError::Checkpoint(e.to_string()))?;
    if doc.format != FORMAT {
        return Err(JetError::Checkpoint(format!("unknown format {:?}", doc.format)));
    }
    if doc.format_version != CHECKPOINT_VERSION {
        return Err(JetError::Checkpoint(format!("unsupported format_version {}", doc.format_version)));
    }
    if doc.activation != "tanh" || doc.output_activation != "identity" {
        return Err(JetError::Checkpoint("only tanh hidden / identity output networks are supported".into()));
    }
    let layers: Vec<(Vec<f64>, Vec<f64>)> =
        doc.layers.into_iter().map(|l| (l.weights.concat(), l.biases)).collect();
    let mut model = Mlp::from_layers(&doc.widths, &layers)?;
    model.set_input_map(doc.input_shift, doc.input_scale)?;
    Ok(model)
}

pub fn save_checkpoint(model: &Mlp, path: &Path) -> Result<(), JetError> {
    let file = std::fs::File::create(path).map_err(|e| JetError::Checkpoint(format!("{}: {e}", path.display())))?;
    let mut w = std::io::BufWriter::new(file);
    write_checkpoint(model, &mut w)?;
    w.flush().map_err(|e| JetError::Checkpoint(e.to_string()))
}

pub fn load_checkpoint(path: &Path) -> Result<Mlp, JetError> {
    let file = std::fs::File::open(path).map_err(|e| JetError::Checkpoint(format!("{}: {e}", path.display())))?;
    read_checkpoint(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_lossless() {
        let model = Mlp::glorot(&[3, 5, 4, 1], 11)
            .unwrap()
            .with_input_box(&[0.0, 0.0, 1.0], &[6.3, 1.0, 30.0])
            .unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&model, &mut buf).unwrap();
        let back = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn rejects_wrong_version() {
        let model = Mlp::glorot(&[1, 2, 1], 0).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&model, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap().replace("\"format_version\": 1", "\"format_version\": 9");
        let err = read_checkpoint(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("format_version"));
    }
}
