//! JSON model files. Floats are written in shortest round-trip form, so a
//! save/load cycle reproduces every weight bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Layer, NetworkError, Plnn};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u32,
    dims: Vec<usize>,
    layers: Vec<LayerFile>,
    trained_on: Option<String>,
}

pub fn save(model: &Plnn, path: &Path) -> Result<(), NetworkError> {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        dims: model.dims().to_vec(),
        layers: model
            .layers()
            .iter()
            .map(|l| LayerFile {
                weights: (0..l.rows).map(|r| l.row(r).to_vec()).collect(),
                bias: l.bias.clone(),
            })
            .collect(),
        trained_on: model.trained_on.clone(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("model serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|source| NetworkError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load(path: &Path) -> Result<Plnn, NetworkError> {
    let text = std::fs::read_to_string(path).map_err(|source| NetworkError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let file: ModelFile =
        serde_json::from_str(&text).map_err(|e| NetworkError::CorruptFile(format!("{}: {e}", path.display())))?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(NetworkError::SchemaMismatch(format!(
            "format version {} (expected {MODEL_FORMAT_VERSION})",
            file.format_version
        )));
    }
    if file.dims.len() != file.layers.len() + 1 {
        return Err(NetworkError::SchemaMismatch(format!(
            "dims {:?} imply {} layers, file has {}",
            file.dims,
            file.dims.len().saturating_sub(1),
            file.layers.len()
        )));
    }
    let mut layers = Vec::with_capacity(file.layers.len());
    for (i, lf) in file.layers.into_iter().enumerate() {
        let (rows, cols) = (file.dims[i + 1], file.dims[i]);
        if lf.weights.len() != rows || lf.weights.iter().any(|r| r.len() != cols) || lf.bias.len() != rows {
            return Err(NetworkError::SchemaMismatch(format!("layer {i} is not {rows}x{cols}")));
        }
        layers.push(Layer::from_rows(&lf.weights, lf.bias));
    }
    let mut model = Plnn::new(layers).map_err(|e| NetworkError::SchemaMismatch(e.to_string()))?;
    model.trained_on = file.trained_on;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut m = Plnn::init(&[12, 16, 8, 1], 99).unwrap();
        m.layers_mut()[0].weights[3] = 0.1 + 0.2;
        m.layers_mut()[1].bias[0] = -1.234_567_890_123_456_7e-300;
        m.trained_on = Some("abc".into());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        save(&m, &p).unwrap();
        let back = load(&p).unwrap();
        let bits = |m: &Plnn| -> Vec<u64> { super::super::flatten_params(m).iter().map(|v| v.to_bits()).collect() };
        assert_eq!(bits(&m), bits(&back));
        assert_eq!(back, m);
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let m = Plnn::init(&[4, 3, 1], 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        save(&m, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        std::fs::write(&p, &text[..text.len() / 2]).unwrap();
        assert!(matches!(load(&p), Err(NetworkError::CorruptFile(_))));
    }

    #[test]
    fn wrong_shapes_are_schema_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        let bad = r#"{"format_version":1,"dims":[12,16,1],
            "layers":[{"weights":[[1.0,2.0]],"bias":[0.0]},{"weights":[[1.0]],"bias":[0.0]}],
            "trained_on":null}"#;
        std::fs::write(&p, bad).unwrap();
        assert!(matches!(load(&p), Err(NetworkError::SchemaMismatch(_))));
    }
}
