//! Checkpoints: a JSON header next to a raw weight blob.
//!
//! `<name>.json` holds the model config, training provenance and the SHA-256
//! of `<name>.weights`, which stores every parameter followed by the
//! batch-norm running statistics as little-endian `f64`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::events::EventSet;
use crate::models::ModelConfig;
use crate::nn::{Network, Scalar};

const FORMAT: &str = "valvetime-checkpoint/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format: String,
    /// Model as trained, after ablation switches were applied.
    pub model: ModelConfig,
    pub event_set: EventSet,
    pub seed: u64,
    pub fold: String,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub n_weights: usize,
    pub weights_sha256: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub weights: Vec<f64>,
}

fn blob(weights: &[f64]) -> Vec<u8> {
    weights.iter().flat_map(|w| w.to_le_bytes()).collect()
}

fn weights_path(header: &Path) -> PathBuf {
    header.with_extension("weights")
}

impl Checkpoint {
    pub fn new(meta_without_digest: CheckpointMeta, weights: Vec<f64>) -> Self {
        let mut meta = meta_without_digest;
        meta.format = FORMAT.to_string();
        meta.n_weights = weights.len();
        meta.weights_sha256 = hex::encode(Sha256::digest(blob(&weights)));
        Checkpoint { meta, weights }
    }

    /// Writes `<header>` and its sibling `.weights` file; `header` should end in `.json`.
    pub fn save(&self, header: &Path) -> Result<()> {
        if let Some(dir) = header.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(header, serde_json::to_vec_pretty(&self.meta)?).map_err(|e| Error::io(header, e))?;
        let wp = weights_path(header);
        fs::write(&wp, blob(&self.weights)).map_err(|e| Error::io(&wp, e))
    }

    pub fn load(header: &Path) -> Result<Self> {
        let text = fs::read(header).map_err(|e| Error::io(header, e))?;
        let meta: CheckpointMeta =
            serde_json::from_slice(&text).map_err(|e| Error::format(header, "checkpoint", e.to_string()))?;
        if meta.format != FORMAT {
            return Err(Error::format(header, "format", format!("unsupported format {:?}", meta.format)));
        }
        let wp = weights_path(header);
        let bytes = fs::read(&wp).map_err(|e| Error::io(&wp, e))?;
        if bytes.len() != meta.n_weights * 8 {
            return Err(Error::format(&wp, "weights", format!("expected {} values", meta.n_weights)));
        }
        if hex::encode(Sha256::digest(&bytes)) != meta.weights_sha256 {
            return Err(Error::format(&wp, "weights", "checksum mismatch"));
        }
        let weights = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Ok(Checkpoint { meta, weights })
    }

    pub fn build<S: Scalar>(&self) -> Result<Network<S>> {
        let mut net = self.meta.model.build(0)?;
        net.import_weights(&self.weights)?;
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ClassificationNetConfig;

    #[test]
    fn save_load_rebuilds_identical_network() {
        let model = ModelConfig::Classification(ClassificationNetConfig {
            input_size: 16,
            n_blocks: 2,
            base_filters: 2,
            recurrent_units: 4,
            ..ClassificationNetConfig::toy()
        });
        let mut net = model.build::<f32>(3).unwrap();
        let meta = CheckpointMeta {
            format: String::new(),
            model,
            event_set: EventSet::Six,
            seed: 3,
            fold: "0".into(),
            epochs_run: 1,
            best_epoch: 1,
            best_val_loss: 0.5,
            n_weights: 0,
            weights_sha256: String::new(),
        };
        let ck = Checkpoint::new(meta, net.export_weights());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fold_0.json");
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ck);
        let mut rebuilt = back.build::<f32>().unwrap();
        assert_eq!(rebuilt.export_weights(), net.export_weights());

        let mut bytes = fs::read(path.with_extension("weights")).unwrap();
        bytes[0] ^= 1;
        fs::write(path.with_extension("weights"), bytes).unwrap();
        assert!(Checkpoint::load(&path).is_err());
    }
}
