//! Short training runs on toy phantoms.

use std::path::Path;

use valvetime::models::{ClassificationNetConfig, ModelConfig};
use valvetime::synth::{generate_dataset, DatasetSpec, PhantomConfig};
use valvetime::train::{load_samples, train_fold, Sample, TrainConfig};

fn toy_samples(dir: &Path, seed: u64, n_recordings: usize) -> Vec<Sample> {
    let spec = DatasetSpec {
        phantom: PhantomConfig::toy(),
        ..DatasetSpec::triplane(n_recordings.div_ceil(3), seed)
    };
    let root = dir.join(seed.to_string());
    let manifest = generate_dataset(&spec, &root, 0).unwrap();
    let idx: Vec<usize> = (0..n_recordings).collect();
    load_samples(&root.join("manifest.json"), &manifest, &idx, 64, 1).unwrap()
}

#[test]
fn toy_training_loss_mostly_decreases() {
    let dir = tempfile::tempdir().unwrap();
    let train = toy_samples(dir.path(), 11, 20);
    let val = toy_samples(dir.path(), 12, 6);
    let model = ModelConfig::Classification(ClassificationNetConfig::toy());
    let cfg = TrainConfig {
        max_epochs: 5,
        patience: 4,
        seed: 3,
        ..TrainConfig::classification()
    };
    let out = train_fold(&model, &cfg, &train, &val, "smoke").unwrap();
    let losses: Vec<f64> = out.history.iter().map(|r| r.train_loss).collect();
    assert_eq!(losses.len(), 5, "early stopping fired: {losses:?}");
    let decreases = losses.windows(2).filter(|w| w[1] < w[0]).count();
    assert!(decreases >= 3, "train losses {losses:?}");
}
