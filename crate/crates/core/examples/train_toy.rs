//! Trains the desk-scale classification network on synthetic recordings and
//! reports per-event timing errors on held-out recordings.
//!
//! Usage: `cargo run --release --example train_toy -- [max_epochs] [train_recordings]`

use std::time::Instant;

use valvetime::eval::{aggregate_report, evaluate_recording, EvalConfig, StdKind};
use valvetime::events::{EventSet, EventType};
use valvetime::infer::{phases_to_events, PredictionKind};
use valvetime::models::{ClassificationNetConfig, ModelConfig};
use valvetime::synth::{generate_dataset, DatasetSpec, PhantomConfig};
use valvetime::train::{load_samples, predict_samples, train_fold, TrainConfig};

fn main() -> valvetime::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let max_epochs = args.first().copied().unwrap_or(40);
    let n_train = args.get(1).copied().unwrap_or(200);

    let dir = tempfile::tempdir().map_err(|e| valvetime::Error::InvalidArgument(e.to_string()))?;
    let started = Instant::now();
    let mut sets = Vec::new();
    for (name, seed, n) in [("train", 1u64, n_train), ("val", 2, 20), ("test", 3, 20)] {
        let spec = DatasetSpec {
            phantom: PhantomConfig::toy(),
            ..DatasetSpec::triplane(n.div_ceil(3), seed)
        };
        let root = dir.path().join(name);
        let manifest = generate_dataset(&spec, &root, 0)?;
        let idx: Vec<usize> = (0..n).collect();
        sets.push(load_samples(&root.join("manifest.json"), &manifest, &idx, 64, 1)?);
    }
    println!("data ready in {:.1?}", started.elapsed());

    let model = ModelConfig::Classification(ClassificationNetConfig::toy());
    let cfg = TrainConfig {
        max_epochs,
        patience: 15.min(max_epochs - 1),
        seed: 7,
        ..TrainConfig::classification()
    };
    let outcome = train_fold(&model, &cfg, &sets[0], &sets[1], "toy")?;
    println!(
        "trained {} epochs in {:.1?}; best epoch {}",
        outcome.history.len(),
        started.elapsed(),
        outcome.checkpoint.meta.best_epoch
    );

    let mut net = outcome.checkpoint.build::<f32>()?;
    let preds = predict_samples(&mut net, PredictionKind::PhaseProbs, EventSet::Six, &sets[2], 4)?;
    let records: Vec<_> = preds
        .iter()
        .zip(&sets[2])
        .map(|(p, s)| {
            let decoded = phases_to_events(p, 2)?;
            Ok(evaluate_recording(
                &s.id,
                "synthetic",
                Some(s.view),
                s.fps,
                s.n_frames(),
                &decoded.annotation,
                &s.annotation,
                &EvalConfig::default(),
            ))
        })
        .collect::<valvetime::Result<_>>()?;
    let report = aggregate_report(&records, StdKind::Sample)?;
    for e in EventType::ALL {
        if let Some(r) = report.row("synthetic", "all", e) {
            println!(
                "{e}: pairs {:3} misses {:2} false {:2} FD {:>7} aFD {:>6}",
                r.n_pairs,
                r.misses,
                r.false_detections,
                r.fd_mean.map_or("-".into(), |v| format!("{v:.2}")),
                r.afd.map_or("-".into(), |v| format!("{v:.2}")),
            );
        }
    }
    Ok(())
}
