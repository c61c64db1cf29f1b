//! Decodes noisy network-like outputs into event annotations: phase
//! probabilities through the mode filter, and event curves through
//! smoothing and peak picking.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use valvetime::events::{EventAnnotation, EventSet};
use valvetime::infer::{curves_to_events, phases_to_events, FramePredictions, PredictionKind};
use valvetime::labels::{make_phase_labels, make_soft_labels};
use valvetime::synth::{sample_motion_program, PhantomConfig};

fn show(name: &str, ann: &EventAnnotation) {
    let s: Vec<String> = ann.events_by_frame().iter().map(|(_, e, f)| format!("{e}@{f}")).collect();
    println!("{name:<10} {}", s.join(" "));
}

fn main() -> valvetime::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let program = sample_motion_program(11, &PhantomConfig::default())?;
    let truth = program.annotation();
    let n = program.n_frames();
    show("reference", &truth);

    // Probabilities peaked on the true phase, with 5% of frames flipped to a
    // random class.
    let classes = make_phase_labels(&truth, n)?.classes;
    let mut probs = Vec::with_capacity(n * 6);
    let mut last = 0usize;
    for &c in &classes {
        let mut k = if c < 0 { last } else { c as usize };
        last = k;
        if rng.gen_bool(0.05) {
            k = rng.gen_range(0..6);
        }
        probs.extend((0..6).map(|j| if j == k { 0.75 } else { 0.05 }));
    }
    let pred = FramePredictions::new("demo", program.fps, PredictionKind::PhaseProbs, EventSet::Six, probs)?;
    let decoded = phases_to_events(&pred, 2)?;
    show("phases", &decoded.annotation);
    println!("dropped {:?}", decoded.diagnostics.dropped_events);

    // Triangular targets with additive noise.
    let soft = make_soft_labels(&truth, n, 5)?;
    let mut curves = Vec::with_capacity(n * 6);
    for f in 0..n {
        for row in &soft.rows {
            curves.push((row[f].max(0.0) + rng.gen_range(-0.1..0.1f32)).clamp(0.0, 1.0));
        }
    }
    let pred = FramePredictions::new("demo", program.fps, PredictionKind::EventCurves, EventSet::Six, curves)?;
    show("curves", &curves_to_events(&pred, 1.5, 0.3)?.annotation);
    Ok(())
}
