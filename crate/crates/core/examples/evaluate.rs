//! Scores jittered predictions against phantom references: pairing,
//! per-event FD/aFD, a report CSV and an error histogram SVG.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use valvetime::eval::{aggregate_report, evaluate_recording, histogram_svg, EvalConfig, StdKind};
use valvetime::events::{Cycle, EventAnnotation, EventType, Source, View};
use valvetime::synth::{sample_motion_program, PhantomConfig};

fn main() -> valvetime::Result<()> {
    let out = std::env::temp_dir().join("valvetime-evaluate");
    std::fs::create_dir_all(&out).map_err(|e| valvetime::Error::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cfg = PhantomConfig::default();
    let mut records = Vec::new();
    for seed in 0..30 {
        let program = sample_motion_program(seed, &cfg)?;
        let truth = program.annotation();
        let n = program.n_frames();
        // Each event moved by -1, 0 or +1 frames; 5% are missed.
        let cycles: Vec<Cycle> = truth
            .cycles
            .iter()
            .map(|c| {
                let mut out = Cycle::default();
                for e in EventType::ALL {
                    if let Some(f) = c.get(e) {
                        if !rng.gen_bool(0.05) {
                            let moved = (f as i64 + rng.gen_range(-1..=1)).clamp(0, n as i64 - 1);
                            out.set(e, Some(moved as usize));
                        }
                    }
                }
                out
            })
            .collect();
        let pred = EventAnnotation::new(cycles, Source::Prediction);
        let view = [View::A4ch, View::A2ch, View::Aplax][seed as usize % 3];
        records.push(evaluate_recording(
            &format!("rec{seed:02}"),
            "demo",
            Some(view),
            program.fps,
            n,
            &pred,
            &truth,
            &EvalConfig::default(),
        ));
    }
    let report = aggregate_report(&records, StdKind::Sample)?;
    for e in EventType::ALL {
        let r = report.row("demo", "all", e).expect("every event is annotated");
        println!(
            "{e}: pairs {} misses {} FD {:+.2} ± {:.2} aFD {:.2} frames ({:.1} ms)",
            r.n_pairs,
            r.misses,
            r.fd_mean.unwrap_or(f64::NAN),
            r.fd_std.unwrap_or(f64::NAN),
            r.afd.unwrap_or(f64::NAN),
            r.afd_ms.unwrap_or(f64::NAN)
        );
    }
    report.write_csv(&out.join("report.csv"))?;
    let svg = histogram_svg("MVC frame error", &report.histograms[&EventType::Mvc]);
    std::fs::write(out.join("histogram_MVC.svg"), svg).map_err(|e| valvetime::Error::InvalidArgument(e.to_string()))?;
    println!("wrote {}", out.display());
    Ok(())
}
