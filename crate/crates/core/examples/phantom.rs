//! Draws one synthetic patient, renders its three views and prints the
//! exact event frames. Pass a directory to also write each view's first
//! frame as a PGM image.

use std::path::PathBuf;

use valvetime::events::View;
use valvetime::synth::{render_recording, sample_motion_program, PhantomConfig};

fn main() -> valvetime::Result<()> {
    let out: Option<PathBuf> = std::env::args().nth(1).map(PathBuf::from);
    let cfg = PhantomConfig::default();
    let program = sample_motion_program(42, &cfg)?;
    println!(
        "{} cycles, {} frames at {} fps, atrial systole: {}",
        program.n_cycles(),
        program.n_frames(),
        program.fps,
        program.atrial_systole
    );
    for (i, d) in program.cycle_durations().iter().enumerate() {
        let ms: Vec<String> = d.iter().map(|v| format!("{v:.0}")).collect();
        println!("cycle {i} phase durations (ms): {}", ms.join(" "));
    }
    for view in [View::A4ch, View::A2ch, View::Aplax] {
        let (rec, ann) = render_recording(&program, view, &cfg, &format!("demo-{view}"))?;
        let events: Vec<String> = ann.events_by_frame().iter().map(|(_, e, f)| format!("{e}@{f}")).collect();
        println!("{view}: {}", events.join(" "));
        if let Some(dir) = &out {
            let frame = rec.frames.frame(0);
            let mut pgm = format!("P5\n{} {}\n255\n", rec.frames.width, rec.frames.height).into_bytes();
            pgm.extend(frame.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
            let path = dir.join(format!("{}.pgm", rec.id));
            std::fs::write(&path, pgm).map_err(|e| valvetime::Error::InvalidArgument(e.to_string()))?;
        }
    }
    Ok(())
}
