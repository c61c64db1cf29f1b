//! Cardiac intervals of synthetic patients and their classification
//! against the reference ranges.

use valvetime::eval::{cardiac_intervals, classify_intervals, IntervalKind};
use valvetime::synth::{sample_motion_program, PhantomConfig};

fn main() -> valvetime::Result<()> {
    let cfg = PhantomConfig::default();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); IntervalKind::ALL.len()];
    for seed in 0..50 {
        let program = sample_motion_program(seed, &cfg)?;
        for c in cardiac_intervals(&program.annotation(), program.fps)? {
            for (k, v) in IntervalKind::ALL.iter().zip(values.iter_mut()) {
                v.extend(c.get(*k));
            }
        }
    }
    println!("interval     n  mean ms  below  normal  above");
    for (k, v) in IntervalKind::ALL.iter().zip(&values) {
        let mean = v.iter().sum::<f64>() / v.len().max(1) as f64;
        match k.normal_range() {
            Some(range) => {
                let t = classify_intervals(v, range);
                println!(
                    "{:<9} {:>4} {:>8.1} {:>6.2} {:>7.2} {:>6.2}",
                    k.name(),
                    t.n,
                    mean,
                    t.below,
                    t.normal,
                    t.above
                );
            }
            None => println!("{:<9} {:>4} {:>8.1}", k.name(), v.len(), mean),
        }
    }
    Ok(())
}
