//! Turns a phantom annotation into per-frame phase classes and per-event
//! soft target curves.

use valvetime::events::{EventSet, EventType, Phase};
use valvetime::labels::{make_phase_labels, make_phase_labels_for, make_soft_labels};
use valvetime::synth::{sample_motion_program, PhantomConfig};

fn digits(classes: &[i32]) -> String {
    classes
        .iter()
        .map(|&c| if c < 0 { '.' } else { char::from(b'0' + c as u8) })
        .collect()
}

fn main() -> valvetime::Result<()> {
    let program = sample_motion_program(3, &PhantomConfig::default())?;
    let ann = program.annotation();
    let n = program.n_frames();

    let six = make_phase_labels(&ann, n)?;
    println!("classes: {:?} ('.' = unknown)", Phase::ALL);
    println!("six phases  {}", digits(&six.classes));
    let two = make_phase_labels_for(&EventSet::Two.project(&ann), n, EventSet::Two)?;
    println!("two phases  {}", digits(&two.classes));

    let soft = make_soft_labels(&ann, n, 5)?;
    for (e, row) in EventType::ALL.iter().zip(&soft.rows) {
        let line: String = row
            .iter()
            .map(|&v| match v {
                v if v < 0.0 => '.',
                v if v >= 0.99 => '#',
                v if v > 0.5 => '+',
                v if v > 0.0 => '-',
                _ => ' ',
            })
            .collect();
        println!("{:<11} {line}", e.name());
    }
    Ok(())
}
