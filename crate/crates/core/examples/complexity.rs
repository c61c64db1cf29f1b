//! Parameter counts, compute and receptive fields of the network presets,
//! and how each ablation switch changes the parameter count.

use valvetime::models::{CellType, ClassificationNetConfig, ModelConfig, RegressionNetConfig};
use valvetime::train::Ablation;

fn describe(name: &str, model: &ModelConfig) -> valvetime::Result<u64> {
    let cx = model.arch()?.complexity()?;
    let [t, h, w] = cx.receptive_field;
    println!(
        "{name:<28} params {:>11}  conv MACs/frame {:>12}  MACs/frame {:>12}  RF {t}x{h}x{w}",
        cx.params, cx.conv_macs_per_frame, cx.macs_per_frame
    );
    Ok(cx.params)
}

fn main() -> valvetime::Result<()> {
    let full = ModelConfig::Classification(ClassificationNetConfig::full());
    let base = describe("classification (full)", &full)?;
    describe("classification (toy)", &ModelConfig::Classification(ClassificationNetConfig::toy()))?;
    describe("regression (full)", &ModelConfig::Regression(RegressionNetConfig::full()))?;
    describe("regression (toy)", &ModelConfig::Regression(RegressionNetConfig::toy()))?;

    println!("\nablations of the full classification net:");
    let variants = [
        ("bidirectional", Ablation { bidirectional: Some(true), ..Ablation::default() }),
        ("GRU cells", Ablation { cell: Some(CellType::Gru), ..Ablation::default() }),
        ("two events", Ablation { events: valvetime::events::EventSet::Two, ..Ablation::default() }),
    ];
    for (name, ablation) in variants {
        let p = describe(name, &ablation.apply(&full))?;
        println!("{:<28} change {:+}", "", p as i64 - base as i64);
    }
    Ok(())
}
