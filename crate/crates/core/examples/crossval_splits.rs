//! Plans a 240-patient triplane dataset (no rendering) and prints the
//! ten-fold patient-grouped split sizes.

use std::collections::BTreeSet;

use valvetime::synth::{plan_dataset, DatasetSpec};
use valvetime::train::{fold_sizes, make_cv_splits, Role};

fn main() -> valvetime::Result<()> {
    let (manifest, _) = plan_dataset(&DatasetSpec::triplane(240, 7))?;
    let plan = make_cv_splits(&manifest, 10, 7)?;
    println!("fold  train  val  test  (patients)   test recordings");
    for (i, (tr, va, te)) in fold_sizes(&plan) {
        let rec = plan.folds[i].entries(&manifest, Role::Test).len();
        println!("{i:>4} {tr:>6} {va:>4} {te:>5} {rec:>27}");
    }
    let tested: BTreeSet<&String> = plan.folds.iter().flat_map(|f| f.test.iter()).collect();
    println!("patients tested exactly once: {}", tested.len() == manifest.patients().len());
    Ok(())
}
