//! Patient-grouped k-fold plans.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::synth::Manifest;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Val,
    Test,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl Fold {
    pub fn role_of(&self, patient: &str) -> Option<Role> {
        let has = |s: &[String]| s.iter().any(|p| p == patient);
        if has(&self.test) {
            Some(Role::Test)
        } else if has(&self.val) {
            Some(Role::Val)
        } else if has(&self.train) {
            Some(Role::Train)
        } else {
            None
        }
    }

    /// Manifest entry indices whose patient has `role` in this fold.
    pub fn entries(&self, manifest: &Manifest, role: Role) -> Vec<usize> {
        let set = match role {
            Role::Train => &self.train,
            Role::Val => &self.val,
            Role::Test => &self.test,
        };
        manifest
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| set.contains(&e.patient))
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    /// Patient groups; fold `i` tests on `groups[i]`.
    pub groups: Vec<Vec<String>>,
    pub folds: Vec<Fold>,
}

/// Shuffles the manifest's patients with `seed`, deals them into `k` groups
/// and builds fold `i` as test = group `i`, validation = group `(i+1) mod k`,
/// training = the rest. All recordings of a patient follow the patient.
pub fn make_cv_splits(manifest: &Manifest, k: usize, seed: u64) -> Result<FoldPlan> {
    let mut patients = manifest.patients();
    if k < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 folds, got {k}")));
    }
    if patients.len() < k {
        return Err(Error::InvalidArgument(format!(
            "{} patients cannot fill {k} folds",
            patients.len()
        )));
    }
    patients.sort();
    patients.shuffle(&mut rng::stream(seed, "folds", ""));
    let mut groups = vec![Vec::new(); k];
    for (j, p) in patients.into_iter().enumerate() {
        groups[j % k].push(p);
    }
    for g in &mut groups {
        g.sort();
    }
    let folds = (0..k)
        .map(|i| {
            let v = (i + 1) % k;
            let mut train: Vec<String> = groups
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i && j != v)
                .flat_map(|(_, g)| g.iter().cloned())
                .collect();
            train.sort();
            Fold {
                train,
                val: groups[v].clone(),
                test: groups[i].clone(),
            }
        })
        .collect();
    Ok(FoldPlan { k, seed, groups, folds })
}

/// Per-role patient counts for each fold, keyed by fold index.
pub fn fold_sizes(plan: &FoldPlan) -> BTreeMap<usize, (usize, usize, usize)> {
    plan.folds
        .iter()
        .enumerate()
        .map(|(i, f)| (i, (f.train.len(), f.val.len(), f.test.len())))
        .collect()
}
