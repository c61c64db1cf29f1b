//! The run configuration: one JSON document with a default for every field,
//! adjustable by flat dotted `key=value` overrides.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::infer::PostprocessConfig;
use crate::models::{ClassificationNetConfig, ModelConfig, RegressionNetConfig};
use crate::synth::{DatasetMode, DatasetSpec, PhantomConfig};
use crate::train::{Task, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Full-size networks and 128-pixel phantoms.
    Full,
    /// Desk-scale networks and 64-pixel phantoms.
    Toy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub mode: DatasetMode,
    pub n_patients: usize,
    /// Worker threads for rendering; 0 uses every core.
    pub threads: usize,
    /// Phantom for triplane datasets.
    pub phantom: PhantomConfig,
    /// Phantom for external datasets.
    pub external_phantom: PhantomConfig,
}

impl Default for SynthSection {
    fn default() -> Self {
        SynthSection {
            mode: DatasetMode::Triplane,
            n_patients: 240,
            threads: 0,
            phantom: PhantomConfig::default(),
            external_phantom: PhantomConfig::external(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct ModelSection {
    pub classification: ClassificationNetConfig,
    pub regression: RegressionNetConfig,
}


#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrossvalSection {
    pub k: usize,
    /// Folds trained at the same time.
    pub parallel: usize,
}

impl Default for CrossvalSection {
    fn default() -> Self {
        CrossvalSection { k: 10, parallel: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root of every random stream in a run.
    pub seed: u64,
    pub synth: SynthSection,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub crossval: CrossvalSection,
    pub infer: PostprocessConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::preset(Preset::Full)
    }
}

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        let (phantom, external_phantom, classification, regression) = match preset {
            Preset::Full => (
                PhantomConfig::default(),
                PhantomConfig::external(),
                ClassificationNetConfig::full(),
                RegressionNetConfig::full(),
            ),
            Preset::Toy => (
                PhantomConfig::toy(),
                PhantomConfig {
                    size: PhantomConfig::toy().size,
                    ..PhantomConfig::external()
                },
                ClassificationNetConfig::toy(),
                RegressionNetConfig::toy(),
            ),
        };
        RunConfig {
            seed: 0,
            synth: SynthSection {
                phantom,
                external_phantom,
                ..SynthSection::default()
            },
            model: ModelSection {
                classification,
                regression,
            },
            train: TrainConfig::classification(),
            crossval: CrossvalSection::default(),
            infer: PostprocessConfig::default(),
            eval: EvalConfig::default(),
        }
    }

    pub fn dataset_spec(&self) -> DatasetSpec {
        DatasetSpec {
            mode: self.synth.mode,
            n_patients: self.synth.n_patients,
            seed: self.seed,
            phantom: match self.synth.mode {
                DatasetMode::Triplane => self.synth.phantom.clone(),
                DatasetMode::External => self.synth.external_phantom.clone(),
            },
        }
    }

    /// Network for the configured training task.
    pub fn model_config(&self) -> ModelConfig {
        match self.train.task {
            Task::Classification => ModelConfig::Classification(self.model.classification.clone()),
            Task::Regression => ModelConfig::Regression(self.model.regression.clone()),
        }
    }

    /// Training settings with the run seed.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.phantom.validate()?;
        self.synth.external_phantom.validate()?;
        self.model.classification.validate()?;
        self.model.regression.arch()?;
        self.train.validate()?;
        self.infer.validate()?;
        if self.crossval.k < 3 || self.crossval.parallel == 0 {
            return Err(Error::Config("crossval.k must be >= 3 and crossval.parallel >= 1".into()));
        }
        Ok(())
    }

    /// Merges a JSON config file over `self`; missing keys keep their values.
    pub fn merge_file(self, path: &Path) -> Result<Self> {
        let text = fs::read(path).map_err(|e| Error::io(path, e))?;
        let patch: Value = serde_json::from_slice(&text).map_err(|e| Error::format(path, "config", e.to_string()))?;
        let mut base = serde_json::to_value(&self)?;
        merge(&mut base, patch);
        serde_json::from_value(base).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Applies `a.b.c=value` overrides. The value is parsed as JSON when
    /// possible and taken as a string otherwise; unknown keys are rejected.
    pub fn apply_overrides(self, overrides: &[String]) -> Result<Self> {
        let mut v = serde_json::to_value(&self)?;
        for item in overrides {
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{item}` is not key=value")))?;
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            set_path(&mut v, key, value)?;
        }
        serde_json::from_value(v).map_err(|e| Error::Config(format!("after overrides: {e}")))
    }
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn set_path(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let Value::Object(map) = cur else {
            return Err(Error::Config(format!("`{key}`: `{}` is not a section", parts[..i].join("."))));
        };
        // Optional fields serialize as null and may be absent from nested enums.
        let Some(next) = map.get_mut(*part) else {
            return Err(Error::Config(format!("unknown config key `{key}`")));
        };
        if i + 1 == parts.len() {
            *next = value;
            return Ok(());
        }
        cur = next;
    }
    unreachable!("split yields at least one part")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = RunConfig::default();
        c.validate().unwrap();
        let back: RunConfig = serde_json::from_value(serde_json::to_value(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        let empty: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(empty, c);
    }

    #[test]
    fn dotted_overrides() {
        let c = RunConfig::default()
            .apply_overrides(&[
                "train.max_epochs=3".into(),
                "train.patience=1".into(),
                "synth.phantom.fps=61".into(),
                "train.task=regression".into(),
                "train.ablation.events=two".into(),
            ])
            .unwrap();
        assert_eq!(c.train.max_epochs, 3);
        assert_eq!(c.synth.phantom.fps, 61.0);
        assert_eq!(c.train.task, Task::Regression);
        assert_eq!(c.train_config().batch_size(), 4);
        assert!(RunConfig::default().apply_overrides(&["train.nope=1".into()]).is_err());
        assert!(RunConfig::default().apply_overrides(&["train.max_epochs".into()]).is_err());
        assert!(RunConfig::default().apply_overrides(&["train.max_epochs=abc".into()]).is_err());
    }
}
