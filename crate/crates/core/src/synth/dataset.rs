//! Dataset generation and manifests.
//!
//! Layout under the output directory:
//!
//! ```text
//! manifest.json
//! recordings/<id>.json, recordings/<id>.frames
//! annotations/<patient>.json
//! ```
//!
//! Paths in the manifest are relative to the manifest's directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::render::render_recording;
use super::storage::{save_annotation_file, save_recording, AnnotationFile};
use super::{sample_motion_program, MotionProgram, PhantomConfig};
use crate::error::{Error, Result};
use crate::events::{Cycle, EventAnnotation, EventType, View};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetMode {
    /// Three views per patient sharing one annotation.
    Triplane,
    /// APLAX only, valve events only, for held-out testing.
    External,
}

impl DatasetMode {
    pub fn views(self) -> &'static [View] {
        match self {
            DatasetMode::Triplane => &[View::A4ch, View::A2ch, View::Aplax],
            DatasetMode::External => &[View::Aplax],
        }
    }

    fn patient_prefix(self) -> &'static str {
        match self {
            DatasetMode::Triplane => "P",
            DatasetMode::External => "X",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub mode: DatasetMode,
    pub n_patients: usize,
    pub seed: u64,
    pub phantom: PhantomConfig,
}

impl DatasetSpec {
    pub fn triplane(n_patients: usize, seed: u64) -> Self {
        DatasetSpec {
            mode: DatasetMode::Triplane,
            n_patients,
            seed,
            phantom: PhantomConfig::default(),
        }
    }

    pub fn external(n_patients: usize, seed: u64) -> Self {
        DatasetSpec {
            mode: DatasetMode::External,
            n_patients,
            seed,
            phantom: PhantomConfig::external(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub patient: String,
    pub view: View,
    pub fps: f64,
    pub n_frames: usize,
    pub recording_path: String,
    pub annotation_path: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub mode: DatasetMode,
    /// SHA-256 of the phantom config used.
    pub config_digest: String,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// Distinct patient ids in manifest order.
    pub fn patients(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for e in &self.entries {
            if out.last() != Some(&e.patient) && !out.contains(&e.patient) {
                out.push(e.patient.clone());
            }
        }
        out
    }
}

/// One recording to be rendered.
#[derive(Clone, Debug)]
pub struct PlannedRecording {
    pub entry: ManifestEntry,
    pub program: MotionProgram,
}

fn valve_events_only(ann: &EventAnnotation) -> EventAnnotation {
    let cycles = ann
        .cycles
        .iter()
        .map(|c| {
            let mut c: Cycle = *c;
            c.set(EventType::Dss, None);
            c.set(EventType::Ass, None);
            c
        })
        .filter(|c| !c.is_empty())
        .collect();
    EventAnnotation::new(cycles, ann.source.clone())
}

/// Samples every patient's motion program and lays out file names, without rendering.
pub fn plan_dataset(spec: &DatasetSpec) -> Result<(Manifest, Vec<PlannedRecording>)> {
    spec.phantom.validate()?;
    let mut plan = Vec::with_capacity(spec.n_patients * spec.mode.views().len());
    for i in 0..spec.n_patients {
        let patient = format!("{}{i:04}", spec.mode.patient_prefix());
        let seed = rng::derive_seed(spec.seed, "patient", &patient);
        let program = sample_motion_program(seed, &spec.phantom)?;
        for &view in spec.mode.views() {
            let id = format!("{patient}_{}", view.name());
            plan.push(PlannedRecording {
                entry: ManifestEntry {
                    id: id.clone(),
                    patient: patient.clone(),
                    view,
                    fps: program.fps,
                    n_frames: program.n_frames(),
                    recording_path: format!("recordings/{id}.json"),
                    annotation_path: format!("annotations/{patient}.json"),
                },
                program: program.clone(),
            });
        }
    }
    let manifest = Manifest {
        seed: spec.seed,
        mode: spec.mode,
        config_digest: spec.phantom.digest(),
        entries: plan.iter().map(|p| p.entry.clone()).collect(),
    };
    Ok((manifest, plan))
}

fn render_one(spec: &DatasetSpec, item: &PlannedRecording, out_dir: &Path) -> Result<()> {
    let e = &item.entry;
    let (rec, ann) = render_recording(&item.program, e.view, &spec.phantom, &e.id)?;
    save_recording(&rec, &out_dir.join(&e.recording_path))?;
    // Annotation is shared across a patient's views; the first view writes it.
    if e.view == spec.mode.views()[0] {
        let (ann, view) = match spec.mode {
            DatasetMode::Triplane => (ann, None),
            DatasetMode::External => (valve_events_only(&ann), Some(e.view)),
        };
        let file = AnnotationFile::new(&e.patient, rec.fps, view, rec.n_frames(), &ann);
        save_annotation_file(&file, &out_dir.join(&e.annotation_path))?;
    }
    Ok(())
}

/// Renders and writes the whole dataset plus `manifest.json`.
///
/// Work is spread over `threads` workers (0 = all cores). Output bytes do not
/// depend on the thread count.
pub fn generate_dataset(spec: &DatasetSpec, out_dir: &Path, threads: usize) -> Result<Manifest> {
    let (manifest, plan) = plan_dataset(spec)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let threads = if threads == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        threads
    };
    let next = AtomicUsize::new(0);
    let first_error: Mutex<Option<(usize, Error)>> = Mutex::new(None);
    std::thread::scope(|s| {
        for _ in 0..threads.min(plan.len()).max(1) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= plan.len() {
                    break;
                }
                if let Err(e) = render_one(spec, &plan[i], out_dir) {
                    let mut slot = first_error.lock().expect("poisoned");
                    if slot.as_ref().is_none_or(|(j, _)| i < *j) {
                        *slot = Some((i, e));
                    }
                }
            });
        }
    });
    if let Some((_, e)) = first_error.into_inner().expect("poisoned") {
        return Err(e);
    }
    let path = out_dir.join("manifest.json");
    fs::write(&path, serde_json::to_vec_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    log::info!("wrote {} recordings to {}", manifest.entries.len(), out_dir.display());
    Ok(manifest)
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&text).map_err(|e| {
        let msg = e.to_string();
        let field = msg.split('`').nth(1).unwrap_or("manifest").to_string();
        Error::format(path, field, msg)
    })
}

/// SHA-256 of the canonical JSON form of a manifest.
pub fn manifest_digest(manifest: &Manifest) -> String {
    let bytes = serde_json::to_vec(manifest).expect("manifest serializes");
    hex::encode(Sha256::digest(bytes))
}

/// Resolves a manifest-relative path.
pub fn resolve(manifest_path: &Path, rel: &str) -> PathBuf {
    manifest_path.parent().unwrap_or_else(|| Path::new("")).join(rel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::validate_annotation;
    use crate::synth::{load_annotation_file, load_recording};

    #[test]
    fn plan_sizes_follow_mode() {
        let (m, _) = plan_dataset(&DatasetSpec::triplane(240, 1)).unwrap();
        assert_eq!(m.entries.len(), 720);
        assert_eq!(m.patients().len(), 240);
        let ann: std::collections::BTreeSet<_> = m.entries.iter().map(|e| &e.annotation_path).collect();
        assert_eq!(ann.len(), 240);

        let (x, _) = plan_dataset(&DatasetSpec::external(180, 1)).unwrap();
        assert_eq!(x.entries.len(), 180);
        assert!(x.entries.iter().all(|e| e.view == View::Aplax && e.fps == 61.0));
    }

    #[test]
    fn generation_is_byte_identical() {
        let mut spec = DatasetSpec::triplane(2, 9);
        spec.phantom = PhantomConfig::toy();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ma = generate_dataset(&spec, a.path(), 1).unwrap();
        let mb = generate_dataset(&spec, b.path(), 3).unwrap();
        assert_eq!(manifest_digest(&ma), manifest_digest(&mb));
        for e in &ma.entries {
            for rel in [e.recording_path.clone(), e.recording_path.replace(".json", ".frames")] {
                assert_eq!(fs::read(a.path().join(&rel)).unwrap(), fs::read(b.path().join(&rel)).unwrap());
            }
        }
        let loaded = load_manifest(&a.path().join("manifest.json")).unwrap();
        assert_eq!(loaded, ma);
        for e in &ma.entries {
            let rec = load_recording(&a.path().join(&e.recording_path)).unwrap();
            let ann = load_annotation_file(&a.path().join(&e.annotation_path)).unwrap();
            assert_eq!(rec.n_frames(), e.n_frames);
            assert!(validate_annotation(&ann.annotation(), rec.n_frames()).is_empty());
        }
    }

    #[test]
    fn external_annotations_have_valve_events_only() {
        let mut spec = DatasetSpec::external(1, 4);
        spec.phantom.size = 64;
        let dir = tempfile::tempdir().unwrap();
        let m = generate_dataset(&spec, dir.path(), 1).unwrap();
        let ann = load_annotation_file(&dir.path().join(&m.entries[0].annotation_path)).unwrap();
        let ann = ann.annotation();
        assert!(!ann.contains(EventType::Dss) && !ann.contains(EventType::Ass));
        assert!(ann.contains(EventType::Mvc) && ann.contains(EventType::Avo));
    }
}
