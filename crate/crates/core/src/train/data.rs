//! In-memory training samples loaded from a manifest.

use std::path::Path;

use crate::error::{Error, Result};
use crate::events::{EventAnnotation, EventSet, View};
use crate::labels::{make_phase_labels_for, make_soft_labels_for, resize_frames, Clip, LabelTrack};
use crate::synth::{load_annotation_file, load_recording, resolve, Manifest};

use super::Task;

/// One recording resized to the network input, with its reference annotation.
#[derive(Clone, Debug)]
pub struct Sample {
    pub id: String,
    pub patient: String,
    pub view: View,
    pub fps: f64,
    pub clip: Clip,
    pub annotation: EventAnnotation,
}

impl Sample {
    pub fn n_frames(&self) -> usize {
        self.clip.n_frames
    }

    /// Per-frame targets for `task` over the events of `set`.
    pub fn labels(&self, task: Task, set: EventSet, soft_width: usize) -> Result<LabelTrack> {
        make_targets(&self.annotation, self.n_frames(), task, set, soft_width)
    }
}

/// Training targets of `task` for an annotation projected onto `set`.
pub fn make_targets(
    ann: &EventAnnotation,
    n_frames: usize,
    task: Task,
    set: EventSet,
    soft_width: usize,
) -> Result<LabelTrack> {
    let ann = set.project(ann);
    Ok(match task {
        Task::Classification => LabelTrack::from(&make_phase_labels_for(&ann, n_frames, set)?),
        Task::Regression => LabelTrack::from(&make_soft_labels_for(&ann, n_frames, soft_width, set)?),
    })
}

/// Loads the manifest entries at `indices`, resizing frames to
/// `size × size × channels`.
pub fn load_samples(
    manifest_path: &Path,
    manifest: &Manifest,
    indices: &[usize],
    size: usize,
    channels: usize,
) -> Result<Vec<Sample>> {
    indices
        .iter()
        .map(|&i| {
            let entry = manifest
                .entries
                .get(i)
                .ok_or_else(|| Error::InvalidArgument(format!("manifest has no entry {i}")))?;
            let rec = load_recording(&resolve(manifest_path, &entry.recording_path))?;
            let ann_path = resolve(manifest_path, &entry.annotation_path);
            let file = load_annotation_file(&ann_path)?;
            if file.n_frames != rec.frames.n_frames {
                return Err(Error::format(
                    &ann_path,
                    "n_frames",
                    format!("{} frames annotated, recording {} has {}", file.n_frames, rec.id, rec.frames.n_frames),
                ));
            }
            Ok(Sample {
                id: rec.id.clone(),
                patient: entry.patient.clone(),
                view: rec.view,
                fps: rec.fps,
                clip: resize_frames(&rec.frames, size, channels),
                annotation: file.annotation(),
            })
        })
        .collect()
}
