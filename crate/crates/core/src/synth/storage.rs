//! On-disk layout for recordings and annotations.
//!
//! A recording is two files side by side: `<stem>.json` (metadata sidecar)
//! and `<stem>.frames` (frame container). The container starts with the
//! 8-byte magic `VTFRAMES`, then four little-endian `u32` values
//! `version, n_frames, height, width`, then one byte `encoding`
//! (`0` = u8 levels `k/255`, `1` = f32 little-endian), then the pixels in
//! `[frame][row][col]` order. Stacks whose pixels are all exact `k/255`
//! values are stored as u8, anything else as f32, so loading always
//! reproduces the saved stack bit for bit.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{validate_annotation, Cycle, EventAnnotation, FrameStack, Recording, Source, View};

const MAGIC: &[u8; 8] = b"VTFRAMES";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 * 4 + 1;
const SIDECAR_FORMAT: &str = "valvetime-recording/1";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    format: String,
    id: String,
    fps: f64,
    view: View,
    n_frames: usize,
    height: usize,
    width: usize,
    frames_file: String,
}

fn frames_path_for(sidecar: &Path) -> PathBuf {
    sidecar.with_extension("frames")
}

fn quantized(data: &[f32]) -> Option<Vec<u8>> {
    data.iter()
        .map(|&v| {
            let q = (v * 255.0).round();
            let b = q as u8;
            (f32::from(b) / 255.0 == v).then_some(b)
        })
        .collect()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes `rec` to `path` (the JSON sidecar) and its frame container next to it.
pub fn save_recording(rec: &Recording, path: &Path) -> Result<()> {
    let frames_path = frames_path_for(path);
    let fs_ = &rec.frames;
    let mut bytes = Vec::with_capacity(HEADER_LEN + fs_.data.len());
    bytes.extend_from_slice(MAGIC);
    for v in [VERSION, fs_.n_frames as u32, fs_.height as u32, fs_.width as u32] {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    match quantized(&fs_.data) {
        Some(levels) => {
            bytes.push(0);
            bytes.extend_from_slice(&levels);
        }
        None => {
            bytes.push(1);
            for v in &fs_.data {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    write_file(&frames_path, &bytes)?;
    let sidecar = Sidecar {
        format: SIDECAR_FORMAT.into(),
        id: rec.id.clone(),
        fps: rec.fps,
        view: rec.view,
        n_frames: fs_.n_frames,
        height: fs_.height,
        width: fs_.width,
        frames_file: frames_path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };
    write_file(path, &serde_json::to_vec_pretty(&sidecar)?)
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

/// Loads a recording written by [`save_recording`].
pub fn load_recording(path: &Path) -> Result<Recording> {
    let text = fs::read(path).map_err(|e| Error::io(path, e))?;
    let sidecar: Sidecar = serde_json::from_slice(&text).map_err(|e| {
        let field = e.to_string();
        let field = field
            .split('`')
            .nth(1)
            .unwrap_or("sidecar")
            .to_string();
        Error::format(path, field, e.to_string())
    })?;
    if sidecar.format != SIDECAR_FORMAT {
        return Err(Error::format(
            path,
            "format",
            format!("expected {SIDECAR_FORMAT}, found {}", sidecar.format),
        ));
    }
    if !(sidecar.fps > 0.0 && sidecar.fps.is_finite()) {
        return Err(Error::format(path, "fps", "must be positive"));
    }
    let frames_path = path
        .parent()
        .unwrap_or_else(|| Path::new(""))
        .join(&sidecar.frames_file);
    let bytes = fs::read(&frames_path).map_err(|e| Error::io(&frames_path, e))?;
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(&frames_path, "header", "file shorter than header"));
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::format(&frames_path, "magic", "not a frame container"));
    }
    let version = read_u32(&bytes, 8);
    if version != VERSION {
        return Err(Error::format(&frames_path, "version", format!("unsupported version {version}")));
    }
    let dims = [read_u32(&bytes, 12), read_u32(&bytes, 16), read_u32(&bytes, 20)].map(|v| v as usize);
    for (name, stored, declared) in [
        ("n_frames", dims[0], sidecar.n_frames),
        ("height", dims[1], sidecar.height),
        ("width", dims[2], sidecar.width),
    ] {
        if stored != declared {
            return Err(Error::format(
                path,
                name,
                format!("sidecar says {declared}, container says {stored}"),
            ));
        }
    }
    let n = dims[0] * dims[1] * dims[2];
    let body = &bytes[HEADER_LEN..];
    let data: Vec<f32> = match bytes[HEADER_LEN - 1] {
        0 => {
            if body.len() != n {
                return Err(Error::format(
                    &frames_path,
                    "pixels",
                    format!("expected {n} bytes, found {}", body.len()),
                ));
            }
            body.iter().map(|&b| f32::from(b) / 255.0).collect()
        }
        1 => {
            if body.len() != 4 * n {
                return Err(Error::format(
                    &frames_path,
                    "pixels",
                    format!("expected {} bytes, found {}", 4 * n, body.len()),
                ));
            }
            body.chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect()
        }
        other => {
            return Err(Error::format(&frames_path, "encoding", format!("unknown encoding {other}")))
        }
    };
    let frames = FrameStack::new(dims[0], dims[1], dims[2], data)
        .map_err(|e| Error::format(&frames_path, "pixels", e.to_string()))?;
    Recording::new(sidecar.id, sidecar.fps, sidecar.view, frames)
}

/// Annotation file contents. Frame indices are 0-based; `frame_index_base`
/// states this explicitly and must be 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotationFile {
    pub id: String,
    pub fps: f64,
    /// `None` when one annotation is shared by several views of a patient.
    pub view: Option<View>,
    pub n_frames: usize,
    #[serde(default)]
    pub frame_index_base: u32,
    pub cycles: Vec<Cycle>,
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<serde_json::Value>,
}

impl AnnotationFile {
    pub fn new(
        id: impl Into<String>,
        fps: f64,
        view: Option<View>,
        n_frames: usize,
        ann: &EventAnnotation,
    ) -> Self {
        AnnotationFile {
            id: id.into(),
            fps,
            view,
            n_frames,
            frame_index_base: 0,
            cycles: ann.cycles.clone(),
            source: ann.source.clone(),
            diagnostics: None,
        }
    }

    pub fn annotation(&self) -> EventAnnotation {
        EventAnnotation::new(self.cycles.clone(), self.source.clone())
    }
}

pub fn save_annotation_file(file: &AnnotationFile, path: &Path) -> Result<()> {
    write_file(path, &serde_json::to_vec_pretty(file)?)
}

/// Loads and validates an annotation file.
pub fn load_annotation_file(path: &Path) -> Result<AnnotationFile> {
    let text = fs::read(path).map_err(|e| Error::io(path, e))?;
    let file: AnnotationFile = serde_json::from_slice(&text).map_err(|e| {
        let msg = e.to_string();
        let field = msg.split('`').nth(1).unwrap_or("annotation").to_string();
        Error::format(path, field, msg)
    })?;
    if file.frame_index_base != 0 {
        return Err(Error::format(path, "frame_index_base", "only 0-based indices are supported"));
    }
    if !(file.fps > 0.0 && file.fps.is_finite()) {
        return Err(Error::format(path, "fps", "must be positive"));
    }
    let violations = validate_annotation(&file.annotation(), file.n_frames);
    if !violations.is_empty() {
        return Err(Error::Annotation(violations));
    }
    Ok(file)
}
