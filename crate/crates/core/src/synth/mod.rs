//! Deterministic echo phantom.
//!
//! A [`MotionProgram`] fixes the per-cycle phase durations of one synthetic
//! patient. Rendering draws a ventricle whose area follows the volume curve,
//! a mitral leaflet pair and (in APLAX only) an aortic leaflet pair, then
//! applies multiplicative speckle. The ground-truth annotation is derived
//! from the same program, so event frames are exact.

mod dataset;
mod render;
mod storage;

pub use dataset::{
    generate_dataset, load_manifest, manifest_digest, plan_dataset, resolve, DatasetMode, DatasetSpec,
    Manifest, ManifestEntry, PlannedRecording,
};
pub use render::{render_frame_state, render_recording, FrameState};
pub use storage::{load_annotation_file, load_recording, save_annotation_file, save_recording, AnnotationFile};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{Cycle, EventAnnotation, EventType, Phase, Source};
use crate::rng;

/// Inclusive sampling range for one phase duration, in milliseconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalRange {
    pub min_ms: f64,
    pub max_ms: f64,
}

impl IntervalRange {
    pub const fn new(min_ms: f64, max_ms: f64) -> Self {
        IntervalRange { min_ms, max_ms }
    }

    /// A clinical normal band widened by 60% on both sides (÷1.6, ×1.6).
    pub fn widened(lo: f64, hi: f64) -> Self {
        IntervalRange::new(lo / 1.6, hi * 1.6)
    }

    pub fn contains(&self, v: f64) -> bool {
        (self.min_ms..=self.max_ms).contains(&v)
    }
}

/// Duration ranges for the six phases, indexed like [`Phase`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalRanges {
    pub ivc: IntervalRange,
    pub ejection: IntervalRange,
    pub ivr: IntervalRange,
    pub early_filling: IntervalRange,
    pub diastasis: IntervalRange,
    pub atrial_systole: IntervalRange,
}

impl Default for IntervalRanges {
    fn default() -> Self {
        IntervalRanges {
            ivc: IntervalRange::widened(23.0, 49.0),
            ejection: IntervalRange::widened(272.0, 314.0),
            ivr: IntervalRange::widened(72.0, 112.0),
            early_filling: IntervalRange::new(100.0, 200.0),
            diastasis: IntervalRange::new(50.0, 350.0),
            atrial_systole: IntervalRange::new(80.0, 150.0),
        }
    }
}

impl IntervalRanges {
    pub fn get(&self, phase: Phase) -> IntervalRange {
        match phase {
            Phase::Ivc => self.ivc,
            Phase::Ejection => self.ejection,
            Phase::Ivr => self.ivr,
            Phase::EarlyFilling => self.early_filling,
            Phase::Diastasis => self.diastasis,
            Phase::AtrialSystole => self.atrial_systole,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VentricleGeometry {
    /// Ellipse center in normalized image coordinates (x right, y down).
    pub center: [f64; 2],
    /// Semi-axes at end-diastolic volume.
    pub semi_axes: [f64; 2],
    /// End-systolic over end-diastolic volume.
    pub systolic_fraction: f64,
    /// Share of the stroke volume refilled by the end of early filling.
    pub early_fill_fraction: f64,
    /// Per-patient jitter of center and size.
    pub jitter: f64,
}

impl Default for VentricleGeometry {
    fn default() -> Self {
        VentricleGeometry {
            center: [0.5, 0.42],
            semi_axes: [0.16, 0.28],
            systolic_fraction: 0.55,
            early_fill_fraction: 0.8,
            jitter: 0.03,
        }
    }
}

/// Leaflet lengths are normalized; angles in degrees from the closed pose.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafletGeometry {
    pub annulus_half_width: f64,
    pub mitral_length: f64,
    pub mitral_open_deg: f64,
    pub mitral_diastasis_deg: f64,
    pub mitral_atrial_deg: f64,
    pub aortic_length: f64,
    pub aortic_open_deg: f64,
    pub thickness: f64,
}

impl Default for LeafletGeometry {
    fn default() -> Self {
        LeafletGeometry {
            annulus_half_width: 0.075,
            mitral_length: 0.085,
            mitral_open_deg: 75.0,
            mitral_diastasis_deg: 30.0,
            mitral_atrial_deg: 65.0,
            aortic_length: 0.05,
            aortic_open_deg: 80.0,
            thickness: 0.03,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRange {
    pub min: usize,
    pub max: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhantomConfig {
    /// Square image side in pixels.
    pub size: usize,
    /// Multiplicative speckle level in `[0, 1)`.
    pub noise: f64,
    pub fps: f64,
    pub n_cycles: CountRange,
    pub intervals: IntervalRanges,
    /// Probability that a patient has no atrial systole (no ASS events).
    pub p_missing_atrial_systole: f64,
    pub sector_half_angle_deg: f64,
    pub ventricle: VentricleGeometry,
    pub leaflets: LeafletGeometry,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        PhantomConfig {
            size: 128,
            noise: 0.25,
            fps: 48.0,
            n_cycles: CountRange { min: 2, max: 3 },
            intervals: IntervalRanges::default(),
            p_missing_atrial_systole: 0.0,
            sector_half_angle_deg: 38.0,
            ventricle: VentricleGeometry::default(),
            leaflets: LeafletGeometry::default(),
        }
    }
}

impl PhantomConfig {
    /// Held-out acquisition style: higher frame rate and a narrower sector.
    pub fn external() -> Self {
        PhantomConfig {
            fps: 61.0,
            sector_half_angle_deg: 28.0,
            ..PhantomConfig::default()
        }
    }

    /// Small images for desk-scale training.
    pub fn toy() -> Self {
        PhantomConfig {
            size: 64,
            ..PhantomConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.size < 64 {
            return Err(Error::Config(format!("image size must be >= 64, got {}", self.size)));
        }
        if !(0.0..1.0).contains(&self.noise) {
            return Err(Error::Config(format!("noise level must be in [0, 1), got {}", self.noise)));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(Error::Config(format!("fps must be positive, got {}", self.fps)));
        }
        if self.n_cycles.min == 0 || self.n_cycles.min > self.n_cycles.max {
            return Err(Error::Config(format!(
                "cycle count range [{}, {}] is degenerate",
                self.n_cycles.min, self.n_cycles.max
            )));
        }
        if !(0.0..=1.0).contains(&self.p_missing_atrial_systole) {
            return Err(Error::Config("p_missing_atrial_systole must be in [0, 1]".into()));
        }
        let frame_ms = 1000.0 / self.fps;
        for phase in Phase::ALL {
            let r = self.intervals.get(phase);
            if !(r.min_ms > 0.0 && r.min_ms <= r.max_ms) {
                return Err(Error::Config(format!(
                    "{phase:?} duration range [{}, {}] ms is degenerate",
                    r.min_ms, r.max_ms
                )));
            }
            if r.max_ms < frame_ms * MIN_FRAME_MARGIN {
                return Err(Error::Config(format!(
                    "{phase:?} duration range ends below one frame period ({frame_ms:.2} ms)"
                )));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

// Phases shorter than one frame period would put two events on one frame.
const MIN_FRAME_MARGIN: f64 = 1.001;

/// Timing of one synthetic patient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionProgram {
    /// Phase durations in ms per cycle, indexed like [`Phase`].
    pub cycles: Vec<[f64; 6]>,
    pub fps: f64,
    /// Program time (ms after the first MVC) at which the recording starts.
    pub start_offset_ms: f64,
    /// `false` models absent atrial contraction: diastasis runs to the next MVC
    /// and no ASS is annotated.
    pub atrial_systole: bool,
    pub seed: u64,
}

impl MotionProgram {
    pub fn new(
        cycles: Vec<[f64; 6]>,
        fps: f64,
        start_offset_ms: f64,
        atrial_systole: bool,
        seed: u64,
    ) -> Result<Self> {
        let p = MotionProgram {
            cycles,
            fps,
            start_offset_ms,
            atrial_systole,
            seed,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cycles.is_empty() {
            return Err(Error::Config("motion program needs at least one cycle".into()));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(Error::Config(format!("fps must be positive, got {}", self.fps)));
        }
        if self.cycles.iter().flatten().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(Error::Config("phase durations must be positive".into()));
        }
        if !(0.0..self.total_ms()).contains(&self.start_offset_ms) {
            return Err(Error::Config("start offset must lie inside the program".into()));
        }
        if self.n_frames() == 0 {
            return Err(Error::Config("program shorter than one frame".into()));
        }
        let frames: Vec<usize> = self.frame_events().iter().map(|&(_, f)| f).collect();
        if frames.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "two events fall on the same frame; phases must last at least one frame period".into(),
            ));
        }
        Ok(())
    }

    pub fn n_cycles(&self) -> usize {
        self.cycles.len()
    }

    pub fn frame_ms(&self) -> f64 {
        1000.0 / self.fps
    }

    pub fn total_ms(&self) -> f64 {
        self.cycles.iter().flatten().sum()
    }

    /// Frame `f` covers program time `[offset + f·Δ, offset + (f+1)·Δ)`.
    pub fn n_frames(&self) -> usize {
        ((self.total_ms() - self.start_offset_ms) * self.fps / 1000.0).floor() as usize
    }

    /// Event instants in program time, ascending.
    pub fn event_times(&self) -> Vec<(EventType, f64)> {
        let mut t = 0.0;
        let mut out = Vec::new();
        for cycle in &self.cycles {
            for phase in Phase::ALL {
                let event = phase.opening_event();
                if event != EventType::Ass || self.atrial_systole {
                    out.push((event, t));
                }
                t += cycle[phase.index()];
            }
        }
        out
    }

    /// Ground-truth frame: the frame whose interval contains the instant.
    pub fn frame_of(&self, t_ms: f64) -> Option<usize> {
        if t_ms < self.start_offset_ms {
            return None;
        }
        let f = ((t_ms - self.start_offset_ms) * self.fps / 1000.0).floor() as usize;
        (f < self.n_frames()).then_some(f)
    }

    /// Events visible in the recording with their frames, ascending.
    pub fn frame_events(&self) -> Vec<(EventType, usize)> {
        self.event_times()
            .into_iter()
            .filter_map(|(e, t)| self.frame_of(t).map(|f| (e, f)))
            .collect()
    }

    /// Exact annotation; a new cycle starts at every MVC.
    pub fn annotation(&self) -> EventAnnotation {
        let mut cycles: Vec<Cycle> = Vec::new();
        for (e, f) in self.frame_events() {
            if e == EventType::Mvc || cycles.is_empty() {
                cycles.push(Cycle::default());
            }
            cycles.last_mut().expect("non-empty").set(e, Some(f));
        }
        EventAnnotation::new(cycles, Source::Reference)
    }

    /// Phase segments `(phase, start_ms, duration_ms)` in program time. Without
    /// atrial systole the diastasis segment absorbs the atrial-systole time.
    pub fn segments(&self) -> Vec<(Phase, f64, f64)> {
        let mut out: Vec<(Phase, f64, f64)> = Vec::with_capacity(self.cycles.len() * 6);
        let mut t = 0.0;
        for cycle in &self.cycles {
            for phase in Phase::ALL {
                let d = cycle[phase.index()];
                match (phase, self.atrial_systole) {
                    (Phase::AtrialSystole, false) => {
                        if let Some(last) = out.last_mut() {
                            last.2 += d;
                        }
                    }
                    _ => out.push((phase, t, d)),
                }
                t += d;
            }
        }
        out
    }

    /// Phase and progress in `[0, 1]` at program time `t_ms`, using events
    /// strictly before `t_ms`.
    pub fn state_at(&self, t_ms: f64) -> (Phase, f64) {
        let segs = self.segments();
        let idx = segs
            .iter()
            .rposition(|&(_, start, _)| start < t_ms)
            .unwrap_or(0);
        let (phase, start, dur) = segs[idx];
        (phase, ((t_ms - start) / dur).clamp(0.0, 1.0))
    }

    /// Per-cycle phase durations in ms, indexed by [`Phase::index`].
    pub fn cycle_durations(&self) -> &[[f64; 6]] {
        &self.cycles
    }
}

/// Draws a motion program from the configured ranges; deterministic in `seed`.
pub fn sample_motion_program(seed: u64, config: &PhantomConfig) -> Result<MotionProgram> {
    config.validate()?;
    let mut rng = rng::stream(seed, "motion", "");
    let floor_ms = 1000.0 / config.fps * MIN_FRAME_MARGIN;
    let n_cycles = rng.gen_range(config.n_cycles.min..=config.n_cycles.max);
    let mut cycles = Vec::with_capacity(n_cycles);
    for _ in 0..n_cycles {
        let mut d = [0.0; 6];
        for phase in Phase::ALL {
            let r = config.intervals.get(phase);
            let lo = r.min_ms.max(floor_ms);
            d[phase.index()] = if lo >= r.max_ms { r.max_ms } else { rng.gen_range(lo..=r.max_ms) };
        }
        cycles.push(d);
    }
    let first: f64 = cycles[0].iter().sum();
    let start_offset_ms = rng.gen_range(0.0..first);
    let atrial_systole = rng.gen::<f64>() >= config.p_missing_atrial_systole;
    MotionProgram::new(cycles, config.fps, start_offset_ms, atrial_systole, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::validate_annotation;

    #[test]
    fn fixed_program_event_frames() {
        let p = MotionProgram::new(
            vec![[58.0, 287.0, 107.0, 150.0, 100.0, 100.0]; 2],
            48.0,
            0.0,
            true,
            0,
        )
        .unwrap();
        // 802 ms cycle = 38.496 frames; cumulative instants 0, 58, 345, 452, 602, 702, 802.
        let frames: Vec<_> = p.frame_events();
        let expect = [0, 2, 16, 21, 28, 33, 38, 41, 55, 60, 67, 72];
        assert_eq!(frames.iter().map(|&(_, f)| f).collect::<Vec<_>>(), expect);
        assert_eq!(frames[1].0, EventType::Avo);
        assert_eq!(p.n_frames(), 76);
        let ann = p.annotation();
        assert_eq!(ann.cycles.len(), 2);
        assert_eq!(ann.cycles[1].get(EventType::Mvc), Some(38));
    }

    #[test]
    fn sampling_is_deterministic_and_in_range() {
        let cfg = PhantomConfig::default();
        let a = sample_motion_program(11, &cfg).unwrap();
        let b = sample_motion_program(11, &cfg).unwrap();
        assert_eq!(a, b);
        for seed in 0..200 {
            let p = sample_motion_program(seed, &cfg).unwrap();
            for c in &p.cycles {
                assert!(cfg.intervals.ivc.contains(c[0]), "IVCT {} out of range", c[0]);
                assert!(cfg.intervals.ejection.contains(c[1]));
            }
            let ann = p.annotation();
            assert!(validate_annotation(&ann, p.n_frames()).is_empty());
        }
    }

    #[test]
    fn default_ivct_range_covers_normal_band() {
        let r = IntervalRanges::default().ivc;
        assert!(r.min_ms <= 23.0 && r.max_ms >= 49.0);
        assert!((r.min_ms - 14.375).abs() < 1e-12 && (r.max_ms - 78.4).abs() < 1e-12);
    }

    #[test]
    fn degenerate_ranges_are_rejected() {
        let mut cfg = PhantomConfig::default();
        cfg.intervals.ivr = IntervalRange::new(120.0, 80.0);
        assert!(matches!(sample_motion_program(1, &cfg), Err(Error::Config(_))));
        let cfg = PhantomConfig {
            size: 32,
            ..PhantomConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn missing_atrial_systole_drops_ass() {
        let cfg = PhantomConfig {
            p_missing_atrial_systole: 1.0,
            ..PhantomConfig::default()
        };
        let p = sample_motion_program(3, &cfg).unwrap();
        assert!(!p.annotation().contains(EventType::Ass));
        assert!(p.annotation().contains(EventType::Dss));
    }
}
