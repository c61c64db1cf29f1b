//! Training labels and batch assembly.
//!
//! Classification targets are per-frame phase classes with `-1` for frames
//! whose phase is unknown. Regression targets are per-event triangular
//! curves. Both use `-1` as the mask value, which also marks batch padding.

use crate::error::{Error, Result};
use crate::events::{phase_at, validate_annotation, EventAnnotation, EventSet, FrameStack};

/// Mask value shared by unknown frames, absent events and padding.
pub const MASK: f32 = -1.0;

/// Per-frame phase classes; `-1` marks masked frames.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhaseSequence {
    pub classes: Vec<i32>,
}

/// One curve per event of an [`EventSet`], each `n_frames` long.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftLabelCurves {
    pub rows: Vec<Vec<f32>>,
}

impl SoftLabelCurves {
    pub fn n_frames(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// Frame-major copy, `[frame][event]`.
    pub fn to_frame_major(&self) -> Vec<f32> {
        let n = self.n_frames();
        let mut out = Vec::with_capacity(n * self.rows.len());
        for f in 0..n {
            out.extend(self.rows.iter().map(|r| r[f]));
        }
        out
    }
}

fn check(ann: &EventAnnotation, n_frames: usize) -> Result<()> {
    let v = validate_annotation(ann, n_frames);
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::Annotation(v))
    }
}

/// Six-phase labels: frame `f` gets the class of `phase_at(ann, f)`.
pub fn make_phase_labels(ann: &EventAnnotation, n_frames: usize) -> Result<PhaseSequence> {
    make_phase_labels_for(ann, n_frames, EventSet::Six)
}

/// Phase labels for an event set. With [`EventSet::Two`] the classes are
/// `0` = MVC→AVC and `1` = AVC→MVC.
pub fn make_phase_labels_for(
    ann: &EventAnnotation,
    n_frames: usize,
    set: EventSet,
) -> Result<PhaseSequence> {
    check(ann, n_frames)?;
    let classes = match set {
        EventSet::Six => (0..n_frames)
            .map(|f| Ok(phase_at(ann, f, n_frames)?.map_or(-1, |p| p.index() as i32)))
            .collect::<Result<_>>()?,
        EventSet::Two => {
            let events = set.project(ann).events_by_frame();
            let mut out = vec![-1; n_frames];
            for (i, &(_, e, f)) in events.iter().enumerate() {
                let end = events.get(i + 1).map_or(n_frames, |&(_, _, g)| g);
                let class = set.class_of(e).expect("projected") as i32;
                out[f..end].fill(class);
            }
            out
        }
    };
    Ok(PhaseSequence { classes })
}

/// Six soft-label curves with the default width of 5 frames.
pub fn make_soft_labels(ann: &EventAnnotation, n_frames: usize, width: usize) -> Result<SoftLabelCurves> {
    make_soft_labels_for(ann, n_frames, width, EventSet::Six)
}

/// Row `e`, frame `f` is the max over occurrences `t` of `max(0, 1 - |f - t| / width)`.
/// Rows of events that never occur are filled with `-1`.
pub fn make_soft_labels_for(
    ann: &EventAnnotation,
    n_frames: usize,
    width: usize,
    set: EventSet,
) -> Result<SoftLabelCurves> {
    if width == 0 {
        return Err(Error::InvalidArgument("soft label width must be >= 1".into()));
    }
    check(ann, n_frames)?;
    let w = width as f32;
    let rows = set
        .events()
        .iter()
        .map(|&e| {
            let at = ann.frames_of(e);
            if at.is_empty() {
                return vec![MASK; n_frames];
            }
            let mut row = vec![0.0f32; n_frames];
            for t in at {
                let lo = t.saturating_sub(width);
                let hi = (t + width).min(n_frames - 1);
                for (f, v) in row.iter_mut().enumerate().take(hi + 1).skip(lo) {
                    let d = f.abs_diff(t) as f32;
                    *v = v.max((1.0 - d / w).max(0.0));
                }
            }
            row
        })
        .collect();
    Ok(SoftLabelCurves { rows })
}

/// Labels for one sequence, frame-major `[frame][channel]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelTrack {
    pub channels: usize,
    pub values: Vec<f32>,
}

impl LabelTrack {
    pub fn n_frames(&self) -> usize {
        self.values.len() / self.channels.max(1)
    }
}

impl From<&PhaseSequence> for LabelTrack {
    fn from(p: &PhaseSequence) -> Self {
        LabelTrack {
            channels: 1,
            values: p.classes.iter().map(|&c| c as f32).collect(),
        }
    }
}

impl From<&SoftLabelCurves> for LabelTrack {
    fn from(s: &SoftLabelCurves) -> Self {
        LabelTrack {
            channels: s.rows.len(),
            values: s.to_frame_major(),
        }
    }
}

/// Network input for one sequence, `[channel][frame][row][col]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Clip {
    pub channels: usize,
    pub n_frames: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl Clip {
    pub fn from_frames(frames: &FrameStack) -> Self {
        Clip {
            channels: 1,
            n_frames: frames.n_frames,
            height: frames.height,
            width: frames.width,
            data: frames.data.clone(),
        }
    }

    /// Frames `[start, start + len)`.
    pub fn window(&self, start: usize, len: usize) -> Clip {
        let len = len.min(self.n_frames - start);
        let hw = self.height * self.width;
        let mut data = Vec::with_capacity(self.channels * len * hw);
        for c in 0..self.channels {
            let base = c * self.n_frames * hw;
            data.extend_from_slice(&self.data[base + start * hw..base + (start + len) * hw]);
        }
        Clip {
            n_frames: len,
            data,
            ..*self
        }
    }
}

impl LabelTrack {
    pub fn window(&self, start: usize, len: usize) -> LabelTrack {
        let len = len.min(self.n_frames() - start);
        LabelTrack {
            channels: self.channels,
            values: self.values[start * self.channels..(start + len) * self.channels].to_vec(),
        }
    }
}

/// Bilinear resize of every frame (align-corners off, edge clamped) with the
/// result replicated to `channels` identical channels.
pub fn resize_frames(frames: &FrameStack, size: usize, channels: usize) -> Clip {
    let (h, w) = (frames.height, frames.width);
    let mut one = Vec::with_capacity(frames.n_frames * size * size);
    let sy = h as f32 / size as f32;
    let sx = w as f32 / size as f32;
    let coord = |o: usize, s: f32, n: usize| {
        let c = ((o as f32 + 0.5) * s - 0.5).clamp(0.0, (n - 1) as f32);
        let i0 = c.floor() as usize;
        (i0, (i0 + 1).min(n - 1), c - i0 as f32)
    };
    for t in 0..frames.n_frames {
        let img = frames.frame(t);
        for oy in 0..size {
            let (y0, y1, fy) = coord(oy, sy, h);
            for ox in 0..size {
                let (x0, x1, fx) = coord(ox, sx, w);
                let top = img[y0 * w + x0] * (1.0 - fx) + img[y0 * w + x1] * fx;
                let bot = img[y1 * w + x0] * (1.0 - fx) + img[y1 * w + x1] * fx;
                one.push(top * (1.0 - fy) + bot * fy);
            }
        }
    }
    let mut data = Vec::with_capacity(one.len() * channels);
    for _ in 0..channels {
        data.extend_from_slice(&one);
    }
    Clip {
        channels,
        n_frames: frames.n_frames,
        height: size,
        width: size,
        data,
    }
}

/// A padded batch. Images are `[item][channel][frame][row][col]`, labels are
/// `[item][frame][channel]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub n_items: usize,
    pub n_frames: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub label_channels: usize,
    pub images: Vec<f32>,
    pub labels: Vec<f32>,
    /// `[item][frame]`, true for real frames.
    pub mask: Vec<bool>,
    pub lengths: Vec<usize>,
}

/// Pads every item at the tail to the longest sequence: images with 0,
/// labels with `-1`.
pub fn pad_batch(items: &[(&Clip, &LabelTrack)]) -> Result<Batch> {
    let Some((first, first_labels)) = items.first() else {
        return Err(Error::InvalidArgument("cannot batch zero items".into()));
    };
    let (c, h, w, lc) = (first.channels, first.height, first.width, first_labels.channels);
    for (i, (clip, labels)) in items.iter().enumerate() {
        if (clip.channels, clip.height, clip.width) != (c, h, w) {
            return Err(Error::InvalidArgument(format!(
                "item {i} has shape {}x{}x{}, expected {c}x{h}x{w}",
                clip.channels, clip.height, clip.width
            )));
        }
        if labels.channels != lc || labels.n_frames() != clip.n_frames {
            return Err(Error::InvalidArgument(format!(
                "item {i} labels do not match its frames"
            )));
        }
    }
    let t_max = items.iter().map(|(clip, _)| clip.n_frames).max().unwrap_or(0);
    let hw = h * w;
    let n = items.len();
    let mut images = vec![0.0; n * c * t_max * hw];
    let mut labels = vec![MASK; n * t_max * lc];
    let mut mask = vec![false; n * t_max];
    for (i, (clip, track)) in items.iter().enumerate() {
        let t = clip.n_frames;
        for ch in 0..c {
            let src = &clip.data[ch * t * hw..(ch + 1) * t * hw];
            let dst = (i * c + ch) * t_max * hw;
            images[dst..dst + t * hw].copy_from_slice(src);
        }
        labels[i * t_max * lc..i * t_max * lc + t * lc].copy_from_slice(&track.values);
        mask[i * t_max..i * t_max + t].fill(true);
    }
    Ok(Batch {
        n_items: n,
        n_frames: t_max,
        channels: c,
        height: h,
        width: w,
        label_channels: lc,
        images,
        labels,
        mask,
        lengths: items.iter().map(|(clip, _)| clip.n_frames).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::{Cycle, EventType, Source};
    use EventType::*;

    fn full_cycle() -> EventAnnotation {
        EventAnnotation::new(
            vec![Cycle::from_pairs(&[(Mvc, 2), (Avo, 4), (Avc, 8), (Mvo, 10), (Dss, 13), (Ass, 16)])],
            Source::Reference,
        )
    }

    #[test]
    fn phase_labels_follow_events() {
        let p = make_phase_labels(&full_cycle(), 20).unwrap();
        assert_eq!(
            p.classes,
            vec![-1, -1, 0, 0, 1, 1, 1, 1, 2, 2, 3, 3, 3, 4, 4, 4, 5, 5, 5, 5]
        );
    }

    #[test]
    fn missing_atrial_systole_is_masked_until_next_mvc() {
        let ann = EventAnnotation::new(
            vec![
                Cycle::from_pairs(&[(Mvc, 0), (Avo, 2), (Avc, 5), (Mvo, 7), (Dss, 9)]),
                Cycle::from_pairs(&[(Mvc, 14), (Avo, 16)]),
            ],
            Source::Reference,
        );
        let p = make_phase_labels(&ann, 18).unwrap();
        assert_eq!(&p.classes[9..15], &[4, -1, -1, -1, -1, 0]);
    }

    #[test]
    fn two_event_labels() {
        let p = make_phase_labels_for(&full_cycle(), 20, EventSet::Two).unwrap();
        assert_eq!(&p.classes[..10], &[-1, -1, 0, 0, 0, 0, 0, 0, 1, 1]);
        assert!(p.classes[10..].iter().all(|&c| c == 1));
    }

    #[test]
    fn invalid_annotation_is_rejected() {
        let ann = EventAnnotation::new(vec![Cycle::from_pairs(&[(Mvc, 5), (Avo, 4)])], Source::Reference);
        assert!(matches!(make_phase_labels(&ann, 10), Err(Error::Annotation(_))));
        assert!(matches!(make_soft_labels(&ann, 10, 5), Err(Error::Annotation(_))));
    }

    #[test]
    fn soft_labels_are_triangles() {
        let ann = EventAnnotation::new(vec![Cycle::from_pairs(&[(Mvc, 10)])], Source::Reference);
        let s = make_soft_labels(&ann, 20, 5).unwrap();
        let mvc = &s.rows[0];
        assert_eq!(mvc[10], 1.0);
        assert!((mvc[7] - 0.4).abs() < 1e-6);
        assert_eq!(mvc[16], 0.0);
        assert_eq!(mvc[15], 0.0);
        assert!(s.rows[1].iter().all(|&v| v == MASK));
    }

    #[test]
    fn overlapping_occurrences_take_the_max() {
        let ann = EventAnnotation::new(
            vec![Cycle::from_pairs(&[(Mvc, 4)]), Cycle::from_pairs(&[(Mvc, 8)])],
            Source::Reference,
        );
        let s = make_soft_labels(&ann, 12, 5).unwrap();
        assert!((s.rows[0][6] - 0.6).abs() < 1e-6);
        assert!(s.rows[0].iter().all(|&v| v <= 1.0));
    }

    #[test]
    fn padding() {
        let a = Clip {
            channels: 1,
            n_frames: 30,
            height: 2,
            width: 2,
            data: vec![0.5; 120],
        };
        let b = Clip {
            n_frames: 42,
            data: vec![0.25; 168],
            ..a.clone()
        };
        let la = LabelTrack { channels: 1, values: vec![3.0; 30] };
        let lb = LabelTrack { channels: 1, values: vec![2.0; 42] };
        let batch = pad_batch(&[(&a, &la), (&b, &lb)]).unwrap();
        assert_eq!(batch.n_frames, 42);
        assert!(batch.images[30 * 4..42 * 4].iter().all(|&v| v == 0.0));
        assert!(batch.labels[30..42].iter().all(|&v| v == MASK));
        let valid: Vec<usize> = batch.mask.chunks(42).map(|m| m.iter().filter(|&&v| v).count()).collect();
        assert_eq!(valid, vec![30, 42]);

        let single = pad_batch(&[(&b, &lb)]).unwrap();
        assert_eq!(single.images, b.data);
        assert_eq!(single.labels, lb.values);

        let odd = Clip { height: 3, data: vec![0.0; 180], ..a.clone() };
        assert!(pad_batch(&[(&a, &la), (&odd, &la)]).is_err());
    }

    #[test]
    fn resize_replicates_channels() {
        let frames = FrameStack::new(1, 4, 4, (0..16).map(|v| v as f32 / 15.0).collect()).unwrap();
        let clip = resize_frames(&frames, 2, 3);
        assert_eq!(clip.data.len(), 12);
        assert_eq!(clip.data[..4], clip.data[4..8]);
        // Averages of 2x2 blocks under half-pixel centres.
        let expect = [2.5f32, 4.5, 10.5, 12.5].map(|v| v / 15.0);
        for (a, b) in clip.data[..4].iter().zip(expect) {
            assert!((a - b).abs() < 1e-6);
        }
        let same = resize_frames(&frames, 4, 1);
        assert_eq!(same.data, frames.data);
    }
}
