//! Post-processing of per-frame network outputs into event annotations.
//!
//! Phase probabilities are decoded by locating phase transitions; event
//! curves are decoded by Gaussian smoothing and peak picking. Both decoders
//! split cycles at MVC and repair the cyclic order within a cycle by dropping
//! contradictory events.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{Cycle, EventAnnotation, EventSet, EventType, Source, View};
use crate::synth::AnnotationFile;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionKind {
    /// One probability row per frame over the phases of the event set.
    PhaseProbs,
    /// One curve per event of the event set, values in `[0, 1]`.
    EventCurves,
}

/// Network output for one recording, frame-major `[frame][channel]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FramePredictions {
    pub id: String,
    pub fps: f64,
    pub kind: PredictionKind,
    pub event_set: EventSet,
    pub n_frames: usize,
    pub values: Vec<f32>,
}

impl FramePredictions {
    pub fn new(
        id: impl Into<String>,
        fps: f64,
        kind: PredictionKind,
        event_set: EventSet,
        values: Vec<f32>,
    ) -> Result<Self> {
        let c = event_set.len();
        if !values.len().is_multiple_of(c) {
            return Err(Error::InvalidArgument(format!(
                "{} values do not form rows of {c}",
                values.len()
            )));
        }
        let p = FramePredictions {
            id: id.into(),
            fps,
            kind,
            event_set,
            n_frames: values.len() / c,
            values,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn channels(&self) -> usize {
        self.event_set.len()
    }

    pub fn row(&self, frame: usize) -> &[f32] {
        let c = self.channels();
        &self.values[frame * c..(frame + 1) * c]
    }

    /// Channel `ch` over all frames.
    pub fn curve(&self, ch: usize) -> Vec<f32> {
        (0..self.n_frames).map(|f| self.row(f)[ch]).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.channels();
        if self.values.len() != self.n_frames * c {
            return Err(Error::InvalidArgument("prediction shape mismatch".into()));
        }
        if self.values.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0 + 1e-4) {
            return Err(Error::InvalidArgument(format!(
                "{}: prediction values must lie in [0, 1]",
                self.id
            )));
        }
        if self.kind == PredictionKind::PhaseProbs {
            for f in 0..self.n_frames {
                let s: f32 = self.row(f).iter().sum();
                if (s - 1.0).abs() > 1e-3 {
                    return Err(Error::InvalidArgument(format!(
                        "{}: probabilities of frame {f} sum to {s}",
                        self.id
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedEvent {
    pub event: EventType,
    pub frame: usize,
    pub cycle: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub dropped_events: Vec<DroppedEvent>,
    pub filter_flags: Vec<String>,
}

/// Decoded annotation plus what the decoder had to discard.
#[derive(Clone, Debug, PartialEq)]
pub struct Decoded {
    pub annotation: EventAnnotation,
    pub diagnostics: Diagnostics,
}

impl Decoded {
    /// Annotation file with `source = "prediction"` and the diagnostics block.
    pub fn to_file(&self, pred: &FramePredictions, view: Option<View>) -> AnnotationFile {
        let mut file = AnnotationFile::new(&pred.id, pred.fps, view, pred.n_frames, &self.annotation);
        file.diagnostics = Some(serde_json::to_value(&self.diagnostics).expect("plain data"));
        file
    }
}

/// Flag raised when a sequence is shorter than the mode filter.
pub const FLAG_SHORT_SEQUENCE: &str = "sequence_shorter_than_filter";

/// Post-processing parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PostprocessConfig {
    pub min_phase_len: usize,
    pub sigma: f64,
    pub threshold: f64,
}

impl Default for PostprocessConfig {
    fn default() -> Self {
        PostprocessConfig {
            min_phase_len: 2,
            sigma: 1.5,
            threshold: 0.3,
        }
    }
}

impl PostprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_phase_len == 0 {
            return Err(Error::Config("min_phase_len must be >= 1".into()));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!("threshold must lie in [0, 1], got {}", self.threshold)));
        }
        Ok(())
    }
}

/// Decodes either prediction kind with the matching rule.
pub fn decode(pred: &FramePredictions, cfg: &PostprocessConfig) -> Result<Decoded> {
    cfg.validate()?;
    match pred.kind {
        PredictionKind::PhaseProbs => phases_to_events(pred, cfg.min_phase_len),
        PredictionKind::EventCurves => curves_to_events(pred, cfg.sigma, cfg.threshold),
    }
}

/// Whether phase `b` may directly follow phase `a`. Diastolic sub-phases may
/// be skipped: filling can end at MVC without an annotated diastasis or
/// atrial systole.
fn may_follow(set: EventSet, a: usize, b: usize) -> bool {
    match set {
        EventSet::Two => a != b,
        EventSet::Six => b == (a + 1) % 6 || (b == 0 && (a == 3 || a == 4)),
    }
}

fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Sliding mode over `width` frames, truncated at the ends. Ties keep the
/// centre label when it is among the most frequent, otherwise the tied label
/// seen first in the window.
pub fn mode_filter(labels: &[usize], width: usize) -> Vec<usize> {
    let half = width / 2;
    (0..labels.len())
        .map(|i| {
            let win = &labels[i.saturating_sub(half)..(i + half + 1).min(labels.len())];
            let count = |c: usize| win.iter().filter(|&&x| x == c).count();
            let centre = count(labels[i]);
            let mut best = labels[i];
            let mut best_n = centre;
            for &c in win {
                let n = count(c);
                if n > best_n {
                    best = c;
                    best_n = n;
                }
            }
            best
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Run {
    class: usize,
    start: usize,
    len: usize,
}

fn runs_of(labels: &[usize]) -> Vec<Run> {
    let mut out: Vec<Run> = Vec::new();
    for (f, &c) in labels.iter().enumerate() {
        match out.last_mut() {
            Some(r) if r.class == c => r.len += 1,
            _ => out.push(Run { class: c, start: f, len: 1 }),
        }
    }
    out
}

fn coalesce(runs: &mut Vec<Run>) {
    let mut out: Vec<Run> = Vec::with_capacity(runs.len());
    for r in runs.drain(..) {
        match out.last_mut() {
            Some(last) if last.class == r.class => last.len += r.len,
            _ => out.push(r),
        }
    }
    *runs = out;
}

/// Merges runs shorter than `min_len` that break the cyclic order with a
/// neighbour. The short run goes to the neighbour whose class has the higher
/// mean probability over its frames (the earlier neighbour on ties).
fn merge_short_runs(runs: &mut Vec<Run>, pred: &FramePredictions, min_len: usize) {
    let set = pred.event_set;
    let mean_prob = |class: usize, r: &Run| -> f32 {
        (r.start..r.start + r.len).map(|f| pred.row(f)[class]).sum::<f32>() / r.len as f32
    };
    loop {
        let mut changed = false;
        for i in 0..runs.len() {
            let r = runs[i];
            if r.len >= min_len || runs.len() == 1 {
                continue;
            }
            let prev = i.checked_sub(1).map(|j| runs[j]);
            let next = runs.get(i + 1).copied();
            let fits_prev = prev.is_none_or(|p| may_follow(set, p.class, r.class));
            let fits_next = next.is_none_or(|n| may_follow(set, r.class, n.class));
            if fits_prev && fits_next {
                continue;
            }
            runs[i].class = match (prev, next) {
                (Some(p), Some(n)) => {
                    if mean_prob(n.class, &r) > mean_prob(p.class, &r) {
                        n.class
                    } else {
                        p.class
                    }
                }
                (Some(p), None) => p.class,
                (None, Some(n)) => n.class,
                (None, None) => unreachable!("single run handled above"),
            };
            changed = true;
            break;
        }
        coalesce(runs);
        if !changed {
            break;
        }
    }
}

/// Groups `(event, frame)` pairs in frame order into cycles starting at each
/// MVC and drops events that would break the cyclic order of their cycle.
fn assemble(events: &[(EventType, usize)], diagnostics: &mut Diagnostics) -> EventAnnotation {
    let mut cycles: Vec<Cycle> = Vec::new();
    let mut anchor: Option<EventType> = None;
    let mut last_rank = 0;
    let mut last_frame: Option<usize> = None;
    for &(e, f) in events {
        let shares_frame = last_frame.is_some_and(|l| f <= l);
        let in_order = match anchor {
            _ if shares_frame => false,
            Some(a) if e != EventType::Mvc => e.rank_from(a) > last_rank,
            _ => true,
        };
        if !in_order {
            let ci = cycles.len().saturating_sub(1);
            log::debug!("dropping {e} at frame {f}: out of cyclic order in cycle {ci}");
            diagnostics.dropped_events.push(DroppedEvent {
                event: e,
                frame: f,
                cycle: ci,
            });
            continue;
        }
        if e == EventType::Mvc || cycles.is_empty() {
            cycles.push(Cycle::default());
            anchor = Some(e);
        }
        last_rank = e.rank_from(anchor.expect("set with the first cycle"));
        last_frame = Some(f);
        cycles.last_mut().expect("pushed above").set(e, Some(f));
    }
    cycles.retain(|c| !c.is_empty());
    EventAnnotation::new(cycles, Source::Prediction)
}

/// Decodes phase probabilities: per-frame argmax, a mode filter of width
/// `2·min_phase_len − 1`, merging of short out-of-order runs, then one
/// opening event at the first frame of every run that does not start at
/// frame 0.
pub fn phases_to_events(pred: &FramePredictions, min_phase_len: usize) -> Result<Decoded> {
    if pred.kind != PredictionKind::PhaseProbs {
        return Err(Error::InvalidArgument("phases_to_events needs phase probabilities".into()));
    }
    if min_phase_len == 0 {
        return Err(Error::InvalidArgument("min_phase_len must be >= 1".into()));
    }
    pred.validate()?;
    let mut diagnostics = Diagnostics::default();
    let raw: Vec<usize> = (0..pred.n_frames).map(|f| argmax(pred.row(f))).collect();
    let width = 2 * min_phase_len - 1;
    let runs = if pred.n_frames < width {
        diagnostics.filter_flags.push(FLAG_SHORT_SEQUENCE.to_string());
        runs_of(&raw)
    } else {
        let mut runs = runs_of(&mode_filter(&raw, width));
        merge_short_runs(&mut runs, pred, min_phase_len);
        runs
    };
    let events = pred.event_set.events();
    let opened: Vec<(EventType, usize)> = runs
        .iter()
        .filter(|r| r.start > 0)
        .map(|r| (events[r.class], r.start))
        .collect();
    Ok(Decoded {
        annotation: assemble(&opened, &mut diagnostics),
        diagnostics,
    })
}

/// Gaussian smoothing with kernel radius `⌊4σ + 0.5⌋` and mirror-reflected
/// boundaries (`d c b a | a b c d | d c b a`). `sigma == 0` returns the input.
pub fn gaussian_smooth(x: &[f32], sigma: f64) -> Vec<f32> {
    let n = x.len() as isize;
    if sigma <= 0.0 || n == 0 {
        return x.to_vec();
    }
    let radius = (4.0 * sigma + 0.5) as isize;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|d| (-0.5 * (d as f64 / sigma).powi(2)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    let reflect = |mut i: isize| -> usize {
        let period = 2 * n;
        i = i.rem_euclid(period);
        if i >= n {
            i = period - 1 - i;
        }
        i as usize
    };
    (0..n)
        .map(|i| {
            let s: f64 = kernel
                .iter()
                .zip(-radius..=radius)
                .map(|(&k, d)| k * f64::from(x[reflect(i + d)]))
                .sum();
            (s / norm) as f32
        })
        .collect()
}

/// Local maxima at or above `threshold`. A plateau counts as one maximum at
/// its first frame when both sides are lower (or the sequence ends).
pub fn find_peaks(x: &[f32], threshold: f32) -> Vec<(usize, f32)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < x.len() {
        let mut j = i;
        while j + 1 < x.len() && x[j + 1] == x[i] {
            j += 1;
        }
        let left_lower = i == 0 || x[i - 1] < x[i];
        let right_lower = j + 1 == x.len() || x[j + 1] < x[i];
        if left_lower && right_lower && x[i] >= threshold {
            out.push((i, x[i]));
        }
        i = j + 1;
    }
    out
}

/// Decodes event curves: smooth each curve, take peaks above `threshold` as
/// candidates, split cycles at MVC candidates and keep the tallest candidate
/// of every other event per cycle (earliest on ties).
pub fn curves_to_events(pred: &FramePredictions, sigma: f64, threshold: f64) -> Result<Decoded> {
    if pred.kind != PredictionKind::EventCurves {
        return Err(Error::InvalidArgument("curves_to_events needs event curves".into()));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma must be >= 0, got {sigma}")));
    }
    pred.validate()?;
    let events = pred.event_set.events();
    let peaks: Vec<Vec<(usize, f32)>> = (0..events.len())
        .map(|ch| find_peaks(&gaussian_smooth(&pred.curve(ch), sigma), threshold as f32))
        .collect();
    let mvc_ch = pred.event_set.class_of(EventType::Mvc).expect("every set has MVC");
    // Segment starts: frame 0 plus every MVC candidate.
    let mut bounds: Vec<usize> = peaks[mvc_ch].iter().map(|&(f, _)| f).collect();
    if bounds.first() != Some(&0) {
        bounds.insert(0, 0);
    }
    let mut chosen: Vec<(EventType, usize)> = peaks[mvc_ch].iter().map(|&(f, _)| (EventType::Mvc, f)).collect();
    for (ch, &e) in events.iter().enumerate() {
        if ch == mvc_ch {
            continue;
        }
        for (s, &lo) in bounds.iter().enumerate() {
            let hi = bounds.get(s + 1).copied().unwrap_or(pred.n_frames);
            let best = peaks[ch]
                .iter()
                .filter(|&&(f, _)| f >= lo && f < hi)
                .fold(None::<(usize, f32)>, |best, &(f, v)| match best {
                    Some((_, bv)) if bv >= v => best,
                    _ => Some((f, v)),
                });
            if let Some((f, _)) = best {
                chosen.push((e, f));
            }
        }
    }
    chosen.sort_by_key(|&(e, f)| (f, e.index()));
    let mut diagnostics = Diagnostics::default();
    Ok(Decoded {
        annotation: assemble(&chosen, &mut diagnostics),
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::validate_annotation;

    fn one_hot(classes: &[usize]) -> FramePredictions {
        let mut v = Vec::new();
        for &c in classes {
            let mut row = [0.0f32; 6];
            row[c] = 1.0;
            v.extend_from_slice(&row);
        }
        FramePredictions::new("t", 48.0, PredictionKind::PhaseProbs, EventSet::Six, v).unwrap()
    }

    fn expand(runs: &[(usize, usize)]) -> Vec<usize> {
        runs.iter().flat_map(|&(c, n)| std::iter::repeat_n(c, n)).collect()
    }

    #[test]
    fn transition_emits_opening_event() {
        let d = phases_to_events(&one_hot(&expand(&[(0, 3), (1, 4), (2, 3)])), 2).unwrap();
        assert_eq!(d.annotation.frames_of(EventType::Avo), vec![3]);
        assert_eq!(d.annotation.frames_of(EventType::Avc), vec![7]);
        assert!(d.annotation.frames_of(EventType::Mvc).is_empty());
    }

    #[test]
    fn single_frame_glitch_is_removed() {
        let d = phases_to_events(&one_hot(&[0, 0, 0, 1, 0, 0, 1, 1, 1, 1]), 2).unwrap();
        assert_eq!(d.annotation.frames_of(EventType::Avo), vec![6]);
        // IVC IVC EJ IVC EJ EJ EJ: the filter settles the alternation at frame 3.
        let d = phases_to_events(&one_hot(&[0, 0, 1, 0, 1, 1, 1]), 2).unwrap();
        assert_eq!(d.annotation.frames_of(EventType::Avo), vec![3]);
    }

    #[test]
    fn skipped_phase_leaves_its_event_absent() {
        // IVC straight to IVR.
        let d = phases_to_events(&one_hot(&expand(&[(5, 2), (0, 4), (2, 5)])), 2).unwrap();
        let c = &d.annotation.cycles[0];
        assert_eq!(c.get(EventType::Mvc), Some(2));
        assert_eq!(c.get(EventType::Avc), Some(6));
        assert_eq!(c.get(EventType::Avo), None);
    }

    #[test]
    fn out_of_order_events_are_dropped_and_logged() {
        let d = phases_to_events(&one_hot(&expand(&[(5, 2), (0, 3), (1, 3), (2, 3), (1, 3), (2, 3)])), 2).unwrap();
        assert_eq!(d.annotation.frames_of(EventType::Avo), vec![5]);
        assert_eq!(d.annotation.frames_of(EventType::Avc), vec![8]);
        assert_eq!(d.diagnostics.dropped_events.len(), 2);
        assert!(validate_annotation(&d.annotation, 17).is_empty());
    }

    #[test]
    fn short_sequence_is_flagged() {
        let d = phases_to_events(&one_hot(&[0, 1]), 2).unwrap();
        assert_eq!(d.diagnostics.filter_flags, vec![FLAG_SHORT_SEQUENCE.to_string()]);
        assert_eq!(d.annotation.frames_of(EventType::Avo), vec![1]);
    }

    #[test]
    fn consistent_single_frame_phase_survives() {
        // ... AS | IVC (1 frame) | EJ ...
        let d = phases_to_events(&one_hot(&expand(&[(5, 4), (0, 1), (1, 5)])), 2).unwrap();
        assert_eq!(d.annotation.frames_of(EventType::Mvc), vec![4]);
        assert_eq!(d.annotation.frames_of(EventType::Avo), vec![5]);
    }

    #[test]
    fn mode_filter_matches_brute_force_on_short_patterns() {
        // Reference: full window counts, centre wins ties, else first-seen.
        fn reference(x: &[usize], i: usize) -> usize {
            let lo = i.saturating_sub(1);
            let hi = (i + 2).min(x.len());
            let w = &x[lo..hi];
            let mut counts = [0usize; 3];
            for &v in w {
                counts[v] += 1;
            }
            let max = *counts.iter().max().unwrap();
            if counts[x[i]] == max {
                x[i]
            } else {
                *w.iter().find(|&&v| counts[v] == max).unwrap()
            }
        }
        for len in 1..=8usize {
            for code in 0..3usize.pow(len as u32) {
                let x: Vec<usize> = (0..len).map(|k| code / 3usize.pow(k as u32) % 3).collect();
                let got = mode_filter(&x, 3);
                for i in 0..len {
                    assert_eq!(got[i], reference(&x, i), "{x:?}");
                }
            }
        }
    }

    fn curves(rows: Vec<Vec<f32>>) -> FramePredictions {
        let n = rows[0].len();
        let mut v = Vec::new();
        for f in 0..n {
            v.extend(rows.iter().map(|r| r[f]));
        }
        FramePredictions::new("t", 48.0, PredictionKind::EventCurves, EventSet::Six, v).unwrap()
    }

    fn triangle(n: usize, at: usize, width: usize) -> Vec<f32> {
        (0..n)
            .map(|f| (1.0 - f.abs_diff(at) as f32 / width as f32).max(0.0))
            .collect()
    }

    #[test]
    fn triangle_peak_survives_smoothing() {
        let mut rows = vec![vec![0.0; 40]; 6];
        rows[1] = triangle(40, 20, 5);
        let d = curves_to_events(&curves(rows), 1.5, 0.3).unwrap();
        assert_eq!(d.annotation.frames_of(EventType::Avo), vec![20]);
    }

    #[test]
    fn tallest_candidate_wins() {
        let mut rows = vec![vec![0.0; 40]; 6];
        rows[1] = triangle(40, 10, 3).iter().map(|v| v * 0.4).collect();
        for (f, v) in triangle(40, 25, 3).into_iter().enumerate() {
            rows[1][f] += 0.9 * v;
        }
        let d = curves_to_events(&curves(rows), 0.0, 0.3).unwrap();
        assert_eq!(d.annotation.frames_of(EventType::Avo), vec![25]);
    }

    #[test]
    fn plateau_resolves_to_first_frame() {
        let mut rows = vec![vec![0.0; 40]; 6];
        rows[2][19] = 0.5;
        rows[2][20] = 0.8;
        rows[2][21] = 0.8;
        rows[2][22] = 0.5;
        let d = curves_to_events(&curves(rows), 0.0, 0.3).unwrap();
        assert_eq!(d.annotation.frames_of(EventType::Avc), vec![20]);
    }

    #[test]
    fn nothing_above_threshold_means_absent() {
        let mut rows = vec![vec![0.0; 30]; 6];
        rows[3] = triangle(30, 12, 4).iter().map(|v| v * 0.2).collect();
        let d = curves_to_events(&curves(rows), 1.5, 0.3).unwrap();
        assert!(d.annotation.cycles.is_empty());
    }

    #[test]
    fn smoothing_preserves_mass_and_reflects() {
        let x: Vec<f32> = (0..20).map(|i| (i % 7) as f32).collect();
        let s = gaussian_smooth(&x, 2.0);
        assert_eq!(s.len(), 20);
        let c = vec![0.7f32; 15];
        assert!(gaussian_smooth(&c, 1.5).iter().all(|v| (v - 0.7).abs() < 1e-6));
        assert_eq!(gaussian_smooth(&x, 0.0), x);
    }
}

#[cfg(test)]
mod round_trip {
    use super::*;
    use crate::labels::{make_phase_labels, make_soft_labels, MASK};
    use crate::synth::{sample_motion_program, PhantomConfig};

    /// One-hot rows from phase labels. Leading unresolved frames take the
    /// phase preceding the first resolved one; later unresolved frames
    /// repeat the last resolved phase.
    fn one_hot_from_labels(classes: &[i32]) -> Vec<f32> {
        let first = classes.iter().position(|&c| c >= 0);
        let mut last = first.map_or(0, |i| (classes[i] as usize + 5) % 6);
        let mut out = Vec::with_capacity(classes.len() * 6);
        for &c in classes {
            if c >= 0 {
                last = c as usize;
            }
            let mut row = [0.0f32; 6];
            row[last] = 1.0;
            out.extend_from_slice(&row);
        }
        out
    }

    /// Whether `f` is at least `gap` frames from every other occurrence and
    /// from its own reflections across both sequence ends.
    fn separated(all: &[usize], f: usize, n: usize, gap: usize) -> bool {
        let others = all.iter().filter(|&&g| g != f).all(|&g| g.abs_diff(f) >= gap);
        others && 2 * f + 1 >= gap && 2 * (n - 1 - f) + 1 >= gap
    }

    #[test]
    fn phases_and_curves_reproduce_generated_annotations() {
        let cfg = PhantomConfig {
            p_missing_atrial_systole: 0.3,
            ..PhantomConfig::default()
        };
        for seed in 0..200 {
            let program = sample_motion_program(seed, &cfg).unwrap();
            let ann = program.annotation();
            let n = program.n_frames();

            let labels = make_phase_labels(&ann, n).unwrap();
            let probs = one_hot_from_labels(&labels.classes);
            let pred = FramePredictions::new("r", 48.0, PredictionKind::PhaseProbs, EventSet::Six, probs).unwrap();
            let d = phases_to_events(&pred, 2).unwrap();
            for (_, e, f) in ann.events_by_frame() {
                if f > 0 {
                    assert!(d.annotation.frames_of(e).contains(&f), "seed {seed}: {e} at {f} lost");
                }
            }

            let curves = make_soft_labels(&ann, n, 5).unwrap();
            let values = curves.to_frame_major().iter().map(|&v| if v == MASK { 0.0 } else { v }).collect();
            let pred = FramePredictions::new("r", 48.0, PredictionKind::EventCurves, EventSet::Six, values).unwrap();
            let d = curves_to_events(&pred, 1.5, 0.3).unwrap();
            for (_, e, f) in ann.events_by_frame() {
                if separated(&ann.frames_of(e), f, n, 10) {
                    assert!(d.annotation.frames_of(e).contains(&f), "seed {seed}: {e} at {f} lost");
                }
            }
        }
    }
}
