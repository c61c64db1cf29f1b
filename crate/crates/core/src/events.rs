//! Valve events, cardiac phases, recordings and annotations.
//!
//! Frame indices are 0-based everywhere. A cycle is a partial map from
//! [`EventType`] to frame index; the six events occur in the fixed cyclic
//! order MVC → AVO → AVC → MVO → DSS → ASS → MVC, and each event opens the
//! phase of the same position in [`Phase`].

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The six valve/diastolic events, in cyclic order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventType {
    #[serde(rename = "MVC")]
    Mvc,
    #[serde(rename = "AVO")]
    Avo,
    #[serde(rename = "AVC")]
    Avc,
    #[serde(rename = "MVO")]
    Mvo,
    #[serde(rename = "DSS")]
    Dss,
    #[serde(rename = "ASS")]
    Ass,
}

impl EventType {
    pub const ALL: [EventType; 6] = [
        EventType::Mvc,
        EventType::Avo,
        EventType::Avc,
        EventType::Mvo,
        EventType::Dss,
        EventType::Ass,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<EventType> {
        Self::ALL.get(i).copied()
    }

    /// Next event in cyclic order (ASS wraps to MVC).
    pub fn next(self) -> EventType {
        Self::ALL[(self.index() + 1) % 6]
    }

    /// The phase this event opens.
    pub fn opens(self) -> Phase {
        Phase::ALL[self.index()]
    }

    pub fn name(self) -> &'static str {
        match self {
            EventType::Mvc => "MVC",
            EventType::Avo => "AVO",
            EventType::Avc => "AVC",
            EventType::Mvo => "MVO",
            EventType::Dss => "DSS",
            EventType::Ass => "ASS",
        }
    }

    pub fn parse(s: &str) -> Option<EventType> {
        Self::ALL.into_iter().find(|e| e.name().eq_ignore_ascii_case(s))
    }

    /// Position of `self` in the cyclic order when the cycle starts at `anchor`.
    pub fn rank_from(self, anchor: EventType) -> usize {
        (self.index() + 6 - anchor.index()) % 6
    }
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Cardiac phases; each starts at its opening event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase {
    Ivc,
    Ejection,
    Ivr,
    EarlyFilling,
    Diastasis,
    AtrialSystole,
}

impl Phase {
    pub const ALL: [Phase; 6] = [
        Phase::Ivc,
        Phase::Ejection,
        Phase::Ivr,
        Phase::EarlyFilling,
        Phase::Diastasis,
        Phase::AtrialSystole,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Phase> {
        Self::ALL.get(i).copied()
    }

    pub fn opening_event(self) -> EventType {
        EventType::ALL[self.index()]
    }
}

/// Apical acquisition view.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum View {
    #[serde(rename = "A4CH")]
    A4ch,
    #[serde(rename = "A2CH")]
    A2ch,
    #[serde(rename = "APLAX")]
    Aplax,
}

impl View {
    pub const ALL: [View; 3] = [View::A4ch, View::A2ch, View::Aplax];

    /// Only the apical long-axis view shows the aortic valve.
    pub fn aortic_valve_visible(self) -> bool {
        matches!(self, View::Aplax)
    }

    pub fn name(self) -> &'static str {
        match self {
            View::A4ch => "A4CH",
            View::A2ch => "A2CH",
            View::Aplax => "APLAX",
        }
    }

    pub fn parse(s: &str) -> Option<View> {
        Self::ALL.into_iter().find(|v| v.name().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for View {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which events a model is trained to detect.
///
/// `Two` keeps only the MVC (end-diastole) and AVC (end-systole) anchors, so
/// the classifier sees two phases: MVC→AVC and AVC→MVC.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventSet {
    #[default]
    Six,
    Two,
}

impl EventSet {
    pub fn events(self) -> &'static [EventType] {
        match self {
            EventSet::Six => &EventType::ALL,
            EventSet::Two => &[EventType::Mvc, EventType::Avc],
        }
    }

    pub fn len(self) -> usize {
        self.events().len()
    }

    pub fn is_empty(self) -> bool {
        false
    }

    /// Class index of `event` within this set.
    pub fn class_of(self, event: EventType) -> Option<usize> {
        self.events().iter().position(|&e| e == event)
    }

    /// Keep only the events of this set.
    pub fn project(self, ann: &EventAnnotation) -> EventAnnotation {
        let cycles = ann
            .cycles
            .iter()
            .map(|c| {
                let mut out = Cycle::default();
                for &e in self.events() {
                    out.set(e, c.get(e));
                }
                out
            })
            .filter(|c| !c.is_empty())
            .collect();
        EventAnnotation {
            cycles,
            source: ann.source.clone(),
        }
    }
}

/// Grayscale frame stack, row-major `[frame][row][col]`, intensities in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameStack {
    pub n_frames: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl FrameStack {
    pub fn new(n_frames: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if n_frames == 0 || height == 0 || width == 0 {
            return Err(Error::InvalidArgument(format!(
                "frame stack dimensions must be positive, got {n_frames}x{height}x{width}"
            )));
        }
        if data.len() != n_frames * height * width {
            return Err(Error::InvalidArgument(format!(
                "frame stack data has {} values, expected {}",
                data.len(),
                n_frames * height * width
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!(
                "pixel intensity {bad} outside [0, 1]"
            )));
        }
        Ok(FrameStack {
            n_frames,
            height,
            width,
            data,
        })
    }

    pub fn frame(&self, t: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[t * n..(t + 1) * n]
    }
}

/// A grayscale image sequence with its acquisition metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct Recording {
    pub id: String,
    pub fps: f64,
    pub view: View,
    pub frames: FrameStack,
}

impl Recording {
    pub fn new(id: impl Into<String>, fps: f64, view: View, frames: FrameStack) -> Result<Self> {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::InvalidArgument(format!("fps must be positive, got {fps}")));
        }
        Ok(Recording {
            id: id.into(),
            fps,
            view,
            frames,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.frames.n_frames
    }
}

/// One cardiac cycle: a partial map from event to frame index.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "CycleRepr", into = "CycleRepr")]
pub struct Cycle {
    frames: [Option<usize>; 6],
}

impl Cycle {
    pub fn get(&self, e: EventType) -> Option<usize> {
        self.frames[e.index()]
    }

    pub fn set(&mut self, e: EventType, frame: Option<usize>) {
        self.frames[e.index()] = frame;
    }

    pub fn with(mut self, e: EventType, frame: usize) -> Self {
        self.set(e, Some(frame));
        self
    }

    pub fn from_pairs(pairs: &[(EventType, usize)]) -> Self {
        let mut c = Cycle::default();
        for &(e, f) in pairs {
            c.set(e, Some(f));
        }
        c
    }

    pub fn is_empty(&self) -> bool {
        self.frames.iter().all(Option::is_none)
    }

    /// Present events in cyclic order starting at MVC.
    pub fn present(&self) -> impl Iterator<Item = (EventType, usize)> + '_ {
        EventType::ALL
            .into_iter()
            .filter_map(|e| self.get(e).map(|f| (e, f)))
    }

    /// MVC if present, otherwise the event with the earliest frame.
    pub fn anchor(&self) -> Option<EventType> {
        if self.get(EventType::Mvc).is_some() {
            return Some(EventType::Mvc);
        }
        self.present().min_by_key(|&(_, f)| f).map(|(e, _)| e)
    }

    pub fn first_frame(&self) -> Option<usize> {
        self.present().map(|(_, f)| f).min()
    }

    pub fn last_frame(&self) -> Option<usize> {
        self.present().map(|(_, f)| f).max()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CycleRepr {
    #[serde(rename = "MVC", default, skip_serializing_if = "Option::is_none")]
    mvc: Option<usize>,
    #[serde(rename = "AVO", default, skip_serializing_if = "Option::is_none")]
    avo: Option<usize>,
    #[serde(rename = "AVC", default, skip_serializing_if = "Option::is_none")]
    avc: Option<usize>,
    #[serde(rename = "MVO", default, skip_serializing_if = "Option::is_none")]
    mvo: Option<usize>,
    #[serde(rename = "DSS", default, skip_serializing_if = "Option::is_none")]
    dss: Option<usize>,
    #[serde(rename = "ASS", default, skip_serializing_if = "Option::is_none")]
    ass: Option<usize>,
}

impl From<CycleRepr> for Cycle {
    fn from(r: CycleRepr) -> Self {
        Cycle {
            frames: [r.mvc, r.avo, r.avc, r.mvo, r.dss, r.ass],
        }
    }
}

impl From<Cycle> for CycleRepr {
    fn from(c: Cycle) -> Self {
        let [mvc, avo, avc, mvo, dss, ass] = c.frames;
        CycleRepr {
            mvc,
            avo,
            avc,
            mvo,
            dss,
            ass,
        }
    }
}

/// Who produced an annotation.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum Source {
    Reference,
    Prediction,
    Annotator(String),
}

impl From<String> for Source {
    fn from(s: String) -> Self {
        match s.as_str() {
            "reference" => Source::Reference,
            "prediction" => Source::Prediction,
            _ => Source::Annotator(s),
        }
    }
}

impl From<Source> for String {
    fn from(s: Source) -> Self {
        match s {
            Source::Reference => "reference".into(),
            Source::Prediction => "prediction".into(),
            Source::Annotator(id) => id,
        }
    }
}

/// Event frames for every cycle in a recording.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventAnnotation {
    pub cycles: Vec<Cycle>,
    pub source: Source,
}

impl EventAnnotation {
    pub fn new(cycles: Vec<Cycle>, source: Source) -> Self {
        EventAnnotation { cycles, source }
    }

    /// Every present event as `(cycle, event, frame)`, sorted by frame.
    pub fn events_by_frame(&self) -> Vec<(usize, EventType, usize)> {
        let mut out: Vec<_> = self
            .cycles
            .iter()
            .enumerate()
            .flat_map(|(ci, c)| c.present().map(move |(e, f)| (ci, e, f)))
            .collect();
        out.sort_by_key(|&(ci, e, f)| (f, ci, e.index()));
        out
    }

    /// All frames at which `event` was annotated, ascending.
    pub fn frames_of(&self, event: EventType) -> Vec<usize> {
        let mut v: Vec<usize> = self.cycles.iter().filter_map(|c| c.get(event)).collect();
        v.sort_unstable();
        v
    }

    pub fn n_events(&self) -> usize {
        self.cycles.iter().map(|c| c.present().count()).sum()
    }

    pub fn contains(&self, event: EventType) -> bool {
        self.cycles.iter().any(|c| c.get(event).is_some())
    }

    /// Cycle lengths in frames between consecutive MVC events.
    pub fn cycle_lengths(&self) -> Vec<usize> {
        self.frames_of(EventType::Mvc)
            .windows(2)
            .map(|w| w[1] - w[0])
            .collect()
    }
}

/// A single problem found by [`validate_annotation`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    OutOfRange {
        cycle: usize,
        event: EventType,
        frame: usize,
        n_frames: usize,
    },
    Order {
        cycle: usize,
        earlier: (EventType, usize),
        later: (EventType, usize),
    },
    /// Cycle `cycle` starts at or before the last event of the preceding cycle.
    CycleOverlap { cycle: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::OutOfRange {
                cycle,
                event,
                frame,
                n_frames,
            } => write!(
                f,
                "cycle {cycle}: {event} at frame {frame} outside [0, {n_frames})"
            ),
            Violation::Order {
                cycle,
                earlier,
                later,
            } => write!(
                f,
                "cycle {cycle}: {} at {} must precede {} at {}",
                earlier.0, earlier.1, later.0, later.1
            ),
            Violation::CycleOverlap { cycle } => {
                write!(f, "cycle {cycle} overlaps the preceding cycle")
            }
        }
    }
}

/// Checks frame ranges and cyclic order of every cycle.
///
/// Duplicate events within a cycle are unrepresentable in [`Cycle`] and are
/// rejected when annotation files are parsed.
pub fn validate_annotation(ann: &EventAnnotation, n_frames: usize) -> Vec<Violation> {
    let mut out = Vec::new();
    for (ci, cycle) in ann.cycles.iter().enumerate() {
        for (event, frame) in cycle.present() {
            if frame >= n_frames {
                out.push(Violation::OutOfRange {
                    cycle: ci,
                    event,
                    frame,
                    n_frames,
                });
            }
        }
        out.extend(order_violations(cycle, ci));
        if ci > 0 {
            let prev_last = ann.cycles[..ci].iter().rev().find_map(|c| c.last_frame());
            if let (Some(p), Some(first)) = (prev_last, cycle.first_frame()) {
                if first <= p {
                    out.push(Violation::CycleOverlap { cycle: ci });
                }
            }
        }
    }
    out
}

/// Pairwise order check of one cycle, anchored at MVC or its earliest event.
pub(crate) fn order_violations(cycle: &Cycle, ci: usize) -> Vec<Violation> {
    let Some(anchor) = cycle.anchor() else {
        return Vec::new();
    };
    let present: Vec<_> = cycle.present().collect();
    let mut out = Vec::new();
    for &(a, fa) in &present {
        for &(b, fb) in &present {
            if a.rank_from(anchor) < b.rank_from(anchor) && fa >= fb {
                out.push(Violation::Order {
                    cycle: ci,
                    earlier: (a, fa),
                    later: (b, fb),
                });
            }
        }
    }
    out
}

/// Phase governing `frame`, or `None` when it cannot be resolved.
///
/// The governing event is the latest annotated event at or before `frame`.
/// Frames before the first event are unresolved. When a cycle has DSS but no
/// ASS and a later MVC exists, the frames after DSS up to that MVC are
/// unresolved as well, since the start of atrial systole is unknown there.
pub fn phase_at(ann: &EventAnnotation, frame: usize, n_frames: usize) -> Result<Option<Phase>> {
    if frame >= n_frames {
        return Err(Error::InvalidArgument(format!(
            "frame {frame} outside recording of {n_frames} frames"
        )));
    }
    let events = ann.events_by_frame();
    let Some(&(ci, event, at)) = events.iter().rev().find(|&&(_, _, f)| f <= frame) else {
        return Ok(None);
    };
    if event == EventType::Dss && at < frame && ann.cycles[ci].get(EventType::Ass).is_none() {
        let later_mvc = events
            .iter()
            .any(|&(_, e, f)| e == EventType::Mvc && f > at);
        if later_mvc {
            return Ok(None);
        }
    }
    Ok(Some(event.opens()))
}

/// Converts a frame difference to milliseconds.
pub fn frames_to_ms(delta_frames: f64, fps: f64) -> Result<f64> {
    check_fps(fps)?;
    Ok(delta_frames / fps * 1000.0)
}

/// Converts milliseconds to a (fractional) frame count.
pub fn ms_to_frames(ms: f64, fps: f64) -> Result<f64> {
    check_fps(fps)?;
    Ok(ms * fps / 1000.0)
}

/// Report rounding for milliseconds: nearest integer, ties to even.
pub fn round_ms(ms: f64) -> i64 {
    ms.round_ties_even() as i64
}

fn check_fps(fps: f64) -> Result<()> {
    if fps > 0.0 && fps.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("fps must be positive, got {fps}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full_cycle() -> EventAnnotation {
        EventAnnotation::new(
            vec![Cycle::from_pairs(&[
                (EventType::Mvc, 5),
                (EventType::Avo, 10),
                (EventType::Avc, 25),
                (EventType::Mvo, 30),
                (EventType::Dss, 40),
                (EventType::Ass, 55),
            ])],
            Source::Reference,
        )
    }

    #[test]
    fn ms_conversions_match_reported_values() {
        let ms = frames_to_ms(1.4, 48.0).unwrap();
        assert!((ms - 29.1666).abs() < 1e-3);
        assert_eq!(round_ms(ms), 29);
        let ms = frames_to_ms(0.6, 48.0).unwrap();
        assert!((ms - 12.5).abs() < 1e-12);
        assert_eq!(round_ms(ms), 12);
        assert_eq!(frames_to_ms(0.0, 61.0).unwrap(), 0.0);
        assert!((ms_to_frames(29.17, 48.0).unwrap() - 1.40016).abs() < 1e-9);
        assert_eq!(ms_to_frames(0.0, 48.0).unwrap(), 0.0);
        assert!(frames_to_ms(1.0, 0.0).is_err());
        assert!(ms_to_frames(1.0, -3.0).is_err());
    }

    #[test]
    fn ordered_cycle_is_valid() {
        assert!(validate_annotation(&full_cycle(), 70).is_empty());
    }

    #[test]
    fn reversed_pair_is_an_order_violation() {
        let ann = EventAnnotation::new(
            vec![Cycle::from_pairs(&[(EventType::Mvc, 5), (EventType::Avo, 4)])],
            Source::Reference,
        );
        let v = validate_annotation(&ann, 70);
        assert!(matches!(v.as_slice(), [Violation::Order { .. }]));
    }

    #[test]
    fn partial_cycle_is_valid() {
        let ann = EventAnnotation::new(
            vec![Cycle::from_pairs(&[(EventType::Mvc, 5), (EventType::Mvo, 30)])],
            Source::Reference,
        );
        assert!(validate_annotation(&ann, 70).is_empty());
    }

    #[test]
    fn out_of_range_and_overlap() {
        let ann = EventAnnotation::new(
            vec![
                Cycle::from_pairs(&[(EventType::Mvc, 5), (EventType::Avc, 80)]),
                Cycle::from_pairs(&[(EventType::Mvc, 40)]),
            ],
            Source::Reference,
        );
        let v = validate_annotation(&ann, 70);
        assert!(v.iter().any(|x| matches!(x, Violation::OutOfRange { frame: 80, .. })));
        assert!(v.contains(&Violation::CycleOverlap { cycle: 1 }));
    }

    #[test]
    fn leading_partial_cycle_anchors_at_earliest_event() {
        let ann = EventAnnotation::new(
            vec![
                Cycle::from_pairs(&[(EventType::Dss, 3), (EventType::Ass, 10)]),
                Cycle::from_pairs(&[(EventType::Mvc, 15), (EventType::Avo, 17)]),
            ],
            Source::Reference,
        );
        assert!(validate_annotation(&ann, 40).is_empty());
    }

    #[test]
    fn phase_lookup() {
        let ann = full_cycle();
        assert_eq!(phase_at(&ann, 12, 70).unwrap(), Some(Phase::Ejection));
        assert_eq!(phase_at(&ann, 5, 70).unwrap(), Some(Phase::Ivc));
        assert_eq!(phase_at(&ann, 2, 70).unwrap(), None);
        assert_eq!(phase_at(&ann, 69, 70).unwrap(), Some(Phase::AtrialSystole));
        assert!(phase_at(&ann, 70, 70).is_err());
    }

    #[test]
    fn missing_atrial_systole_masks_the_diastolic_span() {
        let ann = EventAnnotation::new(
            vec![
                Cycle::from_pairs(&[(EventType::Mvo, 2), (EventType::Dss, 8)]),
                Cycle::from_pairs(&[(EventType::Mvc, 20), (EventType::Avo, 22)]),
            ],
            Source::Reference,
        );
        assert_eq!(phase_at(&ann, 8, 30).unwrap(), Some(Phase::Diastasis));
        assert_eq!(phase_at(&ann, 9, 30).unwrap(), None);
        assert_eq!(phase_at(&ann, 19, 30).unwrap(), None);
        assert_eq!(phase_at(&ann, 20, 30).unwrap(), Some(Phase::Ivc));
        // No later MVC: diastasis simply continues.
        let tail = EventAnnotation::new(
            vec![Cycle::from_pairs(&[(EventType::Mvo, 2), (EventType::Dss, 8)])],
            Source::Reference,
        );
        assert_eq!(phase_at(&tail, 12, 30).unwrap(), Some(Phase::Diastasis));
    }

    #[test]
    fn annotation_json_round_trip_and_duplicate_keys() {
        let ann = full_cycle();
        let s = serde_json::to_string(&ann).unwrap();
        assert!(s.contains("\"MVC\":5"));
        let back: EventAnnotation = serde_json::from_str(&s).unwrap();
        assert_eq!(back, ann);
        let dup = r#"{"cycles":[{"MVC":1,"MVC":2}],"source":"reference"}"#;
        assert!(serde_json::from_str::<EventAnnotation>(dup).is_err());
    }

    #[test]
    fn two_event_projection() {
        let p = EventSet::Two.project(&full_cycle());
        assert_eq!(p.cycles[0].present().count(), 2);
        assert_eq!(p.cycles[0].get(EventType::Avc), Some(25));
        assert_eq!(EventSet::Two.class_of(EventType::Avc), Some(1));
    }
}
