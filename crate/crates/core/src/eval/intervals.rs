//! Cardiac time intervals per cycle and their normal-range classification.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{frames_to_ms, EventAnnotation, EventType};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum IntervalKind {
    Ivct,
    Et,
    Ivrt,
    Diastasis,
}

impl IntervalKind {
    pub const ALL: [IntervalKind; 4] = [IntervalKind::Ivct, IntervalKind::Et, IntervalKind::Ivrt, IntervalKind::Diastasis];

    pub fn name(self) -> &'static str {
        match self {
            IntervalKind::Ivct => "IVCT",
            IntervalKind::Et => "ET",
            IntervalKind::Ivrt => "IVRT",
            IntervalKind::Diastasis => "DIASTASIS",
        }
    }

    fn endpoints(self) -> (EventType, EventType) {
        match self {
            IntervalKind::Ivct => (EventType::Mvc, EventType::Avo),
            IntervalKind::Et => (EventType::Avo, EventType::Avc),
            IntervalKind::Ivrt => (EventType::Avc, EventType::Mvo),
            IntervalKind::Diastasis => (EventType::Dss, EventType::Ass),
        }
    }

    /// Reference range in ms; diastasis has none.
    pub fn normal_range(self) -> Option<NormalRange> {
        match self {
            IntervalKind::Ivct => Some(IVCT_RANGE),
            IntervalKind::Et => Some(ET_RANGE),
            IntervalKind::Ivrt => Some(IVRT_RANGE),
            IntervalKind::Diastasis => None,
        }
    }
}

/// Interval durations of one annotated cycle in ms; `None` when an endpoint is missing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleIntervals {
    pub cycle: usize,
    pub ivct: Option<f64>,
    pub et: Option<f64>,
    pub ivrt: Option<f64>,
    pub diastasis: Option<f64>,
}

impl CycleIntervals {
    pub fn get(&self, kind: IntervalKind) -> Option<f64> {
        match kind {
            IntervalKind::Ivct => self.ivct,
            IntervalKind::Et => self.et,
            IntervalKind::Ivrt => self.ivrt,
            IntervalKind::Diastasis => self.diastasis,
        }
    }
}

pub fn cardiac_intervals(ann: &EventAnnotation, fps: f64) -> Result<Vec<CycleIntervals>> {
    ann.cycles
        .iter()
        .enumerate()
        .map(|(ci, c)| {
            let span = |kind: IntervalKind| -> Result<Option<f64>> {
                let (a, b) = kind.endpoints();
                match (c.get(a), c.get(b)) {
                    (Some(fa), Some(fb)) => Ok(Some(frames_to_ms(fb as f64 - fa as f64, fps)?)),
                    _ => Ok(None),
                }
            };
            Ok(CycleIntervals {
                cycle: ci,
                ivct: span(IntervalKind::Ivct)?,
                et: span(IntervalKind::Et)?,
                ivrt: span(IntervalKind::Ivrt)?,
                diastasis: span(IntervalKind::Diastasis)?,
            })
        })
        .collect()
}

/// Inclusive normal range in ms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalRange {
    pub lo: f64,
    pub hi: f64,
}

pub const IVRT_RANGE: NormalRange = NormalRange { lo: 72.0, hi: 112.0 };
pub const IVCT_RANGE: NormalRange = NormalRange { lo: 23.0, hi: 49.0 };
pub const ET_RANGE: NormalRange = NormalRange { lo: 272.0, hi: 314.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RangeClass {
    Below,
    Normal,
    Above,
}

impl NormalRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_finite() && hi.is_finite() && lo <= hi {
            Ok(NormalRange { lo, hi })
        } else {
            Err(Error::InvalidArgument(format!("range [{lo}, {hi}] is not well ordered")))
        }
    }

    pub fn classify(&self, ms: f64) -> RangeClass {
        if ms < self.lo {
            RangeClass::Below
        } else if ms > self.hi {
            RangeClass::Above
        } else {
            RangeClass::Normal
        }
    }
}

/// Proportions of values below, within and above a range.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalTable {
    pub n: usize,
    pub below: f64,
    pub normal: f64,
    pub above: f64,
}

pub fn classify_intervals(values_ms: &[f64], range: NormalRange) -> IntervalTable {
    let mut counts = [0usize; 3];
    for &v in values_ms {
        counts[range.classify(v) as usize] += 1;
    }
    let n = values_ms.len();
    let p = |c: usize| if n == 0 { 0.0 } else { c as f64 / n as f64 };
    IntervalTable {
        n,
        below: p(counts[0]),
        normal: p(counts[1]),
        above: p(counts[2]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::{Cycle, Source};

    #[test]
    fn ivrt_from_frames() {
        let ann = EventAnnotation::new(
            vec![Cycle::from_pairs(&[(EventType::Avc, 25), (EventType::Mvo, 30)])],
            Source::Reference,
        );
        let iv = cardiac_intervals(&ann, 48.0).unwrap();
        assert!((iv[0].ivrt.unwrap() - 104.1666).abs() < 1e-3);
        assert_eq!(iv[0].ivct, None);
    }

    #[test]
    fn coincident_events_give_zero() {
        let ann = EventAnnotation::new(
            vec![Cycle::from_pairs(&[(EventType::Mvc, 5), (EventType::Avo, 5)])],
            Source::Reference,
        );
        assert_eq!(cardiac_intervals(&ann, 48.0).unwrap()[0].ivct, Some(0.0));
    }

    #[test]
    fn bounds_are_inclusive() {
        assert_eq!(IVRT_RANGE.classify(107.0), RangeClass::Normal);
        assert_eq!(IVCT_RANGE.classify(58.0), RangeClass::Above);
        assert_eq!(ET_RANGE.classify(287.0), RangeClass::Normal);
        assert_eq!(IVRT_RANGE.classify(72.0), RangeClass::Normal);
        assert_eq!(IVRT_RANGE.classify(112.0), RangeClass::Normal);
        assert_eq!(IVRT_RANGE.classify(71.9), RangeClass::Below);
        let t = classify_intervals(&[60.0, 100.0, 120.0, 90.0], IVRT_RANGE);
        assert_eq!((t.below, t.normal, t.above), (0.25, 0.5, 0.25));
        assert!(NormalRange::new(5.0, 1.0).is_err());
    }
}
