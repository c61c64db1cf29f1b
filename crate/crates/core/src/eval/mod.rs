//! Event-timing metrics: pairing, frame differences, aggregated reports,
//! error histograms and interobserver comparison.
//!
//! FD is signed `prediction − reference` (positive = late prediction). aFD is
//! the mean absolute frame difference; its millisecond form converts each
//! pair with its own recording's frame rate before averaging.

mod intervals;
mod plot;

pub use intervals::{
    cardiac_intervals, classify_intervals, CycleIntervals, IntervalKind, IntervalTable, NormalRange, RangeClass,
    ET_RANGE, IVCT_RANGE, IVRT_RANGE,
};
pub use plot::histogram_svg;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{frames_to_ms, EventAnnotation, EventType, View};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventPair {
    pub event: EventType,
    pub pred: usize,
    pub reference: usize,
}

impl EventPair {
    pub fn diff(&self) -> i64 {
        self.pred as i64 - self.reference as i64
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventPairing {
    pub pairs: Vec<EventPair>,
    /// Reference events without a prediction in the window.
    pub misses: Vec<(EventType, usize)>,
    /// Predicted events without a reference in the window.
    pub false_detections: Vec<(EventType, usize)>,
}

/// Default matching window: half the median reference cycle length, or half
/// the recording when fewer than two MVCs are annotated.
pub fn default_window(reference: &EventAnnotation, n_frames: usize) -> usize {
    let mut lengths = reference.cycle_lengths();
    if lengths.is_empty() {
        return (n_frames / 2).max(1);
    }
    lengths.sort_unstable();
    (lengths[lengths.len() / 2] / 2).max(1)
}

/// Per event type, repeatedly pairs the closest remaining (prediction,
/// reference) frames within `window`; ties go to the earlier reference, then
/// the earlier prediction.
pub fn match_events(pred: &EventAnnotation, reference: &EventAnnotation, window: usize) -> EventPairing {
    let mut out = EventPairing::default();
    for e in EventType::ALL {
        let p = pred.frames_of(e);
        let r = reference.frames_of(e);
        let mut cand: Vec<(usize, usize, usize)> = Vec::new();
        for (i, &pf) in p.iter().enumerate() {
            for (j, &rf) in r.iter().enumerate() {
                let d = pf.abs_diff(rf);
                if d <= window {
                    cand.push((d, j, i));
                }
            }
        }
        cand.sort_by_key(|&(d, j, i)| (d, r[j], p[i]));
        let mut used_p = vec![false; p.len()];
        let mut used_r = vec![false; r.len()];
        let mut pairs = Vec::new();
        for (_, j, i) in cand {
            if !used_p[i] && !used_r[j] {
                used_p[i] = true;
                used_r[j] = true;
                pairs.push(EventPair {
                    event: e,
                    pred: p[i],
                    reference: r[j],
                });
            }
        }
        pairs.sort_by_key(|q| q.reference);
        out.pairs.extend(pairs);
        out.misses
            .extend(r.iter().zip(&used_r).filter(|(_, &u)| !u).map(|(&f, _)| (e, f)));
        out.false_detections
            .extend(p.iter().zip(&used_p).filter(|(_, &u)| !u).map(|(&f, _)| (e, f)));
    }
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StdKind {
    #[default]
    Sample,
    Population,
}

/// Frame-difference statistics of one bucket of pairs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdStats {
    pub n: usize,
    pub fd_mean: f64,
    /// `None` for a sample std of a single pair.
    pub fd_std: Option<f64>,
    pub afd: f64,
    pub afd_ms: f64,
}

/// Statistics of signed frame differences, each with its recording's fps.
/// `None` for an empty bucket.
pub fn fd_stats(diffs: &[(i64, f64)], std: StdKind) -> Result<Option<FdStats>> {
    if diffs.is_empty() {
        return Ok(None);
    }
    let n = diffs.len() as f64;
    let mean = diffs.iter().map(|&(d, _)| d as f64).sum::<f64>() / n;
    let ss: f64 = diffs.iter().map(|&(d, _)| (d as f64 - mean).powi(2)).sum();
    let fd_std = match std {
        StdKind::Population => Some((ss / n).sqrt()),
        StdKind::Sample if diffs.len() > 1 => Some((ss / (n - 1.0)).sqrt()),
        StdKind::Sample => None,
    };
    let afd = diffs.iter().map(|&(d, _)| d.abs() as f64).sum::<f64>() / n;
    let mut ms = 0.0;
    for &(d, fps) in diffs {
        ms += frames_to_ms(d.abs() as f64, fps)?;
    }
    Ok(Some(FdStats {
        n: diffs.len(),
        fd_mean: mean,
        fd_std,
        afd,
        afd_ms: ms / n,
    }))
}

/// Statistics per event type of one pairing.
pub fn pairing_stats(pairing: &EventPairing, fps: f64, std: StdKind) -> Result<BTreeMap<EventType, FdStats>> {
    let mut out = BTreeMap::new();
    for e in EventType::ALL {
        let d: Vec<(i64, f64)> = pairing
            .pairs
            .iter()
            .filter(|p| p.event == e)
            .map(|p| (p.diff(), fps))
            .collect();
        if let Some(s) = fd_stats(&d, std)? {
            out.insert(e, s);
        }
    }
    Ok(out)
}

/// One evaluated recording.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordingEval {
    pub id: String,
    pub dataset: String,
    pub view: Option<View>,
    pub fps: f64,
    pub pairing: EventPairing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Matching window in frames; `None` uses [`default_window`].
    pub window_frames: Option<usize>,
    pub std: StdKind,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            window_frames: None,
            std: StdKind::Sample,
        }
    }
}

/// Pairs a prediction with its reference annotation.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_recording(
    id: &str,
    dataset: &str,
    view: Option<View>,
    fps: f64,
    n_frames: usize,
    pred: &EventAnnotation,
    reference: &EventAnnotation,
    cfg: &EvalConfig,
) -> RecordingEval {
    let window = cfg.window_frames.unwrap_or_else(|| default_window(reference, n_frames));
    RecordingEval {
        id: id.to_string(),
        dataset: dataset.to_string(),
        view,
        fps,
        pairing: match_events(pred, reference, window),
    }
}

/// One table row; `view` is a view name or `"all"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub view: String,
    pub event: EventType,
    pub n_pairs: usize,
    pub misses: usize,
    pub false_detections: usize,
    pub fd_mean: Option<f64>,
    pub fd_std: Option<f64>,
    pub afd: Option<f64>,
    pub afd_ms: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub fd_convention: String,
    pub std: StdKind,
    pub rows: Vec<ReportRow>,
    /// Signed-error histograms per event over all recordings.
    pub histograms: BTreeMap<EventType, BTreeMap<i64, f64>>,
}

pub const FD_CONVENTION: &str = "FD = predicted frame - reference frame (positive = late)";

impl EvaluationReport {
    pub fn row(&self, dataset: &str, view: &str, event: EventType) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.dataset == dataset && r.view == view && r.event == event)
    }

    /// Writes one CSV row per (dataset, view, event) with fixed six-decimal
    /// formatting; absent statistics are empty cells.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| crate::train::csv_error(path, e))?;
        let f = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.6}"));
        w.write_record(["dataset", "view", "event", "n_pairs", "misses", "false_detections", "fd_mean", "fd_std", "afd", "afd_ms"])
            .map_err(|e| crate::train::csv_error(path, e))?;
        for r in &self.rows {
            w.write_record([
                r.dataset.clone(),
                r.view.clone(),
                r.event.name().to_string(),
                r.n_pairs.to_string(),
                r.misses.to_string(),
                r.false_detections.to_string(),
                f(r.fd_mean),
                f(r.fd_std),
                f(r.afd),
                f(r.afd_ms),
            ])
            .map_err(|e| crate::train::csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Pools pairs per (dataset, view, event) and per (dataset, all views,
/// event). Pooling weights each group by its pair count.
pub fn aggregate_report(records: &[RecordingEval], std: StdKind) -> Result<EvaluationReport> {
    let datasets: BTreeSet<&str> = records.iter().map(|r| r.dataset.as_str()).collect();
    let mut rows = Vec::new();
    for ds in datasets {
        let in_ds: Vec<&RecordingEval> = records.iter().filter(|r| r.dataset == ds).collect();
        let mut views: Vec<Option<View>> = in_ds.iter().map(|r| r.view).collect();
        views.sort();
        views.dedup();
        let mut groups: Vec<(String, Vec<&RecordingEval>)> = views
            .iter()
            .map(|&v| {
                let name = v.map_or("unspecified".to_string(), |v| v.name().to_string());
                (name, in_ds.iter().copied().filter(|r| r.view == v).collect())
            })
            .collect();
        if groups.len() > 1 {
            groups.push(("all".to_string(), in_ds.clone()));
        } else if let Some(g) = groups.first_mut() {
            g.0 = "all".to_string();
        }
        for (view, group) in groups {
            for e in EventType::ALL {
                let diffs: Vec<(i64, f64)> = group
                    .iter()
                    .flat_map(|r| {
                        r.pairing
                            .pairs
                            .iter()
                            .filter(move |p| p.event == e)
                            .map(move |p| (p.diff(), r.fps))
                    })
                    .collect();
                let misses = group.iter().map(|r| r.pairing.misses.iter().filter(|m| m.0 == e).count()).sum();
                let false_detections = group
                    .iter()
                    .map(|r| r.pairing.false_detections.iter().filter(|m| m.0 == e).count())
                    .sum();
                let s = fd_stats(&diffs, std)?;
                rows.push(ReportRow {
                    dataset: ds.to_string(),
                    view: view.clone(),
                    event: e,
                    n_pairs: diffs.len(),
                    misses,
                    false_detections,
                    fd_mean: s.map(|s| s.fd_mean),
                    fd_std: s.and_then(|s| s.fd_std),
                    afd: s.map(|s| s.afd),
                    afd_ms: s.map(|s| s.afd_ms),
                });
            }
        }
    }
    let mut histograms = BTreeMap::new();
    for e in EventType::ALL {
        let errs: Vec<i64> = records
            .iter()
            .flat_map(|r| r.pairing.pairs.iter().filter(move |p| p.event == e).map(EventPair::diff))
            .collect();
        if !errs.is_empty() {
            histograms.insert(e, error_histogram(&errs));
        }
    }
    Ok(EvaluationReport {
        fd_convention: FD_CONVENTION.to_string(),
        std,
        rows,
        histograms,
    })
}

/// Proportion of errors in each unit-width, integer-centred bin.
pub fn error_histogram(errors: &[i64]) -> BTreeMap<i64, f64> {
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for &e in errors {
        *counts.entry(e).or_default() += 1;
    }
    let n = errors.len() as f64;
    counts.into_iter().map(|(k, c)| (k, c as f64 / n)).collect()
}

/// An annotation of one recording by one observer.
#[derive(Clone, Debug)]
pub struct ObserverRecord {
    pub id: String,
    pub view: Option<View>,
    pub fps: f64,
    pub n_frames: usize,
    pub annotation: EventAnnotation,
}

/// Compares two observers over their common recordings, with `a1` in the
/// prediction role. Recordings present in only one set are ignored; no
/// overlap at all is an error.
pub fn compare_annotations(a1: &[ObserverRecord], a2: &[ObserverRecord], cfg: &EvalConfig) -> Result<EvaluationReport> {
    let by_id: BTreeMap<&str, &ObserverRecord> = a2.iter().map(|r| (r.id.as_str(), r)).collect();
    let records: Vec<RecordingEval> = a1
        .iter()
        .filter_map(|r| {
            by_id.get(r.id.as_str()).map(|other| {
                evaluate_recording(&r.id, "interobserver", r.view, r.fps, r.n_frames, &r.annotation, &other.annotation, cfg)
            })
        })
        .collect();
    if records.is_empty() {
        return Err(Error::InvalidArgument("the two annotation sets share no recordings".into()));
    }
    aggregate_report(&records, cfg.std)
}
