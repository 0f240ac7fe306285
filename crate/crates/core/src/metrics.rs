// SPDX-License-Identifier: MIT OR Apache-2.0

//! Boundary F1 (position) and segment F1 (extent) for binary boundary tracks.
//!
//! Boundaries are compared by run centre: a predicted run matches a ground
//! truth run when their centres are strictly closer than the threshold.
//! Segments (maximal 0-runs) match when their IoU strictly exceeds the
//! threshold. Matching is one-to-one and of maximum cardinality.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_same_len, Error, Result};
use crate::track::{extract_runs, segments_of, FrameLabelTrack, SegmentSpan};

/// Frame-distance thresholds averaged into mF1B.
pub const BOUNDARY_THRESHOLDS: [usize; 4] = [1, 2, 3, 4];

/// IoU thresholds averaged into mF1S, in hundredths (0.40 ..= 0.75).
pub const IOU_THRESHOLDS_PERCENT: [u32; 8] = [40, 45, 50, 55, 60, 65, 70, 75];

/// True positives, false positives and false negatives of one comparison.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl MatchCounts {
    fn from_matching(matched: usize, n_pred: usize, n_gt: usize) -> Self {
        Self {
            tp: matched,
            fp: n_pred - matched,
            fn_: n_gt - matched,
        }
    }

    /// F1 in percent; 100 when there is nothing to find and nothing found.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            100.0
        } else {
            200.0 * self.tp as f64 / denom as f64
        }
    }
}

impl std::ops::AddAssign for MatchCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.tp += rhs.tp;
        self.fp += rhs.fp;
        self.fn_ += rhs.fn_;
    }
}

/// Maximum-cardinality bipartite matching.
///
/// `edges` lists admissible (gt, pred) pairs in preference order. They are
/// first taken greedily in that order, then augmenting paths extend the
/// matching until no further pair can be added.
fn max_matching(n_gt: usize, n_pred: usize, edges: &[(usize, usize)]) -> usize {
    let mut adj = vec![Vec::new(); n_gt];
    for &(g, p) in edges {
        adj[g].push(p);
    }
    let mut gt_of_pred: Vec<Option<usize>> = vec![None; n_pred];
    let mut pred_of_gt: Vec<Option<usize>> = vec![None; n_gt];
    let mut size = 0;
    for &(g, p) in edges {
        if pred_of_gt[g].is_none() && gt_of_pred[p].is_none() {
            pred_of_gt[g] = Some(p);
            gt_of_pred[p] = Some(g);
            size += 1;
        }
    }

    fn augment(
        g: usize,
        adj: &[Vec<usize>],
        seen: &mut [bool],
        gt_of_pred: &mut [Option<usize>],
        pred_of_gt: &mut [Option<usize>],
    ) -> bool {
        for &p in &adj[g] {
            if seen[p] {
                continue;
            }
            seen[p] = true;
            let free = match gt_of_pred[p] {
                None => true,
                Some(other) => augment(other, adj, seen, gt_of_pred, pred_of_gt),
            };
            if free {
                gt_of_pred[p] = Some(g);
                pred_of_gt[g] = Some(p);
                return true;
            }
        }
        false
    }

    for g in 0..n_gt {
        if pred_of_gt[g].is_some() || adj[g].is_empty() {
            continue;
        }
        let mut seen = vec![false; n_pred];
        if augment(g, &adj, &mut seen, &mut gt_of_pred, &mut pred_of_gt) {
            size += 1;
        }
    }
    size
}

fn centers(track: &FrameLabelTrack) -> Vec<usize> {
    extract_runs(track).iter().map(|r| r.center()).collect()
}

/// Boundary matching counts for sorted run centres.
pub fn boundary_counts(pred: &[usize], gt: &[usize], threshold: usize) -> MatchCounts {
    let mut edges = Vec::new();
    for (g, &gc) in gt.iter().enumerate() {
        let first = pred.partition_point(|&p| p + threshold <= gc);
        for (p, &pc) in pred.iter().enumerate().skip(first) {
            let d = pc.abs_diff(gc);
            if pc > gc && d >= threshold {
                break;
            }
            if d < threshold {
                edges.push((d, g, p));
            }
        }
    }
    edges.sort_unstable();
    let pairs: Vec<(usize, usize)> = edges.into_iter().map(|(_, g, p)| (g, p)).collect();
    MatchCounts::from_matching(max_matching(gt.len(), pred.len(), &pairs), pred.len(), gt.len())
}

/// An IoU threshold held as an exact fraction `num / 10_000`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IouThreshold(u32);

impl IouThreshold {
    const SCALE: u64 = 10_000;

    pub fn from_percent(percent: u32) -> Self {
        Self(percent * 100)
    }

    /// Rounds to four decimals; must lie strictly inside (0, 1).
    pub fn new(value: f64) -> Result<Self> {
        if !(value > 0.0 && value < 1.0) {
            return Err(Error::invalid(format!("IoU threshold must lie in (0, 1), got {value}")));
        }
        Ok(Self((value * Self::SCALE as f64).round() as u32))
    }

    fn exceeded_by(&self, inter: usize, union: usize) -> bool {
        inter as u64 * Self::SCALE > u64::from(self.0) * union as u64
    }

    pub fn label(&self) -> String {
        format!("{:.2}", f64::from(self.0) / Self::SCALE as f64)
    }
}

/// Segment matching counts for sorted, disjoint segment lists.
pub fn segment_counts(pred: &[SegmentSpan], gt: &[SegmentSpan], threshold: IouThreshold) -> MatchCounts {
    // (inter, union, g, p) for overlapping pairs above threshold
    let mut edges = Vec::new();
    let mut first = 0;
    for (g, gs) in gt.iter().enumerate() {
        while first < pred.len() && pred[first].end < gs.start {
            first += 1;
        }
        for (p, ps) in pred.iter().enumerate().skip(first) {
            if ps.start > gs.end {
                break;
            }
            let inter = gs.intersection(ps);
            let union = gs.union(ps);
            if threshold.exceeded_by(inter, union) {
                edges.push((inter, union, g, p));
            }
        }
    }
    // descending IoU, then earlier gt, then earlier pred
    edges.sort_by(|a, b| (b.0 * a.1).cmp(&(a.0 * b.1)).then(a.2.cmp(&b.2)).then(a.3.cmp(&b.3)));
    let pairs: Vec<(usize, usize)> = edges.into_iter().map(|(_, _, g, p)| (g, p)).collect();
    MatchCounts::from_matching(max_matching(gt.len(), pred.len(), &pairs), pred.len(), gt.len())
}

/// Boundary F1 (percent) at a frame-distance threshold.
pub fn f1_boundary(pred: &FrameLabelTrack, gt: &FrameLabelTrack, threshold: usize) -> Result<f64> {
    ensure_same_len(gt.len(), pred.len())?;
    if threshold == 0 {
        return Err(Error::invalid("boundary threshold must be >= 1"));
    }
    Ok(boundary_counts(&centers(pred), &centers(gt), threshold).f1())
}

/// Mean boundary F1 over thresholds 1..=4 frames.
pub fn mf1b(pred: &FrameLabelTrack, gt: &FrameLabelTrack) -> Result<f64> {
    ensure_same_len(gt.len(), pred.len())?;
    let (p, g) = (centers(pred), centers(gt));
    let total: f64 = BOUNDARY_THRESHOLDS
        .iter()
        .map(|&th| boundary_counts(&p, &g, th).f1())
        .sum();
    Ok(total / BOUNDARY_THRESHOLDS.len() as f64)
}

/// Segment F1 (percent) at an IoU threshold.
pub fn f1_segment(pred: &FrameLabelTrack, gt: &FrameLabelTrack, iou_threshold: f64) -> Result<f64> {
    ensure_same_len(gt.len(), pred.len())?;
    let th = IouThreshold::new(iou_threshold)?;
    Ok(segment_counts(&segments_of(pred), &segments_of(gt), th).f1())
}

/// Mean segment F1 over IoU thresholds 0.40, 0.45, ..., 0.75.
pub fn mf1s(pred: &FrameLabelTrack, gt: &FrameLabelTrack) -> Result<f64> {
    ensure_same_len(gt.len(), pred.len())?;
    let (p, g) = (segments_of(pred), segments_of(gt));
    let total: f64 = IOU_THRESHOLDS_PERCENT
        .iter()
        .map(|&pc| segment_counts(&p, &g, IouThreshold::from_percent(pc)).f1())
        .sum();
    Ok(total / IOU_THRESHOLDS_PERCENT.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mf1b: f64,
    pub mf1s: f64,
    /// Frame threshold -> boundary F1.
    pub per_threshold_f1b: BTreeMap<usize, f64>,
    /// IoU threshold ("0.40") -> segment F1.
    pub per_threshold_f1s: BTreeMap<String, f64>,
    pub pred_boundary_count: usize,
    pub gt_boundary_count: usize,
    pub seeds_aggregated: usize,
}

/// Running totals for evaluating a set of sequences as one corpus.
#[derive(Clone, Debug, Default)]
pub struct Evaluator {
    boundary: [MatchCounts; BOUNDARY_THRESHOLDS.len()],
    segment: [MatchCounts; IOU_THRESHOLDS_PERCENT.len()],
    pred_boundaries: usize,
    gt_boundaries: usize,
}

impl Evaluator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, pred: &FrameLabelTrack, gt: &FrameLabelTrack) -> Result<()> {
        ensure_same_len(gt.len(), pred.len())?;
        let (pc, gc) = (centers(pred), centers(gt));
        for (acc, &th) in self.boundary.iter_mut().zip(&BOUNDARY_THRESHOLDS) {
            *acc += boundary_counts(&pc, &gc, th);
        }
        let (ps, gs) = (segments_of(pred), segments_of(gt));
        for (acc, &pct) in self.segment.iter_mut().zip(&IOU_THRESHOLDS_PERCENT) {
            *acc += segment_counts(&ps, &gs, IouThreshold::from_percent(pct));
        }
        self.pred_boundaries += pc.len();
        self.gt_boundaries += gc.len();
        Ok(())
    }

    pub fn report(&self) -> EvalReport {
        let per_threshold_f1b: BTreeMap<usize, f64> = BOUNDARY_THRESHOLDS
            .iter()
            .zip(&self.boundary)
            .map(|(&th, c)| (th, c.f1()))
            .collect();
        let per_threshold_f1s: BTreeMap<String, f64> = IOU_THRESHOLDS_PERCENT
            .iter()
            .zip(&self.segment)
            .map(|(&pct, c)| (IouThreshold::from_percent(pct).label(), c.f1()))
            .collect();
        EvalReport {
            mf1b: mean(per_threshold_f1b.values().copied()),
            mf1s: mean(per_threshold_f1s.values().copied()),
            per_threshold_f1b,
            per_threshold_f1s,
            pred_boundary_count: self.pred_boundaries,
            gt_boundary_count: self.gt_boundaries,
            seeds_aggregated: 1,
        }
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Full report for one prediction/ground-truth pair.
pub fn evaluate(pred: &FrameLabelTrack, gt: &FrameLabelTrack) -> Result<EvalReport> {
    let mut ev = Evaluator::new();
    ev.add(pred, gt)?;
    Ok(ev.report())
}

/// Pools match counts over all pairs before computing F1.
pub fn evaluate_many<'a>(
    pairs: impl IntoIterator<Item = (&'a FrameLabelTrack, &'a FrameLabelTrack)>,
) -> Result<EvalReport> {
    let mut ev = Evaluator::new();
    for (pred, gt) in pairs {
        ev.add(pred, gt)?;
    }
    Ok(ev.report())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

/// Mean and spread of several reports, e.g. one per seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub mf1b: MeanStd,
    pub mf1s: MeanStd,
    pub per_threshold_f1b: BTreeMap<usize, MeanStd>,
    pub per_threshold_f1s: BTreeMap<String, MeanStd>,
    pub pred_boundary_count: usize,
    pub gt_boundary_count: usize,
    pub seeds_aggregated: usize,
}

impl AggregateReport {
    /// The per-seed means as a single report.
    pub fn mean_report(&self) -> EvalReport {
        EvalReport {
            mf1b: self.mf1b.mean,
            mf1s: self.mf1s.mean,
            per_threshold_f1b: self.per_threshold_f1b.iter().map(|(&k, v)| (k, v.mean)).collect(),
            per_threshold_f1s: self
                .per_threshold_f1s
                .iter()
                .map(|(k, v)| (k.clone(), v.mean))
                .collect(),
            pred_boundary_count: self.pred_boundary_count,
            gt_boundary_count: self.gt_boundary_count,
            seeds_aggregated: self.seeds_aggregated,
        }
    }
}

pub fn aggregate(reports: &[EvalReport]) -> Result<AggregateReport> {
    let first = reports
        .first()
        .ok_or_else(|| Error::invalid("cannot aggregate an empty list of reports"))?;
    let collect = |f: &dyn Fn(&EvalReport) -> f64| MeanStd::of(&reports.iter().map(f).collect::<Vec<_>>());
    let per_threshold_f1b = first
        .per_threshold_f1b
        .keys()
        .map(|&k| {
            (
                k,
                collect(&|r| r.per_threshold_f1b.get(&k).copied().unwrap_or(f64::NAN)),
            )
        })
        .collect();
    let per_threshold_f1s = first
        .per_threshold_f1s
        .keys()
        .map(|k| {
            (
                k.clone(),
                collect(&|r| r.per_threshold_f1s.get(k).copied().unwrap_or(f64::NAN)),
            )
        })
        .collect();
    Ok(AggregateReport {
        mf1b: collect(&|r| r.mf1b),
        mf1s: collect(&|r| r.mf1s),
        per_threshold_f1b,
        per_threshold_f1s,
        pred_boundary_count: reports.iter().map(|r| r.pred_boundary_count).sum(),
        gt_boundary_count: reports.iter().map(|r| r.gt_boundary_count).sum(),
        seeds_aggregated: reports.iter().map(|r| r.seeds_aggregated).sum(),
    })
}
