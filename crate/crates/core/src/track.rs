// SPDX-License-Identifier: MIT OR Apache-2.0

//! Frame-level domain types: feature sequences, binary boundary tracks,
//! boundary runs and the sign segments lying between them.
//!
//! Frames are 0-indexed everywhere. A *boundary run* is a maximal block of
//! consecutive 1-labels; a *segment* is a maximal block of 0-labels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_FPS: f32 = 25.0;

/// A `frames x dims` feature sequence stored row-major (frame-major).
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    frames: usize,
    dims: usize,
    values: Vec<f32>,
    fps: f32,
}

impl FeatureMatrix {
    pub fn new(frames: usize, dims: usize, values: Vec<f32>, fps: f32) -> Result<Self> {
        if frames == 0 || dims == 0 {
            return Err(Error::invalid(format!(
                "feature matrix needs at least one frame and one dimension, got {frames}x{dims}"
            )));
        }
        let expected = frames
            .checked_mul(dims)
            .ok_or_else(|| Error::invalid("feature matrix size overflows"))?;
        if values.len() != expected {
            return Err(Error::invalid(format!(
                "feature matrix {frames}x{dims} needs {expected} values, got {}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite feature value at frame {}, dim {}",
                pos / dims,
                pos % dims
            )));
        }
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::invalid(format!("fps must be positive, got {fps}")));
        }
        Ok(Self {
            frames,
            dims,
            values,
            fps,
        })
    }

    /// Builds a matrix from per-frame rows at the default frame rate.
    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let dims = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * dims);
        for (t, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dims {
                return Err(Error::invalid(format!(
                    "row {t} has {} values, expected {dims}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::new(rows.len(), dims, values, DEFAULT_FPS)
    }

    /// A single-dimension sequence.
    pub fn from_series(series: &[f32]) -> Result<Self> {
        Self::new(series.len(), 1, series.to_vec(), DEFAULT_FPS)
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn fps(&self) -> f32 {
        self.fps
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn row(&self, t: usize) -> &[f32] {
        &self.values[t * self.dims..(t + 1) * self.dims]
    }

    pub fn with_fps(mut self, fps: f32) -> Result<Self> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::invalid(format!("fps must be positive, got {fps}")));
        }
        self.fps = fps;
        Ok(self)
    }

    /// Per-dimension z-scoring. Dimensions with zero spread are only centred.
    pub fn standardized(&self) -> Self {
        let n = self.frames as f64;
        let mut out = self.values.clone();
        for d in 0..self.dims {
            let col = (0..self.frames).map(|t| f64::from(self.values[t * self.dims + d]));
            let mean = col.clone().sum::<f64>() / n;
            let var = col.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            let scale = if sd > 0.0 { sd } else { 1.0 };
            for t in 0..self.frames {
                let v = &mut out[t * self.dims + d];
                *v = ((f64::from(*v) - mean) / scale) as f32;
            }
        }
        Self { values: out, ..*self }
    }
}

/// Binary per-frame boundary labels.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct FrameLabelTrack {
    labels: Vec<bool>,
}

impl FrameLabelTrack {
    pub fn new(labels: Vec<bool>) -> Self {
        Self { labels }
    }

    pub fn zeros(frames: usize) -> Self {
        Self {
            labels: vec![false; frames],
        }
    }

    /// Builds a track from 0/1 integers; anything else is rejected.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        bits.iter()
            .enumerate()
            .map(|(i, &b)| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::invalid(format!("label {other} at frame {i} is not 0 or 1"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn get(&self, i: usize) -> bool {
        self.labels[i]
    }

    pub fn count_ones(&self) -> usize {
        self.labels.iter().filter(|&&b| b).count()
    }

    pub fn into_inner(self) -> Vec<bool> {
        self.labels
    }
}

impl FromStr for FrameLabelTrack {
    type Err = Error;

    /// Parses a compact string such as `"011001"`.
    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .enumerate()
            .map(|(i, c)| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::invalid(format!("label {other:?} at frame {i} is not 0 or 1"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }
}

impl fmt::Display for FrameLabelTrack {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.labels {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Per-frame boundary posterior probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbTrack {
    probs: Vec<f64>,
}

impl ProbTrack {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if let Some(i) = probs.iter().position(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid(format!(
                "probability {} at frame {i} is outside [0, 1]",
                probs[i]
            )));
        }
        Ok(Self { probs })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// A maximal run of boundary frames, both ends inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BoundaryRun {
    pub start: usize,
    pub end: usize,
}

impl BoundaryRun {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Central frame; even-length runs resolve to the earlier of the two.
    pub fn center(&self) -> usize {
        run_center(*self)
    }

    /// The same run moved by `offset` frames. The caller keeps it in range.
    pub(crate) fn shifted(&self, offset: isize) -> Self {
        Self {
            start: self.start.checked_add_signed(offset).expect("shift below frame 0"),
            end: self.end.checked_add_signed(offset).expect("shift below frame 0"),
        }
    }
}

/// A maximal run of background (0-labelled) frames, both ends inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SegmentSpan {
    pub start: usize,
    pub end: usize,
}

impl SegmentSpan {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of frames shared with `other`.
    pub fn intersection(&self, other: &SegmentSpan) -> usize {
        let lo = self.start.max(other.start);
        let hi = self.end.min(other.end);
        if lo > hi {
            0
        } else {
            hi - lo + 1
        }
    }

    pub fn union(&self, other: &SegmentSpan) -> usize {
        self.len() + other.len() - self.intersection(other)
    }
}

fn runs_of(labels: &[bool], value: bool) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &b) in labels.iter().enumerate() {
        match (b == value, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, labels.len() - 1));
    }
    out
}

/// Maximal contiguous runs of 1-labels, in order.
pub fn extract_runs(track: &FrameLabelTrack) -> Vec<BoundaryRun> {
    runs_of(&track.labels, true)
        .into_iter()
        .map(|(s, e)| BoundaryRun::new(s, e))
        .collect()
}

/// Maximal contiguous runs of 0-labels, in order.
pub fn segments_of(track: &FrameLabelTrack) -> Vec<SegmentSpan> {
    runs_of(&track.labels, false)
        .into_iter()
        .map(|(s, e)| SegmentSpan::new(s, e))
        .collect()
}

/// Paints `runs` onto an all-zero track of `frames` frames.
///
/// Runs must be sorted, in range, and separated by at least one background
/// frame so that `extract_runs` gives them back unchanged.
pub fn runs_to_track(runs: &[BoundaryRun], frames: usize) -> Result<FrameLabelTrack> {
    let mut labels = vec![false; frames];
    let mut prev_end: Option<usize> = None;
    for run in runs {
        if run.start > run.end || run.end >= frames {
            return Err(Error::RunOutOfRange {
                start: run.start,
                end: run.end,
                frames,
            });
        }
        if let Some(pe) = prev_end {
            if run.start <= pe + 1 {
                return Err(Error::invalid(format!(
                    "run [{}, {}] overlaps or touches the previous run ending at {pe}",
                    run.start, run.end
                )));
            }
        }
        labels[run.start..=run.end].fill(true);
        prev_end = Some(run.end);
    }
    Ok(FrameLabelTrack::new(labels))
}

/// `floor((start + end) / 2)`.
pub fn run_center(run: BoundaryRun) -> usize {
    (run.start + run.end) / 2
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(s: &str) -> FrameLabelTrack {
        s.parse().unwrap()
    }

    fn r(start: usize, end: usize) -> BoundaryRun {
        BoundaryRun::new(start, end)
    }

    #[test]
    fn extract_runs_examples() {
        assert!(extract_runs(&t("000000")).is_empty());
        assert_eq!(extract_runs(&t("011001")), vec![r(1, 2), r(5, 5)]);
        assert_eq!(extract_runs(&t("111")), vec![r(0, 2)]);
    }

    #[test]
    fn runs_to_track_examples() {
        assert_eq!(runs_to_track(&[], 4).unwrap(), t("0000"));
        assert_eq!(runs_to_track(&[r(1, 2)], 4).unwrap(), t("0110"));
        assert_eq!(runs_to_track(&[r(0, 0), r(3, 3)], 4).unwrap(), t("1001"));
    }

    #[test]
    fn runs_to_track_rejects_bad_runs() {
        assert!(matches!(runs_to_track(&[r(2, 4)], 4), Err(Error::RunOutOfRange { .. })));
        assert!(runs_to_track(&[r(0, 1), r(2, 3)], 4).is_err());
        assert!(runs_to_track(&[r(2, 3), r(0, 0)], 4).is_err());
    }

    #[test]
    fn run_center_examples() {
        assert_eq!(run_center(r(1, 2)), 1);
        assert_eq!(run_center(r(5, 5)), 5);
        assert_eq!(run_center(r(9, 11)), 10);
    }

    #[test]
    fn segments_of_examples() {
        assert_eq!(
            segments_of(&t("0110")),
            vec![SegmentSpan::new(0, 0), SegmentSpan::new(3, 3)]
        );
        assert_eq!(segments_of(&t("0000")), vec![SegmentSpan::new(0, 3)]);
        assert!(segments_of(&t("1111")).is_empty());
    }

    #[test]
    fn feature_matrix_validation() {
        assert!(FeatureMatrix::new(0, 1, vec![], 25.0).is_err());
        assert!(FeatureMatrix::new(2, 2, vec![0.0; 3], 25.0).is_err());
        assert!(FeatureMatrix::new(1, 1, vec![f32::NAN], 25.0).is_err());
        assert!(FeatureMatrix::new(1, 1, vec![0.0], 0.0).is_err());
        let m = FeatureMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(m.row(1), &[3.0, 4.0]);
        assert_eq!(m.fps(), DEFAULT_FPS);
    }

    #[test]
    fn prob_track_rejects_out_of_range() {
        assert!(ProbTrack::new(vec![0.0, 1.0, 0.5]).is_ok());
        assert!(ProbTrack::new(vec![1.5]).is_err());
        assert!(ProbTrack::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn standardized_has_zero_mean_unit_spread() {
        let m = FeatureMatrix::from_rows(&[[1.0, 5.0], [3.0, 5.0], [5.0, 5.0]]).unwrap();
        let z = m.standardized();
        let col0: Vec<f32> = (0..3).map(|t| z.row(t)[0]).collect();
        let col1: Vec<f32> = (0..3).map(|t| z.row(t)[1]).collect();
        assert!((col0.iter().sum::<f32>()).abs() < 1e-6);
        assert!((col0[2] - 1.224_745).abs() < 1e-5);
        assert_eq!(col1, vec![0.0; 3]);
    }

    proptest! {
        #[test]
        fn round_trip_and_partition(bits in prop::collection::vec(any::<bool>(), 0..64)) {
            let track = FrameLabelTrack::new(bits.clone());
            let runs = extract_runs(&track);
            prop_assert_eq!(runs_to_track(&runs, bits.len()).unwrap(), track.clone());

            let mut covered = vec![0u8; bits.len()];
            for run in &runs {
                prop_assert!(run.start <= run.center() && run.center() <= run.end);
                for c in &mut covered[run.start..=run.end] { *c += 1; }
            }
            for seg in segments_of(&track) {
                for c in &mut covered[seg.start..=seg.end] { *c += 1; }
            }
            prop_assert!(covered.iter().all(|&c| c == 1));
        }
    }
}
