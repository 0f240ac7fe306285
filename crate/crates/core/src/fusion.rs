// SPDX-License-Identifier: MIT OR Apache-2.0

//! Fusing thresholded pseudo-labels with changepoint labels.
//!
//! The central strategy combines two transforms: *refinement* pulls each
//! pseudo-label boundary halfway towards a nearby changepoint, and
//! *insertion* copies changepoint labels into stretches of the track that
//! have no pseudo-label boundary within the bandwidth.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_same_len, Error, Result};
use crate::track::{extract_runs, segments_of, BoundaryRun, FrameLabelTrack, ProbTrack};

pub const DEFAULT_GAMMA: usize = 4;
pub const DEFAULT_DELTA: usize = 4;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionStrategy {
    /// Refinement followed by insertion (or the reverse, see [`FusionOrder`]).
    Cmpl,
    InsertionOnly,
    RefinementOnly,
    /// Framewise union of both tracks.
    Merge,
    /// Changepoints inserted only inside unusually long pseudo-label segments.
    Local,
}

impl FusionStrategy {
    pub const ALL: [FusionStrategy; 5] = [
        FusionStrategy::Cmpl,
        FusionStrategy::InsertionOnly,
        FusionStrategy::RefinementOnly,
        FusionStrategy::Merge,
        FusionStrategy::Local,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FusionStrategy::Cmpl => "cmpl",
            FusionStrategy::InsertionOnly => "insertion_only",
            FusionStrategy::RefinementOnly => "refinement_only",
            FusionStrategy::Merge => "merge",
            FusionStrategy::Local => "local",
        }
    }
}

impl fmt::Display for FusionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FusionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|st| st.as_str() == norm)
            .ok_or_else(|| Error::invalid(format!("unknown fusion strategy {s:?}")))
    }
}

/// Order of the two transforms inside [`cmpl`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionOrder {
    #[default]
    RefineThenInsert,
    InsertThenRefine,
}

impl FromStr for FusionOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "refine_then_insert" | "refine_first" => Ok(FusionOrder::RefineThenInsert),
            "insert_then_refine" | "insert_first" => Ok(FusionOrder::InsertThenRefine),
            _ => Err(Error::invalid(format!("unknown fusion order {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    /// Insertion bandwidth in frames.
    pub gamma: usize,
    /// Refinement matching window in frames.
    pub delta: usize,
    /// Pseudo-label probability cutoff.
    pub threshold: f64,
    pub strategy: FusionStrategy,
    pub order: FusionOrder,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            gamma: DEFAULT_GAMMA,
            delta: DEFAULT_DELTA,
            threshold: DEFAULT_THRESHOLD,
            strategy: FusionStrategy::Cmpl,
            order: FusionOrder::RefineThenInsert,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gamma == 0 {
            return Err(Error::invalid("gamma must be >= 1"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::invalid(format!(
                "threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// Label 1 wherever the probability strictly exceeds `threshold`.
pub fn threshold_probs(probs: &ProbTrack, threshold: f64) -> FrameLabelTrack {
    FrameLabelTrack::new(probs.probs().iter().map(|&p| p > threshold).collect())
}

/// Copies `cp[i]` into every frame whose pseudo-label window
/// `i-gamma+1 ..= i+gamma-1` (clipped to the track) holds no boundary;
/// every other frame keeps its pseudo-label.
pub fn insertion(pl: &FrameLabelTrack, cp: &FrameLabelTrack, gamma: usize) -> Result<FrameLabelTrack> {
    ensure_same_len(pl.len(), cp.len())?;
    if gamma == 0 {
        return Err(Error::invalid("gamma must be >= 1"));
    }
    let n = pl.len();
    let reach = gamma - 1;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0usize);
    for &b in pl.labels() {
        prefix.push(prefix.last().unwrap() + usize::from(b));
    }
    let labels = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(reach);
            let hi = (i + reach).min(n - 1);
            if prefix[hi + 1] == prefix[lo] {
                cp.get(i)
            } else {
                pl.get(i)
            }
        })
        .collect();
    Ok(FrameLabelTrack::new(labels))
}

/// Half of `diff`, with odd values rounded away from zero (towards the
/// changepoint side).
fn half_towards(diff: isize) -> isize {
    (diff + diff.signum() * (diff & 1)) / 2
}

/// One-to-one matching of pseudo-label runs to changepoint runs whose
/// centres lie within `delta` frames. Pairs are taken greedily by
/// ascending centre distance; ties go to the earlier pseudo-label run, then
/// the earlier changepoint run.
fn match_runs(pl_runs: &[BoundaryRun], cp_runs: &[BoundaryRun], delta: usize) -> Vec<Option<usize>> {
    let cp_centers: Vec<usize> = cp_runs.iter().map(BoundaryRun::center).collect();
    let mut pairs = Vec::new();
    for (i, run) in pl_runs.iter().enumerate() {
        let c = run.center();
        let first = cp_centers.partition_point(|&x| x + delta < c);
        for (j, &cc) in cp_centers.iter().enumerate().skip(first) {
            if cc > c + delta {
                break;
            }
            pairs.push((c.abs_diff(cc), i, j));
        }
    }
    pairs.sort_unstable();

    let mut pl_match = vec![None; pl_runs.len()];
    let mut cp_used = vec![false; cp_runs.len()];
    for (_, i, j) in pairs {
        if pl_match[i].is_none() && !cp_used[j] {
            pl_match[i] = Some(j);
            cp_used[j] = true;
        }
    }
    pl_match
}

/// Moves each pseudo-label run that has a changepoint run within `delta`
/// frames so its centre sits halfway between the two centres.
///
/// Run count and lengths are preserved. Shifts are clamped so runs stay
/// inside the track and keep at least one background frame between them.
pub fn refinement(pl: &FrameLabelTrack, cp: &FrameLabelTrack, delta: usize) -> Result<FrameLabelTrack> {
    ensure_same_len(pl.len(), cp.len())?;
    let n = pl.len();
    let pl_runs = extract_runs(pl);
    let cp_runs = extract_runs(cp);
    let matches = match_runs(&pl_runs, &cp_runs, delta);

    let mut moved: Vec<BoundaryRun> = Vec::with_capacity(pl_runs.len());
    for (i, run) in pl_runs.iter().enumerate() {
        let wanted = matches[i].map_or(0, |j| {
            half_towards(cp_runs[j].center() as isize - run.center() as isize)
        });
        let min_start = moved.last().map_or(0, |prev| prev.end + 2);
        let max_end = pl_runs.get(i + 1).map_or(n - 1, |next| next.start - 2);
        let lo = min_start as isize - run.start as isize;
        let hi = max_end as isize - run.end as isize;
        moved.push(run.shifted(wanted.clamp(lo, hi)));
    }

    let mut labels = vec![false; n];
    for run in moved {
        labels[run.start..=run.end].fill(true);
    }
    Ok(FrameLabelTrack::new(labels))
}

/// Changepoint-modulated pseudo-labels: refinement and insertion composed
/// in the order given by `config.order`.
pub fn cmpl(pl: &FrameLabelTrack, cp: &FrameLabelTrack, config: &FusionConfig) -> Result<FrameLabelTrack> {
    config.validate()?;
    match config.order {
        FusionOrder::RefineThenInsert => {
            let refined = refinement(pl, cp, config.delta)?;
            insertion(&refined, cp, config.gamma)
        }
        FusionOrder::InsertThenRefine => {
            let inserted = insertion(pl, cp, config.gamma)?;
            refinement(&inserted, cp, config.delta)
        }
    }
}

/// Framewise OR.
pub fn merge_union(pl: &FrameLabelTrack, cp: &FrameLabelTrack) -> Result<FrameLabelTrack> {
    ensure_same_len(pl.len(), cp.len())?;
    Ok(FrameLabelTrack::new(
        pl.labels().iter().zip(cp.labels()).map(|(&a, &b)| a || b).collect(),
    ))
}

/// Keeps every pseudo-label boundary and adds changepoint frames only
/// inside pseudo-label segments strictly longer than the mean segment.
pub fn local_fusion(pl: &FrameLabelTrack, cp: &FrameLabelTrack) -> Result<FrameLabelTrack> {
    ensure_same_len(pl.len(), cp.len())?;
    let segments = segments_of(pl);
    let mut labels = pl.labels().to_vec();
    if segments.is_empty() {
        return Ok(FrameLabelTrack::new(labels));
    }
    let total: usize = segments.iter().map(|s| s.len()).sum();
    let mean = total as f64 / segments.len() as f64;
    for seg in segments.iter().filter(|s| s.len() as f64 > mean) {
        for (out, &c) in labels[seg.start..=seg.end]
            .iter_mut()
            .zip(&cp.labels()[seg.start..=seg.end])
        {
            *out |= c;
        }
    }
    Ok(FrameLabelTrack::new(labels))
}

/// Applies `config.strategy`.
pub fn fuse(pl: &FrameLabelTrack, cp: &FrameLabelTrack, config: &FusionConfig) -> Result<FrameLabelTrack> {
    config.validate()?;
    match config.strategy {
        FusionStrategy::Cmpl => cmpl(pl, cp, config),
        FusionStrategy::InsertionOnly => insertion(pl, cp, config.gamma),
        FusionStrategy::RefinementOnly => refinement(pl, cp, config.delta),
        FusionStrategy::Merge => merge_union(pl, cp),
        FusionStrategy::Local => local_fusion(pl, cp),
    }
}
