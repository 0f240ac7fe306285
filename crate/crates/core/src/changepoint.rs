// SPDX-License-Identifier: MIT OR Apache-2.0

//! Exact offline changepoint detection with an L2 (mean-shift) segment cost.
//!
//! A changepoint `k` separates frame `k - 1` from frame `k`. Segment
//! `[s, t)` costs the squared deviation of its frames from their mean,
//! summed over feature dimensions.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::track::{FeatureMatrix, FrameLabelTrack};

/// Penalty used when changepoints modulate pseudo-labels.
pub const DEFAULT_PENALTY: f64 = 100.0;
/// Penalty used when changepoints alone serve as training labels.
pub const CHANGEPOINT_ONLY_PENALTY: f64 = 80.0;
pub const DEFAULT_MIN_SIZE: usize = 2;
/// Changepoints are widened to this many frames when turned into labels.
pub const DEFAULT_EXPANSION_WIDTH: usize = 3;

/// Prefix sums of x and x^2 per dimension, taken over values shifted by the
/// first frame.
#[derive(Clone, Debug)]
pub struct CostCache {
    frames: usize,
    dims: usize,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl CostCache {
    pub fn new(features: &FeatureMatrix) -> Self {
        let (frames, dims) = (features.frames(), features.dims());
        let origin: Vec<f64> = features.row(0).iter().map(|&v| f64::from(v)).collect();

        // Shifting leaves every segment cost unchanged and keeps the prefix
        // sums small, which limits cancellation in sum_sq - sum^2/n.
        let mut sum = vec![0.0f64; (frames + 1) * dims];
        let mut sum_sq = vec![0.0f64; (frames + 1) * dims];
        for t in 0..frames {
            let row = features.row(t);
            for d in 0..dims {
                let v = f64::from(row[d]) - origin[d];
                sum[(t + 1) * dims + d] = sum[t * dims + d] + v;
                sum_sq[(t + 1) * dims + d] = sum_sq[t * dims + d] + v * v;
            }
        }
        Self {
            frames,
            dims,
            sum,
            sum_sq,
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Cost of segment `[s, t)`.
    pub fn l2_cost(&self, s: usize, t: usize) -> Result<f64> {
        if s >= t || t > self.frames {
            return Err(Error::invalid(format!(
                "segment [{s}, {t}) is empty or exceeds {} frames",
                self.frames
            )));
        }
        Ok(self.cost(s, t))
    }

    #[inline]
    pub(crate) fn cost(&self, s: usize, t: usize) -> f64 {
        let n = (t - s) as f64;
        let (a, b) = (s * self.dims, t * self.dims);
        let mut total = 0.0;
        for d in 0..self.dims {
            let sx = self.sum[b + d] - self.sum[a + d];
            let sxx = self.sum_sq[b + d] - self.sum_sq[a + d];
            total += sxx - sx * sx / n;
        }
        total.max(0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pelt,
    Dynp,
    Oracle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChangepointResult {
    /// Strictly increasing; each index `k` starts a new segment at frame `k`.
    pub changepoints: Vec<usize>,
    /// Total segment cost, plus `penalty * changepoints.len()` for the
    /// penalized solvers.
    pub objective: f64,
    pub method: Method,
}

impl ChangepointResult {
    pub fn len(&self) -> usize {
        self.changepoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.changepoints.is_empty()
    }
}

fn validate_penalized(frames: usize, penalty: f64, min_size: usize) -> Result<()> {
    if !(penalty.is_finite() && penalty >= 0.0) {
        return Err(Error::invalid(format!(
            "penalty must be finite and >= 0, got {penalty}"
        )));
    }
    if min_size == 0 || min_size > frames {
        return Err(Error::invalid(format!(
            "min_size must lie in [1, {frames}], got {min_size}"
        )));
    }
    Ok(())
}

/// Best way found so far to segment the prefix `[0, t)`.
#[derive(Clone, Copy, Debug)]
struct Cell {
    objective: f64,
    count: usize,
    /// Last changepoint before `t`; 0 when the prefix is a single segment.
    prev: usize,
}

/// Changepoints of the prefix ending at `end`, with `end` itself appended
/// when it is a changepoint (non-zero).
fn backtrack(mut end: usize, prev_of: impl Fn(usize, usize) -> usize, mut level: usize) -> Vec<usize> {
    let mut out = Vec::new();
    while end > 0 {
        out.push(end);
        end = prev_of(level, end);
        level = level.saturating_sub(1);
    }
    out.reverse();
    out
}

/// Total order used to pick among candidate predecessors: lower objective,
/// then fewer changepoints, then the lexicographically smaller sequence.
fn compare_candidates(a: (f64, usize, usize), b: (f64, usize, usize), path: impl Fn(usize) -> Vec<usize>) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then_with(|| {
        if a.2 == b.2 {
            Ordering::Equal
        } else {
            path(a.2).cmp(&path(b.2))
        }
    })
}

fn finish(cells: &[Option<Cell>], frames: usize, method: Method) -> ChangepointResult {
    let last = cells[frames].expect("full prefix is always reachable");
    let changepoints = backtrack(last.prev, |_, t| cells[t].expect("reachable").prev, 0);
    ChangepointResult {
        changepoints,
        objective: last.objective,
        method,
    }
}

fn penalized_step(
    cells: &[Option<Cell>],
    cache: &CostCache,
    penalty: f64,
    candidates: impl Iterator<Item = usize>,
    t: usize,
) -> Option<Cell> {
    let mut best: Option<(f64, usize, usize)> = None;
    for s in candidates {
        let Some(cell) = cells[s] else { continue };
        let split = s > 0;
        let cand = (
            cell.objective + cache.cost(s, t) + if split { penalty } else { 0.0 },
            cell.count + usize::from(split),
            s,
        );
        let path = |p: usize| backtrack(p, |_, x| cells[x].expect("reachable").prev, 0);
        best = match best {
            Some(b) if compare_candidates(cand, b, path) != Ordering::Less => Some(b),
            _ => Some(cand),
        };
    }
    best.map(|(objective, count, prev)| Cell { objective, count, prev })
}

/// Penalized segmentation with PELT pruning.
///
/// Returns the global minimiser of total segment cost plus
/// `penalty * #changepoints` subject to every segment spanning at least
/// `min_size` frames.
pub fn pelt(features: &FeatureMatrix, penalty: f64, min_size: usize) -> Result<ChangepointResult> {
    pelt_with_cache(&CostCache::new(features), penalty, min_size)
}

pub fn pelt_with_cache(cache: &CostCache, penalty: f64, min_size: usize) -> Result<ChangepointResult> {
    let n = cache.frames();
    validate_penalized(n, penalty, min_size)?;

    let mut cells: Vec<Option<Cell>> = vec![None; n + 1];
    cells[0] = Some(Cell {
        objective: 0.0,
        count: 0,
        prev: 0,
    });
    // (start, first time at which it may no longer be used)
    let mut active: Vec<(usize, usize)> = Vec::new();

    for t in min_size..=n {
        let newest = t - min_size;
        if cells[newest].is_some() {
            active.push((newest, usize::MAX));
        }
        active.retain(|&(_, dead_from)| dead_from > t);

        let cell = penalized_step(&cells, cache, penalty, active.iter().map(|&(s, _)| s), t);
        cells[t] = cell;
        let Some(cell) = cell else { continue };

        // Start s is dominated by t for every end t' >= t + min_size once
        // G(s) + C(s, t) > G(t), because C(s, t') >= C(s, t) + C(t, t').
        // Ends closer than min_size cannot use t, so removal is deferred.
        let g_t = cell.objective + penalty;
        let slack = 1e-10 * g_t.abs().max(1.0);
        for (s, dead_from) in active.iter_mut() {
            let cs = cells[*s].expect("active starts are reachable");
            let g_s = cs.objective + if *s > 0 { penalty } else { 0.0 };
            if g_s + cache.cost(*s, t) > g_t + slack {
                *dead_from = (*dead_from).min(t + min_size);
            }
        }
    }
    Ok(finish(&cells, n, Method::Pelt))
}

/// Unpruned O(T^2) dynamic program with the same objective as [`pelt`].
pub fn brute_force_dp(features: &FeatureMatrix, penalty: f64, min_size: usize) -> Result<ChangepointResult> {
    let cache = CostCache::new(features);
    let n = cache.frames();
    validate_penalized(n, penalty, min_size)?;

    let mut cells: Vec<Option<Cell>> = vec![None; n + 1];
    cells[0] = Some(Cell {
        objective: 0.0,
        count: 0,
        prev: 0,
    });
    for t in min_size..=n {
        cells[t] = penalized_step(&cells, &cache, penalty, 0..=t - min_size, t);
    }
    Ok(finish(&cells, n, Method::Oracle))
}

/// Exactly `k` changepoints minimising the total segment cost.
pub fn dynp(features: &FeatureMatrix, k: usize, min_size: usize) -> Result<ChangepointResult> {
    dynp_with_cache(&CostCache::new(features), k, min_size)
}

pub fn dynp_with_cache(cache: &CostCache, k: usize, min_size: usize) -> Result<ChangepointResult> {
    let n = cache.frames();
    if min_size == 0 {
        return Err(Error::invalid("min_size must be >= 1"));
    }
    let needed = (k + 1).checked_mul(min_size).unwrap_or(usize::MAX);
    if needed > n {
        return Err(Error::Infeasible(format!(
            "{k} changepoints with min_size {min_size} need {needed} frames, have {n}"
        )));
    }

    // best[j][t]: j changepoints in [0, t); prev[j][t] is the last of them.
    let mut best = vec![vec![f64::INFINITY; n + 1]; k + 1];
    let mut prev = vec![vec![0usize; n + 1]; k + 1];
    for t in min_size..=n {
        best[0][t] = cache.cost(0, t);
    }
    for j in 1..=k {
        let (done, rest) = best.split_at_mut(j);
        let (below, here) = (&done[j - 1], &mut rest[0]);
        let (prev_done, prev_rest) = prev.split_at_mut(j);
        for t in (j + 1) * min_size..=n {
            let mut choice: Option<(f64, usize, usize)> = None;
            for s in j * min_size..=t - min_size {
                if !below[s].is_finite() {
                    continue;
                }
                let cand = (below[s] + cache.cost(s, t), j, s);
                let path = |p: usize| backtrack(p, |lvl, x| prev_done[lvl][x], j - 1);
                choice = match choice {
                    Some(c) if compare_candidates(cand, c, path) != Ordering::Less => Some(c),
                    _ => Some(cand),
                };
            }
            if let Some((obj, _, s)) = choice {
                here[t] = obj;
                prev_rest[0][t] = s;
            }
        }
    }

    let changepoints = if k == 0 {
        Vec::new()
    } else {
        backtrack(prev[k][n], |lvl, x| prev[lvl][x], k - 1)
    };
    Ok(ChangepointResult {
        changepoints,
        objective: best[k][n],
        method: Method::Dynp,
    })
}

/// Marks `width` frames centred on the last frame before each changepoint
/// (frame `k - 1` for changepoint `k`), clipped to the track. Overlapping
/// expansions merge into one run.
pub fn changepoints_to_track(result: &ChangepointResult, frames: usize, width: usize) -> Result<FrameLabelTrack> {
    if width == 0 || width % 2 == 0 {
        return Err(Error::invalid(format!(
            "expansion width must be odd and >= 1, got {width}"
        )));
    }
    let half = width / 2;
    let mut labels = vec![false; frames];
    for &k in &result.changepoints {
        let center = k.saturating_sub(1);
        let lo = center.saturating_sub(half);
        let hi = (center + half).min(frames.saturating_sub(1));
        if lo <= hi && lo < frames {
            labels[lo..=hi].fill(true);
        }
    }
    Ok(FrameLabelTrack::new(labels))
}
