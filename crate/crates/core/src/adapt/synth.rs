// SPDX-License-Identifier: MIT OR Apache-2.0

//! Synthetic continuous-signing sequences with known sign boundaries.
//!
//! Each sequence alternates signs and short boundary runs. Dimensions
//! `1..dims` hold a per-sign level that jumps right after the centre of
//! each boundary run (what the changepoint detector sees). Dimension 0 is a
//! "motion" channel that carries a bump of random strength over the
//! boundary frames (what a frame classifier can pick up). A target domain
//! shortens the signs and weakens the bump.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::track::{runs_to_track, BoundaryRun, FeatureMatrix, FrameLabelTrack, DEFAULT_FPS};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    #[default]
    Source,
    Target,
}

/// How the target domain differs from the source.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainShift {
    /// Multiplies mean and spread of sign length.
    pub sign_length_scale: f64,
    /// Multiplies the boundary cue strength.
    pub cue_scale: f64,
    /// Multiplies the frame noise.
    pub noise_scale: f64,
}

impl Default for DomainShift {
    fn default() -> Self {
        Self {
            sign_length_scale: 0.6,
            cue_scale: 0.5,
            noise_scale: 1.0,
        }
    }
}

impl DomainShift {
    pub fn none() -> Self {
        Self {
            sign_length_scale: 1.0,
            cue_scale: 1.0,
            noise_scale: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub frames: usize,
    pub dims: usize,
    pub fps: f32,
    pub sign_length_mean: f64,
    pub sign_length_spread: f64,
    pub boundary_width_min: usize,
    pub boundary_width_max: usize,
    /// Standard deviation of each per-sign level coordinate.
    pub jump_scale: f64,
    /// Per-frame random-walk step inside a sign.
    pub drift: f64,
    pub noise: f64,
    /// Mean height of the motion bump over boundary frames.
    pub cue_strength: f64,
    /// Bump height is drawn uniformly from `cue_strength * (1 +- cue_jitter)`.
    pub cue_jitter: f64,
    pub domain: Domain,
    pub shift: DomainShift,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            frames: 600,
            dims: 8,
            fps: DEFAULT_FPS,
            sign_length_mean: 20.0,
            sign_length_spread: 5.0,
            boundary_width_min: 2,
            boundary_width_max: 4,
            jump_scale: 1.5,
            drift: 0.02,
            noise: 0.35,
            cue_strength: 2.0,
            cue_jitter: 0.3,
            domain: Domain::Source,
            shift: DomainShift::default(),
        }
    }
}

/// Parameters after the domain shift has been applied.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Resolved {
    sign_mean: f64,
    sign_spread: f64,
    cue: f64,
    noise: f64,
}

impl SyntheticConfig {
    pub fn target(self) -> Self {
        Self {
            domain: Domain::Target,
            ..self
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    /// Mean sign length in this config's domain.
    pub fn effective_sign_length(&self) -> f64 {
        self.resolved().sign_mean
    }

    fn resolved(&self) -> Resolved {
        let s = match self.domain {
            Domain::Source => DomainShift::none(),
            Domain::Target => self.shift,
        };
        Resolved {
            sign_mean: self.sign_length_mean * s.sign_length_scale,
            sign_spread: self.sign_length_spread * s.sign_length_scale,
            cue: self.cue_strength * s.cue_scale,
            noise: self.noise * s.noise_scale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Infeasible(m));
        if self.frames == 0 {
            return bad("frames must be >= 1".into());
        }
        if self.dims < 2 {
            return bad(format!("need at least 2 dims (motion + level), got {}", self.dims));
        }
        if self.boundary_width_min == 0 || self.boundary_width_min > self.boundary_width_max {
            return bad(format!(
                "boundary width range [{}, {}] is empty or starts at 0",
                self.boundary_width_min, self.boundary_width_max
            ));
        }
        let r = self.resolved();
        if !(r.sign_mean >= 2.0 * self.boundary_width_max as f64) {
            return bad(format!(
                "mean sign length {:.2} must be at least twice the widest boundary ({})",
                r.sign_mean, self.boundary_width_max
            ));
        }
        if r.sign_mean > self.frames as f64 {
            return bad(format!(
                "mean sign length {:.2} exceeds the sequence length {}",
                r.sign_mean, self.frames
            ));
        }
        let scales = [
            r.sign_spread,
            self.jump_scale,
            self.drift,
            r.noise,
            r.cue,
            self.cue_jitter,
        ];
        if scales.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || self.cue_jitter > 1.0 {
            return bad("scales must be finite and non-negative, cue_jitter at most 1".into());
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return bad(format!("fps must be positive, got {}", self.fps));
        }
        Ok(())
    }

    /// Shortest sign the sampler will produce.
    fn min_sign_length(&self) -> usize {
        self.boundary_width_max.max(2)
    }
}

/// Draws one sequence: features and ground-truth boundary labels.
/// Identical configs (including the seed) give bit-identical output.
pub fn synth_generate(config: &SyntheticConfig) -> Result<(FeatureMatrix, FrameLabelTrack)> {
    config.validate()?;
    let r = config.resolved();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (n, dims) = (config.frames, config.dims);
    let min_sign = config.min_sign_length();

    let sign_len = Normal::new(r.sign_mean, r.sign_spread.max(1e-12)).expect("valid normal");
    let sample_sign = |rng: &mut ChaCha8Rng| -> usize {
        let v = if r.sign_spread > 0.0 {
            sign_len.sample(rng)
        } else {
            r.sign_mean
        };
        (v.round().max(0.0) as usize).max(min_sign)
    };

    // Layout: sign, boundary, sign, ..., sign. Boundaries stay interior.
    let mut runs = Vec::new();
    let mut heights = Vec::new();
    let mut t = sample_sign(&mut rng);
    loop {
        let width = rng.gen_range(config.boundary_width_min..=config.boundary_width_max);
        let next_sign = sample_sign(&mut rng);
        let jitter = rng.gen_range(-1.0..=1.0) * config.cue_jitter;
        // Leave at least one full minimum sign after the boundary.
        if t + width + min_sign > n {
            break;
        }
        runs.push(BoundaryRun::new(t, t + width - 1));
        heights.push(r.cue * (1.0 + jitter));
        t += width + next_sign;
    }
    let labels = runs_to_track(&runs, n)?;

    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    let mut values = vec![0.0f32; n * dims];
    let mut level: Vec<f64> = (1..dims).map(|_| config.jump_scale * unit.sample(&mut rng)).collect();
    let mut next_run = 0;
    for t in 0..n {
        // Levels switch right after each boundary centre.
        if next_run < runs.len() && t == runs[next_run].center() + 1 {
            level = (1..dims).map(|_| config.jump_scale * unit.sample(&mut rng)).collect();
            next_run += 1;
        } else if config.drift > 0.0 {
            for l in level.iter_mut() {
                *l += config.drift * unit.sample(&mut rng);
            }
        }
        let row = &mut values[t * dims..(t + 1) * dims];
        let bump = runs
            .binary_search_by(|run| {
                if run.end < t {
                    std::cmp::Ordering::Less
                } else if run.start > t {
                    std::cmp::Ordering::Greater
                } else {
                    std::cmp::Ordering::Equal
                }
            })
            .map_or(0.0, |i| heights[i]);
        row[0] = (bump + r.noise * unit.sample(&mut rng)) as f32;
        for (v, l) in row[1..].iter_mut().zip(&level) {
            *v = (l + r.noise * unit.sample(&mut rng)) as f32;
        }
    }

    let features = FeatureMatrix::new(n, dims, values, config.fps)?;
    Ok((features, labels))
}

/// Equal-length segmentation: `num_segments - 1` boundary runs of `width`
/// frames centred at `floor(i * frames / num_segments)`.
pub fn uniform_baseline(frames: usize, num_segments: usize, width: usize) -> Result<FrameLabelTrack> {
    if num_segments == 0 || width == 0 {
        return Err(Error::Infeasible(format!(
            "need num_segments >= 1 and width >= 1, got {num_segments} and {width}"
        )));
    }
    let runs = (1..num_segments)
        .map(|i| {
            let center = i * frames / num_segments;
            let start = center
                .checked_sub((width - 1) / 2)
                .ok_or_else(|| Error::Infeasible(format!("boundary at {center} does not fit width {width}")))?;
            Ok(BoundaryRun::new(start, start + width - 1))
        })
        .collect::<Result<Vec<_>>>()?;
    runs_to_track(&runs, frames).map_err(|e| {
        Error::Infeasible(format!(
            "{num_segments} segments of width-{width} boundaries do not fit {frames} frames: {e}"
        ))
    })
}
