// SPDX-License-Identifier: MIT OR Apache-2.0

//! Reference implementations and random inputs shared by the integration
//! tests. Everything here is deliberately naive.

#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use cmpl_core::adapt::ToySegmenter;
use cmpl_core::track::{FeatureMatrix, FrameLabelTrack};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Runs the `cmpl` binary.
pub fn cmpl<S: AsRef<std::ffi::OsStr>>(args: &[S]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cmpl"))
        .args(args)
        .output()
        .expect("spawn cmpl")
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

/// Piecewise-constant signal with Gaussian-ish noise.
pub fn piecewise_signal(rng: &mut ChaCha8Rng, frames: usize, dims: usize) -> FeatureMatrix {
    let mut values = Vec::with_capacity(frames * dims);
    let mut level: Vec<f32> = (0..dims).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let noise: f32 = rng.gen_range(0.1..1.5);
    for _ in 0..frames {
        if rng.gen_bool(0.05) {
            level = (0..dims).map(|_| rng.gen_range(-3.0..3.0)).collect();
        }
        for l in &level {
            // Sum of uniforms: cheap, bounded, roughly bell-shaped.
            let e: f32 = (0..3).map(|_| rng.gen_range(-1.0f32..1.0)).sum();
            values.push(l + noise * e);
        }
    }
    FeatureMatrix::new(frames, dims, values, 25.0).unwrap()
}

/// Random runs of ones separated by at least one zero.
pub fn random_track(rng: &mut ChaCha8Rng, frames: usize, density: f64, max_run: usize) -> FrameLabelTrack {
    let mut labels = vec![false; frames];
    let mut t = 0;
    while t < frames {
        if rng.gen_bool(density) {
            let len = rng.gen_range(1..=max_run);
            for l in labels.iter_mut().skip(t).take(len) {
                *l = true;
            }
            t += len + 1;
        } else {
            t += 1;
        }
    }
    FrameLabelTrack::new(labels)
}

/// Sum of squared deviations from the mean over `[s, e)`, summed over dims,
/// accumulated directly.
pub fn direct_cost(x: &FeatureMatrix, s: usize, e: usize) -> f64 {
    let n = (e - s) as f64;
    (0..x.dims())
        .map(|d| {
            let mean = (s..e).map(|t| x.row(t)[d] as f64).sum::<f64>() / n;
            (s..e).map(|t| (x.row(t)[d] as f64 - mean).powi(2)).sum::<f64>()
        })
        .sum()
}

/// Best `k`-changepoint placement by enumerating every combination.
/// Returns the objective, the lexicographically first optimal placement,
/// and whether the optimum is unique (runner-up worse by more than `tol`).
pub fn exhaustive_dynp(x: &FeatureMatrix, k: usize, min_size: usize, tol: f64) -> Option<(f64, Vec<usize>, bool)> {
    let n = x.frames();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut runner_up = f64::INFINITY;
    let mut cps = Vec::with_capacity(k);
    fn go(
        x: &FeatureMatrix,
        n: usize,
        k: usize,
        min_size: usize,
        cps: &mut Vec<usize>,
        best: &mut Option<(f64, Vec<usize>)>,
        runner_up: &mut f64,
    ) {
        let last = cps.last().copied().unwrap_or(0);
        if cps.len() == k {
            if n - last < min_size {
                return;
            }
            let mut bounds = vec![0];
            bounds.extend_from_slice(cps);
            bounds.push(n);
            let cost: f64 = bounds.windows(2).map(|w| direct_cost(x, w[0], w[1])).sum();
            match best {
                Some((b, _)) if cost >= *b => *runner_up = runner_up.min(cost),
                _ => {
                    if let Some((b, _)) = best {
                        *runner_up = runner_up.min(*b);
                    }
                    *best = Some((cost, cps.clone()));
                }
            }
            return;
        }
        for c in last + min_size..n {
            cps.push(c);
            go(x, n, k, min_size, cps, best, runner_up);
            cps.pop();
        }
    }
    go(x, n, k, min_size, &mut cps, &mut best, &mut runner_up);
    best.map(|(obj, cps)| {
        let unique = runner_up - obj > tol * obj.abs().max(1.0);
        (obj, cps, unique)
    })
}

/// Frame-by-frame insertion: where the window of offsets `-gamma+1..gamma-1`
/// holds no pseudo-label, take the changepoint label.
pub fn naive_insertion(pl: &[bool], cp: &[bool], gamma: usize) -> Vec<bool> {
    let n = pl.len() as i64;
    let g = gamma as i64;
    (0..n)
        .map(|i| {
            let mut any = false;
            for j in (1 - g)..g {
                let k = i + j;
                if k >= 0 && k < n && pl[k as usize] {
                    any = true;
                }
            }
            if any {
                pl[i as usize]
            } else {
                cp[i as usize]
            }
        })
        .collect()
}

/// `(start, end)` of each maximal run of ones.
pub fn runs_of(labels: &[bool]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &b) in labels.iter().chain(std::iter::once(&false)).enumerate() {
        match (b, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    out
}

/// Central finite differences of the training loss.
pub fn finite_difference_gradient(model: &ToySegmenter, data: &[(FeatureMatrix, FrameLabelTrack)], h: f64) -> Vec<f64> {
    let params = model.params().to_vec();
    (0..params.len())
        .map(|i| {
            let mut p = params.clone();
            p[i] += h;
            let up = model.clone().with_params(p.clone()).unwrap().loss(data).unwrap();
            p[i] -= 2.0 * h;
            let down = model.clone().with_params(p).unwrap().loss(data).unwrap();
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// [`random_track`] with a random density below 0.3.
pub fn any_track(rng: &mut ChaCha8Rng, frames: usize, max_run: usize) -> FrameLabelTrack {
    let density = rng.gen_range(0.0..0.3);
    random_track(rng, frames, density, max_run)
}
