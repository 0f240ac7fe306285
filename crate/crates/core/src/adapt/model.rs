// SPDX-License-Identifier: MIT OR Apache-2.0

//! A windowed logistic frame classifier standing in for a temporal
//! segmentation network.
//!
//! The boundary logit of frame `t` is a linear function of the features of
//! frames `t - radius ..= t + radius` (zero outside the sequence). Training
//! minimises class-weighted cross-entropy plus a smoothing term on the
//! squared difference of neighbouring log-probabilities, truncated at `tau`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_same_len, Error, Result};
use crate::track::{FeatureMatrix, FrameLabelTrack, ProbTrack};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Weight of the smoothing loss (lambda).
    pub smoothing_weight: f64,
    /// Truncation of the log-probability difference (tau).
    pub smoothing_clamp: f64,
    /// Frames per optimisation step.
    pub chunk_len: usize,
    /// Up-weight the rarer class by inverse frequency.
    pub class_weighting: bool,
    /// Seed for chunk shuffling.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 10,
            smoothing_weight: 0.15,
            smoothing_clamp: 4.0,
            chunk_len: 128,
            class_weighting: true,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToySegmenter {
    radius: usize,
    dims: usize,
    /// `(2 * radius + 1) * dims` window weights (offset-major), then the bias.
    params: Vec<f64>,
    pub train: TrainConfig,
}

/// Per-class loss weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassWeights {
    pub background: f64,
    pub boundary: f64,
}

impl ClassWeights {
    pub const UNIFORM: ClassWeights = ClassWeights {
        background: 1.0,
        boundary: 1.0,
    };

    /// `n / (2 * n_class)` for each class; uniform if either class is absent.
    pub fn inverse_frequency<'a>(labels: impl IntoIterator<Item = &'a FrameLabelTrack>) -> Self {
        let (mut pos, mut total) = (0usize, 0usize);
        for track in labels {
            pos += track.count_ones();
            total += track.len();
        }
        let neg = total - pos;
        if pos == 0 || neg == 0 {
            return Self::UNIFORM;
        }
        Self {
            background: total as f64 / (2.0 * neg as f64),
            boundary: total as f64 / (2.0 * pos as f64),
        }
    }
}

/// A contiguous range of frames of one training sequence.
#[derive(Clone, Copy, Debug)]
struct Chunk {
    seq: usize,
    start: usize,
    end: usize,
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// log(sigmoid(x))
fn log_sigmoid(x: f64) -> f64 {
    -softplus(-x)
}

/// Largest logit magnitude reported as a probability, keeping outputs in (0, 1).
const LOGIT_LIMIT: f64 = 30.0;

impl ToySegmenter {
    /// A zero-initialised model (every frame predicted at 0.5).
    pub fn new(dims: usize, radius: usize, train: TrainConfig) -> Result<Self> {
        if dims == 0 {
            return Err(Error::invalid("model needs at least one input dimension"));
        }
        Ok(Self {
            radius,
            dims,
            params: vec![0.0; (2 * radius + 1) * dims + 1],
            train,
        })
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn with_params(mut self, params: Vec<f64>) -> Result<Self> {
        ensure_same_len(self.params.len(), params.len())?;
        self.params = params;
        Ok(self)
    }

    fn check_dims(&self, features: &FeatureMatrix) -> Result<()> {
        if features.dims() != self.dims {
            return Err(Error::invalid(format!(
                "model expects {} feature dims, got {}",
                self.dims,
                features.dims()
            )));
        }
        Ok(())
    }

    fn logit(&self, x: &FeatureMatrix, t: usize) -> f64 {
        let d = self.dims;
        let lo = t.saturating_sub(self.radius);
        let hi = (t + self.radius).min(x.frames() - 1);
        let mut z = self.params[self.params.len() - 1];
        for u in lo..=hi {
            let w = &self.params[(u + self.radius - t) * d..(u + self.radius - t + 1) * d];
            z += w.iter().zip(x.row(u)).map(|(w, &v)| w * f64::from(v)).sum::<f64>();
        }
        z
    }

    fn add_logit_grad(&self, x: &FeatureMatrix, t: usize, g: f64, grad: &mut [f64]) {
        let d = self.dims;
        let lo = t.saturating_sub(self.radius);
        let hi = (t + self.radius).min(x.frames() - 1);
        for u in lo..=hi {
            let off = (u + self.radius - t) * d;
            for (gw, &v) in grad[off..off + d].iter_mut().zip(x.row(u)) {
                *gw += g * f64::from(v);
            }
        }
        *grad.last_mut().expect("bias") += g;
    }

    /// Raw boundary logits, one per frame.
    pub fn logits(&self, features: &FeatureMatrix) -> Result<Vec<f64>> {
        self.check_dims(features)?;
        Ok((0..features.frames()).map(|t| self.logit(features, t)).collect())
    }

    /// Per-frame boundary probabilities, strictly inside (0, 1).
    pub fn predict_probs(&self, features: &FeatureMatrix) -> Result<ProbTrack> {
        let probs = self
            .logits(features)?
            .into_iter()
            .map(|z| sigmoid(z.clamp(-LOGIT_LIMIT, LOGIT_LIMIT)))
            .collect();
        ProbTrack::new(probs)
    }

    /// Loss over `chunks`, optionally accumulating its gradient.
    fn chunk_objective(
        &self,
        data: &[(FeatureMatrix, FrameLabelTrack)],
        chunks: &[Chunk],
        weights: ClassWeights,
        mut grad: Option<&mut [f64]>,
    ) -> f64 {
        let frames: usize = chunks.iter().map(|c| c.end - c.start).sum();
        let pairs: usize = chunks.iter().map(|c| c.end - c.start - 1).sum();
        let lambda = self.train.smoothing_weight;
        let tau = self.train.smoothing_clamp;
        let ce_scale = 1.0 / frames as f64;
        let sm_scale = if pairs > 0 { lambda / (2 * pairs) as f64 } else { 0.0 };

        let mut loss = 0.0;
        let mut dz = Vec::new();
        for chunk in chunks {
            let (x, y) = &data[chunk.seq];
            let z: Vec<f64> = (chunk.start..chunk.end).map(|t| self.logit(x, t)).collect();
            dz.clear();
            dz.resize(z.len(), 0.0);

            for (i, &zi) in z.iter().enumerate() {
                if y.get(chunk.start + i) {
                    loss += weights.boundary * softplus(-zi) * ce_scale;
                    dz[i] -= weights.boundary * sigmoid(-zi) * ce_scale;
                } else {
                    loss += weights.background * softplus(zi) * ce_scale;
                    dz[i] += weights.background * sigmoid(zi) * ce_scale;
                }
            }

            if sm_scale > 0.0 {
                for i in 1..z.len() {
                    let (a, b) = (z[i - 1], z[i]);
                    // boundary class: log sigmoid(z); background: log sigmoid(-z)
                    let d1 = log_sigmoid(b) - log_sigmoid(a);
                    let d0 = log_sigmoid(-b) - log_sigmoid(-a);
                    for (delta, db, da) in [(d1, sigmoid(-b), -sigmoid(-a)), (d0, -sigmoid(b), sigmoid(a))] {
                        if delta.abs() < tau {
                            loss += delta * delta * sm_scale;
                            dz[i] += 2.0 * delta * db * sm_scale;
                            dz[i - 1] += 2.0 * delta * da * sm_scale;
                        } else {
                            loss += tau * tau * sm_scale;
                        }
                    }
                }
            }

            if let Some(g) = grad.as_deref_mut() {
                for (i, &gz) in dz.iter().enumerate() {
                    self.add_logit_grad(x, chunk.start + i, gz, g);
                }
            }
        }
        loss
    }

    fn validate_data(&self, data: &[(FeatureMatrix, FrameLabelTrack)]) -> Result<()> {
        if data.is_empty() {
            return Err(Error::invalid("training data is empty"));
        }
        for (x, y) in data {
            self.check_dims(x)?;
            ensure_same_len(x.frames(), y.len())?;
        }
        Ok(())
    }

    fn whole_sequences(data: &[(FeatureMatrix, FrameLabelTrack)]) -> Vec<Chunk> {
        data.iter()
            .enumerate()
            .map(|(seq, (x, _))| Chunk {
                seq,
                start: 0,
                end: x.frames(),
            })
            .collect()
    }

    fn class_weights(&self, data: &[(FeatureMatrix, FrameLabelTrack)]) -> ClassWeights {
        if self.train.class_weighting {
            ClassWeights::inverse_frequency(data.iter().map(|(_, y)| y))
        } else {
            ClassWeights::UNIFORM
        }
    }

    /// Full-data training loss.
    pub fn loss(&self, data: &[(FeatureMatrix, FrameLabelTrack)]) -> Result<f64> {
        self.validate_data(data)?;
        let chunks = Self::whole_sequences(data);
        Ok(self.chunk_objective(data, &chunks, self.class_weights(data), None))
    }

    /// Full-data training loss and its gradient with respect to the parameters.
    pub fn loss_and_gradient(&self, data: &[(FeatureMatrix, FrameLabelTrack)]) -> Result<(f64, Vec<f64>)> {
        self.validate_data(data)?;
        let chunks = Self::whole_sequences(data);
        let mut grad = vec![0.0; self.params.len()];
        let loss = self.chunk_objective(data, &chunks, self.class_weights(data), Some(&mut grad));
        Ok((loss, grad))
    }

    /// Adam over shuffled chunks for `train.epochs` epochs.
    pub fn fit(&self, data: &[(FeatureMatrix, FrameLabelTrack)]) -> Result<(ToySegmenter, TrainReport)> {
        self.validate_data(data)?;
        let weights = self.class_weights(data);
        let all = Self::whole_sequences(data);
        let initial_loss = self.chunk_objective(data, &all, weights, None);

        let step = self.train.chunk_len.max(2);
        let mut chunks: Vec<Chunk> = data
            .iter()
            .enumerate()
            .flat_map(|(seq, (x, _))| {
                (0..x.frames()).step_by(step).map(move |start| Chunk {
                    seq,
                    start,
                    end: (start + step).min(x.frames()),
                })
            })
            .collect();

        let mut model = self.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(self.train.seed);
        let mut adam = Adam::new(model.params.len(), self.train.learning_rate);
        let mut grad = vec![0.0; model.params.len()];
        let mut epoch_losses = Vec::with_capacity(self.train.epochs);
        for _ in 0..self.train.epochs {
            chunks.shuffle(&mut rng);
            for chunk in &chunks {
                grad.fill(0.0);
                model.chunk_objective(data, std::slice::from_ref(chunk), weights, Some(&mut grad));
                adam.step(&mut model.params, &grad);
            }
            epoch_losses.push(model.chunk_objective(data, &all, weights, None));
        }
        let final_loss = epoch_losses.last().copied().unwrap_or(initial_loss);
        Ok((
            model,
            TrainReport {
                initial_loss,
                final_loss,
                epoch_losses,
            },
        ))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub epoch_losses: Vec<f64>,
}

struct Adam {
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        }
    }
}

/// Supervised training on labelled sequences.
pub fn train_supervised(model: &ToySegmenter, data: &[(FeatureMatrix, FrameLabelTrack)]) -> Result<ToySegmenter> {
    model.fit(data).map(|(m, _)| m)
}

pub fn predict_probs(model: &ToySegmenter, features: &FeatureMatrix) -> Result<ProbTrack> {
    model.predict_probs(features)
}
