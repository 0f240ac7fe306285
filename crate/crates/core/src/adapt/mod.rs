// SPDX-License-Identifier: MIT OR Apache-2.0

//! Source-free adaptation of a boundary classifier to a new domain.
//!
//! A model trained on labelled source sequences is adapted to unlabelled
//! target sequences by repeatedly labelling them with its own thresholded
//! predictions (optionally fused with changepoints) and retraining.
//! [`self_train`] never sees source data: it takes only the model and
//! target features.

mod experiment;
mod model;
mod synth;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use experiment::{
    evaluate_model, prepare_seed, run_experiment, run_protocol, ExperimentConfig, ExperimentReport, ModelConfig,
    SeedOutcome, SeedSetup,
};
pub use model::{predict_probs, train_supervised, ClassWeights, ToySegmenter, TrainConfig, TrainReport};
pub use synth::{synth_generate, uniform_baseline, Domain, DomainShift, SyntheticConfig};

use crate::changepoint::{
    changepoints_to_track, pelt, CHANGEPOINT_ONLY_PENALTY, DEFAULT_EXPANSION_WIDTH, DEFAULT_MIN_SIZE, DEFAULT_PENALTY,
};
use crate::error::{Error, Result};
use crate::fusion::{fuse, threshold_probs, FusionConfig};
use crate::track::{FeatureMatrix, FrameLabelTrack};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdaptMode {
    /// Adapt on one set of target sequences, evaluate on another.
    #[default]
    Inductive,
    /// Adapt directly on the (unlabelled) evaluation sequences.
    Transductive,
}

/// Where the retraining labels come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    /// Thresholded model predictions.
    PseudoLabels,
    /// Expanded changepoints alone.
    Changepoints,
    /// Pseudo-labels fused with changepoints by the protocol's fusion strategy.
    #[default]
    Fused,
}

impl fmt::Display for LabelSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelSource::PseudoLabels => "pseudo_labels",
            LabelSource::Changepoints => "changepoints",
            LabelSource::Fused => "fused",
        })
    }
}

impl FromStr for LabelSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "pseudo_labels" | "pl" => Ok(LabelSource::PseudoLabels),
            "changepoints" | "cp" => Ok(LabelSource::Changepoints),
            "fused" => Ok(LabelSource::Fused),
            _ => Err(Error::invalid(format!("unknown label source {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptProtocol {
    pub mode: AdaptMode,
    pub labels: LabelSource,
    pub fusion: FusionConfig,
    /// Changepoint penalty; defaults to 100 when fusing and 80 for
    /// changepoint-only labels.
    pub penalty: Option<f64>,
    pub min_size: usize,
    pub expansion_width: usize,
    pub iterations: usize,
    pub epochs: usize,
}

impl Default for AdaptProtocol {
    fn default() -> Self {
        Self {
            mode: AdaptMode::Inductive,
            labels: LabelSource::Fused,
            fusion: FusionConfig::default(),
            penalty: None,
            min_size: DEFAULT_MIN_SIZE,
            expansion_width: DEFAULT_EXPANSION_WIDTH,
            iterations: 1,
            epochs: 10,
        }
    }
}

impl AdaptProtocol {
    pub fn pseudo_labels() -> Self {
        Self {
            labels: LabelSource::PseudoLabels,
            ..Self::default()
        }
    }

    pub fn cmpl() -> Self {
        Self::default()
    }

    pub fn effective_penalty(&self) -> f64 {
        self.penalty.unwrap_or(match self.labels {
            LabelSource::Changepoints => CHANGEPOINT_ONLY_PENALTY,
            _ => DEFAULT_PENALTY,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("iterations must be >= 1"));
        }
        self.fusion.validate()
    }
}

/// Thresholded predictions of `model`.
pub fn pseudo_labels(model: &ToySegmenter, features: &FeatureMatrix, threshold: f64) -> Result<FrameLabelTrack> {
    Ok(threshold_probs(&model.predict_probs(features)?, threshold))
}

/// PELT changepoints expanded to boundary runs.
pub fn changepoint_labels(
    features: &FeatureMatrix,
    penalty: f64,
    min_size: usize,
    width: usize,
) -> Result<FrameLabelTrack> {
    let cp = pelt(features, penalty, min_size.min(features.frames()))?;
    changepoints_to_track(&cp, features.frames(), width)
}

/// Models and training labels produced by each self-training iteration.
#[derive(Clone, Debug)]
pub struct SelfTrainTrace {
    pub models: Vec<ToySegmenter>,
    pub labels: Vec<Vec<FrameLabelTrack>>,
}

/// Self-training on unlabelled target sequences; returns the final model.
pub fn self_train(
    model: &ToySegmenter,
    target_features: &[FeatureMatrix],
    protocol: &AdaptProtocol,
) -> Result<ToySegmenter> {
    let mut trace = self_train_trace(model, target_features, protocol)?;
    Ok(trace.models.pop().expect("at least one iteration"))
}

/// As [`self_train`], keeping every intermediate model.
pub fn self_train_trace(
    model: &ToySegmenter,
    target_features: &[FeatureMatrix],
    protocol: &AdaptProtocol,
) -> Result<SelfTrainTrace> {
    protocol.validate()?;
    if target_features.is_empty() {
        return Err(Error::invalid("no target sequences to adapt on"));
    }

    let changepoints: Option<Vec<FrameLabelTrack>> = match protocol.labels {
        LabelSource::PseudoLabels => None,
        LabelSource::Changepoints | LabelSource::Fused => Some(
            target_features
                .par_iter()
                .map(|x| {
                    changepoint_labels(
                        x,
                        protocol.effective_penalty(),
                        protocol.min_size,
                        protocol.expansion_width,
                    )
                })
                .collect::<Result<_>>()?,
        ),
    };

    let mut current = model.clone();
    current.train.epochs = protocol.epochs;
    let mut trace = SelfTrainTrace {
        models: Vec::with_capacity(protocol.iterations),
        labels: Vec::with_capacity(protocol.iterations),
    };
    for iteration in 0..protocol.iterations {
        let labels = target_features
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let cp = changepoints.as_ref().map(|c| &c[i]);
                match (protocol.labels, cp) {
                    (LabelSource::Changepoints, Some(cp)) => Ok(cp.clone()),
                    (LabelSource::Fused, Some(cp)) => fuse(
                        &pseudo_labels(&current, x, protocol.fusion.threshold)?,
                        cp,
                        &protocol.fusion,
                    ),
                    _ => pseudo_labels(&current, x, protocol.fusion.threshold),
                }
            })
            .collect::<Result<Vec<_>>>()?;

        let data: Vec<(FeatureMatrix, FrameLabelTrack)> =
            target_features.iter().cloned().zip(labels.iter().cloned()).collect();
        let mut next = current.clone();
        next.train.seed = model.train.seed.wrapping_add(iteration as u64 + 1);
        current = train_supervised(&next, &data)?;
        trace.models.push(current.clone());
        trace.labels.push(labels);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_target() -> Vec<FeatureMatrix> {
        (0..2)
            .map(|s| {
                synth_generate(&SyntheticConfig::default().target().with_seed(s))
                    .unwrap()
                    .0
            })
            .collect()
    }

    #[test]
    fn penalty_defaults_follow_label_source() {
        assert_eq!(AdaptProtocol::cmpl().effective_penalty(), 100.0);
        assert_eq!(AdaptProtocol::pseudo_labels().effective_penalty(), 100.0);
        let cp = AdaptProtocol {
            labels: LabelSource::Changepoints,
            ..AdaptProtocol::default()
        };
        assert_eq!(cp.effective_penalty(), 80.0);
        assert_eq!(
            AdaptProtocol {
                penalty: Some(7.0),
                ..cp
            }
            .effective_penalty(),
            7.0
        );
    }

    #[test]
    fn rejects_empty_target_and_zero_iterations() {
        let m = ToySegmenter::new(8, 2, TrainConfig::default()).unwrap();
        assert!(self_train(&m, &[], &AdaptProtocol::default()).is_err());
        let p = AdaptProtocol {
            iterations: 0,
            ..AdaptProtocol::default()
        };
        assert!(self_train(&m, &tiny_target(), &p).is_err());
    }

    #[test]
    fn trace_has_one_entry_per_iteration_and_is_deterministic() {
        let m = ToySegmenter::new(
            8,
            2,
            TrainConfig {
                epochs: 1,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        let p = AdaptProtocol {
            iterations: 2,
            epochs: 1,
            ..AdaptProtocol::default()
        };
        let target = tiny_target();
        let a = self_train_trace(&m, &target, &p).unwrap();
        let b = self_train_trace(&m, &target, &p).unwrap();
        assert_eq!(a.models.len(), 2);
        assert_eq!(a.labels.len(), 2);
        assert_eq!(a.models, b.models);
        // A zero model predicts 0.5 everywhere, so the first pseudo-labels
        // are empty and the fused labels are exactly the changepoints.
        let cp = changepoint_labels(&target[0], 100.0, 2, 3).unwrap();
        assert_eq!(a.labels[0][0], cp);
    }

    #[test]
    fn label_source_parsing() {
        assert_eq!("pl".parse::<LabelSource>().unwrap(), LabelSource::PseudoLabels);
        assert_eq!("fused".parse::<LabelSource>().unwrap(), LabelSource::Fused);
        assert!("both".parse::<LabelSource>().is_err());
    }
}
