// SPDX-License-Identifier: MIT OR Apache-2.0

//! Seeded end-to-end experiments: synthesise source and target data, train
//! on the source, adapt on the target, evaluate on held-out target data.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    changepoint_labels, pseudo_labels, self_train_trace, synth_generate, train_supervised, AdaptMode, AdaptProtocol,
    SyntheticConfig, ToySegmenter, TrainConfig,
};
use crate::changepoint::CHANGEPOINT_ONLY_PENALTY;
use crate::error::{Error, Result};
use crate::metrics::{aggregate, evaluate_many, AggregateReport, EvalReport};
use crate::track::{FeatureMatrix, FrameLabelTrack};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Frames of context on each side of the predicted frame.
    pub radius: usize,
    pub train: TrainConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            radius: 4,
            train: TrainConfig::default(),
        }
    }
}

/// Everything an `adapt` run needs; read from a TOML document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    pub source_sequences: usize,
    /// Unlabelled target sequences used for adaptation (inductive mode).
    pub adapt_sequences: usize,
    /// Labelled target sequences used only for evaluation.
    pub eval_sequences: usize,
    /// Source-domain generator; its `shift` defines the target domain.
    pub data: SyntheticConfig,
    pub model: ModelConfig,
    pub protocol: AdaptProtocol,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seeds: vec![0, 1, 2],
            source_sequences: 12,
            adapt_sequences: 8,
            eval_sequences: 8,
            data: SyntheticConfig::default(),
            model: ModelConfig::default(),
            protocol: AdaptProtocol::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serialises")
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        if self.source_sequences == 0 || self.eval_sequences == 0 {
            return Err(Error::Config(
                "need at least one source and one evaluation sequence".into(),
            ));
        }
        if self.protocol.mode == AdaptMode::Inductive && self.adapt_sequences == 0 {
            return Err(Error::Config("inductive mode needs adapt_sequences >= 1".into()));
        }
        self.protocol.validate()?;
        self.data.validate()
    }
}

/// Independent 64-bit seed for (experiment seed, role, index).
fn derive_seed(seed: u64, role: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(role.wrapping_mul(0xBF58_476D_1CE4_E5B9))
        .wrapping_add(index.wrapping_mul(0x94D0_49BB_1331_11EB));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const ROLE_SOURCE: u64 = 1;
const ROLE_ADAPT: u64 = 2;
const ROLE_EVAL: u64 = 3;
const ROLE_TRAIN: u64 = 4;

/// One seed's source-trained model and target data.
#[derive(Clone, Debug)]
pub struct SeedSetup {
    pub seed: u64,
    pub source_model: ToySegmenter,
    /// Unlabelled sequences handed to self-training.
    pub adapt: Vec<FeatureMatrix>,
    /// Labelled held-out target sequences.
    pub eval: Vec<(FeatureMatrix, FrameLabelTrack)>,
}

fn generate(
    config: &SyntheticConfig,
    seed: u64,
    role: u64,
    count: usize,
) -> Result<Vec<(FeatureMatrix, FrameLabelTrack)>> {
    (0..count)
        .map(|i| synth_generate(&config.with_seed(derive_seed(seed, role, i as u64))))
        .collect()
}

/// Generates data for `seed` and trains the source model. Source data is
/// dropped before this returns.
pub fn prepare_seed(config: &ExperimentConfig, seed: u64) -> Result<SeedSetup> {
    let source = generate(&config.data, seed, ROLE_SOURCE, config.source_sequences)?;
    let target_cfg = config.data.target();
    let eval = generate(&target_cfg, seed, ROLE_EVAL, config.eval_sequences)?;
    let adapt = match config.protocol.mode {
        AdaptMode::Inductive => generate(&target_cfg, seed, ROLE_ADAPT, config.adapt_sequences)?
            .into_iter()
            .map(|(x, _)| x)
            .collect(),
        AdaptMode::Transductive => eval.iter().map(|(x, _)| x.clone()).collect(),
    };

    let train = TrainConfig {
        seed: derive_seed(seed, ROLE_TRAIN, 0),
        ..config.model.train
    };
    let init = ToySegmenter::new(config.data.dims, config.model.radius, train)?;
    let source_model = train_supervised(&init, &source)?;
    Ok(SeedSetup {
        seed,
        source_model,
        adapt,
        eval,
    })
}

/// Pooled evaluation of thresholded predictions on labelled sequences.
pub fn evaluate_model(
    model: &ToySegmenter,
    eval: &[(FeatureMatrix, FrameLabelTrack)],
    threshold: f64,
) -> Result<EvalReport> {
    let preds = eval
        .iter()
        .map(|(x, _)| pseudo_labels(model, x, threshold))
        .collect::<Result<Vec<_>>>()?;
    evaluate_many(preds.iter().zip(eval.iter().map(|(_, y)| y)))
}

/// Adapts the seed's source model and evaluates after every iteration.
pub fn run_protocol(setup: &SeedSetup, protocol: &AdaptProtocol) -> Result<Vec<EvalReport>> {
    let trace = self_train_trace(&setup.source_model, &setup.adapt, protocol)?;
    trace
        .models
        .iter()
        .map(|m| evaluate_model(m, &setup.eval, protocol.fusion.threshold))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    /// Source model applied to the target without adaptation.
    pub source_only: EvalReport,
    /// Expanded changepoints used directly as predictions.
    pub changepoints_only: EvalReport,
    /// Adapted model after each self-training iteration.
    pub iterations: Vec<EvalReport>,
}

impl SeedOutcome {
    pub fn adapted(&self) -> &EvalReport {
        self.iterations.last().expect("at least one iteration")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seeds: Vec<SeedOutcome>,
    pub source_only: AggregateReport,
    pub changepoints_only: AggregateReport,
    /// Final-iteration reports across seeds.
    pub adapted: AggregateReport,
}

fn run_seed(config: &ExperimentConfig, seed: u64) -> Result<SeedOutcome> {
    let setup = prepare_seed(config, seed)?;
    let threshold = config.protocol.fusion.threshold;
    let source_only = evaluate_model(&setup.source_model, &setup.eval, threshold)?;
    let cp_tracks = setup
        .eval
        .iter()
        .map(|(x, _)| {
            changepoint_labels(
                x,
                config.protocol.penalty.unwrap_or(CHANGEPOINT_ONLY_PENALTY),
                config.protocol.min_size,
                config.protocol.expansion_width,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let changepoints_only = evaluate_many(cp_tracks.iter().zip(setup.eval.iter().map(|(_, y)| y)))?;
    let iterations = run_protocol(&setup, &config.protocol)?;
    Ok(SeedOutcome {
        seed,
        source_only,
        changepoints_only,
        iterations,
    })
}

/// Runs every seed (concurrently; each seed is independent and seeded).
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let seeds = config
        .seeds
        .par_iter()
        .map(|&s| run_seed(config, s))
        .collect::<Result<Vec<_>>>()?;
    let collect =
        |f: fn(&SeedOutcome) -> &EvalReport| aggregate(&seeds.iter().map(|o| f(o).clone()).collect::<Vec<_>>());
    Ok(ExperimentReport {
        source_only: collect(|o| &o.source_only)?,
        changepoints_only: collect(|o| &o.changepoints_only)?,
        adapted: collect(|o| o.adapted())?,
        seeds,
    })
}
