// SPDX-License-Identifier: MIT OR Apache-2.0

//! JSON report documents.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_text, write_bytes};
use crate::adapt::{ExperimentConfig, ExperimentReport};
use crate::error::Result;
use crate::metrics::EvalReport;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceReport {
    pub name: String,
    pub metrics: EvalReport,
}

/// Output of `eval` and `adapt`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportDoc {
    pub tool_version: String,
    pub metrics: EvalReport,
    /// Echo of the inputs and settings that produced the report.
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub sequences: Vec<SequenceReport>,
    /// Curve name -> CSV text with a header row.
    pub curves: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentReport>,
}

fn threshold_curves(metrics: &EvalReport) -> BTreeMap<String, String> {
    let mut boundary = String::from("threshold,f1\n");
    for (th, f1) in &metrics.per_threshold_f1b {
        writeln!(boundary, "{th},{f1}").expect("writing to a String");
    }
    let mut segment = String::from("iou,f1\n");
    for (th, f1) in &metrics.per_threshold_f1s {
        writeln!(segment, "{th},{f1}").expect("writing to a String");
    }
    BTreeMap::from([
        ("boundary_f1".to_string(), boundary),
        ("segment_f1".to_string(), segment),
    ])
}

impl ReportDoc {
    pub fn new(metrics: EvalReport, config: serde_json::Value) -> Self {
        Self {
            tool_version: TOOL_VERSION.to_string(),
            curves: threshold_curves(&metrics),
            metrics,
            config,
            seeds: Vec::new(),
            sequences: Vec::new(),
            experiment: None,
        }
    }

    /// Headline metrics are the per-seed means of the adapted model.
    pub fn from_experiment(config: &ExperimentConfig, report: ExperimentReport) -> Result<Self> {
        let mut doc = Self::new(report.adapted.mean_report(), serde_json::to_value(config)?);
        doc.seeds = config.seeds.clone();
        doc.sequences = report
            .seeds
            .iter()
            .map(|o| SequenceReport {
                name: format!("seed-{}", o.seed),
                metrics: o.adapted().clone(),
            })
            .collect();
        let mut iterations = String::from("seed,iteration,mf1b,mf1s\n");
        for o in &report.seeds {
            for (stage, r) in std::iter::once(&o.source_only).chain(&o.iterations).enumerate() {
                writeln!(iterations, "{},{stage},{},{}", o.seed, r.mf1b, r.mf1s).expect("writing to a String");
            }
        }
        doc.curves.insert("iterations".to_string(), iterations);
        doc.experiment = Some(report);
        Ok(doc)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report always serialises");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_bytes(path.as_ref(), self.to_json().as_bytes())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&read_text(path.as_ref())?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::evaluate;
    use crate::track::FrameLabelTrack;

    #[test]
    fn metrics_survive_json() {
        let gt: FrameLabelTrack = "0011000000110000000001100".parse().unwrap();
        let pred: FrameLabelTrack = "0110000000000110000000110".parse().unwrap();
        let r = evaluate(&pred, &gt).unwrap();
        let doc = ReportDoc::new(r.clone(), serde_json::json!({"pred": "a.lbl"}));
        let back = ReportDoc::from_json(&doc.to_json()).unwrap();
        assert_eq!(back.metrics, r);
        assert_eq!(back, doc);
        assert_eq!(back.to_json(), doc.to_json());
    }

    #[test]
    fn curves_are_csv() {
        let t: FrameLabelTrack = "0110".parse().unwrap();
        let doc = ReportDoc::new(evaluate(&t, &t).unwrap(), serde_json::Value::Null);
        let b = &doc.curves["boundary_f1"];
        assert_eq!(b.lines().next(), Some("threshold,f1"));
        assert_eq!(b.lines().count(), 5);
        assert!(b.contains("\n1,100\n"));
        assert_eq!(doc.curves["segment_f1"].lines().nth(1), Some("0.40,100"));
    }

    #[test]
    fn json_keys() {
        let t: FrameLabelTrack = "0110".parse().unwrap();
        let doc = ReportDoc::new(evaluate(&t, &t).unwrap(), serde_json::Value::Null);
        let v: serde_json::Value = serde_json::from_str(&doc.to_json()).unwrap();
        for key in ["tool_version", "metrics", "config", "seeds", "sequences", "curves"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert!(v.get("experiment").is_none());
        assert_eq!(v["metrics"]["mf1b"], 100.0);
    }
}
