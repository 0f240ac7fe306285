// SPDX-License-Identifier: MIT OR Apache-2.0

//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 file or format error,
//! 3 input the algorithms cannot handle.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::adapt::{run_experiment, synth_generate, ExperimentConfig, SyntheticConfig};
use crate::changepoint::{
    changepoints_to_track, dynp, pelt, DEFAULT_EXPANSION_WIDTH, DEFAULT_MIN_SIZE, DEFAULT_PENALTY,
};
use crate::error::{Error, Result};
use crate::fusion::{fuse, threshold_probs, FusionConfig, FusionOrder, FusionStrategy};
use crate::io::{
    read_features, read_labels, read_labels_with_fps, read_probs, read_text, timeline_svg, write_bytes, write_features,
    write_labels, ReportDoc, SequenceReport,
};
use crate::metrics::{evaluate, evaluate_many};

#[derive(Debug, Parser)]
#[command(name = "cmpl", version, about = "Sign boundary pseudo-labelling toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect changepoints in a feature file and write boundary labels.
    Detect(DetectArgs),
    /// Fuse pseudo-labels with changepoint labels.
    Fuse(FuseArgs),
    /// Score predicted labels against ground truth.
    Eval(EvalArgs),
    /// Generate a synthetic feature file and its labels.
    Synth(SynthArgs),
    /// Run a seeded adaptation experiment from a TOML config.
    Adapt(AdaptArgs),
    /// Draw label tracks as an SVG timeline.
    Render(RenderArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DetectMethod {
    Pelt,
    Dynp,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Feature file.
    pub input: PathBuf,
    /// Label file to write; stdout if omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "pelt")]
    pub method: DetectMethod,
    #[arg(long, default_value_t = DEFAULT_PENALTY)]
    pub penalty: f64,
    #[arg(long, default_value_t = DEFAULT_MIN_SIZE)]
    pub min_size: usize,
    /// Number of changepoints (dynp only).
    #[arg(long, required_if_eq("method", "dynp"))]
    pub k: Option<usize>,
    /// Boundary run width around each changepoint (odd).
    #[arg(long, default_value_t = DEFAULT_EXPANSION_WIDTH)]
    pub width: usize,
    /// Z-score each dimension before detection.
    #[arg(long)]
    pub standardize: bool,
    /// Also write the raw changepoints as JSON.
    #[arg(long)]
    pub changepoints: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    /// Pseudo-label file.
    #[arg(long, required_unless_present = "pl_probs", conflicts_with = "pl_probs")]
    pub pl: Option<PathBuf>,
    /// Per-frame probabilities, thresholded into pseudo-labels.
    #[arg(long)]
    pub pl_probs: Option<PathBuf>,
    /// Changepoint label file.
    #[arg(long)]
    pub cp: PathBuf,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value = "cmpl")]
    pub strategy: FusionStrategy,
    #[arg(long, default_value_t = 4)]
    pub gamma: usize,
    #[arg(long, default_value_t = 4)]
    pub delta: usize,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, default_value = "refine_then_insert")]
    pub order: FusionOrder,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Predicted label files; counts are pooled over all pairs.
    #[arg(long, required = true, num_args = 1..)]
    pub pred: Vec<PathBuf>,
    /// Ground-truth label files, paired with `--pred` in order.
    #[arg(long, required = true, num_args = 1..)]
    pub gt: Vec<PathBuf>,
    /// Report file; stdout if omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DomainArg {
    Source,
    Target,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    /// TOML generator settings; defaults otherwise.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long)]
    pub dims: Option<usize>,
    #[arg(long, value_enum, default_value = "source")]
    pub domain: DomainArg,
}

#[derive(Debug, Args)]
pub struct AdaptArgs {
    /// TOML experiment config; defaults otherwise.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated seeds, overriding the config.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// `NAME=PATH` or `PATH` (named after the file stem), top lane first.
    #[arg(long = "track", required = true)]
    pub tracks: Vec<String>,
    #[arg(short, long)]
    pub output: PathBuf,
}

/// Parses `argv` (including the program name), runs it, and returns the
/// process exit code. Errors go to stderr.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(path) => write_bytes(path, text.as_bytes()),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Detect(a) => detect(a),
        Command::Fuse(a) => fuse_cmd(a),
        Command::Eval(a) => eval(a),
        Command::Synth(a) => synth(a),
        Command::Adapt(a) => adapt(a),
        Command::Render(a) => render(a),
    }
}

fn detect(a: DetectArgs) -> Result<()> {
    let mut x = read_features(&a.input)?;
    if a.standardize {
        x = x.standardized();
    }
    let result = match a.method {
        DetectMethod::Pelt => pelt(&x, a.penalty, a.min_size)?,
        DetectMethod::Dynp => dynp(&x, a.k.expect("required by the parser"), a.min_size)?,
    };
    let track = changepoints_to_track(&result, x.frames(), a.width)?;
    if let Some(path) = &a.changepoints {
        write_bytes(path, format!("{}\n", serde_json::to_string_pretty(&result)?).as_bytes())?;
    }
    match &a.output {
        Some(path) => write_labels(&track, Some(x.fps()), path),
        None => emit(None, &crate::io::format_labels(&track, Some(x.fps()))),
    }
}

fn fuse_cmd(a: FuseArgs) -> Result<()> {
    let config = FusionConfig {
        gamma: a.gamma,
        delta: a.delta,
        threshold: a.threshold,
        strategy: a.strategy,
        order: a.order,
    };
    config.validate()?;
    let (cp, fps) = read_labels_with_fps(&a.cp)?;
    let pl = match (&a.pl, &a.pl_probs) {
        (Some(path), _) => read_labels(path)?,
        (None, Some(path)) => threshold_probs(&read_probs(path)?, a.threshold),
        (None, None) => unreachable!("enforced by the parser"),
    };
    let fused = fuse(&pl, &cp, &config)?;
    match &a.output {
        Some(path) => write_labels(&fused, fps, path),
        None => emit(None, &crate::io::format_labels(&fused, fps)),
    }
}

fn eval(a: EvalArgs) -> Result<()> {
    if a.pred.len() != a.gt.len() {
        return Err(Error::invalid(format!(
            "{} prediction files but {} ground-truth files",
            a.pred.len(),
            a.gt.len()
        )));
    }
    let preds = a.pred.iter().map(read_labels).collect::<Result<Vec<_>>>()?;
    let gts = a.gt.iter().map(read_labels).collect::<Result<Vec<_>>>()?;
    let metrics = evaluate_many(preds.iter().zip(&gts))?;
    let config = json!({
        "pred": a.pred.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "gt": a.gt.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    });
    let mut doc = ReportDoc::new(metrics, config);
    doc.sequences = a
        .pred
        .iter()
        .zip(preds.iter().zip(&gts))
        .map(|(name, (p, g))| {
            Ok(SequenceReport {
                name: name.display().to_string(),
                metrics: evaluate(p, g)?,
            })
        })
        .collect::<Result<_>>()?;
    emit(a.output.as_deref(), &doc.to_json())
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(path) => toml::from_str::<SyntheticConfig>(&read_text(path)?).map_err(|e| Error::Config(e.to_string()))?,
        None => SyntheticConfig::default(),
    };
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(frames) = a.frames {
        cfg.frames = frames;
    }
    if let Some(dims) = a.dims {
        cfg.dims = dims;
    }
    if a.domain == DomainArg::Target {
        cfg = cfg.target();
    }
    let (x, y) = synth_generate(&cfg)?;
    write_features(&x, &a.features)?;
    write_labels(&y, Some(x.fps()), &a.labels)
}

fn adapt(a: AdaptArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(path) => ExperimentConfig::from_toml(&read_text(path)?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seeds) = a.seeds {
        cfg.seeds = seeds;
    }
    let report = run_experiment(&cfg)?;
    emit(
        a.output.as_deref(),
        &ReportDoc::from_experiment(&cfg, report)?.to_json(),
    )
}

fn render(a: RenderArgs) -> Result<()> {
    let tracks = a
        .tracks
        .iter()
        .map(|spec| {
            let (name, path) = match spec.split_once('=') {
                Some((name, path)) => (name.to_string(), PathBuf::from(path)),
                None => {
                    let path = PathBuf::from(spec);
                    let stem = path
                        .file_stem()
                        .map_or_else(|| spec.clone(), |s| s.to_string_lossy().into_owned());
                    (stem, path)
                }
            };
            Ok((name, read_labels(&path)?))
        })
        .collect::<Result<Vec<_>>>()?;
    write_bytes(&a.output, timeline_svg(&tracks)?.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::read_features;
    use crate::track::{FeatureMatrix, FrameLabelTrack};

    fn cmpl(args: &[&str]) -> i32 {
        dispatch(std::iter::once("cmpl").chain(args.iter().copied()))
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(cmpl(&["frobnicate"]), 1);
        assert_eq!(cmpl(&[]), 1);
        assert_eq!(cmpl(&["detect", "x.cmsg", "--method", "dynp"]), 1);
        assert_eq!(cmpl(&["fuse", "--cp", "a", "--strategy", "nope", "--pl", "b"]), 1);
        assert_eq!(cmpl(&["--help"]), 0);
    }

    #[test]
    fn io_and_infeasible_exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("missing.cmsg");
        assert_eq!(cmpl(&["detect", missing.to_str().unwrap()]), 2);

        let f = dir.path().join("x.cmsg");
        crate::io::write_features(&FeatureMatrix::from_series(&[0.0; 10]).unwrap(), &f).unwrap();
        let out = dir.path().join("x.lbl");
        let (f, out) = (f.to_str().unwrap(), out.to_str().unwrap());
        assert_eq!(cmpl(&["detect", f, "-o", out, "--method", "dynp", "--k", "9"]), 3);
        assert_eq!(cmpl(&["detect", f, "-o", out, "--width", "2"]), 3);
    }

    #[test]
    fn constant_signal_detects_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("c.cmsg");
        crate::io::write_features(&FeatureMatrix::new(50, 3, vec![1.5; 150], 25.0).unwrap(), &f).unwrap();
        let out = dir.path().join("c.lbl");
        assert_eq!(
            cmpl(&[
                "detect",
                f.to_str().unwrap(),
                "-o",
                out.to_str().unwrap(),
                "--method",
                "pelt",
                "--penalty",
                "100"
            ]),
            0
        );
        assert_eq!(read_labels(&out).unwrap(), FrameLabelTrack::zeros(50));
    }

    #[test]
    fn self_eval_is_perfect() {
        let dir = tempfile::tempdir().unwrap();
        let l = dir.path().join("x.lbl");
        write_labels(&"0011000110000".parse().unwrap(), None, &l).unwrap();
        let r = dir.path().join("r.json");
        let l = l.to_str().unwrap();
        assert_eq!(cmpl(&["eval", "--pred", l, "--gt", l, "-o", r.to_str().unwrap()]), 0);
        let doc = ReportDoc::read(&r).unwrap();
        assert_eq!(doc.metrics.mf1b, 100.0);
        assert_eq!(doc.metrics.mf1s, 100.0);
    }

    #[test]
    fn synth_writes_matching_files() {
        let dir = tempfile::tempdir().unwrap();
        let (f, l) = (dir.path().join("s.cmsg"), dir.path().join("s.lbl"));
        let code = cmpl(&[
            "synth",
            "--features",
            f.to_str().unwrap(),
            "--labels",
            l.to_str().unwrap(),
            "--seed",
            "7",
            "--frames",
            "200",
            "--domain",
            "target",
        ]);
        assert_eq!(code, 0);
        let x = read_features(&f).unwrap();
        let (y, fps) = read_labels_with_fps(&l).unwrap();
        let cfg = SyntheticConfig {
            seed: 7,
            frames: 200,
            ..SyntheticConfig::default()
        }
        .target();
        let (ex, ey) = synth_generate(&cfg).unwrap();
        assert_eq!(x, ex);
        assert_eq!(y, ey);
        assert_eq!(fps, Some(x.fps()));
    }
}
