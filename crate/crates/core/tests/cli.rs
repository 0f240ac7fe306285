// SPDX-License-Identifier: MIT OR Apache-2.0

mod common;

use cmpl_core::adapt::{run_experiment, ExperimentConfig};
use cmpl_core::io::{read_features, read_labels, write_features, write_labels, ReportDoc};
use cmpl_core::track::{extract_runs, FeatureMatrix, FrameLabelTrack};
use common::*;

fn stderr(out: &std::process::Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn unknown_subcommand_prints_usage() {
    let out = cmpl(&["bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("Usage"), "{}", stderr(&out));
    assert!(out.stdout.is_empty());
}

#[test]
fn format_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("bad.cmsg");
    std::fs::write(&f, b"XXXX and then some more bytes here").unwrap();
    let out = cmpl(&["detect", path_str(&f)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("bad magic"), "{}", stderr(&out));

    write_features(&FeatureMatrix::from_series(&[1.0, 2.0, 3.0]).unwrap(), &f).unwrap();
    let bytes = std::fs::read(&f).unwrap();
    std::fs::write(&f, &bytes[..bytes.len() - 1]).unwrap();
    let out = cmpl(&["detect", path_str(&f)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("expected 40 bytes, found 39"), "{}", stderr(&out));

    let l = dir.path().join("bad.lbl");
    std::fs::write(&l, "0\n1\nx\n").unwrap();
    let out = cmpl(&["eval", "--pred", path_str(&l), "--gt", path_str(&l)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains(":3:"), "{}", stderr(&out));
}

#[test]
fn infeasible_requests_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("x.cmsg");
    write_features(&FeatureMatrix::from_series(&[0.0; 6]).unwrap(), &f).unwrap();
    let out = cmpl(&["detect", path_str(&f), "--method", "dynp", "--k", "5"]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));

    let (a, b) = (dir.path().join("a.lbl"), dir.path().join("b.lbl"));
    write_labels(&"0110".parse().unwrap(), None, &a).unwrap();
    write_labels(&"011".parse().unwrap(), None, &b).unwrap();
    let out = cmpl(&["eval", "--pred", path_str(&a), "--gt", path_str(&b)]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn synth_detect_fuse_eval_render_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    let ok = |args: &[&str]| {
        let out = cmpl(args);
        assert!(out.status.success(), "{args:?}: {}", stderr(&out));
        out
    };
    ok(&[
        "synth",
        "--features",
        path_str(&p("x.cmsg")),
        "--labels",
        path_str(&p("gt.lbl")),
        "--seed",
        "3",
        "--domain",
        "target",
    ]);
    ok(&[
        "detect",
        path_str(&p("x.cmsg")),
        "-o",
        path_str(&p("cp.lbl")),
        "--penalty",
        "100",
    ]);

    // Drop every other ground-truth run to get an under-segmented stand-in
    // for pseudo-labels.
    let gt = read_labels(p("gt.lbl")).unwrap();
    let mut pl = gt.labels().to_vec();
    for run in extract_runs(&gt).iter().step_by(2) {
        pl[run.start..=run.end].iter_mut().for_each(|v| *v = false);
    }
    write_labels(&FrameLabelTrack::new(pl), None, p("pl.lbl")).unwrap();

    ok(&[
        "fuse",
        "--pl",
        path_str(&p("pl.lbl")),
        "--cp",
        path_str(&p("cp.lbl")),
        "-o",
        path_str(&p("cmpl.lbl")),
    ]);
    for name in ["pl", "cmpl"] {
        let report = p(&format!("{name}.json"));
        ok(&[
            "eval",
            "--pred",
            path_str(&p(&format!("{name}.lbl"))),
            "--gt",
            path_str(&p("gt.lbl")),
            "-o",
            path_str(&report),
        ]);
    }
    let pl_doc = ReportDoc::read(p("pl.json")).unwrap();
    let cmpl_doc = ReportDoc::read(p("cmpl.json")).unwrap();
    let gap = |d: &ReportDoc| d.metrics.gt_boundary_count.abs_diff(d.metrics.pred_boundary_count);
    assert!(gap(&cmpl_doc) < gap(&pl_doc));
    assert_eq!(pl_doc.sequences.len(), 1);

    let track = |n: &str| format!("{}={}", n.to_uppercase(), path_str(&p(&format!("{n}.lbl"))));
    ok(&[
        "render",
        "--track",
        &track("gt"),
        "--track",
        &track("pl"),
        "--track",
        &track("cp"),
        "--track",
        &track("cmpl"),
        "-o",
        path_str(&p("t.svg")),
    ]);
    let svg = std::fs::read_to_string(p("t.svg")).unwrap();
    assert_eq!(svg.matches("class=\"lane\"").count(), 4);
    assert!(svg.find("data-name=\"GT\"").unwrap() < svg.find("data-name=\"CMPL\"").unwrap());

    let x = read_features(p("x.cmsg")).unwrap();
    assert_eq!(x.frames(), gt.len());
}

#[test]
fn detect_writes_to_stdout_without_output_flag() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("x.cmsg");
    let mut series = vec![0.0f32; 20];
    series[10..].iter_mut().for_each(|v| *v = 10.0);
    write_features(&FeatureMatrix::from_series(&series).unwrap(), &f).unwrap();
    let out = cmpl(&["detect", path_str(&f), "--penalty", "1"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "#fps=25");
    // Changepoint at 10; the width-3 run is centred on the last frame before it.
    assert_eq!(lines[1..].concat(), "00000000111000000000");
}

#[test]
fn adapt_report_matches_library_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("exp.toml");
    std::fs::write(
        &cfg_path,
        "seeds = [1, 2]\nsource_sequences = 3\nadapt_sequences = 2\neval_sequences = 2\n[data]\nframes = 300\n[protocol]\niterations = 2\n",
    )
    .unwrap();
    let report = dir.path().join("r.json");
    let out = cmpl(&["adapt", "--config", path_str(&cfg_path), "-o", path_str(&report)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let doc = ReportDoc::read(&report).unwrap();

    let cfg = ExperimentConfig::from_toml(&std::fs::read_to_string(&cfg_path).unwrap()).unwrap();
    let expected = run_experiment(&cfg).unwrap();
    assert_eq!(doc.metrics, expected.adapted.mean_report());
    assert_eq!(doc.seeds, vec![1, 2]);
    assert_eq!(doc.sequences.len(), 2);
    assert_eq!(doc.experiment.as_ref(), Some(&expected));
    // Header plus source-only and two iterations per seed.
    assert_eq!(doc.curves["iterations"].lines().count(), 1 + 2 * 3);
    assert_eq!(doc.config["protocol"]["iterations"], 2);

    let out = cmpl(&["adapt", "--config", path_str(&cfg_path), "--seeds", "5"]);
    assert!(out.status.success());
    let doc = ReportDoc::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(doc.seeds, vec![5]);
}

#[test]
fn bad_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("exp.toml");
    std::fs::write(&cfg_path, "seedz = [1]\n").unwrap();
    let out = cmpl(&["adapt", "--config", path_str(&cfg_path)]);
    assert_eq!(out.status.code(), Some(2));
}
