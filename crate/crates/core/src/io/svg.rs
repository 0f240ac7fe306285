// SPDX-License-Identifier: MIT OR Apache-2.0

//! Timeline rendering of label tracks as SVG, one lane per track.

use std::fmt::Write as _;
use std::path::Path;

use super::write_bytes;
use crate::error::{ensure_same_len, Error, Result};
use crate::track::{extract_runs, FrameLabelTrack};

const NAME_WIDTH: f64 = 72.0;
const PLOT_WIDTH: f64 = 1000.0;
const LANE_HEIGHT: f64 = 18.0;
const LANE_GAP: f64 = 6.0;
const MARGIN: f64 = 6.0;
const BAR_COLOR: &str = "#1f5fbf";
const LANE_COLOR: &str = "#eeeeee";

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// SVG text for the named tracks, top to bottom in the given order.
pub fn timeline_svg<S: AsRef<str>>(tracks: &[(S, FrameLabelTrack)]) -> Result<String> {
    let (_, first) = tracks.first().ok_or_else(|| Error::invalid("no tracks to render"))?;
    for (_, t) in tracks {
        ensure_same_len(first.len(), t.len())?;
    }
    let frames = first.len();
    let frame_w = PLOT_WIDTH / frames.max(1) as f64;
    let width = NAME_WIDTH + PLOT_WIDTH + 2.0 * MARGIN;
    let height = 2.0 * MARGIN + tracks.len() as f64 * (LANE_HEIGHT + LANE_GAP) - LANE_GAP;

    let mut s = String::new();
    let mut w = |args: std::fmt::Arguments| s.write_fmt(args).expect("writing to a String");
    w(format_args!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\" data-frames=\"{frames}\">\n"
    ));
    for (lane, (name, track)) in tracks.iter().enumerate() {
        let name = escape(name.as_ref());
        let y = MARGIN + lane as f64 * (LANE_HEIGHT + LANE_GAP);
        let x0 = MARGIN + NAME_WIDTH;
        w(format_args!("  <g class=\"lane\" data-name=\"{name}\">\n"));
        w(format_args!(
            "    <text x=\"{MARGIN:.0}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\">{name}</text>\n",
            y + LANE_HEIGHT * 0.75
        ));
        w(format_args!(
            "    <rect x=\"{x0:.3}\" y=\"{y:.3}\" width=\"{PLOT_WIDTH:.3}\" height=\"{LANE_HEIGHT:.3}\" fill=\"{LANE_COLOR}\"/>\n"
        ));
        for run in extract_runs(track) {
            w(format_args!(
                "    <rect class=\"bar\" x=\"{:.3}\" y=\"{y:.3}\" width=\"{:.3}\" height=\"{LANE_HEIGHT:.3}\" fill=\"{BAR_COLOR}\"/>\n",
                x0 + run.start as f64 * frame_w,
                run.len() as f64 * frame_w
            ));
        }
        w(format_args!("  </g>\n"));
    }
    w(format_args!("</svg>\n"));
    Ok(s)
}

pub fn render_timeline<S: AsRef<str>>(tracks: &[(S, FrameLabelTrack)], path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), timeline_svg(tracks)?.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> FrameLabelTrack {
        s.parse().unwrap()
    }

    #[test]
    fn empty_list_is_an_error() {
        let none: [(&str, FrameLabelTrack); 0] = [];
        assert!(timeline_svg(&none).is_err());
    }

    #[test]
    fn zero_track_has_one_empty_lane() {
        let svg = timeline_svg(&[("GT", t("0000"))]).unwrap();
        assert_eq!(svg.matches("class=\"lane\"").count(), 1);
        assert_eq!(svg.matches("class=\"bar\"").count(), 0);
    }

    #[test]
    fn lanes_keep_order_and_bars_follow_runs() {
        let tracks = [
            ("GT", t("0110000110")),
            ("PL", t("0100000000")),
            ("CP", t("0000000111")),
            ("CMPL", t("0110000111")),
        ];
        let svg = timeline_svg(&tracks).unwrap();
        let pos: Vec<usize> = ["GT", "PL", "CP", "CMPL"]
            .iter()
            .map(|n| svg.find(&format!("data-name=\"{n}\"")).unwrap())
            .collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(svg.matches("class=\"bar\"").count(), 2 + 1 + 1 + 2);
        assert_eq!(svg, timeline_svg(&tracks).unwrap());
    }

    #[test]
    fn rejects_unequal_lengths_and_escapes_names() {
        assert!(timeline_svg(&[("a", t("01")), ("b", t("011"))]).is_err());
        let svg = timeline_svg(&[("<x&y>", t("1"))]).unwrap();
        assert!(svg.contains("&lt;x&amp;y&gt;"));
    }
}
