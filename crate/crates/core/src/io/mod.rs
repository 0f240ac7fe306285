// SPDX-License-Identifier: MIT OR Apache-2.0

//! On-disk formats.
//!
//! Feature files are a fixed little-endian layout:
//!
//! | offset | size      | field                       |
//! |--------|-----------|-----------------------------|
//! | 0      | 4         | magic `CMSG`                |
//! | 4      | 4         | version (`u32`, = 1)        |
//! | 8      | 8         | frames `T` (`u64`)          |
//! | 16     | 8         | dims `D` (`u64`)            |
//! | 24     | 4         | fps (`f32`)                 |
//! | 28     | 4·T·D     | values (`f32`, frame-major) |
//!
//! Label files hold one `0` or `1` per line, optionally preceded by a
//! `#fps=<value>` header. Probability files hold one number in `[0, 1]`
//! per line.

mod report;
mod svg;

use std::fmt::Write as _;
use std::path::Path;

pub use report::{ReportDoc, SequenceReport, TOOL_VERSION};
pub use svg::{render_timeline, timeline_svg};

use crate::error::{Error, Result};
use crate::track::{FeatureMatrix, FrameLabelTrack, ProbTrack};

pub const FEATURE_MAGIC: [u8; 4] = *b"CMSG";
pub const FEATURE_VERSION: u32 = 1;
pub const FEATURE_HEADER_LEN: usize = 28;

pub fn encode_features(matrix: &FeatureMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(FEATURE_HEADER_LEN + 4 * matrix.values().len());
    out.extend_from_slice(&FEATURE_MAGIC);
    out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    out.extend_from_slice(&(matrix.frames() as u64).to_le_bytes());
    out.extend_from_slice(&(matrix.dims() as u64).to_le_bytes());
    out.extend_from_slice(&matrix.fps().to_le_bytes());
    for v in matrix.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Decodes a feature file image; `path` is only used in error messages.
pub fn decode_features(bytes: &[u8], path: &Path) -> Result<FeatureMatrix> {
    let truncated = |expected: u64| Error::Truncated {
        path: path.to_path_buf(),
        expected,
        actual: bytes.len() as u64,
    };
    if bytes.len() >= 4 && bytes[..4] != FEATURE_MAGIC {
        let mut found = [0u8; 4];
        found.copy_from_slice(&bytes[..4]);
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            found,
        });
    }
    if bytes.len() < FEATURE_HEADER_LEN {
        return Err(truncated(FEATURE_HEADER_LEN as u64));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    let u64_at = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().expect("8 bytes"));

    let version = u32_at(4);
    if version != FEATURE_VERSION {
        return Err(Error::VersionMismatch {
            path: path.to_path_buf(),
            found: version,
            expected: FEATURE_VERSION,
        });
    }
    let (frames, dims) = (u64_at(8), u64_at(16));
    let fps = f32::from_le_bytes(bytes[24..28].try_into().expect("4 bytes"));
    let expected = frames
        .checked_mul(dims)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(FEATURE_HEADER_LEN as u64))
        .ok_or_else(|| Error::invalid(format!("{}: {frames}x{dims} overflows", path.display())))?;
    if bytes.len() as u64 != expected {
        return Err(truncated(expected));
    }
    let values = bytes[FEATURE_HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    FeatureMatrix::new(frames as usize, dims as usize, values, fps)
}

pub fn write_features(matrix: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_features(matrix))
}

pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_features(&bytes, path)
}

/// Label file text; `fps` adds the optional header line.
pub fn format_labels(track: &FrameLabelTrack, fps: Option<f32>) -> String {
    let mut out = String::with_capacity(2 * track.len() + 16);
    if let Some(fps) = fps {
        writeln!(out, "#fps={fps}").expect("writing to a String");
    }
    for &b in track.labels() {
        out.push_str(if b { "1\n" } else { "0\n" });
    }
    out
}

/// Parses label file text into the track and the header fps, if any.
pub fn parse_labels(text: &str, path: &Path) -> Result<(FrameLabelTrack, Option<f32>)> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut fps = None;
    let mut labels = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if i == 0 {
            if let Some(v) = line.strip_prefix("#fps=") {
                let v: f32 = v
                    .trim()
                    .parse()
                    .map_err(|e| parse_err(1, format!("bad fps {v:?}: {e}")))?;
                if !(v.is_finite() && v > 0.0) {
                    return Err(parse_err(1, format!("fps must be positive, got {v}")));
                }
                fps = Some(v);
                continue;
            }
        }
        match line {
            "0" => labels.push(false),
            "1" => labels.push(true),
            other => return Err(parse_err(i + 1, format!("expected 0 or 1, found {other:?}"))),
        }
    }
    Ok((FrameLabelTrack::new(labels), fps))
}

pub fn write_labels(track: &FrameLabelTrack, fps: Option<f32>, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), format_labels(track, fps).as_bytes())
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<FrameLabelTrack> {
    read_labels_with_fps(path).map(|(t, _)| t)
}

pub fn read_labels_with_fps(path: impl AsRef<Path>) -> Result<(FrameLabelTrack, Option<f32>)> {
    let path = path.as_ref();
    parse_labels(&read_text(path)?, path)
}

/// One probability per line, printed with round-trip precision.
pub fn format_probs(probs: &ProbTrack) -> String {
    let mut out = String::new();
    for p in probs.probs() {
        writeln!(out, "{p:?}").expect("writing to a String");
    }
    out
}

pub fn parse_probs(text: &str, path: &Path) -> Result<ProbTrack> {
    let probs = text
        .lines()
        .enumerate()
        .map(|(i, line)| {
            line.trim().parse::<f64>().map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("expected a probability, found {line:?}: {e}"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ProbTrack::new(probs)
}

pub fn write_probs(probs: &ProbTrack, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), format_probs(probs).as_bytes())
}

pub fn read_probs(path: impl AsRef<Path>) -> Result<ProbTrack> {
    let path = path.as_ref();
    parse_probs(&read_text(path)?, path)
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
