//! Pick coordinates and their text interchange formats.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};

/// A particle detection in original-micrograph pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pick {
    /// Column coordinate of the box center.
    pub center_x: f64,
    /// Row coordinate of the box center.
    pub center_y: f64,
    pub box_size: usize,
    /// Cluster area in binned pixels.
    pub score: f64,
}

impl Pick {
    /// Lower-left corner of the box, rounded to whole pixels.
    pub fn corner(&self) -> (i64, i64) {
        let half = self.box_size as f64 / 2.0;
        (
            (self.center_x - half).round() as i64,
            (self.center_y - half).round() as i64,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordFormat {
    #[default]
    Box,
    Star,
}

impl CoordFormat {
    pub fn extension(self) -> &'static str {
        match self {
            CoordFormat::Box => "box",
            CoordFormat::Star => "star",
        }
    }
}

impl FromStr for CoordFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "box" => Ok(CoordFormat::Box),
            "star" => Ok(CoordFormat::Star),
            other => Err(Error::Parse(format!("unknown coordinate format '{other}'"))),
        }
    }
}

/// Renders picks in the requested format.
///
/// Box lines are `x\ty\tw\th` with (x, y) the lower-left corner. STAR output
/// is a RELION coordinate file holding box centers.
pub fn format_picks(picks: &[Pick], format: CoordFormat) -> String {
    let mut out = String::new();
    match format {
        CoordFormat::Box => {
            for p in picks {
                let (x, y) = p.corner();
                let _ = writeln!(out, "{x}\t{y}\t{}\t{}", p.box_size, p.box_size);
            }
        }
        CoordFormat::Star => {
            out.push_str("\ndata_\n\nloop_\n_rlnCoordinateX #1\n_rlnCoordinateY #2\n");
            for p in picks {
                let _ = writeln!(out, "{:.1}\t{:.1}", p.center_x, p.center_y);
            }
        }
    }
    out
}

pub fn write_picks(picks: &[Pick], path: impl AsRef<Path>, format: CoordFormat) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_picks(picks, format)).map_err(io_err(path))
}

/// Parses a box file back into picks (centers recovered from corners).
pub fn parse_box(text: &str) -> Result<Vec<Pick>> {
    let mut picks = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<f64> = line
            .split_whitespace()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("box line {}: {e}", lineno + 1)))?;
        if fields.len() < 4 {
            return Err(Error::Parse(format!(
                "box line {} has {} fields, expected 4",
                lineno + 1,
                fields.len()
            )));
        }
        let (w, h) = (fields[2], fields[3]);
        picks.push(Pick {
            center_x: fields[0] + w / 2.0,
            center_y: fields[1] + h / 2.0,
            box_size: w.round() as usize,
            score: 0.0,
        });
    }
    Ok(picks)
}

pub fn read_box(path: impl AsRef<Path>) -> Result<Vec<Pick>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_box(&text)
}
