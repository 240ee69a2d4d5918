//! Synthetic micrographs with planted particles, and pick scoring against
//! their ground truth.
//!
//! Particles are dark soft-edged disks on white Gaussian noise. The SNR knob is
//! the ratio of in-disk signal variance to noise variance; the disk depth is
//! fixed by `contrast` and the noise level follows from the requested SNR.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::coords::Pick;
use crate::error::{io_err, Error, Result};
use crate::micrograph::Micrograph;
use crate::scalar::Real;

/// Placement attempts before giving up.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub width: usize,
    pub height: usize,
    pub num_particles: usize,
    /// Disk diameter in pixels.
    pub diameter: f64,
    /// Signal variance over noise variance; `f64::INFINITY` gives a noiseless image.
    pub snr: f64,
    pub seed: u64,
    pub background_mean: f64,
    /// Depth of the disk below the background at its flat center.
    pub contrast: f64,
}

impl SynthParams {
    pub fn new(width: usize, height: usize, num_particles: usize, diameter: f64, snr: f64, seed: u64) -> Self {
        Self { width, height, num_particles, diameter, snr, seed, background_mean: 0.0, contrast: 1.0 }
    }

    pub fn radius(&self) -> f64 {
        self.diameter / 2.0
    }

    /// Raised-cosine width of the disk edge.
    pub fn edge_width(&self) -> f64 {
        0.1 * self.diameter
    }

    /// Unit disk profile at distance `r` from the center: 1 inside, falling
    /// to 0 at the radius over the edge band.
    pub fn profile(&self, r: f64) -> f64 {
        let radius = self.radius();
        let edge = self.edge_width();
        let inner = radius - edge;
        if r <= inner {
            1.0
        } else if r < radius {
            0.5 * (1.0 + (std::f64::consts::PI * (r - inner) / edge).cos())
        } else {
            0.0
        }
    }

    /// Offsets (dr, dc) with distance below the radius: the disk support.
    pub fn support(&self) -> Vec<(i64, i64)> {
        let radius = self.radius();
        let reach = radius.ceil() as i64;
        let mut out = Vec::new();
        for dr in -reach..=reach {
            for dc in -reach..=reach {
                if ((dr * dr + dc * dc) as f64).sqrt() < radius {
                    out.push((dr, dc));
                }
            }
        }
        out
    }

    /// Population variance of the particle signal over its support.
    pub fn signal_variance(&self) -> f64 {
        let values: Vec<f64> = self
            .support()
            .into_iter()
            .map(|(dr, dc)| -self.contrast * self.profile(((dr * dr + dc * dc) as f64).sqrt()))
            .collect();
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
    }

    /// Noise standard deviation implied by the SNR.
    pub fn noise_sigma(&self) -> f64 {
        if self.snr.is_infinite() {
            0.0
        } else {
            (self.signal_variance() / self.snr).sqrt()
        }
    }
}

/// Planted particle centers (row, col) in pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub centers: Vec<(f64, f64)>,
    pub particle_diameter: f64,
    pub snr: f64,
}

impl GroundTruth {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,col\n");
        for (r, c) in &self.centers {
            let _ = writeln!(out, "{r},{c}");
        }
        out
    }

    pub fn parse_csv(text: &str, particle_diameter: f64) -> Result<Self> {
        let mut centers = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (i == 0 && line.starts_with("row")) {
                continue;
            }
            let (r, c) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("truth line {}: expected row,col", i + 1)))?;
            let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("truth line {}: {e}", i + 1)));
            centers.push((parse(r)?, parse(c)?));
        }
        Ok(Self { centers, particle_diameter, snr: f64::NAN })
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(io_err(path))
    }

    pub fn read_csv(path: impl AsRef<Path>, particle_diameter: f64) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::parse_csv(&text, particle_diameter)
    }
}

/// Generates a micrograph and its ground truth; bit-identical for equal params.
pub fn generate<T: Real>(params: &SynthParams) -> Result<(Micrograph<T>, GroundTruth)> {
    let p = params;
    if p.width == 0 || p.height == 0 {
        return Err(Error::InvalidArgument("synthetic micrograph needs positive size".into()));
    }
    if !(p.diameter > 0.0) || !(p.snr > 0.0) {
        return Err(Error::InvalidArgument("diameter and snr must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let margin = p.radius().ceil() as usize;

    let mut centers: Vec<(usize, usize)> = Vec::with_capacity(p.num_particles);
    if p.num_particles > 0 {
        if p.height <= 2 * margin || p.width <= 2 * margin {
            return Err(Error::Placement { requested: p.num_particles, placed: 0 });
        }
        let min_d2 = p.diameter * p.diameter;
        let mut attempts = 0;
        while centers.len() < p.num_particles {
            if attempts == MAX_PLACEMENT_ATTEMPTS {
                return Err(Error::Placement { requested: p.num_particles, placed: centers.len() });
            }
            attempts += 1;
            let r = rng.random_range(margin..p.height - margin);
            let c = rng.random_range(margin..p.width - margin);
            let clear = centers.iter().all(|&(or, oc)| {
                let dr = r as f64 - or as f64;
                let dc = c as f64 - oc as f64;
                dr * dr + dc * dc >= min_d2
            });
            if clear {
                centers.push((r, c));
            }
        }
    }

    let sigma = p.noise_sigma();
    let mut data = Array2::from_elem((p.height, p.width), p.background_mean);
    if sigma > 0.0 {
        let noise = Normal::new(p.background_mean, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        for v in data.iter_mut() {
            *v = noise.sample(&mut rng);
        }
    }
    let support = p.support();
    for &(r, c) in &centers {
        for &(dr, dc) in &support {
            let rr = (r as i64 + dr) as usize;
            let cc = (c as i64 + dc) as usize;
            data[[rr, cc]] -= p.contrast * p.profile(((dr * dr + dc * dc) as f64).sqrt());
        }
    }

    let m = Micrograph::new(data.mapv(T::of))?;
    let truth = GroundTruth {
        centers: centers.into_iter().map(|(r, c)| (r as f64, c as f64)).collect(),
        particle_diameter: p.diameter,
        snr: p.snr,
    };
    Ok((m, truth))
}

/// Matching quality of picks against ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub precision: f64,
    pub recall: f64,
    /// Mean center distance over matched pairs (0 when nothing matched).
    pub mean_localization_error: f64,
    pub matched: usize,
    pub num_picks: usize,
    pub num_truth: usize,
}

impl Evaluation {
    pub const CSV_HEADER: &'static str = "picks,truth,matched,precision,recall,mean_localization_error";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:.6},{:.6},{:.6}",
            self.num_picks, self.num_truth, self.matched, self.precision, self.recall, self.mean_localization_error
        )
    }

    pub fn summary(&self) -> String {
        format!(
            "picks {}  truth {}  matched {}  precision {:.3}  recall {:.3}  mean error {:.2} px",
            self.num_picks, self.num_truth, self.matched, self.precision, self.recall, self.mean_localization_error
        )
    }
}

/// Greedy one-to-one matching by ascending distance; pairs farther than
/// `match_radius` stay unmatched. Returns matched (pick, truth) index pairs.
pub fn greedy_match(picks: &[(f64, f64)], truth: &[(f64, f64)], match_radius: f64) -> Vec<(usize, usize, f64)> {
    let mut pairs = Vec::new();
    for (i, p) in picks.iter().enumerate() {
        for (j, t) in truth.iter().enumerate() {
            let d = ((p.0 - t.0).powi(2) + (p.1 - t.1).powi(2)).sqrt();
            if d <= match_radius {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut pick_used = vec![false; picks.len()];
    let mut truth_used = vec![false; truth.len()];
    let mut out = Vec::new();
    for (d, i, j) in pairs {
        if !pick_used[i] && !truth_used[j] {
            pick_used[i] = true;
            truth_used[j] = true;
            out.push((i, j, d));
        }
    }
    out
}

/// Scores picks (original pixel coordinates) against planted centers.
pub fn evaluate(picks: &[Pick], truth: &GroundTruth, match_radius: f64) -> Result<Evaluation> {
    if !(match_radius > 0.0) {
        return Err(Error::InvalidArgument("match radius must be positive".into()));
    }
    let points: Vec<(f64, f64)> = picks.iter().map(|p| (p.center_y, p.center_x)).collect();
    let matches = greedy_match(&points, &truth.centers, match_radius);
    let matched = matches.len();
    let precision = if picks.is_empty() { 1.0 } else { matched as f64 / picks.len() as f64 };
    let recall = if truth.centers.is_empty() { 1.0 } else { matched as f64 / truth.centers.len() as f64 };
    let mean_localization_error = if matched == 0 {
        0.0
    } else {
        matches.iter().map(|m| m.2).sum::<f64>() / matched as f64
    };
    Ok(Evaluation {
        precision,
        recall,
        mean_localization_error,
        matched,
        num_picks: picks.len(),
        num_truth: truth.centers.len(),
    })
}
