//! End-to-end picking of one micrograph.
//!
//! crop → bin → (phase flip) → references → query scores → training set →
//! SVM → pixel classification → clusters → size filter → separation → picks.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::coords::{CoordFormat, Pick};
use crate::ctf::{phase_flip, CtfParams};
use crate::error::{Error, Result};
use crate::integral::IntegralImages;
use crate::micrograph::Micrograph;
use ndarray::Array2;

use crate::morphology::{connected_components, erode, fill_holes, inscribed_radii, Cluster};
use crate::picker::{classify_pixels_with, enforce_separation, fill_border, filter_clusters, pick, ClusterFilter, SegmentationMask};
use crate::reference::{select_references_with, ReferenceSet};
use crate::response::{score_micrograph_with, ScoredQueries};
use crate::scalar::Real;
use crate::svm::{train, SvmModel, SvmParams};
use crate::training::{build_training_set, TrainingSet};

/// Picking parameters. Sizes are in original pixels unless noted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PickerConfig {
    /// Particle diameter; also the output box size.
    pub particle_size: usize,
    /// Query/reference window side in binned pixels. Defaults to the even
    /// value nearest `0.8 * particle_size / bin_factor`.
    pub query_size: Option<usize>,
    /// Container side in binned pixels.
    pub container_size: usize,
    /// Percent of top-scoring queries taken as particle examples.
    pub tau1: f64,
    /// Percent of top-scoring queries excluded from the noise examples.
    pub tau2: f64,
    pub bin_factor: usize,
    pub border_crop: usize,
    pub threshold_divisor: f64,
    pub svm_bandwidth: f64,
    pub svm_slack: f64,
    /// Cluster area bounds in binned pixels.
    pub min_cluster_pixels: Option<usize>,
    pub max_cluster_pixels: Option<usize>,
    /// Cluster diameter bounds. With erosion on, the minimum also sets the
    /// erosion radius (half of it); the bounds default to half and twice the
    /// particle size.
    pub min_cluster_diameter: Option<usize>,
    pub max_cluster_diameter: Option<usize>,
    /// Erode the segmentation before labeling clusters. This trims the halo
    /// that windows overlapping a particle add around it, splits touching
    /// particles and removes specks.
    pub erosion: bool,
    /// Minimum distance between pick centers; defaults to `particle_size`.
    pub min_center_distance: Option<f64>,
    pub out_format: CoordFormat,
}

impl Default for PickerConfig {
    fn default() -> Self {
        Self {
            particle_size: 0,
            query_size: None,
            container_size: 225,
            tau1: 5.0,
            tau2: 75.0,
            bin_factor: 2,
            border_crop: 100,
            threshold_divisor: crate::response::DEFAULT_THRESHOLD_DIVISOR,
            svm_bandwidth: 1.0,
            svm_slack: 1.0,
            min_cluster_pixels: None,
            max_cluster_pixels: None,
            min_cluster_diameter: None,
            max_cluster_diameter: None,
            erosion: true,
            min_center_distance: None,
            out_format: CoordFormat::Box,
        }
    }
}

impl PickerConfig {
    pub fn new(particle_size: usize) -> Self {
        Self { particle_size, ..Self::default() }
    }

    /// Window side in binned pixels.
    pub fn window_size(&self) -> usize {
        self.query_size.unwrap_or_else(|| {
            let target = 0.8 * self.particle_size as f64 / self.bin_factor.max(1) as f64;
            ((target / 2.0).round() as usize * 2).max(2)
        })
    }

    fn binned(&self, v: f64) -> f64 {
        v / self.bin_factor as f64
    }

    /// Separation threshold in binned pixels.
    pub fn min_center_distance_binned(&self) -> f64 {
        self.binned(self.min_center_distance.unwrap_or(self.particle_size as f64))
    }

    /// Erosion radius in binned pixels when a minimum diameter is given:
    /// half of it. Otherwise the radius is chosen per micrograph by
    /// [`adaptive_erosion_radius`].
    pub fn fixed_erosion_radius(&self) -> Option<usize> {
        self.min_cluster_diameter
            .map(|d| (self.binned(d as f64) / 2.0).floor() as usize)
    }

    /// Cluster bounds applied after labeling (binned units). `erosion_radius`
    /// is the radius actually used, ignored when erosion is off.
    pub fn cluster_filter(&self, erosion_radius: usize) -> ClusterFilter {
        let b = self.bin_factor as f64;
        let to_binned = |d: usize| (d as f64 / b).round() as usize;
        let min_pixels = self.min_cluster_pixels.unwrap_or(0);
        let max_pixels = self.max_cluster_pixels.unwrap_or(usize::MAX);
        if self.erosion {
            // Clusters are measured after erosion, which trims `radius` from each side.
            let shrink = 2 * erosion_radius;
            let min_d = self.min_cluster_diameter.unwrap_or(self.particle_size / 2);
            let max_d = self.max_cluster_diameter.unwrap_or(2 * self.particle_size);
            ClusterFilter {
                min_pixels,
                max_pixels,
                min_diameter: to_binned(min_d).saturating_sub(shrink).max(1),
                max_diameter: to_binned(max_d).saturating_sub(shrink),
            }
        } else {
            ClusterFilter {
                min_pixels,
                max_pixels,
                min_diameter: self.min_cluster_diameter.map(to_binned).unwrap_or(0),
                max_diameter: self.max_cluster_diameter.map(to_binned).unwrap_or(usize::MAX),
            }
        }
    }

    pub fn svm_params<T: Real>(&self) -> SvmParams<T> {
        SvmParams { bandwidth: T::of(self.svm_bandwidth), slack: T::of(self.svm_slack), ..SvmParams::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.particle_size == 0 {
            return bad("particle size must be positive".into());
        }
        if self.bin_factor == 0 {
            return bad("bin factor must be >= 1".into());
        }
        if !(self.tau1 > 0.0 && self.tau1 <= self.tau2 && self.tau2 <= 100.0) {
            return bad(format!("need 0 < tau1 <= tau2 <= 100, got tau1 {} tau2 {}", self.tau1, self.tau2));
        }
        let n = self.window_size();
        if n < 2 || !n.is_multiple_of(2) {
            return bad(format!("query size {n} must be even and >= 2"));
        }
        if n > self.container_size {
            return bad(format!("query size {n} exceeds container size {}", self.container_size));
        }
        if !(self.threshold_divisor > 0.0) {
            return bad("threshold divisor must be positive".into());
        }
        if !(self.svm_bandwidth > 0.0 && self.svm_slack > 0.0) {
            return bad("svm bandwidth and slack must be positive".into());
        }
        if let (Some(lo), Some(hi)) = (self.min_cluster_pixels, self.max_cluster_pixels) {
            if lo > hi {
                return bad(format!("min cluster pixels {lo} > max {hi}"));
            }
        }
        if let (Some(lo), Some(hi)) = (self.min_cluster_diameter, self.max_cluster_diameter) {
            if lo > hi {
                return bad(format!("min cluster diameter {lo} > max {hi}"));
            }
        }
        Ok(())
    }
}

/// Erosion radius that strips the classifier halo around particles.
///
/// Pixels near a particle are labeled as particle too, because their windows
/// overlap it, so each particle shows up as a blob of some radius `rho`
/// larger than its own. `rho` is the median inscribed radius over blobs at
/// least half the particle radius deep, which stays put when a few blobs have
/// merged. Two blobs whose centers are `separation` apart touch along a neck
/// of half-width `sqrt(rho^2 - (separation/2)^2)`; eroding two pixels past
/// that splits them. The radius is at least the particle radius but always
/// leaves a typical blob a core of a few pixels.
pub fn adaptive_erosion_radius(mask: &Array2<bool>, particle_radius: f64, separation: f64) -> usize {
    let base = particle_radius.floor().max(0.0) as usize;
    let mut depths: Vec<f64> = inscribed_radii(mask).into_iter().filter(|&r| r >= particle_radius / 2.0).collect();
    if depths.is_empty() {
        return base;
    }
    depths.sort_by(f64::total_cmp);
    let rho = depths[depths.len() / 2];
    let neck = (rho * rho - separation * separation / 4.0).max(0.0).sqrt();
    let split = neck.ceil() as usize + 2;
    let keep_core = (rho - 3.0).floor().max(0.0) as usize;
    base.max(split).min(keep_core)
}

/// Per-stage wall-clock times.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timings {
    pub preprocess: Duration,
    pub references: Duration,
    pub scoring: Duration,
    pub training: Duration,
    pub classification: Duration,
    pub picking: Duration,
}

impl Timings {
    pub fn total(&self) -> Duration {
        self.preprocess + self.references + self.scoring + self.training + self.classification + self.picking
    }
}

/// Audit numbers for one micrograph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub window_size: usize,
    pub num_references: usize,
    pub num_queries: usize,
    pub threshold: f64,
    pub particle_windows: usize,
    pub noise_windows: usize,
    pub tau2_used: f64,
    pub support_vectors: usize,
    /// Zero when erosion is off.
    pub erosion_radius: usize,
    pub clusters: usize,
    pub clusters_after_filter: usize,
    pub picks: usize,
    pub timings: Timings,
}

/// Everything produced while picking one micrograph.
#[derive(Debug, Clone)]
pub struct PickRun<T: Real = f64> {
    pub picks: Vec<Pick>,
    /// The cropped, binned (and possibly phase-flipped) image that was picked.
    pub processed: Micrograph<T>,
    pub references: ReferenceSet<T>,
    pub scored: ScoredQueries<T>,
    pub training: TrainingSet<T>,
    pub model: SvmModel<T>,
    pub segmentation: SegmentationMask,
    /// Clusters that survived filtering and separation, binned coordinates.
    pub clusters: Vec<Cluster>,
    pub diagnostics: Diagnostics,
}

/// Crops and bins per `config`, then phase flips if `ctf` is given. The CTF
/// pixel size refers to original pixels.
pub fn preprocess<T: Real>(m: &Micrograph<T>, config: &PickerConfig, ctf: Option<&CtfParams<T>>) -> Result<Micrograph<T>> {
    let mut out = m.crop_border(config.border_crop)?.bin(config.bin_factor)?;
    if let Some(p) = ctf {
        let binned = CtfParams { pixel_size: p.pixel_size * T::of_usize(out.geometry.bin_factor), ..*p };
        out = phase_flip(&out, &binned)?;
    }
    Ok(out)
}

/// Runs the full pipeline on a raw micrograph.
pub fn pick_micrograph<T: Real>(m: &Micrograph<T>, config: &PickerConfig, ctf: Option<&CtfParams<T>>) -> Result<PickRun<T>> {
    config.validate()?;
    let n = config.window_size();
    let mut timings = Timings::default();

    let clock = Instant::now();
    let processed = preprocess(m, config, ctf)?;
    let ii = IntegralImages::new(&processed);
    timings.preprocess = clock.elapsed();

    let clock = Instant::now();
    let references = select_references_with(&processed, &ii, n, config.container_size)?;
    timings.references = clock.elapsed();

    let clock = Instant::now();
    let scored = score_micrograph_with(&processed, &references, n, T::of(config.threshold_divisor))?;
    timings.scoring = clock.elapsed();

    let clock = Instant::now();
    let outcome = build_training_set(&ii, &scored.queries, &scored.scores, config.tau1, config.tau2)?;
    if outcome.tau2 != config.tau2 {
        log::info!("tau2 lowered from {} to {} to find noise windows", config.tau2, outcome.tau2);
    }
    let model = train(&outcome.set, &config.svm_params())?;
    timings.training = clock.elapsed();

    let clock = Instant::now();
    let segmentation = classify_pixels_with(&ii, &model, n);
    timings.classification = clock.elapsed();

    let clock = Instant::now();
    let mut erosion_radius = 0;
    let labeled = if config.erosion {
        let filled = fill_holes(&fill_border(&segmentation, n).labels);
        erosion_radius = config.fixed_erosion_radius().unwrap_or_else(|| {
            adaptive_erosion_radius(
                &filled,
                config.binned(config.particle_size as f64) / 2.0,
                config.min_center_distance_binned(),
            )
        });
        erode(&filled, erosion_radius)
    } else {
        segmentation.labels.clone()
    };
    let all = connected_components(&labeled);
    let total_clusters = all.len();
    let kept = filter_clusters(all, &config.cluster_filter(erosion_radius));
    let after_filter = kept.len();
    let clusters = enforce_separation(kept, config.min_center_distance_binned());
    let picks = pick(&processed.geometry, &clusters, config.particle_size);
    timings.picking = clock.elapsed();

    let diagnostics = Diagnostics {
        window_size: n,
        num_references: references.len(),
        num_queries: scored.queries.len(),
        threshold: scored.scores.t.as_f64(),
        particle_windows: outcome.set.count(1),
        noise_windows: outcome.set.count(0),
        tau2_used: outcome.tau2,
        support_vectors: model.num_support_vectors(),
        erosion_radius,
        clusters: total_clusters,
        clusters_after_filter: after_filter,
        picks: picks.len(),
        timings,
    };
    log::info!(
        "B={} C={} t={:.4e} |S1|={} |S2|={} SV={} erosion={} clusters={}/{} picks={}",
        diagnostics.num_references,
        diagnostics.num_queries,
        diagnostics.threshold,
        diagnostics.particle_windows,
        diagnostics.noise_windows,
        diagnostics.support_vectors,
        diagnostics.erosion_radius,
        diagnostics.clusters_after_filter,
        diagnostics.clusters,
        diagnostics.picks
    );

    Ok(PickRun {
        picks,
        processed,
        references,
        scored,
        training: outcome.set,
        model,
        segmentation,
        clusters,
        diagnostics,
    })
}
