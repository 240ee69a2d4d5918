//! Pixel classification, cluster filtering and conversion to picks.

use ndarray::Array2;
use rayon::prelude::*;

use crate::coords::Pick;
use crate::integral::IntegralImages;
use crate::micrograph::{Geometry, Micrograph};
pub use crate::morphology::{connected_components, erode, Cluster};
use crate::scalar::Real;
use crate::svm::SvmModel;

/// Per-pixel particle (true) / noise (false) labels, aligned with the binned
/// micrograph. A band of width `n/2` along every edge is never classified.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentationMask {
    pub labels: Array2<bool>,
}

impl SegmentationMask {
    pub fn dim(&self) -> (usize, usize) {
        self.labels.dim()
    }

    pub fn count(&self) -> usize {
        self.labels.iter().filter(|&&b| b).count()
    }
}

/// Rows (or columns) whose centered `n x n` window lies inside an axis of
/// length `len`: the window starts at `center - n/2`.
fn center_range(len: usize, n: usize) -> std::ops::Range<usize> {
    let half = n / 2;
    if len < n {
        return 0..0;
    }
    half..len - (n - half) + 1
}

/// Labels each pixel by classifying the (mean, std) of the `n x n` window
/// centered on it.
pub fn classify_pixels<T: Real>(m: &Micrograph<T>, model: &SvmModel<T>, n: usize) -> SegmentationMask {
    classify_pixels_with(&IntegralImages::new(m), model, n)
}

pub fn classify_pixels_with<T: Real>(ii: &IntegralImages, model: &SvmModel<T>, n: usize) -> SegmentationMask {
    let (h, w) = ii.dim();
    let mut labels = Array2::from_elem((h, w), false);
    let rows = center_range(h, n);
    let cols = center_range(w, n);
    let half = n / 2;
    if w == 0 {
        return SegmentationMask { labels };
    }
    labels
        .as_slice_mut()
        .expect("fresh array is contiguous")
        .par_chunks_mut(w)
        .enumerate()
        .filter(|(r, _)| rows.contains(r))
        .for_each(|(r, row)| {
            for c in cols.clone() {
                let (mean, var) = ii.stats_unchecked(r - half, c - half, n);
                row[c] = model.classify([T::of(mean), T::of(var.sqrt())]);
            }
        });
    SegmentationMask { labels }
}

/// Copies the nearest classified label into the unclassified band left by
/// [`classify_pixels`], so that a particle cut by the band keeps its full
/// extent under erosion.
pub fn fill_border(mask: &SegmentationMask, n: usize) -> SegmentationMask {
    let (h, w) = mask.dim();
    let (rows, cols) = (center_range(h, n), center_range(w, n));
    if rows.is_empty() || cols.is_empty() {
        return mask.clone();
    }
    let labels = Array2::from_shape_fn((h, w), |(r, c)| {
        let r = r.clamp(rows.start, rows.end - 1);
        let c = c.clamp(cols.start, cols.end - 1);
        mask.labels[[r, c]]
    });
    SegmentationMask { labels }
}

/// Size bounds on clusters; any bound can be opened by passing 0 / `usize::MAX`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClusterFilter {
    pub min_pixels: usize,
    pub max_pixels: usize,
    pub min_diameter: usize,
    pub max_diameter: usize,
}

impl ClusterFilter {
    pub const OPEN: ClusterFilter = ClusterFilter {
        min_pixels: 0,
        max_pixels: usize::MAX,
        min_diameter: 0,
        max_diameter: usize::MAX,
    };

    pub fn accepts(&self, c: &Cluster) -> bool {
        (self.min_pixels..=self.max_pixels).contains(&c.pixel_count)
            && (self.min_diameter..=self.max_diameter).contains(&c.max_diameter)
    }
}

impl Default for ClusterFilter {
    fn default() -> Self {
        Self::OPEN
    }
}

pub fn filter_clusters(clusters: Vec<Cluster>, filter: &ClusterFilter) -> Vec<Cluster> {
    clusters.into_iter().filter(|c| filter.accepts(c)).collect()
}

/// Drops every cluster whose centroid lies closer than `min_distance` to some
/// other cluster's centroid. Both members of a close pair go.
pub fn enforce_separation(clusters: Vec<Cluster>, min_distance: f64) -> Vec<Cluster> {
    let d2 = min_distance * min_distance;
    let mut close = vec![false; clusters.len()];
    for i in 0..clusters.len() {
        for j in i + 1..clusters.len() {
            let (a, b) = (clusters[i].centroid, clusters[j].centroid);
            if (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2) < d2 {
                close[i] = true;
                close[j] = true;
            }
        }
    }
    clusters
        .into_iter()
        .zip(close)
        .filter_map(|(c, drop)| (!drop).then_some(c))
        .collect()
}

/// Converts binned-coordinate clusters to picks in original pixels, dropping
/// any whose box would leave the original micrograph.
pub fn pick(geometry: &Geometry, clusters: &[Cluster], particle_size: usize) -> Vec<Pick> {
    let half = particle_size as f64 / 2.0;
    let (oh, ow) = (geometry.original_shape.0 as f64, geometry.original_shape.1 as f64);
    clusters
        .iter()
        .filter_map(|c| {
            let (row, col) = geometry.to_original(c.centroid.0, c.centroid.1);
            let inside = row - half >= 0.0 && col - half >= 0.0 && row + half <= oh && col + half <= ow;
            inside.then_some(Pick {
                center_x: col,
                center_y: row,
                box_size: particle_size,
                score: c.pixel_count as f64,
            })
        })
        .collect()
}
