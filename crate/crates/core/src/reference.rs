//! Container-based selection of reference windows.
//!
//! The micrograph is tiled into equal, non-overlapping square containers
//! anchored at the top-left corner. From each container the windows with the
//! lowest and highest mean and the lowest and highest variance are taken as
//! references, so `B = 4 * containers`.

use ndarray::{s, Array2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::integral::IntegralImages;
use crate::micrograph::Micrograph;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Criterion {
    MinMean,
    MaxMean,
    MinVar,
    MaxVar,
}

impl Criterion {
    pub const ALL: [Criterion; 4] = [
        Criterion::MinMean,
        Criterion::MaxMean,
        Criterion::MinVar,
        Criterion::MaxVar,
    ];
}

/// Where a reference window came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Provenance {
    /// Row-major index into the container grid.
    pub container: usize,
    pub criterion: Criterion,
    /// Top-left of the window in micrograph pixels.
    pub top_left: (usize, usize),
}

#[derive(Debug, Clone)]
pub struct ReferenceSet<T: Real = f64> {
    pub windows: Vec<Array2<T>>,
    pub provenance: Vec<Provenance>,
    pub window_size: usize,
    /// (rows, cols) of the container grid.
    pub grid: (usize, usize),
}

impl<T: Real> ReferenceSet<T> {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }
}

/// Positions of the four extremal windows inside one container, in
/// `Criterion::ALL` order. Ties go to the smallest (row, col).
pub fn extremal_windows(
    ii: &IntegralImages,
    origin: (usize, usize),
    container_size: usize,
    n: usize,
) -> [(usize, usize); 4] {
    let (r0, c0) = origin;
    let span = container_size - n + 1;
    let area = (n * n) as f64;
    // Rank on raw sums: the window sum orders means and area·Σx² − (Σx)²
    // orders variances, both without rounding on integer-valued images, so
    // exact ties stay exact.
    let keys = |r: usize, c: usize| {
        let (s1, s2) = ii.rect_sums(r, c, n, n);
        (s1, area * s2 - s1 * s1)
    };
    let mut best = [(r0, c0); 4];
    let (m0, v0) = keys(r0, c0);
    let mut vals = [m0, m0, v0, v0];
    for r in r0..r0 + span {
        for c in c0..c0 + span {
            let (mean, var) = keys(r, c);
            if mean < vals[0] {
                vals[0] = mean;
                best[0] = (r, c);
            }
            if mean > vals[1] {
                vals[1] = mean;
                best[1] = (r, c);
            }
            if var < vals[2] {
                vals[2] = var;
                best[2] = (r, c);
            }
            if var > vals[3] {
                vals[3] = var;
                best[3] = (r, c);
            }
        }
    }
    best
}

/// Builds the reference set for windows of side `n`.
pub fn select_references<T: Real>(
    m: &Micrograph<T>,
    n: usize,
    container_size: usize,
) -> Result<ReferenceSet<T>> {
    select_references_with(m, &IntegralImages::new(m), n, container_size)
}

/// As [`select_references`], reusing precomputed integral images of `m`.
pub fn select_references_with<T: Real>(
    m: &Micrograph<T>,
    ii: &IntegralImages,
    n: usize,
    container_size: usize,
) -> Result<ReferenceSet<T>> {
    if n == 0 {
        return Err(Error::InvalidArgument("window size must be positive".into()));
    }
    if container_size < n {
        return Err(Error::InvalidArgument(format!(
            "container size {container_size} smaller than window size {n}"
        )));
    }
    let (h, w) = m.dim();
    let grid = (h / container_size, w / container_size);
    if grid.0 == 0 || grid.1 == 0 {
        return Err(Error::TooSmall { height: h, width: w, what: "one container", size: container_size });
    }

    let per_container: Vec<[(usize, usize); 4]> = (0..grid.0 * grid.1)
        .into_par_iter()
        .map(|idx| {
            let origin = ((idx / grid.1) * container_size, (idx % grid.1) * container_size);
            extremal_windows(ii, origin, container_size, n)
        })
        .collect();

    let data = m.data();
    let mut windows = Vec::with_capacity(per_container.len() * 4);
    let mut provenance = Vec::with_capacity(per_container.len() * 4);
    for (container, positions) in per_container.into_iter().enumerate() {
        for (criterion, top_left) in Criterion::ALL.into_iter().zip(positions) {
            let (r, c) = top_left;
            windows.push(data.slice(s![r..r + n, c..c + n]).to_owned());
            provenance.push(Provenance { container, criterion, top_left });
        }
    }
    Ok(ReferenceSet { windows, provenance, window_size: n, grid })
}
