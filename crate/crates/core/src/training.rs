//! Training sets for the particle/noise classifier, derived from query scores.

use ndarray::{s, Array2};

use crate::error::{ClassKind, Error, Result};
use crate::integral::IntegralImages;
use crate::micrograph::Micrograph;
use crate::response::{QuerySet, ScoreField};
use crate::scalar::Real;

/// Minimum number of noise windows the τ₂ auto-lowering aims for.
pub const MIN_NOISE_WINDOWS: usize = 50;
/// τ₂ decrement, in percentage points, per auto-lowering step.
pub const TAU2_STEP: f64 = 5.0;

/// Per-feature z-scoring parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Standardization<T: Real = f64> {
    pub mean: [T; 2],
    pub std: [T; 2],
}

impl<T: Real> Standardization<T> {
    pub fn identity() -> Self {
        Self { mean: [T::zero(); 2], std: [T::one(); 2] }
    }

    /// Fits over `features`. A constant column keeps unit scale.
    pub fn fit(features: &[[T; 2]]) -> Self {
        let n = T::of_usize(features.len().max(1));
        let mut mean = [T::zero(); 2];
        let mut std = [T::zero(); 2];
        for j in 0..2 {
            mean[j] = features.iter().map(|f| f[j]).sum::<T>() / n;
            let var = features.iter().map(|f| (f[j] - mean[j]).powi(2)).sum::<T>() / n;
            std[j] = if var > T::zero() { var.sqrt() } else { T::one() };
        }
        Self { mean, std }
    }

    #[inline]
    pub fn apply(&self, x: [T; 2]) -> [T; 2] {
        [
            (x[0] - self.mean[0]) / self.std[0],
            (x[1] - self.mean[1]) / self.std[1],
        ]
    }
}

/// Labeled (mean, std) features of non-overlapping particle and noise windows.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet<T: Real = f64> {
    /// Raw (mean, standard deviation) per window.
    pub features: Vec<[T; 2]>,
    /// 1 = particle, 0 = noise.
    pub labels: Vec<u8>,
    /// Top-left corner of each window.
    pub positions: Vec<(usize, usize)>,
    pub window_size: usize,
    pub standardization: Standardization<T>,
}

impl<T: Real> TrainingSet<T> {
    /// Builds a set from raw features; standardization is fitted over all of them.
    pub fn from_features(features: Vec<[T; 2]>, labels: Vec<u8>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::InvalidArgument("features and labels differ in length".into()));
        }
        if !labels.contains(&1) {
            return Err(Error::EmptyClass(ClassKind::Particle));
        }
        if !labels.contains(&0) {
            return Err(Error::EmptyClass(ClassKind::Noise));
        }
        let standardization = Standardization::fit(&features);
        let positions = vec![(0, 0); features.len()];
        Ok(Self { features, labels, positions, window_size: 0, standardization })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn count(&self, label: u8) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn standardized(&self) -> Vec<[T; 2]> {
        self.features.iter().map(|&f| self.standardization.apply(f)).collect()
    }
}

/// Number of queries in the top `tau` percent: ⌈τ·C/100⌉.
pub fn top_count(total: usize, tau: f64) -> usize {
    let raw = (tau * total as f64 / 100.0).ceil() as usize;
    raw.min(total)
}

/// Query indices ordered by descending score, ties by ascending index.
pub fn ranked_queries<T: Real>(scores: &ScoreField<T>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.k.len()).collect();
    order.sort_by(|&a, &b| scores.k[b].cmp(&scores.k[a]).then(a.cmp(&b)));
    order
}

fn check_tau(tau: f64, name: &str) -> Result<()> {
    if tau > 0.0 && tau <= 100.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} = {tau} outside (0, 100]")))
    }
}

fn union_of(queries: &QuerySet, indices: &[usize]) -> Array2<bool> {
    let n = queries.window_size;
    let mut mask = Array2::from_elem(queries.image_dim, false);
    for &i in indices {
        let (r, c) = queries.positions[i];
        mask.slice_mut(s![r..r + n, c..c + n]).fill(true);
    }
    mask
}

/// Union of the windows of the top-τ₁ percent of queries.
pub fn particle_regions<T: Real>(queries: &QuerySet, scores: &ScoreField<T>, tau1: f64) -> Result<Array2<bool>> {
    check_tau(tau1, "tau1")?;
    let order = ranked_queries(scores);
    let top = top_count(queries.len(), tau1);
    Ok(union_of(queries, &order[..top]))
}

/// Pixels covered by some query but by none of the top-τ₂ percent.
pub fn noise_regions<T: Real>(queries: &QuerySet, scores: &ScoreField<T>, tau2: f64) -> Result<Array2<bool>> {
    check_tau(tau2, "tau2")?;
    let order = ranked_queries(scores);
    let top = top_count(queries.len(), tau2);
    let covered = union_of(queries, &order);
    let likely = union_of(queries, &order[..top]);
    Ok(Array2::from_shape_fn(queries.image_dim, |ix| covered[ix] && !likely[ix]))
}

/// Top-left corners of stride-`n` grid windows lying entirely inside `mask`.
pub fn grid_windows_in(mask: &Array2<bool>, n: usize) -> Vec<(usize, usize)> {
    let (h, w) = mask.dim();
    if n == 0 || h < n || w < n {
        return Vec::new();
    }
    let counts = IntegralImages::from_array(&mask.mapv(|b| if b { 1.0f64 } else { 0.0 }));
    let full = (n * n) as f64;
    let mut out = Vec::new();
    for r in (0..=h - n).step_by(n) {
        for c in (0..=w - n).step_by(n) {
            if counts.rect_sums(r, c, n, n).0 == full {
                out.push((r, c));
            }
        }
    }
    out
}

/// Extracts labeled (mean, std) features from the two masks.
pub fn extract_training<T: Real>(
    m: &Micrograph<T>,
    particle_mask: &Array2<bool>,
    noise_mask: &Array2<bool>,
    n: usize,
) -> Result<TrainingSet<T>> {
    extract_training_with(&IntegralImages::new(m), m.dim(), particle_mask, noise_mask, n)
}

pub fn extract_training_with<T: Real>(
    ii: &IntegralImages,
    dim: (usize, usize),
    particle_mask: &Array2<bool>,
    noise_mask: &Array2<bool>,
    n: usize,
) -> Result<TrainingSet<T>> {
    for mask in [particle_mask, noise_mask] {
        if mask.dim() != dim {
            return Err(Error::ShapeMismatch { expected: dim, actual: mask.dim() });
        }
    }
    let particles = grid_windows_in(particle_mask, n);
    if particles.is_empty() {
        return Err(Error::EmptyClass(ClassKind::Particle));
    }
    let noise = grid_windows_in(noise_mask, n);
    if noise.is_empty() {
        return Err(Error::EmptyClass(ClassKind::Noise));
    }
    let mut features = Vec::with_capacity(particles.len() + noise.len());
    let mut labels = Vec::with_capacity(features.capacity());
    let mut positions = Vec::with_capacity(features.capacity());
    for (label, windows) in [(1u8, &particles), (0u8, &noise)] {
        for &(r, c) in windows {
            let (mean, var) = ii.stats_unchecked(r, c, n);
            features.push([T::of(mean), T::of(var.sqrt())]);
            labels.push(label);
            positions.push((r, c));
        }
    }
    let standardization = Standardization::fit(&features);
    Ok(TrainingSet { features, labels, positions, window_size: n, standardization })
}

/// Outcome of [`build_training_set`].
#[derive(Debug, Clone)]
pub struct TrainingOutcome<T: Real = f64> {
    pub set: TrainingSet<T>,
    /// τ₂ actually used after any auto-lowering.
    pub tau2: f64,
}

/// Builds the training set, lowering τ₂ in steps of [`TAU2_STEP`] (never below
/// τ₁) until at least [`MIN_NOISE_WINDOWS`] noise windows exist. If the floor
/// is reached with fewer, the last non-empty attempt is used.
pub fn build_training_set<T: Real>(
    ii: &IntegralImages,
    queries: &QuerySet,
    scores: &ScoreField<T>,
    tau1: f64,
    tau2: f64,
) -> Result<TrainingOutcome<T>> {
    check_tau(tau1, "tau1")?;
    check_tau(tau2, "tau2")?;
    if tau1 > tau2 {
        return Err(Error::InvalidArgument(format!("tau1 {tau1} exceeds tau2 {tau2}")));
    }
    let n = queries.window_size;
    let particle = particle_regions(queries, scores, tau1)?;
    let mut tau = tau2;
    let mut fallback = None;
    loop {
        let noise = noise_regions(queries, scores, tau)?;
        match extract_training_with::<T>(ii, queries.image_dim, &particle, &noise, n) {
            Ok(set) => {
                if set.count(0) >= MIN_NOISE_WINDOWS {
                    return Ok(TrainingOutcome { set, tau2: tau });
                }
                fallback = Some(TrainingOutcome { set, tau2: tau });
            }
            Err(Error::EmptyClass(ClassKind::Noise)) => {}
            Err(e) => return Err(e),
        }
        if tau <= tau1 {
            break;
        }
        tau = (tau - TAU2_STEP).max(tau1);
        log::debug!("lowering tau2 to {tau}");
    }
    fallback.ok_or(Error::EmptyClass(ClassKind::Noise))
}
