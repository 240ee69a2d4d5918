//! Summed-area tables for O(1) window mean and variance.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::micrograph::Micrograph;
use crate::scalar::Real;

/// Summed-area tables of intensities and squared intensities, with a zero
/// leading row and column. Always accumulated in `f64`.
#[derive(Debug, Clone)]
pub struct IntegralImages {
    sum: Array2<f64>,
    sum_sq: Array2<f64>,
}

impl IntegralImages {
    pub fn new<T: Real>(m: &Micrograph<T>) -> Self {
        Self::from_array(m.data())
    }

    pub fn from_array<T: Real>(data: &Array2<T>) -> Self {
        let (h, w) = data.dim();
        let mut sum = Array2::<f64>::zeros((h + 1, w + 1));
        let mut sum_sq = Array2::<f64>::zeros((h + 1, w + 1));
        for r in 0..h {
            let (mut row_s, mut row_q) = (0.0, 0.0);
            for c in 0..w {
                let v = data[[r, c]].as_f64();
                row_s += v;
                row_q += v * v;
                sum[[r + 1, c + 1]] = sum[[r, c + 1]] + row_s;
                sum_sq[[r + 1, c + 1]] = sum_sq[[r, c + 1]] + row_q;
            }
        }
        Self { sum, sum_sq }
    }

    /// (height, width) of the source image.
    pub fn dim(&self) -> (usize, usize) {
        let (h, w) = self.sum.dim();
        (h - 1, w - 1)
    }

    pub fn sum_table(&self) -> &Array2<f64> {
        &self.sum
    }

    pub fn sum_sq_table(&self) -> &Array2<f64> {
        &self.sum_sq
    }

    #[inline]
    fn rect(t: &Array2<f64>, r: usize, c: usize, h: usize, w: usize) -> f64 {
        t[[r + h, c + w]] - t[[r, c + w]] - t[[r + h, c]] + t[[r, c]]
    }

    /// Sum and sum of squares over the `h x w` rectangle at `(r, c)`.
    /// No bounds check beyond ndarray's.
    #[inline]
    pub fn rect_sums(&self, r: usize, c: usize, h: usize, w: usize) -> (f64, f64) {
        (
            Self::rect(&self.sum, r, c, h, w),
            Self::rect(&self.sum_sq, r, c, h, w),
        )
    }

    /// Mean and population variance of the `n x n` window at `(r, c)`,
    /// without bounds validation.
    #[inline]
    pub fn stats_unchecked(&self, r: usize, c: usize, n: usize) -> (f64, f64) {
        let (s, q) = self.rect_sums(r, c, n, n);
        let area = (n * n) as f64;
        let mean = s / area;
        (mean, (q / area - mean * mean).max(0.0))
    }

    /// Mean and population variance (clamped at 0) of the `n x n` window whose
    /// top-left corner is `top_left`.
    pub fn window_stats(&self, top_left: (usize, usize), n: usize) -> Result<(f64, f64)> {
        let (h, w) = self.dim();
        let (r, c) = top_left;
        if n == 0 || r + n > h || c + n > w {
            return Err(Error::OutOfBounds { row: r, col: c, side: n, height: h, width: w });
        }
        Ok(self.stats_unchecked(r, c, n))
    }
}
