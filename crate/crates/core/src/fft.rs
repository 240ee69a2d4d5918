//! Planned 2D complex FFTs built from rustfft row and column passes.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::scalar::Real;

/// A reusable 2D transform of fixed shape and direction. Unnormalized in both
/// directions, like rustfft.
pub struct Fft2<T: Real> {
    height: usize,
    width: usize,
    row: Arc<dyn Fft<T>>,
    col: Arc<dyn Fft<T>>,
}

/// Per-thread working memory for [`Fft2::process`].
pub struct Fft2Scratch<T: Real> {
    transposed: Vec<Complex<T>>,
    fft: Vec<Complex<T>>,
}

impl<T: Real> Fft2<T> {
    pub fn new(planner: &mut FftPlanner<T>, height: usize, width: usize, direction: FftDirection) -> Self {
        Self {
            height,
            width,
            row: planner.plan_fft(width, direction),
            col: planner.plan_fft(height, direction),
        }
    }

    pub fn forward(height: usize, width: usize) -> Self {
        Self::new(&mut FftPlanner::new(), height, width, FftDirection::Forward)
    }

    pub fn inverse(height: usize, width: usize) -> Self {
        Self::new(&mut FftPlanner::new(), height, width, FftDirection::Inverse)
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn make_scratch(&self) -> Fft2Scratch<T> {
        let n = self
            .row
            .get_inplace_scratch_len()
            .max(self.col.get_inplace_scratch_len());
        Fft2Scratch {
            transposed: vec![Complex::default(); self.len()],
            fft: vec![Complex::default(); n],
        }
    }

    /// Transforms a row-major `height x width` buffer in place.
    pub fn process(&self, data: &mut [Complex<T>], scratch: &mut Fft2Scratch<T>) {
        assert_eq!(data.len(), self.len(), "buffer does not match transform shape");
        let (h, w) = (self.height, self.width);
        self.row.process_with_scratch(data, &mut scratch.fft);
        let t = &mut scratch.transposed;
        for r in 0..h {
            for c in 0..w {
                t[c * h + r] = data[r * w + c];
            }
        }
        self.col.process_with_scratch(t, &mut scratch.fft);
        for c in 0..w {
            for r in 0..h {
                data[r * w + c] = t[c * h + r];
            }
        }
    }
}
