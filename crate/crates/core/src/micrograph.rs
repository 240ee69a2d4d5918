//! In-memory micrograph with the bookkeeping needed to map binned pixel
//! coordinates back to the original detector frame.

use ndarray::{s, Array2};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Placement of a (possibly cropped and binned) image inside the original
/// micrograph.
///
/// `original = origin_offset + bin_factor * binned` on both axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Geometry {
    /// (row, col) offset in original pixels.
    pub origin_offset: (usize, usize),
    pub bin_factor: usize,
    /// (rows, cols) of the original unbinned, uncropped micrograph.
    pub original_shape: (usize, usize),
}

impl Geometry {
    pub fn identity(shape: (usize, usize)) -> Self {
        Self {
            origin_offset: (0, 0),
            bin_factor: 1,
            original_shape: shape,
        }
    }

    /// Maps a binned (row, col) coordinate to original pixels.
    pub fn to_original(&self, row: f64, col: f64) -> (f64, f64) {
        let b = self.bin_factor as f64;
        (
            self.origin_offset.0 as f64 + b * row,
            self.origin_offset.1 as f64 + b * col,
        )
    }

    /// Inverse of [`Geometry::to_original`].
    pub fn to_binned(&self, row: f64, col: f64) -> (f64, f64) {
        let b = self.bin_factor as f64;
        (
            (row - self.origin_offset.0 as f64) / b,
            (col - self.origin_offset.1 as f64) / b,
        )
    }
}

/// A 2D real-valued image, row-major `height x width`.
#[derive(Debug, Clone, PartialEq)]
pub struct Micrograph<T: Real = f64> {
    data: Array2<T>,
    /// Physical pixel size in Å of the *original* pixels, if known.
    pub pixel_size: Option<f64>,
    pub geometry: Geometry,
}

impl<T: Real> Micrograph<T> {
    /// Wraps `data` as a freshly loaded micrograph (no crop, no binning).
    pub fn new(data: Array2<T>) -> Result<Self> {
        let (h, w) = data.dim();
        if h == 0 || w == 0 {
            return Err(Error::InvalidArgument(format!("empty micrograph {h}x{w}")));
        }
        if let Some(((row, col), _)) = data.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { row, col });
        }
        Ok(Self {
            data,
            pixel_size: None,
            geometry: Geometry::identity((h, w)),
        })
    }

    pub fn from_vec(height: usize, width: usize, values: Vec<T>) -> Result<Self> {
        let data = Array2::from_shape_vec((height, width), values)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Self::new(data)
    }

    pub fn with_pixel_size(mut self, pixel_size: f64) -> Self {
        self.pixel_size = Some(pixel_size);
        self
    }

    /// Same metadata, new pixel data of the same shape.
    pub(crate) fn with_data(&self, data: Array2<T>) -> Self {
        debug_assert_eq!(data.dim(), self.data.dim());
        Self {
            data,
            pixel_size: self.pixel_size,
            geometry: self.geometry,
        }
    }

    pub fn data(&self) -> &Array2<T> {
        &self.data
    }

    pub fn into_data(self) -> Array2<T> {
        self.data
    }

    pub fn height(&self) -> usize {
        self.data.nrows()
    }

    pub fn width(&self) -> usize {
        self.data.ncols()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.data.dim()
    }

    /// Pixel size of the current (binned) pixels.
    pub fn effective_pixel_size(&self) -> Option<f64> {
        self.pixel_size.map(|p| p * self.geometry.bin_factor as f64)
    }

    /// Removes `margin` pixels from every side.
    pub fn crop_border(&self, margin: usize) -> Result<Self> {
        let (h, w) = self.dim();
        if 2 * margin >= h.min(w) {
            return Err(Error::InvalidArgument(format!(
                "crop margin {margin} too large for {h}x{w} micrograph"
            )));
        }
        if margin == 0 {
            return Ok(self.clone());
        }
        let data = self
            .data
            .slice(s![margin..h - margin, margin..w - margin])
            .to_owned();
        let step = margin * self.geometry.bin_factor;
        let mut geometry = self.geometry;
        geometry.origin_offset.0 += step;
        geometry.origin_offset.1 += step;
        Ok(Self {
            data,
            pixel_size: self.pixel_size,
            geometry,
        })
    }

    /// Block-averages `factor x factor` tiles; incomplete trailing rows and
    /// columns are dropped.
    pub fn bin(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::InvalidArgument("bin factor must be >= 1".into()));
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let (h, w) = self.dim();
        let (bh, bw) = (h / factor, w / factor);
        if bh == 0 || bw == 0 {
            return Err(Error::TooSmall {
                height: h,
                width: w,
                what: "bin factor",
                size: factor,
            });
        }
        let norm = T::of_usize(factor * factor);
        let data = Array2::from_shape_fn((bh, bw), |(r, c)| {
            let block = self.data.slice(s![
                r * factor..(r + 1) * factor,
                c * factor..(c + 1) * factor
            ]);
            block.iter().copied().sum::<T>() / norm
        });
        let mut geometry = self.geometry;
        geometry.bin_factor *= factor;
        Ok(Self {
            data,
            pixel_size: self.pixel_size,
            geometry,
        })
    }

    /// Converts the pixel data to another scalar type.
    pub fn cast<U: Real>(&self) -> Micrograph<U> {
        Micrograph {
            data: self.data.mapv(|v| U::of(v.as_f64())),
            pixel_size: self.pixel_size,
            geometry: self.geometry,
        }
    }
}
