//! Contrast transfer function evaluation and phase flipping.

use std::fs;
use std::path::Path;

use rustfft::num_complex::Complex;

use crate::error::{io_err, Error, Result};
use crate::fft::Fft2;
use crate::micrograph::Micrograph;
use crate::scalar::Real;

/// Isotropic CTF parameters. All lengths in Å.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CtfParams<T: Real = f64> {
    pub defocus: T,
    pub wavelength: T,
    pub spherical_aberration: T,
    pub amplitude_contrast: T,
    /// Å per pixel of the image the CTF is applied to.
    pub pixel_size: T,
}

impl<T: Real> CtfParams<T> {
    pub fn validate(&self) -> Result<()> {
        let a = self.amplitude_contrast;
        if !(self.wavelength > T::zero()) {
            return Err(Error::InvalidArgument("wavelength must be positive".into()));
        }
        if !(self.pixel_size > T::zero()) {
            return Err(Error::InvalidArgument("pixel size must be positive".into()));
        }
        if !(a >= T::zero() && a <= T::one()) {
            return Err(Error::InvalidArgument(format!(
                "amplitude contrast {a} outside [0, 1]"
            )));
        }
        Ok(())
    }

    /// Phase shift χ(g) for radial frequency `g` in 1/Å.
    pub fn chi(&self, g: T) -> T {
        let g2 = g * g;
        let lambda = self.wavelength;
        T::PI() * lambda * g2 * self.defocus
            - T::FRAC_PI_2() * self.spherical_aberration * lambda * lambda * lambda * g2 * g2
    }

    /// CTF(g) = −√(1−A²)·sin χ − A·cos χ.
    pub fn value(&self, g: T) -> T {
        let chi = self.chi(g);
        let a = self.amplitude_contrast;
        -(T::one() - a * a).sqrt() * chi.sin() - a * chi.cos()
    }

    /// Reads a `key=value` sidecar with keys `defocus_A`, `lambda_A`, `cs_A`,
    /// `amplitude_contrast` and `pixel_size_A`.
    pub fn parse_sidecar(text: &str) -> Result<Self> {
        let mut fields = [None; 5];
        const KEYS: [&str; 5] = ["defocus_A", "lambda_A", "cs_A", "amplitude_contrast", "pixel_size_A"];
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("sidecar line {}: expected key=value", lineno + 1)))?;
            let key = key.trim();
            let idx = KEYS
                .iter()
                .position(|k| *k == key)
                .ok_or_else(|| Error::Parse(format!("sidecar line {}: unknown key '{key}'", lineno + 1)))?;
            let v: f64 = value
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("sidecar key {key}: {e}")))?;
            fields[idx] = Some(T::of(v));
        }
        let get = |i: usize| fields[i].ok_or_else(|| Error::Parse(format!("sidecar missing {}", KEYS[i])));
        let p = Self {
            defocus: get(0)?,
            wavelength: get(1)?,
            spherical_aberration: get(2)?,
            amplitude_contrast: get(3)?,
            pixel_size: get(4)?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn read_sidecar(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::parse_sidecar(&text)
    }
}

/// Relativistic electron wavelength in Å for an accelerating voltage in kV.
pub fn wavelength_from_kv(kv: f64) -> f64 {
    let v = kv * 1e3;
    12.264_259_661 / (v * (1.0 + 0.978_475_5e-6 * v)).sqrt()
}

/// Signed spatial frequency (cycles/pixel) of FFT bin `k` in a length-`n` axis.
fn bin_frequency(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64 / n as f64
    } else {
        k as f64 / n as f64 - 1.0
    }
}

/// Multiplies the spectrum of `m` by sign(CTF(|g|)), sign(0) = +1.
///
/// `p.pixel_size` must describe the pixels of `m` as they are now (i.e. after
/// any binning).
pub fn phase_flip<T: Real>(m: &Micrograph<T>, p: &CtfParams<T>) -> Result<Micrograph<T>> {
    p.validate()?;
    let (h, w) = m.dim();
    let mut buf: Vec<Complex<T>> = m.data().iter().map(|&v| Complex::new(v, T::zero())).collect();

    let fwd = Fft2::<T>::forward(h, w);
    let mut scratch = fwd.make_scratch();
    fwd.process(&mut buf, &mut scratch);

    let apix = p.pixel_size.as_f64();
    for ky in 0..h {
        let fy = bin_frequency(ky, h) / apix;
        for kx in 0..w {
            let fx = bin_frequency(kx, w) / apix;
            let g = T::of((fx * fx + fy * fy).sqrt());
            if p.value(g) < T::zero() {
                let c = &mut buf[ky * w + kx];
                *c = -*c;
            }
        }
    }

    let inv = Fft2::<T>::inverse(h, w);
    inv.process(&mut buf, &mut scratch);
    let norm = T::of_usize(h * w);
    let data = ndarray::Array2::from_shape_fn((h, w), |(r, c)| buf[r * w + c].re / norm);
    Ok(m.with_data(data))
}
