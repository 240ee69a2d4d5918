//! 8-bit PGM renderings for visual inspection.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::coords::Pick;
use crate::error::{io_err, Result};
use crate::micrograph::Micrograph;
use crate::scalar::Real;

fn encode_pgm(pixels: &Array2<u8>) -> Vec<u8> {
    let (h, w) = pixels.dim();
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(pixels.iter());
    out
}

/// Linear contrast stretch between the 0.5th and 99.5th percentiles.
fn to_gray<T: Real>(m: &Micrograph<T>) -> Array2<u8> {
    let mut sorted: Vec<f64> = m.data().iter().map(|v| v.as_f64()).collect();
    sorted.sort_by(f64::total_cmp);
    let at = |q: f64| sorted[((sorted.len() - 1) as f64 * q) as usize];
    let (lo, hi) = (at(0.005), at(0.995));
    let span = if hi > lo { hi - lo } else { 1.0 };
    m.data().mapv(|v| (((v.as_f64() - lo) / span).clamp(0.0, 1.0) * 255.0).round() as u8)
}

/// The processed micrograph with pick boxes drawn in white.
pub fn render_picks<T: Real>(m: &Micrograph<T>, picks: &[Pick]) -> Array2<u8> {
    let mut img = to_gray(m);
    let (h, w) = img.dim();
    let g = m.geometry;
    for p in picks {
        let (r, c) = g.to_binned(p.center_y, p.center_x);
        let half = p.box_size as f64 / (2.0 * g.bin_factor as f64);
        let clampr = |v: f64| v.round().clamp(0.0, (h - 1) as f64) as usize;
        let clampc = |v: f64| v.round().clamp(0.0, (w - 1) as f64) as usize;
        let (r0, r1) = (clampr(r - half), clampr(r + half));
        let (c0, c1) = (clampc(c - half), clampc(c + half));
        for cc in c0..=c1 {
            img[[r0, cc]] = 255;
            img[[r1, cc]] = 255;
        }
        for rr in r0..=r1 {
            img[[rr, c0]] = 255;
            img[[rr, c1]] = 255;
        }
    }
    img
}

pub fn write_pick_overlay<T: Real>(m: &Micrograph<T>, picks: &[Pick], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(&render_picks(m, picks))).map_err(io_err(path))
}

pub fn write_mask_pgm(mask: &Array2<bool>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let pixels = mask.mapv(|b| if b { 255u8 } else { 0 });
    fs::write(path, encode_pgm(&pixels)).map_err(io_err(path))
}
