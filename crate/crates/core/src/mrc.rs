//! MRC2014 reader and writer for single-section 2D images.
//!
//! Reads modes 0 (int8), 1 (int16), 2 (float32) and 6 (uint16); always writes
//! mode 2. The extended header (`nsymbt` bytes) is skipped on read.

use std::fs;
use std::io::Write;
use std::path::Path;

use byteorder::{BigEndian, ByteOrder, LittleEndian};
use ndarray::Array2;

use crate::error::{io_err, Error, Result};
use crate::micrograph::Micrograph;
use crate::scalar::Real;

pub const HEADER_LEN: usize = 1024;

const MACHST_LITTLE: [u8; 4] = [0x44, 0x44, 0x00, 0x00];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Endian {
    Little,
    Big,
}

#[derive(Debug, Clone, Copy)]
struct RawHeader {
    nx: i32,
    ny: i32,
    nz: i32,
    mode: i32,
    mx: i32,
    cella_x: f32,
    nsymbt: i32,
    endian: Endian,
}

fn read_i32(buf: &[u8], off: usize, e: Endian) -> i32 {
    match e {
        Endian::Little => LittleEndian::read_i32(&buf[off..off + 4]),
        Endian::Big => BigEndian::read_i32(&buf[off..off + 4]),
    }
}

fn read_f32(buf: &[u8], off: usize, e: Endian) -> f32 {
    match e {
        Endian::Little => LittleEndian::read_f32(&buf[off..off + 4]),
        Endian::Big => BigEndian::read_f32(&buf[off..off + 4]),
    }
}

fn plausible(buf: &[u8], e: Endian) -> bool {
    let dims = [0, 4, 8].map(|o| read_i32(buf, o, e));
    let mode = read_i32(buf, 12, e);
    dims.iter().all(|&d| d > 0 && d < 1 << 24) && (0..=16).contains(&mode)
}

fn parse_header(buf: &[u8]) -> Result<RawHeader> {
    if buf.len() < HEADER_LEN {
        return Err(Error::MalformedHeader(format!(
            "file is {} bytes, shorter than the {HEADER_LEN}-byte header",
            buf.len()
        )));
    }
    // Machine stamp first; fall back to a plausibility probe for files that
    // predate it or leave it zeroed.
    let endian = match buf[212] {
        0x44 | 0x41 => Endian::Little,
        0x11 => Endian::Big,
        _ if plausible(buf, Endian::Little) => Endian::Little,
        _ if plausible(buf, Endian::Big) => Endian::Big,
        _ => return Err(Error::MalformedHeader("cannot determine byte order".into())),
    };
    let h = RawHeader {
        nx: read_i32(buf, 0, endian),
        ny: read_i32(buf, 4, endian),
        nz: read_i32(buf, 8, endian),
        mode: read_i32(buf, 12, endian),
        mx: read_i32(buf, 28, endian),
        cella_x: read_f32(buf, 40, endian),
        nsymbt: read_i32(buf, 92, endian),
        endian,
    };
    if h.nx <= 0 || h.ny <= 0 || h.nz <= 0 {
        return Err(Error::MalformedHeader(format!(
            "non-positive dimensions nx={} ny={} nz={}",
            h.nx, h.ny, h.nz
        )));
    }
    if h.nsymbt < 0 {
        return Err(Error::MalformedHeader(format!("negative nsymbt {}", h.nsymbt)));
    }
    Ok(h)
}

fn bytes_per_value(mode: i32) -> Result<usize> {
    match mode {
        0 => Ok(1),
        1 | 6 => Ok(2),
        2 => Ok(4),
        other => Err(Error::UnsupportedMode(other)),
    }
}

/// Decodes an MRC2014 byte buffer.
pub fn decode_mrc<T: Real>(buf: &[u8]) -> Result<Micrograph<T>> {
    let h = parse_header(buf)?;
    let width = bytes_per_value(h.mode)?;
    if h.nz > 1 {
        return Err(Error::StackNotSupported(h.nz as usize));
    }
    let (nx, ny) = (h.nx as usize, h.ny as usize);
    let start = HEADER_LEN + h.nsymbt as usize;
    let len = nx * ny * width;
    let body = buf.get(start..start + len).ok_or_else(|| {
        Error::MalformedHeader(format!(
            "data section truncated: need {len} bytes after offset {start}, file has {}",
            buf.len()
        ))
    })?;
    let e = h.endian;
    let values: Vec<T> = match h.mode {
        0 => body.iter().map(|&b| T::of(b as i8 as f64)).collect(),
        1 => body
            .chunks_exact(2)
            .map(|c| {
                let v = match e {
                    Endian::Little => LittleEndian::read_i16(c),
                    Endian::Big => BigEndian::read_i16(c),
                };
                T::of(v as f64)
            })
            .collect(),
        6 => body
            .chunks_exact(2)
            .map(|c| {
                let v = match e {
                    Endian::Little => LittleEndian::read_u16(c),
                    Endian::Big => BigEndian::read_u16(c),
                };
                T::of(v as f64)
            })
            .collect(),
        _ => body
            .chunks_exact(4)
            .map(|c| T::of(read_f32(c, 0, e) as f64))
            .collect(),
    };
    // MRC stores x (columns) fastest, so the flat buffer is already row-major.
    let data = Array2::from_shape_vec((ny, nx), values)
        .map_err(|err| Error::MalformedHeader(err.to_string()))?;
    let mut m = Micrograph::new(data)?;
    if h.mx > 0 && h.cella_x > 0.0 {
        m.pixel_size = Some(h.cella_x as f64 / h.mx as f64);
    }
    Ok(m)
}

pub fn read_mrc<T: Real>(path: impl AsRef<Path>) -> Result<Micrograph<T>> {
    let path = path.as_ref();
    let buf = fs::read(path).map_err(io_err(path))?;
    decode_mrc(&buf)
}

/// Encodes a micrograph as a little-endian mode-2 MRC2014 file.
pub fn encode_mrc<T: Real>(m: &Micrograph<T>) -> Vec<u8> {
    let (ny, nx) = m.dim();
    let mut buf = vec![0u8; HEADER_LEN + nx * ny * 4];
    let (hdr, body) = buf.split_at_mut(HEADER_LEN);

    let values: Vec<f32> = m.data().iter().map(|v| v.as_f64() as f32).collect();
    let (mut min, mut max, mut sum) = (f32::INFINITY, f32::NEG_INFINITY, 0.0f64);
    for &v in &values {
        min = min.min(v);
        max = max.max(v);
        sum += v as f64;
    }
    let mean = sum / values.len() as f64;
    let rms = (values
        .iter()
        .map(|&v| (v as f64 - mean).powi(2))
        .sum::<f64>()
        / values.len() as f64)
        .sqrt();

    let put_i32 = |hdr: &mut [u8], off: usize, v: i32| LittleEndian::write_i32(&mut hdr[off..], v);
    let put_f32 = |hdr: &mut [u8], off: usize, v: f32| LittleEndian::write_f32(&mut hdr[off..], v);

    put_i32(hdr, 0, nx as i32);
    put_i32(hdr, 4, ny as i32);
    put_i32(hdr, 8, 1);
    put_i32(hdr, 12, 2);
    put_i32(hdr, 28, nx as i32);
    put_i32(hdr, 32, ny as i32);
    put_i32(hdr, 36, 1);
    let apix = m.effective_pixel_size().unwrap_or(1.0) as f32;
    put_f32(hdr, 40, apix * nx as f32);
    put_f32(hdr, 44, apix * ny as f32);
    put_f32(hdr, 48, apix);
    for off in [52, 56, 60] {
        put_f32(hdr, off, 90.0);
    }
    put_i32(hdr, 64, 1);
    put_i32(hdr, 68, 2);
    put_i32(hdr, 72, 3);
    put_f32(hdr, 76, min);
    put_f32(hdr, 80, max);
    put_f32(hdr, 84, mean as f32);
    put_i32(hdr, 88, 0);
    put_i32(hdr, 92, 0);
    hdr[104..108].copy_from_slice(b"MRCO");
    put_i32(hdr, 108, 20140);
    hdr[208..212].copy_from_slice(b"MAP ");
    hdr[212..216].copy_from_slice(&MACHST_LITTLE);
    put_f32(hdr, 216, rms as f32);
    put_i32(hdr, 220, 0);

    for (chunk, v) in body.chunks_exact_mut(4).zip(values) {
        LittleEndian::write_f32(chunk, v);
    }
    buf
}

pub fn write_mrc<T: Real>(m: &Micrograph<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let buf = encode_mrc(m);
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(&buf).map_err(io_err(path))
}
