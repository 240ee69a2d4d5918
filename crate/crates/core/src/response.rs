//! Normalized cross-correlation response signals and query scores.
//!
//! For a query window `g` and references `f_1..f_B`, the response signal holds,
//! per reference, the maximum over all circular offsets of the mean-subtracted
//! cross-correlation map. A query's score is the number of entries above a
//! threshold derived from the whole micrograph's signals.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{s, Array2, ArrayView2};
use rayon::prelude::*;
use rustfft::num_complex::Complex;

use crate::error::{io_err, Error, Result};
use crate::fft::{Fft2, Fft2Scratch};
use crate::micrograph::Micrograph;
use crate::reference::ReferenceSet;
use crate::scalar::Real;

/// Default divisor in the threshold rule `t = min + (max - min) / divisor`.
pub const DEFAULT_THRESHOLD_DIVISOR: f64 = 20.0;

/// Circular cross-correlation `c(x, y) = Σ f(x', y') g(x + x', y + y')`, indices
/// modulo the window size, via 2D FFTs.
pub fn cross_correlate<T: Real>(f: &Array2<T>, g: &Array2<T>) -> Result<Array2<T>> {
    if f.dim() != g.dim() {
        return Err(Error::ShapeMismatch { expected: f.dim(), actual: g.dim() });
    }
    let (h, w) = f.dim();
    let fwd = Fft2::<T>::forward(h, w);
    let inv = Fft2::<T>::inverse(h, w);
    let mut scratch = fwd.make_scratch();
    let mut fs = to_complex(f.view());
    let mut gs = to_complex(g.view());
    fwd.process(&mut fs, &mut scratch);
    fwd.process(&mut gs, &mut scratch);
    for (a, b) in gs.iter_mut().zip(&fs) {
        *a *= b.conj();
    }
    inv.process(&mut gs, &mut scratch);
    let norm = T::of_usize(h * w);
    Ok(Array2::from_shape_fn((h, w), |(r, c)| gs[r * w + c].re / norm))
}

/// Subtracts the map's mean from every entry.
pub fn normalize_cc<T: Real>(c: &Array2<T>) -> Array2<T> {
    if c.is_empty() {
        return c.clone();
    }
    let mean = c.iter().copied().sum::<T>() / T::of_usize(c.len());
    c.mapv(|v| v - mean)
}

fn to_complex<T: Real>(a: ArrayView2<T>) -> Vec<Complex<T>> {
    a.iter().map(|&v| Complex::new(v, T::zero())).collect()
}

/// Maximal normalized cross-correlations of one query against every reference.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseSignal<T: Real = f64> {
    pub values: Vec<T>,
    pub query_index: usize,
}

/// Response signal of a single query window, computed one reference at a time.
///
/// References are used as-is; the only normalization is the per-map mean
/// subtraction.
pub fn response_signal<T: Real>(g: &Array2<T>, refs: &ReferenceSet<T>) -> Result<ResponseSignal<T>> {
    let values = refs
        .windows
        .iter()
        .map(|f| {
            let c = normalize_cc(&cross_correlate(f, g)?);
            Ok(c.iter().copied().fold(T::neg_infinity(), T::max))
        })
        .collect::<Result<Vec<T>>>()?;
    Ok(ResponseSignal { values, query_index: 0 })
}

/// `t = min + (max - min) / divisor` over every entry of every signal.
pub fn compute_threshold<T: Real>(signals: &[ResponseSignal<T>]) -> Result<T> {
    compute_threshold_with(signals, T::of(DEFAULT_THRESHOLD_DIVISOR))
}

pub fn compute_threshold_with<T: Real>(signals: &[ResponseSignal<T>], divisor: T) -> Result<T> {
    let (min, max) = extrema(signals.iter().flat_map(|s| s.values.iter().copied()))
        .ok_or_else(|| Error::InvalidArgument("no response values to threshold".into()))?;
    threshold_from_extrema(min, max, divisor)
}

fn threshold_from_extrema<T: Real>(min: T, max: T, divisor: T) -> Result<T> {
    if !(divisor > T::zero()) {
        return Err(Error::InvalidArgument(format!("threshold divisor {divisor} must be positive")));
    }
    Ok((max - min) / divisor + min)
}

fn extrema<T: Real>(values: impl Iterator<Item = T>) -> Option<(T, T)> {
    values.fold(None, |acc, v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

/// Number of entries strictly above `t`.
pub fn score<T: Real>(signal: &ResponseSignal<T>, t: T) -> usize {
    count_above(&signal.values, t)
}

fn count_above<T: Real>(values: &[T], t: T) -> usize {
    values.iter().filter(|&&v| v > t).count()
}

/// Query windows on a stride-`n/2` grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuerySet {
    /// Top-left corners, row-major over the grid.
    pub positions: Vec<(usize, usize)>,
    pub window_size: usize,
    /// Distinct row and column offsets; `positions` is their product.
    pub row_offsets: Vec<usize>,
    pub col_offsets: Vec<usize>,
    /// Shape of the micrograph the grid was laid on.
    pub image_dim: (usize, usize),
}

/// `0, n/2, 2(n/2), ...` up to `len - n`, plus `len - n` itself when the
/// stride does not land there.
fn axis_offsets(len: usize, n: usize) -> Vec<usize> {
    let stride = n / 2;
    let last = len - n;
    let mut out: Vec<usize> = (0..=last).step_by(stride).collect();
    if *out.last().expect("at least offset 0") != last {
        out.push(last);
    }
    out
}

impl QuerySet {
    pub fn new(height: usize, width: usize, n: usize) -> Result<Self> {
        if n < 2 || !n.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!("query window size {n} must be even and >= 2")));
        }
        if height < n || width < n {
            return Err(Error::TooSmall { height, width, what: "the query window", size: n });
        }
        let row_offsets = axis_offsets(height, n);
        let col_offsets = axis_offsets(width, n);
        let positions = row_offsets
            .iter()
            .flat_map(|&r| col_offsets.iter().map(move |&c| (r, c)))
            .collect();
        Ok(Self { positions, window_size: n, row_offsets, col_offsets, image_dim: (height, width) })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// (rows, cols) of the query grid.
    pub fn grid(&self) -> (usize, usize) {
        (self.row_offsets.len(), self.col_offsets.len())
    }

    pub fn window<'a, T: Real>(&self, m: &'a Micrograph<T>, index: usize) -> ArrayView2<'a, T> {
        let (r, c) = self.positions[index];
        let n = self.window_size;
        m.data().slice(s![r..r + n, c..c + n])
    }
}

/// Per-query scores plus the threshold that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreField<T: Real = f64> {
    pub k: Vec<usize>,
    pub t: T,
    /// Smallest and largest response entry over the micrograph.
    pub min: T,
    pub max: T,
    /// Number of references (upper bound of every `k`).
    pub num_references: usize,
}

impl<T: Real> ScoreField<T> {
    /// The scores laid out on the query grid as CSV (one grid row per line).
    pub fn grid_csv(&self, queries: &QuerySet) -> String {
        let (_, cols) = queries.grid();
        let mut out = String::new();
        for row in self.k.chunks(cols) {
            let line: Vec<String> = row.iter().map(|k| k.to_string()).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }

    pub fn write_grid_csv(&self, queries: &QuerySet, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.grid_csv(queries)).map_err(io_err(path))
    }
}

/// Reference spectra planned once and reused for every query.
pub struct ResponseEngine<T: Real> {
    n: usize,
    fwd: Fft2<T>,
    inv: Fft2<T>,
    /// Conjugated reference spectra with the DC bin zeroed, so the inverse
    /// transform yields the mean-subtracted correlation map directly.
    ref_spectra: Vec<Vec<Complex<T>>>,
}

struct Workspace<T: Real> {
    query: Vec<Complex<T>>,
    product: Vec<Complex<T>>,
    scratch: Fft2Scratch<T>,
}

impl<T: Real> ResponseEngine<T> {
    pub fn new(refs: &ReferenceSet<T>) -> Self {
        let n = refs.window_size;
        let fwd = Fft2::<T>::forward(n, n);
        let inv = Fft2::<T>::inverse(n, n);
        let mut scratch = fwd.make_scratch();
        let ref_spectra = refs
            .windows
            .iter()
            .map(|f| {
                let mut spec = to_complex(f.view());
                fwd.process(&mut spec, &mut scratch);
                spec[0] = Complex::default();
                spec.iter_mut().for_each(|v| *v = v.conj());
                spec
            })
            .collect();
        Self { n, fwd, inv, ref_spectra }
    }

    pub fn num_references(&self) -> usize {
        self.ref_spectra.len()
    }

    fn workspace(&self) -> Workspace<T> {
        let len = self.n * self.n;
        Workspace {
            query: vec![Complex::default(); len],
            product: vec![Complex::default(); len],
            scratch: self.fwd.make_scratch(),
        }
    }

    /// Writes the response signal of `g` into `out` (length B).
    fn respond(&self, g: ArrayView2<T>, out: &mut [T], ws: &mut Workspace<T>) {
        debug_assert_eq!(g.dim(), (self.n, self.n));
        for (dst, &v) in ws.query.iter_mut().zip(g.iter()) {
            *dst = Complex::new(v, T::zero());
        }
        self.fwd.process(&mut ws.query, &mut ws.scratch);
        let norm = T::of_usize(self.n * self.n);

        // Both maps are real, so two references share one inverse transform:
        // the first lands in the real part, the second in the imaginary part.
        let mut m = 0;
        while m < self.ref_spectra.len() {
            let a = &self.ref_spectra[m];
            if let Some(b) = self.ref_spectra.get(m + 1) {
                for ((p, &q), (&fa, &fb)) in ws.product.iter_mut().zip(&ws.query).zip(a.iter().zip(b)) {
                    let pa = fa * q;
                    let pb = fb * q;
                    *p = Complex::new(pa.re - pb.im, pa.im + pb.re);
                }
                self.inv.process(&mut ws.product, &mut ws.scratch);
                let (mut ma, mut mb) = (T::neg_infinity(), T::neg_infinity());
                for v in &ws.product {
                    ma = ma.max(v.re);
                    mb = mb.max(v.im);
                }
                out[m] = ma / norm;
                out[m + 1] = mb / norm;
                m += 2;
            } else {
                for ((p, &q), &fa) in ws.product.iter_mut().zip(&ws.query).zip(a) {
                    *p = fa * q;
                }
                self.inv.process(&mut ws.product, &mut ws.scratch);
                let ma = ws.product.iter().fold(T::neg_infinity(), |acc, v| acc.max(v.re));
                out[m] = ma / norm;
                m += 1;
            }
        }
    }

    /// Response signal of a single window.
    pub fn signal(&self, g: ArrayView2<T>) -> Vec<T> {
        let mut out = vec![T::zero(); self.num_references()];
        self.respond(g, &mut out, &mut self.workspace());
        out
    }

    /// Signals for every query, flattened query-major (`C x B`).
    pub fn all_signals(&self, m: &Micrograph<T>, queries: &QuerySet) -> Vec<T> {
        let b = self.num_references();
        let mut flat = vec![T::zero(); queries.len() * b];
        if b == 0 {
            return flat;
        }
        flat.par_chunks_mut(b)
            .enumerate()
            .for_each_init(
                || self.workspace(),
                |ws, (i, out)| self.respond(queries.window(m, i), out, ws),
            );
        flat
    }
}

/// Response signals, threshold and scores for every query of a micrograph.
#[derive(Debug, Clone)]
pub struct ScoredQueries<T: Real = f64> {
    pub queries: QuerySet,
    pub scores: ScoreField<T>,
    /// Query-major `C x B` response values.
    pub signals: Vec<T>,
}

impl<T: Real> ScoredQueries<T> {
    pub fn signal(&self, query: usize) -> ResponseSignal<T> {
        let b = self.scores.num_references;
        ResponseSignal { values: self.signals[query * b..(query + 1) * b].to_vec(), query_index: query }
    }
}

/// Scores every query window of `m` against `refs`.
pub fn score_micrograph<T: Real>(
    m: &Micrograph<T>,
    refs: &ReferenceSet<T>,
    n: usize,
) -> Result<(QuerySet, ScoreField<T>)> {
    let scored = score_micrograph_with(m, refs, n, T::of(DEFAULT_THRESHOLD_DIVISOR))?;
    Ok((scored.queries, scored.scores))
}

pub fn score_micrograph_with<T: Real>(
    m: &Micrograph<T>,
    refs: &ReferenceSet<T>,
    n: usize,
    divisor: T,
) -> Result<ScoredQueries<T>> {
    if refs.window_size != n {
        return Err(Error::InvalidArgument(format!(
            "references have size {}, queries {n}",
            refs.window_size
        )));
    }
    if refs.is_empty() {
        return Err(Error::InvalidArgument("empty reference set".into()));
    }
    let (h, w) = m.dim();
    let queries = QuerySet::new(h, w, n)?;
    let engine = ResponseEngine::new(refs);
    let signals = engine.all_signals(m, &queries);
    let (min, max) = extrema(signals.iter().copied()).expect("non-empty signals");
    let t = threshold_from_extrema(min, max, divisor)?;
    let b = refs.len();
    let k = signals.par_chunks(b).map(|s| count_above(s, t)).collect();
    Ok(ScoredQueries {
        queries,
        scores: ScoreField { k, t, min, max, num_references: b },
        signals,
    })
}
