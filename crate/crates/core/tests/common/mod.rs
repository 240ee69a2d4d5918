//! Independent reference implementations used as test oracles. Each one is
//! written the slow, obvious way and shares no code with the library.

#![allow(dead_code)]

use std::collections::VecDeque;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Array2<f64> {
    Array2::from_shape_fn((h, w), |_| rng.random_range(-1.0..1.0))
}

pub fn random_mask(rng: &mut ChaCha8Rng, h: usize, w: usize, density: f64) -> Array2<bool> {
    Array2::from_shape_fn((h, w), |_| rng.random_bool(density))
}

/// c(i, j) = Σ_x Σ_y f(x, y) · g((x + i) mod n, (y + j) mod n).
pub fn direct_circular_cc(f: &Array2<f64>, g: &Array2<f64>) -> Array2<f64> {
    let (h, w) = f.dim();
    Array2::from_shape_fn((h, w), |(i, j)| {
        let mut s = 0.0;
        for x in 0..h {
            for y in 0..w {
                s += f[[x, y]] * g[[(x + i) % h, (y + j) % w]];
            }
        }
        s
    })
}

/// Population mean and variance of the `n x n` window at `(r, c)`.
pub fn naive_stats(a: &Array2<f64>, r: usize, c: usize, n: usize) -> (f64, f64) {
    let mut vals = Vec::with_capacity(n * n);
    for i in r..r + n {
        for j in c..c + n {
            vals.push(a[[i, j]]);
        }
    }
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
    (mean, var)
}

/// Exhaustive scan for [min mean, max mean, min var, max var] window
/// positions inside one container; the first position in row-major order wins
/// ties. Integer-valued images are compared in exact integer arithmetic.
/// Returns positions and the winning mean/variance values.
pub fn naive_extremal(a: &Array2<f64>, origin: (usize, usize), cs: usize, n: usize) -> ([(usize, usize); 4], [f64; 4]) {
    let integral = a.iter().all(|v| v.fract() == 0.0);
    let area = (n * n) as i128;
    let mut all = Vec::new();
    for r in origin.0..=origin.0 + cs - n {
        for c in origin.1..=origin.1 + cs - n {
            let (m, v) = naive_stats(a, r, c, n);
            let exact = if integral {
                let (mut s1, mut s2) = (0i128, 0i128);
                for i in r..r + n {
                    for j in c..c + n {
                        let x = a[[i, j]] as i128;
                        s1 += x;
                        s2 += x * x;
                    }
                }
                Some((s1, area * s2 - s1 * s1))
            } else {
                None
            };
            all.push(((r, c), m, v, exact));
        }
    }
    type Entry = ((usize, usize), f64, f64, Option<(i128, i128)>);
    let better = |a: &Entry, b: &Entry, which: usize, want_min: bool| -> bool {
        let ord = match (a.3, b.3) {
            (Some(x), Some(y)) => if which == 0 { x.0.cmp(&y.0) } else { x.1.cmp(&y.1) },
            _ => {
                let (p, q) = if which == 0 { (a.1, b.1) } else { (a.2, b.2) };
                p.partial_cmp(&q).unwrap()
            }
        };
        if want_min { ord.is_lt() } else { ord.is_gt() }
    };
    let pick = |which: usize, want_min: bool| {
        let mut best = &all[0];
        for cand in &all[1..] {
            if better(cand, best, which, want_min) {
                best = cand;
            }
        }
        (best.0, if which == 0 { best.1 } else { best.2 })
    };
    let res = [pick(0, true), pick(0, false), pick(1, true), pick(1, false)];
    (res.map(|r| r.0), res.map(|r| r.1))
}

/// Component summary: (pixel count, bbox, centroid).
pub type Component = (usize, (usize, usize, usize, usize), (f64, f64));

/// Breadth-first flood fill with 8-connectivity, components ordered by the
/// row-major position of their first pixel.
pub fn flood_fill(mask: &Array2<bool>) -> Vec<Component> {
    let (h, w) = mask.dim();
    let mut seen = Array2::from_elem((h, w), false);
    let mut out = Vec::new();
    for r0 in 0..h {
        for c0 in 0..w {
            if !mask[[r0, c0]] || seen[[r0, c0]] {
                continue;
            }
            let mut queue = VecDeque::from([(r0, c0)]);
            seen[[r0, c0]] = true;
            let (mut count, mut sr, mut sc) = (0usize, 0.0, 0.0);
            let mut bb = (r0, c0, r0, c0);
            while let Some((r, c)) = queue.pop_front() {
                count += 1;
                sr += r as f64;
                sc += c as f64;
                bb = (bb.0.min(r), bb.1.min(c), bb.2.max(r), bb.3.max(c));
                for dr in -1i64..=1 {
                    for dc in -1i64..=1 {
                        let (rr, cc) = (r as i64 + dr, c as i64 + dc);
                        if rr < 0 || cc < 0 || rr >= h as i64 || cc >= w as i64 {
                            continue;
                        }
                        let (rr, cc) = (rr as usize, cc as usize);
                        if mask[[rr, cc]] && !seen[[rr, cc]] {
                            seen[[rr, cc]] = true;
                            queue.push_back((rr, cc));
                        }
                    }
                }
            }
            out.push((count, bb, (sr / count as f64, sc / count as f64)));
        }
    }
    out
}

/// A pixel survives iff every pixel within Euclidean distance `radius` is set;
/// positions outside the image count as unset.
pub fn naive_erode(mask: &Array2<bool>, radius: usize) -> Array2<bool> {
    let (h, w) = mask.dim();
    let r = radius as i64;
    Array2::from_shape_fn((h, w), |(i, j)| {
        for dr in -r..=r {
            for dc in -r..=r {
                if dr * dr + dc * dc > r * r {
                    continue;
                }
                let (ii, jj) = (i as i64 + dr, j as i64 + dc);
                if ii < 0 || jj < 0 || ii >= h as i64 || jj >= w as i64 || !mask[[ii as usize, jj as usize]] {
                    return false;
                }
            }
        }
        true
    })
}

pub fn gaussian_gram(x: &[[f64; 2]], sigma: f64) -> Vec<Vec<f64>> {
    x.iter()
        .map(|a| {
            x.iter()
                .map(|b| {
                    let d2 = (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
                    (-d2 / (2.0 * sigma * sigma)).exp()
                })
                .collect()
        })
        .collect()
}

/// Projects `v` onto {0 ≤ α ≤ C, Σ α_i y_i = 0} by bisection on the
/// multiplier of the equality constraint.
fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |lambda: f64| -> Vec<f64> { v.iter().zip(y).map(|(vi, yi)| (vi - lambda * yi).clamp(0.0, c)).collect() };
    let residual = |a: &[f64]| a.iter().zip(y).map(|(ai, yi)| ai * yi).sum::<f64>();
    let (mut lo, mut hi) = (-1e6, 1e6);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        // Residual is non-increasing in lambda.
        if residual(&at(mid)) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Soft-margin dual by projected gradient ascent. Returns (alpha, bias).
pub fn projected_gradient_dual(k: &[Vec<f64>], y: &[f64], c: f64, iterations: usize) -> (Vec<f64>, f64) {
    let l = y.len();
    let q: Vec<Vec<f64>> = (0..l).map(|i| (0..l).map(|j| y[i] * y[j] * k[i][j]).collect()).collect();
    // Step below 1 / λ_max(Q); the trace bounds λ_max.
    let step = 1.0 / (0..l).map(|i| q[i][i]).sum::<f64>();
    let mut alpha = vec![0.0; l];
    for _ in 0..iterations {
        let grad: Vec<f64> = (0..l).map(|i| 1.0 - (0..l).map(|j| q[i][j] * alpha[j]).sum::<f64>()).collect();
        let v: Vec<f64> = alpha.iter().zip(&grad).map(|(a, g)| a + step * g).collect();
        alpha = project(&v, y, c);
    }
    let f_no_bias = |i: usize| (0..l).map(|j| alpha[j] * y[j] * k[j][i]).sum::<f64>();
    let eps = 1e-6 * c;
    let free: Vec<usize> = (0..l).filter(|&i| alpha[i] > eps && alpha[i] < c - eps).collect();
    let bias = if free.is_empty() {
        // Midpoint of the feasible interval for b.
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..l {
            let r = y[i] - f_no_bias(i);
            let at_upper = alpha[i] >= c - eps;
            // y f(x) >= 1 at alpha = 0 and <= 1 at alpha = C.
            if (y[i] > 0.0) != at_upper {
                lo = lo.max(r);
            } else {
                hi = hi.min(r);
            }
        }
        0.5 * (lo + hi)
    } else {
        free.iter().map(|&i| y[i] - f_no_bias(i)).sum::<f64>() / free.len() as f64
    };
    (alpha, bias)
}

/// Maximum-cardinality bipartite matching between picks and truth points
/// closer than `radius`, by augmenting paths.
pub fn optimal_match_count(picks: &[(f64, f64)], truth: &[(f64, f64)], radius: f64) -> usize {
    let adj: Vec<Vec<usize>> = picks
        .iter()
        .map(|p| {
            truth
                .iter()
                .enumerate()
                .filter(|(_, t)| ((p.0 - t.0).powi(2) + (p.1 - t.1).powi(2)).sqrt() <= radius)
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    fn augment(i: usize, adj: &[Vec<usize>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for &j in &adj[i] {
            if seen[j] {
                continue;
            }
            seen[j] = true;
            if owner[j].is_none() || augment(owner[j].unwrap(), adj, seen, owner) {
                owner[j] = Some(i);
                return true;
            }
        }
        false
    }
    let mut owner = vec![None; truth.len()];
    (0..picks.len())
        .filter(|&i| augment(i, &adj, &mut vec![false; truth.len()], &mut owner))
        .count()
}
