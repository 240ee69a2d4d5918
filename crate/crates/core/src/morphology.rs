//! Binary masks: 8-connected components, hole filling and disk erosion.

use std::collections::VecDeque;

use ndarray::Array2;

/// One 8-connected region of set pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub pixel_count: usize,
    /// (min_row, min_col, max_row, max_col), inclusive.
    pub bounding_box: (usize, usize, usize, usize),
    /// (row, col) mean of member pixel coordinates.
    pub centroid: (f64, f64),
    /// Larger bounding-box side.
    pub max_diameter: usize,
}

/// Labels 8-connected components. Clusters come out in row-major order of
/// their first pixel.
pub fn connected_components(mask: &Array2<bool>) -> Vec<Cluster> {
    label_components(mask).1
}

/// Component labels (0 = background, i + 1 = `clusters[i]`) and clusters.
pub fn label_components(mask: &Array2<bool>) -> (Array2<u32>, Vec<Cluster>) {
    let (h, w) = mask.dim();
    let mut labels = Array2::<u32>::zeros((h, w));
    let mut clusters = Vec::new();
    let mut stack = Vec::new();
    for r0 in 0..h {
        for c0 in 0..w {
            if !mask[[r0, c0]] || labels[[r0, c0]] != 0 {
                continue;
            }
            let id = clusters.len() as u32 + 1;
            labels[[r0, c0]] = id;
            stack.push((r0, c0));
            let (mut count, mut sr, mut sc) = (0usize, 0.0f64, 0.0f64);
            let mut bbox = (r0, c0, r0, c0);
            while let Some((r, c)) = stack.pop() {
                count += 1;
                sr += r as f64;
                sc += c as f64;
                bbox = (bbox.0.min(r), bbox.1.min(c), bbox.2.max(r), bbox.3.max(c));
                for nr in r.saturating_sub(1)..=(r + 1).min(h - 1) {
                    for nc in c.saturating_sub(1)..=(c + 1).min(w - 1) {
                        if mask[[nr, nc]] && labels[[nr, nc]] == 0 {
                            labels[[nr, nc]] = id;
                            stack.push((nr, nc));
                        }
                    }
                }
            }
            let n = count as f64;
            clusters.push(Cluster {
                pixel_count: count,
                bounding_box: bbox,
                centroid: (sr / n, sc / n),
                max_diameter: (bbox.2 - bbox.0 + 1).max(bbox.3 - bbox.1 + 1),
            });
        }
    }
    (labels, clusters)
}

/// Offsets (dr, dc) of the discrete Euclidean disk: dr² + dc² ≤ radius².
pub fn disk_element(radius: usize) -> Vec<(i64, i64)> {
    let r = radius as i64;
    let mut out = Vec::new();
    for dr in -r..=r {
        for dc in -r..=r {
            if dr * dr + dc * dc <= r * r {
                out.push((dr, dc));
            }
        }
    }
    out
}

/// 1D squared distance transform of a sampled function (lower envelope of
/// parabolas). `z` needs `f.len() + 1` slots.
fn edt_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let fq = f[q] + (q * q) as f64;
        let mut s;
        loop {
            let p = v[k];
            s = (fq - (f[p] + (p * p) as f64)) / (2.0 * (q - p) as f64);
            if s <= z[k] {
                k -= 1;
            } else {
                break;
            }
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, out) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let dq = q as f64 - v[k] as f64;
        *out = dq * dq + f[v[k]];
    }
}

/// Squared Euclidean distance from every pixel to the nearest unset pixel,
/// where everything outside the image counts as unset.
pub fn squared_distance_to_background(mask: &Array2<bool>) -> Array2<f64> {
    let (h, w) = mask.dim();
    let (ph, pw) = (h + 2, w + 2);
    // Every padded column starts and ends with background, so true squared
    // distances stay below this sentinel and all arithmetic is exact integers.
    let far = ((ph + pw) * (ph + pw)) as f64;
    let mut grid = Array2::from_elem((ph, pw), 0.0f64);
    for ((r, c), &b) in mask.indexed_iter() {
        if b {
            grid[[r + 1, c + 1]] = far;
        }
    }
    let len = ph.max(pw);
    let (mut f, mut d) = (vec![0.0; len], vec![0.0; len]);
    let (mut v, mut z) = (vec![0usize; len], vec![0.0; len + 1]);
    for c in 0..pw {
        for r in 0..ph {
            f[r] = grid[[r, c]];
        }
        edt_1d(&f[..ph], &mut d[..ph], &mut v, &mut z);
        for r in 0..ph {
            grid[[r, c]] = d[r];
        }
    }
    for r in 0..ph {
        for c in 0..pw {
            f[c] = grid[[r, c]];
        }
        edt_1d(&f[..pw], &mut d[..pw], &mut v, &mut z);
        for c in 0..pw {
            grid[[r, c]] = d[c];
        }
    }
    Array2::from_shape_fn((h, w), |(r, c)| grid[[r + 1, c + 1]])
}

/// Erosion by the disk of [`disk_element`]: a pixel survives iff every pixel
/// within Euclidean distance `radius` is set. Pixels outside the image count
/// as unset.
pub fn erode(mask: &Array2<bool>, radius: usize) -> Array2<bool> {
    if radius == 0 {
        return mask.clone();
    }
    let r2 = (radius * radius) as f64;
    squared_distance_to_background(mask).mapv(|d| d > r2)
}

/// Radius of the largest disk that fits inside each 8-connected component,
/// in the order of [`label_components`].
pub fn inscribed_radii(mask: &Array2<bool>) -> Vec<f64> {
    let (labels, clusters) = label_components(mask);
    let d2 = squared_distance_to_background(mask);
    let mut best = vec![0.0f64; clusters.len()];
    for (&l, &d) in labels.iter().zip(&d2) {
        if l > 0 {
            let k = l as usize - 1;
            best[k] = best[k].max(d);
        }
    }
    best.into_iter().map(f64::sqrt).collect()
}

/// Sets every unset pixel that cannot reach the image border through
/// 4-connected unset pixels. Background uses 4-connectivity so that it is the
/// exact complement of the 8-connected foreground.
pub fn fill_holes(mask: &Array2<bool>) -> Array2<bool> {
    let (h, w) = mask.dim();
    let mut outside = Array2::from_elem((h, w), false);
    let mut queue = VecDeque::new();
    let seed = |r: usize, c: usize, outside: &mut Array2<bool>, queue: &mut VecDeque<(usize, usize)>| {
        if !mask[[r, c]] && !outside[[r, c]] {
            outside[[r, c]] = true;
            queue.push_back((r, c));
        }
    };
    for r in 0..h {
        seed(r, 0, &mut outside, &mut queue);
        seed(r, w - 1, &mut outside, &mut queue);
    }
    for c in 0..w {
        seed(0, c, &mut outside, &mut queue);
        seed(h - 1, c, &mut outside, &mut queue);
    }
    while let Some((r, c)) = queue.pop_front() {
        if r > 0 {
            seed(r - 1, c, &mut outside, &mut queue);
        }
        if r + 1 < h {
            seed(r + 1, c, &mut outside, &mut queue);
        }
        if c > 0 {
            seed(r, c - 1, &mut outside, &mut queue);
        }
        if c + 1 < w {
            seed(r, c + 1, &mut outside, &mut queue);
        }
    }
    outside.mapv(|o| !o)
}
