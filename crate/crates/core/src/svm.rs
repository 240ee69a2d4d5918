//! Gaussian-kernel soft-margin SVM trained with sequential minimal
//! optimization.
//!
//! The solver works on the dual
//!
//! ```text
//! min_a  ½ aᵀQa − eᵀa   s.t.  yᵀa = 0,  0 ≤ a_i ≤ C,   Q_ij = y_i y_j K(x_i, x_j)
//! ```
//!
//! choosing the maximal violating pair at every step and stopping once the
//! KKT gap drops below the tolerance.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{io_err, Error, Result};
use crate::scalar::Real;
use crate::training::{Standardization, TrainingSet};

/// exp(−‖x − z‖² / (2σ²)).
#[inline]
pub fn kernel<T: Real>(x: [T; 2], z: [T; 2], bandwidth: T) -> T {
    let dx = x[0] - z[0];
    let dy = x[1] - z[1];
    (-(dx * dx + dy * dy) / (T::of(2.0) * bandwidth * bandwidth)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams<T: Real = f64> {
    /// σ of the Gaussian kernel.
    pub bandwidth: T,
    /// Box constraint C.
    pub slack: T,
    /// Stop when the maximal KKT violation falls below this.
    pub tolerance: T,
    pub max_iterations: usize,
}

impl<T: Real> Default for SvmParams<T> {
    fn default() -> Self {
        Self {
            bandwidth: T::one(),
            slack: T::one(),
            tolerance: T::of(1e-3),
            max_iterations: 1_000_000,
        }
    }
}

/// Multipliers below this are dropped from the model.
pub const ALPHA_PRUNE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel<T: Real = f64> {
    /// Standardized support vectors.
    pub support_vectors: Vec<[T; 2]>,
    /// α_i·y_i per support vector.
    pub dual_coefficients: Vec<T>,
    pub bias: T,
    pub kernel_bandwidth: T,
    pub slack_c: T,
    pub standardization: Standardization<T>,
    pub iterations: usize,
    /// Final maximal KKT violation.
    pub kkt_gap: T,
}

/// Full dual solution, kept for diagnostics and tests.
#[derive(Debug, Clone)]
pub struct DualSolution<T: Real = f64> {
    pub alpha: Vec<T>,
    /// Labels in {−1, +1}.
    pub y: Vec<T>,
    pub bias: T,
    pub iterations: usize,
    pub kkt_gap: T,
}

/// Kernel rows computed on demand with a bounded FIFO cache.
struct KernelRows<'a, T: Real> {
    x: &'a [[T; 2]],
    bandwidth: T,
    cache: HashMap<usize, Vec<T>>,
    order: VecDeque<usize>,
    capacity: usize,
}

impl<'a, T: Real> KernelRows<'a, T> {
    fn new(x: &'a [[T; 2]], bandwidth: T) -> Self {
        const BUDGET: usize = 1 << 24;
        let capacity = (BUDGET / x.len().max(1)).max(2);
        Self { x, bandwidth, cache: HashMap::new(), order: VecDeque::new(), capacity }
    }

    fn row(&mut self, i: usize) -> &[T] {
        if !self.cache.contains_key(&i) {
            if self.order.len() >= self.capacity {
                if let Some(old) = self.order.pop_front() {
                    self.cache.remove(&old);
                }
            }
            let xi = self.x[i];
            let bw = self.bandwidth;
            let row = self.x.iter().map(|&xj| kernel(xi, xj, bw)).collect();
            self.cache.insert(i, row);
            self.order.push_back(i);
        }
        &self.cache[&i]
    }
}

/// Solves the dual for standardized points `x` with labels `y ∈ {−1, +1}`.
pub fn solve_dual<T: Real>(x: &[[T; 2]], y: &[T], params: &SvmParams<T>) -> DualSolution<T> {
    let l = x.len();
    let c = params.slack;
    let tau = T::of(1e-12);
    let mut alpha = vec![T::zero(); l];
    let mut grad = vec![-T::one(); l];
    let mut rows = KernelRows::new(x, params.bandwidth);

    let in_up = |a: T, yt: T| (yt > T::zero() && a < c) || (yt < T::zero() && a > T::zero());
    let in_low = |a: T, yt: T| (yt > T::zero() && a > T::zero()) || (yt < T::zero() && a < c);

    let mut iterations = 0;
    let mut gap;
    loop {
        let (mut i, mut gmax) = (usize::MAX, T::neg_infinity());
        let (mut j, mut gmin) = (usize::MAX, T::infinity());
        for t in 0..l {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t]) && v > gmax {
                gmax = v;
                i = t;
            }
            if in_low(alpha[t], y[t]) && v < gmin {
                gmin = v;
                j = t;
            }
        }
        gap = if i == usize::MAX || j == usize::MAX { T::zero() } else { gmax - gmin };
        if gap < params.tolerance || iterations >= params.max_iterations {
            break;
        }
        iterations += 1;

        let ki = rows.row(i).to_vec();
        let kj = rows.row(j).to_vec();
        let (yi, yj) = (y[i], y[j]);
        let qii = ki[i];
        let qjj = kj[j];
        let qij = yi * yj * ki[j];
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (mut ai, mut aj) = (old_i, old_j);

        if yi != yj {
            let mut quad = qii + qjj + T::of(2.0) * qij;
            if quad <= T::zero() {
                quad = tau;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > T::zero() {
                if aj < T::zero() {
                    aj = T::zero();
                    ai = diff;
                }
            } else if ai < T::zero() {
                ai = T::zero();
                aj = -diff;
            }
            if diff > T::zero() {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let mut quad = qii + qjj - T::of(2.0) * qij;
            if quad <= T::zero() {
                quad = tau;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < T::zero() {
                aj = T::zero();
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < T::zero() {
                ai = T::zero();
                aj = sum;
            }
        }
        alpha[i] = ai;
        alpha[j] = aj;

        let di = (ai - old_i) * yi;
        let dj = (aj - old_j) * yj;
        for t in 0..l {
            grad[t] += y[t] * (ki[t] * di + kj[t] * dj);
        }
    }

    // Bias from the free multipliers, or the midpoint of the feasible interval.
    let (mut ub, mut lb) = (T::infinity(), T::neg_infinity());
    let (mut free, mut sum_free) = (0usize, T::zero());
    for t in 0..l {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < T::zero() { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else if alpha[t] <= T::zero() {
            if y[t] > T::zero() { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 { sum_free / T::of_usize(free) } else { (ub + lb) / T::of(2.0) };

    DualSolution { alpha, y: y.to_vec(), bias: -rho, iterations, kkt_gap: gap }
}

/// Trains on `ts`; labels 1 map to +1 and 0 to −1.
pub fn train<T: Real>(ts: &TrainingSet<T>, params: &SvmParams<T>) -> Result<SvmModel<T>> {
    if !(params.bandwidth > T::zero()) || !(params.slack > T::zero()) {
        return Err(Error::InvalidArgument("bandwidth and slack must be positive".into()));
    }
    let pos = ts.count(1);
    let neg = ts.count(0);
    if pos == 0 || neg == 0 || pos + neg != ts.len() {
        return Err(Error::Degenerate("training set needs both labels and only 0/1".into()));
    }
    let first = ts.features[0];
    if ts.features.iter().all(|f| f == &first) {
        return Err(Error::Degenerate("all feature vectors are identical".into()));
    }
    let x = ts.standardized();
    let y: Vec<T> = ts.labels.iter().map(|&l| if l == 1 { T::one() } else { -T::one() }).collect();
    let sol = solve_dual(&x, &y, params);
    if sol.iterations >= params.max_iterations {
        log::warn!(
            "SMO stopped at the iteration cap with KKT gap {}",
            sol.kkt_gap
        );
    }

    let prune = T::of(ALPHA_PRUNE);
    let (mut support_vectors, mut dual_coefficients) = (Vec::new(), Vec::new());
    for ((xi, &a), &yi) in x.iter().zip(&sol.alpha).zip(&y) {
        if a > prune {
            support_vectors.push(*xi);
            dual_coefficients.push(a * yi);
        }
    }
    Ok(SvmModel {
        support_vectors,
        dual_coefficients,
        bias: sol.bias,
        kernel_bandwidth: params.bandwidth,
        slack_c: params.slack,
        standardization: ts.standardization,
        iterations: sol.iterations,
        kkt_gap: sol.kkt_gap,
    })
}

impl<T: Real> SvmModel<T> {
    /// Decision value for an already standardized point.
    pub fn decision_standardized(&self, z: [T; 2]) -> T {
        let bw = self.kernel_bandwidth;
        self.support_vectors
            .iter()
            .zip(&self.dual_coefficients)
            .fold(self.bias, |acc, (&sv, &coef)| acc + coef * kernel(sv, z, bw))
    }

    /// Decision value for raw (mean, std) features.
    pub fn decision(&self, x: [T; 2]) -> T {
        self.decision_standardized(self.standardization.apply(x))
    }

    /// Particle iff the decision value is positive.
    pub fn classify(&self, x: [T; 2]) -> bool {
        self.decision(x) > T::zero()
    }

    pub fn decision_batch(&self, xs: &[[T; 2]]) -> Vec<T> {
        xs.par_iter().map(|&x| self.decision(x)).collect()
    }

    pub fn num_support_vectors(&self) -> usize {
        self.support_vectors.len()
    }

    /// Text form: a commented header, then one `x1 x2 coeff` line per
    /// support vector.
    pub fn to_text(&self) -> String {
        let s = &self.standardization;
        let mut out = String::from("# apple-picker svm model\n");
        let _ = writeln!(out, "bias {:e}", self.bias.as_f64());
        let _ = writeln!(out, "bandwidth {:e}", self.kernel_bandwidth.as_f64());
        let _ = writeln!(out, "slack {:e}", self.slack_c.as_f64());
        let _ = writeln!(
            out,
            "standardization {:e} {:e} {:e} {:e}",
            s.mean[0].as_f64(),
            s.mean[1].as_f64(),
            s.std[0].as_f64(),
            s.std[1].as_f64()
        );
        let _ = writeln!(out, "support_vectors {}", self.support_vectors.len());
        for (sv, c) in self.support_vectors.iter().zip(&self.dual_coefficients) {
            let _ = writeln!(out, "{:e} {:e} {:e}", sv[0].as_f64(), sv[1].as_f64(), c.as_f64());
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Parse(format!("svm model: {msg}"));
        let nums = |rest: &str| -> Result<Vec<T>> {
            rest.split_whitespace()
                .map(|v| v.parse::<f64>().map(T::of).map_err(|e| bad(&e.to_string())))
                .collect()
        };
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let mut field = |key: &str| -> Result<Vec<T>> {
            let line = lines.next().ok_or_else(|| bad(&format!("missing {key}")))?;
            let rest = line
                .strip_prefix(key)
                .ok_or_else(|| bad(&format!("expected {key}, got '{line}'")))?;
            nums(rest)
        };
        let bias = field("bias")?[0];
        let bandwidth = field("bandwidth")?[0];
        let slack = field("slack")?[0];
        let st = field("standardization")?;
        if st.len() != 4 {
            return Err(bad("standardization needs 4 values"));
        }
        let count = field("support_vectors")?[0].as_f64() as usize;
        let mut support_vectors = Vec::with_capacity(count);
        let mut dual_coefficients = Vec::with_capacity(count);
        for _ in 0..count {
            let v = field("")?;
            if v.len() != 3 {
                return Err(bad("support vector lines need 3 values"));
            }
            support_vectors.push([v[0], v[1]]);
            dual_coefficients.push(v[2]);
        }
        Ok(Self {
            support_vectors,
            dual_coefficients,
            bias,
            kernel_bandwidth: bandwidth,
            slack_c: slack,
            standardization: Standardization { mean: [st[0], st[1]], std: [st[2], st[3]] },
            iterations: 0,
            kkt_gap: T::zero(),
        })
    }

    pub fn write_text(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(io_err(path))
    }
}
