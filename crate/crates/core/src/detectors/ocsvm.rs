//! One-class SVM with an RBF kernel.
//!
//! Solves the dual `min 1/2 a'Ka  s.t.  0 <= a_i <= 1/(nu n), sum a_i = 1`
//! by SMO with second-order working-set selection. Kernel rows are computed
//! on demand and kept in an LRU cache.

use std::collections::HashMap;
use std::rc::Rc;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::matrix::{sq_dist, Matrix};

use super::spec::{DetectorParams, DetectorSpec, FitMetadata, OcsvmParams, ScoreVector};

const TAU: f64 = 1e-12;

struct KernelCache<'a> {
    x: &'a Matrix,
    gamma: f64,
    capacity: usize,
    slots: HashMap<usize, (Rc<[f64]>, u64)>,
    clock: u64,
}

impl<'a> KernelCache<'a> {
    fn new(x: &'a Matrix, gamma: f64, cache_mb: usize) -> Self {
        let row_bytes = x.nrows().max(1) * std::mem::size_of::<f64>();
        let capacity = ((cache_mb << 20) / row_bytes).max(2);
        KernelCache {
            x,
            gamma,
            capacity,
            slots: HashMap::new(),
            clock: 0,
        }
    }

    fn eval(&self, a: usize, b: usize) -> f64 {
        (-self.gamma * sq_dist(self.x.row(a), self.x.row(b))).exp()
    }

    fn row(&mut self, i: usize) -> Rc<[f64]> {
        self.clock += 1;
        let clock = self.clock;
        if let Some((row, used)) = self.slots.get_mut(&i) {
            *used = clock;
            return Rc::clone(row);
        }
        if self.slots.len() >= self.capacity {
            let oldest = self
                .slots
                .iter()
                .min_by_key(|(_, (_, used))| *used)
                .map(|(&k, _)| k)
                .expect("non-empty cache");
            self.slots.remove(&oldest);
        }
        let xi = self.x.row(i);
        let row: Rc<[f64]> = self
            .x
            .rows()
            .map(|xj| (-self.gamma * sq_dist(xi, xj)).exp())
            .collect();
        self.slots.insert(i, (Rc::clone(&row), clock));
        row
    }
}

/// Converged dual solution.
#[derive(Debug, Clone)]
pub struct OneClassFit {
    pub alphas: Vec<f64>,
    pub upper_bound: f64,
    pub rho: f64,
    pub gamma: f64,
    /// `sum_j a_j K(x_j, x_i)` for every training row.
    pub kernel_sums: Vec<f64>,
    pub iterations: usize,
    pub objective: f64,
}

impl OneClassFit {
    /// `rho - sum_j a_j K(x_j, x_i)`; positive outside the boundary.
    pub fn scores(&self) -> Vec<f64> {
        self.kernel_sums.iter().map(|g| self.rho - g).collect()
    }

    pub fn n_support(&self) -> usize {
        self.alphas.iter().filter(|&&a| a > 0.0).count()
    }

    pub fn n_bounded(&self) -> usize {
        self.alphas.iter().filter(|&&a| a >= self.upper_bound).count()
    }
}

/// `1 / (p * var(X))` over all entries; `1 / p` for zero variance.
pub fn default_gamma(x: &Matrix) -> f64 {
    let vals = x.as_slice();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
    let p = x.ncols() as f64;
    if var > 0.0 {
        1.0 / (p * var)
    } else {
        1.0 / p
    }
}

pub fn fit_one_class(x: &Matrix, params: &OcsvmParams) -> Result<OneClassFit> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    if !(params.nu > 0.0 && params.nu <= 1.0) {
        return Err(Error::Parameter(format!("nu = {} outside (0, 1]", params.nu)));
    }
    let gamma = params.gamma.unwrap_or_else(|| default_gamma(x));
    let ub = 1.0 / (params.nu * n as f64);
    let mut cache = KernelCache::new(x, gamma, params.cache_mb);

    let mut alpha = vec![0.0; n];
    let full = ((params.nu * n as f64) + 1e-9).floor() as usize;
    for a in alpha.iter_mut().take(full.min(n)) {
        *a = ub;
    }
    if full < n {
        alpha[full] = (1.0 - full as f64 * ub).max(0.0);
    }

    let mut grad = vec![0.0; n];
    for j in 0..n {
        if alpha[j] > 0.0 {
            let kj = cache.row(j);
            for (g, k) in grad.iter_mut().zip(kj.iter()) {
                *g += alpha[j] * k;
            }
        }
    }

    let mut iterations = 0;
    loop {
        // i: smallest gradient among rows that can grow.
        let mut i = usize::MAX;
        let mut g_up = f64::INFINITY;
        let mut g_low = f64::NEG_INFINITY;
        for t in 0..n {
            if alpha[t] < ub && grad[t] < g_up {
                g_up = grad[t];
                i = t;
            }
            if alpha[t] > 0.0 && grad[t] > g_low {
                g_low = grad[t];
            }
        }
        if i == usize::MAX || g_low - g_up < params.tol {
            break;
        }
        if iterations >= params.max_iter {
            return Err(Error::NonConvergence {
                algorithm: "one-class SVM dual",
                iterations,
            });
        }
        iterations += 1;

        let ki = cache.row(i);
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if alpha[t] > 0.0 && grad[t] > g_up {
                let b = grad[t] - g_up;
                let a = (2.0 - 2.0 * ki[t]).max(TAU);
                let obj = -(b * b) / a;
                if obj < best {
                    best = obj;
                    j = t;
                }
            }
        }
        if j == usize::MAX {
            break;
        }
        let kj = cache.row(j);
        let curvature = (cache.eval(i, i) + cache.eval(j, j) - 2.0 * ki[j]).max(TAU);
        let mut delta = (grad[j] - grad[i]) / curvature;
        delta = delta.min(ub - alpha[i]).min(alpha[j]);
        if delta <= 0.0 {
            break;
        }
        alpha[i] += delta;
        alpha[j] -= delta;
        if ub - alpha[i] <= 1e-15 * ub {
            alpha[i] = ub;
        }
        if alpha[j] <= 1e-15 * ub {
            alpha[j] = 0.0;
        }
        for t in 0..n {
            grad[t] += delta * (ki[t] - kj[t]);
        }
    }

    // Recompute the kernel sums exactly from the support set.
    let mut sums = vec![0.0; n];
    for j in 0..n {
        if alpha[j] > 0.0 {
            let kj = cache.row(j);
            for (s, k) in sums.iter_mut().zip(kj.iter()) {
                *s += alpha[j] * k;
            }
        }
    }
    let mut free_sum = 0.0;
    let mut free = 0usize;
    let mut lb = f64::NEG_INFINITY;
    let mut ubound = f64::INFINITY;
    for t in 0..n {
        if alpha[t] >= ub {
            lb = lb.max(sums[t]);
        } else if alpha[t] <= 0.0 {
            ubound = ubound.min(sums[t]);
        } else {
            free += 1;
            free_sum += sums[t];
        }
    }
    let rho = if free > 0 {
        free_sum / free as f64
    } else {
        match (lb.is_finite(), ubound.is_finite()) {
            (true, true) => 0.5 * (lb + ubound),
            (true, false) => lb,
            (false, true) => ubound,
            (false, false) => 0.0,
        }
    };
    let objective = 0.5 * alpha.iter().zip(&sums).map(|(a, s)| a * s).sum::<f64>();
    Ok(OneClassFit {
        alphas: alpha,
        upper_bound: ub,
        rho,
        gamma,
        kernel_sums: sums,
        iterations,
        objective,
    })
}

/// Negated decision value; rows outside the learned boundary score positive.
pub fn score_ocsvm(x: &Matrix, params: &OcsvmParams, seed: u64) -> Result<ScoreVector> {
    let start = Instant::now();
    let fit = fit_one_class(x, params)?;
    let scores = fit.scores();
    Ok(ScoreVector {
        spec: DetectorSpec::new(DetectorParams::Ocsvm(*params), seed),
        native_labels: Some(scores.iter().map(|&s| s > 0.0).collect()),
        raw_scores: scores,
        metadata: FitMetadata::OneClass {
            rho: fit.rho,
            gamma: fit.gamma,
            n_support: fit.n_support(),
            n_bounded: fit.n_bounded(),
            iterations: fit.iterations,
            objective: fit.objective,
            alphas: fit.alphas,
        },
        elapsed: start.elapsed(),
    })
}
