//! Brute-force reference implementations written straight from the
//! definitions, plus small data helpers shared by the integration tests.

#![allow(dead_code)]

pub mod checks;

use std::collections::{HashMap, VecDeque};

use nalgebra::{DMatrix, DVector};
use obs_core::features::{build_feature_matrix, FeatureMatrix, FeatureParams};
use obs_core::market_data::{generate_synthetic, SyntheticConfig};
use obs_core::matrix::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn gaussian_matrix(n: usize, p: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<f64> = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
    Matrix::new(n, p, data).unwrap()
}

/// Gaussian rows with a few planted far points at the end.
pub fn contaminated_matrix(n: usize, p: usize, outliers: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n * p);
    for i in 0..n {
        let shift = if i >= n - outliers { 6.0 } else { 0.0 };
        for j in 0..p {
            let z: f64 = rng.sample(StandardNormal);
            data.push(z * (1.0 + 0.3 * j as f64) + shift);
        }
    }
    Matrix::new(n, p, data).unwrap()
}

pub fn lob_features(n: usize, seed: u64) -> FeatureMatrix {
    let cfg = SyntheticConfig {
        n_records: n,
        seed,
        ..Default::default()
    };
    let s = generate_synthetic(&cfg).unwrap();
    build_feature_matrix(&s.records, &FeatureParams::default()).unwrap()
}

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn to_dmatrix(x: &Matrix) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x.get(i, j))
}

fn lin_quantile(v: &[f64], q: f64) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
}

/// Squared Mahalanobis distance under the maximum-likelihood covariance of `rows`.
pub fn naive_mahalanobis(x: &Matrix, rows: &[usize]) -> (Vec<f64>, f64) {
    let d = to_dmatrix(x);
    let m = rows.len() as f64;
    let p = x.ncols();
    let mut mean = DVector::zeros(p);
    for &i in rows {
        mean += d.row(i).transpose();
    }
    mean /= m;
    let mut cov = DMatrix::zeros(p, p);
    for &i in rows {
        let c = d.row(i).transpose() - &mean;
        cov += &c * c.transpose();
    }
    cov /= m;
    let det = cov.determinant();
    let inv = cov.try_inverse().expect("invertible covariance");
    let d2 = (0..x.nrows())
        .map(|i| {
            let c = d.row(i).transpose() - &mean;
            (c.transpose() * &inv * &c)[(0, 0)]
        })
        .collect();
    (d2, det)
}

pub fn naive_ec(x: &Matrix) -> Vec<f64> {
    let all: Vec<usize> = (0..x.nrows()).collect();
    naive_mahalanobis(x, &all).0
}

/// Every `h`-subset of `0..n`; returns the one with the smallest covariance
/// determinant (lowest lexicographic subset on ties) and that determinant.
pub fn exhaustive_mcd(x: &Matrix, h: usize) -> (Vec<usize>, f64) {
    let n = x.nrows();
    let p = x.ncols();
    let d = to_dmatrix(x);
    let mut best: (Vec<usize>, f64) = (Vec::new(), f64::INFINITY);
    let mut idx: Vec<usize> = (0..h).collect();
    loop {
        let m = h as f64;
        let mut mean = DVector::zeros(p);
        for &i in &idx {
            mean += d.row(i).transpose();
        }
        mean /= m;
        let mut cov = DMatrix::zeros(p, p);
        for &i in &idx {
            let c = d.row(i).transpose() - &mean;
            cov += &c * c.transpose();
        }
        let det = (cov / m).determinant();
        if det < best.1 {
            best = (idx.clone(), det);
        }
        // Next combination in lexicographic order.
        let mut k = h;
        while k > 0 && idx[k - 1] == n - h + k - 1 {
            k -= 1;
        }
        if k == 0 {
            return best;
        }
        idx[k - 1] += 1;
        for j in k..h {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

pub fn naive_hbos(x: &Matrix, bins: usize, floor: f64) -> Vec<f64> {
    let n = x.nrows();
    let mut scores = vec![0.0; n];
    for j in 0..x.ncols() {
        let col: Vec<f64> = (0..n).map(|i| x.get(i, j)).collect();
        let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi == lo {
            continue;
        }
        let width = (hi - lo) / bins as f64;
        let bin_of = |v: f64| (((v - lo) / width).floor().max(0.0) as usize).min(bins - 1);
        let mut counts = vec![0usize; bins];
        for &v in &col {
            counts[bin_of(v)] += 1;
        }
        for i in 0..n {
            let density = (counts[bin_of(col[i])] as f64 / n as f64 / width).max(floor);
            scores[i] += -density.ln();
        }
    }
    scores
}

/// All other rows sorted by (distance, index).
pub fn sorted_neighbors(x: &Matrix, i: usize) -> Vec<(f64, usize)> {
    let mut v: Vec<(f64, usize)> = (0..x.nrows())
        .filter(|&j| j != i)
        .map(|j| (euclid(x.row(i), x.row(j)), j))
        .collect();
    v.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    v
}

pub fn naive_knn(x: &Matrix, k: usize) -> Vec<f64> {
    (0..x.nrows()).map(|i| sorted_neighbors(x, i)[k - 1].0).collect()
}

pub fn naive_lof(x: &Matrix, k: usize) -> Vec<f64> {
    let n = x.nrows();
    let nb: Vec<Vec<(f64, usize)>> = (0..n)
        .map(|i| sorted_neighbors(x, i).into_iter().take(k).collect())
        .collect();
    let kd: Vec<f64> = nb.iter().map(|v| v[k - 1].0).collect();
    let lrd: Vec<f64> = (0..n)
        .map(|i| {
            let mean_reach = nb[i].iter().map(|&(d, o)| d.max(kd[o])).sum::<f64>() / k as f64;
            1.0 / (mean_reach + 1e-10)
        })
        .collect();
    (0..n)
        .map(|i| nb[i].iter().map(|&(_, o)| lrd[o] / lrd[i]).sum::<f64>() / k as f64)
        .collect()
}

pub struct NaiveDbscan {
    pub eps: f64,
    pub core: Vec<bool>,
    /// `None` for noise.
    pub cluster: Vec<Option<usize>>,
    pub scores: Vec<f64>,
}

/// Textbook DBSCAN by breadth-first expansion over eps-neighborhoods. Border
/// rows join the cluster of their nearest core row.
pub fn naive_dbscan(x: &Matrix, min_pts: usize, eps_percentile: f64) -> NaiveDbscan {
    let n = x.nrows();
    let kdist: Vec<f64> = (0..n).map(|i| sorted_neighbors(x, i)[min_pts - 2].0).collect();
    let eps = lin_quantile(&kdist, eps_percentile / 100.0);
    let within = |i: usize| -> Vec<usize> {
        (0..n).filter(|&j| euclid(x.row(i), x.row(j)) <= eps).collect()
    };
    let core: Vec<bool> = (0..n).map(|i| within(i).len() >= min_pts).collect();
    let mut cluster = vec![None; n];
    let mut next = 0;
    for s in 0..n {
        if !core[s] || cluster[s].is_some() {
            continue;
        }
        let mut queue = VecDeque::from([s]);
        cluster[s] = Some(next);
        while let Some(c) = queue.pop_front() {
            for j in within(c) {
                if core[j] && cluster[j].is_none() {
                    cluster[j] = Some(next);
                    queue.push_back(j);
                }
            }
        }
        next += 1;
    }
    let mut scores = vec![0.0; n];
    for i in 0..n {
        if core[i] {
            continue;
        }
        let (d, j) = (0..n)
            .filter(|&j| core[j])
            .map(|j| (euclid(x.row(i), x.row(j)), j))
            .fold((f64::INFINITY, usize::MAX), |b, c| if c.0 < b.0 { c } else { b });
        scores[i] = d;
        if d <= eps {
            cluster[i] = cluster[j];
        }
    }
    NaiveDbscan {
        eps,
        core,
        cluster,
        scores,
    }
}

/// OPTICS with unbounded radius and an explicit seed list.
pub fn naive_optics(x: &Matrix, min_pts: usize) -> (Vec<usize>, Vec<Option<f64>>) {
    let n = x.nrows();
    let core: Vec<f64> = (0..n).map(|i| sorted_neighbors(x, i)[min_pts - 2].0).collect();
    let mut start = 0;
    for i in 0..n {
        if core[i] > core[start] {
            start = i;
        }
    }
    let mut reach: Vec<Option<f64>> = vec![None; n];
    let mut processed = vec![false; n];
    let mut order = Vec::new();
    let mut seeds: Vec<usize> = Vec::new();
    let mut current = Some(start);
    while let Some(p) = current {
        processed[p] = true;
        order.push(p);
        seeds.retain(|&s| s != p);
        for o in 0..n {
            if processed[o] {
                continue;
            }
            let r = core[p].max(euclid(x.row(p), x.row(o)));
            match reach[o] {
                None => {
                    reach[o] = Some(r);
                    seeds.push(o);
                }
                Some(old) if r < old => reach[o] = Some(r),
                _ => {}
            }
        }
        current = seeds
            .iter()
            .copied()
            .min_by(|&a, &b| reach[a].unwrap().partial_cmp(&reach[b].unwrap()).unwrap().then(a.cmp(&b)));
    }
    (order, reach)
}

/// CBLOF from a given clustering.
pub fn naive_cblof(
    x: &Matrix,
    centroids: &[Vec<f64>],
    assignment: &[usize],
    alpha: f64,
    beta: f64,
) -> Vec<f64> {
    let k = centroids.len();
    let n = x.nrows();
    let mut sizes = vec![0usize; k];
    for &a in assignment {
        sizes[a] += 1;
    }
    let mut by_size: Vec<usize> = (0..k).collect();
    by_size.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then(a.cmp(&b)));
    let mut b = k;
    let mut covered = 0;
    for pos in 0..k {
        covered += sizes[by_size[pos]];
        let ratio_break = pos + 1 < k
            && (sizes[by_size[pos + 1]] == 0
                || sizes[by_size[pos]] as f64 / sizes[by_size[pos + 1]] as f64 >= beta);
        if covered as f64 >= alpha * n as f64 || ratio_break {
            b = pos + 1;
            break;
        }
    }
    let large: Vec<usize> = by_size[..b].to_vec();
    (0..n)
        .map(|i| {
            let c = assignment[i];
            if large.contains(&c) {
                euclid(x.row(i), &centroids[c])
            } else {
                large
                    .iter()
                    .map(|&l| euclid(x.row(i), &centroids[l]))
                    .fold(f64::INFINITY, f64::min)
            }
        })
        .collect()
}

/// SOD with shared-neighbor similarity from explicit set intersections.
pub fn naive_sod(x: &Matrix, snn_k: usize, ref_size: usize, alpha: f64) -> Vec<f64> {
    let n = x.nrows();
    let p = x.ncols();
    let knn: Vec<Vec<usize>> = (0..n)
        .map(|i| sorted_neighbors(x, i).into_iter().take(snn_k).map(|e| e.1).collect())
        .collect();
    (0..n)
        .map(|i| {
            let mut cand: Vec<(usize, f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let shared = knn[i].iter().filter(|o| knn[j].contains(o)).count();
                    (shared, euclid(x.row(i), x.row(j)), j)
                })
                .collect();
            cand.sort_by(|a, b| {
                let a_pos = (a.0 > 0) as u8;
                let b_pos = (b.0 > 0) as u8;
                // Sharing rows first by similarity, then everything by distance.
                b_pos
                    .cmp(&a_pos)
                    .then(b.0.cmp(&a.0))
                    .then(a.1.partial_cmp(&b.1).unwrap())
                    .then(a.2.cmp(&b.2))
            });
            let refs: Vec<usize> = cand.iter().take(ref_size).map(|c| c.2).collect();
            let m = refs.len() as f64;
            let mean: Vec<f64> = (0..p).map(|j| refs.iter().map(|&r| x.get(r, j)).sum::<f64>() / m).collect();
            let var: Vec<f64> = (0..p)
                .map(|j| refs.iter().map(|&r| (x.get(r, j) - mean[j]).powi(2)).sum::<f64>() / m)
                .collect();
            let limit = alpha * var.iter().sum::<f64>() / p as f64;
            let dims: Vec<usize> = (0..p).filter(|&j| var[j] < limit).collect();
            if dims.is_empty() {
                0.0
            } else {
                let ss: f64 = dims.iter().map(|&j| (x.get(i, j) - mean[j]).powi(2)).sum();
                ss.sqrt() / (dims.len() as f64).sqrt()
            }
        })
        .collect()
}

/// Minimum of `1/2 a'Qa` over `0 <= a <= ub`, `sum a = 1`, by enumerating
/// which coordinates sit at each bound.
pub fn brute_force_dual(q: &DMatrix<f64>, ub: f64) -> (Vec<f64>, f64) {
    let n = q.nrows();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for code in 0..3usize.pow(n as u32) {
        let mut state = vec![0u8; n];
        let mut c = code;
        for s in state.iter_mut() {
            *s = (c % 3) as u8;
            c /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let mut a = DVector::from_fn(n, |i, _| if state[i] == 1 { ub } else { 0.0 });
        let m = free.len();
        if m > 0 {
            let mut sys = DMatrix::zeros(m + 1, m + 1);
            let mut rhs = DVector::zeros(m + 1);
            for (r, &i) in free.iter().enumerate() {
                for (c, &j) in free.iter().enumerate() {
                    sys[(r, c)] = q[(i, j)];
                }
                sys[(r, m)] = -1.0;
                sys[(m, r)] = 1.0;
                rhs[r] = -(0..n).filter(|&j| state[j] == 1).map(|j| q[(i, j)] * ub).sum::<f64>();
            }
            rhs[m] = 1.0 - a.sum();
            let Some(sol) = sys.lu().solve(&rhs) else { continue };
            for (r, &i) in free.iter().enumerate() {
                a[i] = sol[r];
            }
        }
        if (a.sum() - 1.0).abs() > 1e-9 || a.iter().any(|&v| v < -1e-12 || v > ub + 1e-12) {
            continue;
        }
        let obj = 0.5 * (a.transpose() * q * &a)[(0, 0)];
        if best.as_ref().is_none_or(|(_, b)| obj < *b) {
            best = Some((a.iter().copied().collect(), obj));
        }
    }
    best.expect("feasible point")
}

pub fn rbf_kernel(x: &Matrix, gamma: f64) -> DMatrix<f64> {
    let n = x.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        let d = euclid(x.row(i), x.row(j));
        (-gamma * d * d).exp()
    })
}

/// Checks that two labelings describe the same partition.
pub fn same_partition(a: &[Option<usize>], b: &[i64]) -> bool {
    let mut fwd: HashMap<usize, i64> = HashMap::new();
    let mut back: HashMap<i64, usize> = HashMap::new();
    for (x, &y) in a.iter().zip(b) {
        match x {
            None => {
                if y != -1 {
                    return false;
                }
            }
            Some(c) => {
                if y < 0 || *fwd.entry(*c).or_insert(y) != y || *back.entry(y).or_insert(*c) != *c {
                    return false;
                }
            }
        }
    }
    true
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs().max(1.0))
        .fold(0.0, f64::max)
}
