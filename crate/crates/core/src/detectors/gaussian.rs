//! Location/scatter fits and squared Mahalanobis distances.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// A fitted location and covariance with its lower Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Gaussian {
    pub p: usize,
    pub location: Vec<f64>,
    /// Row-major `p x p`, MLE normalization (divides by the row count).
    pub covariance: Vec<f64>,
    /// Cholesky factor of `covariance + ridge * I`.
    chol: Vec<f64>,
    pub ridge: f64,
}

/// Lower Cholesky factor, or `None` when the matrix is not numerically
/// positive definite.
fn cholesky(a: &[f64], p: usize) -> Option<Vec<f64>> {
    let scale = (0..p).map(|i| a[i * p + i].abs()).fold(0.0, f64::max);
    let mut l = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut s = a[i * p + j];
            for k in 0..j {
                s -= l[i * p + k] * l[j * p + k];
            }
            if i == j {
                if !(s > 1e-12 * scale) {
                    return None;
                }
                l[i * p + i] = s.sqrt();
            } else {
                l[i * p + j] = s / l[j * p + j];
            }
        }
    }
    Some(l)
}

/// Mean and MLE covariance over `rows` (all rows when `None`), summed in
/// the given row order.
pub(crate) fn moments(x: &Matrix, rows: Option<&[usize]>) -> (Vec<f64>, Vec<f64>) {
    let p = x.ncols();
    let count = rows.map_or(x.nrows(), <[usize]>::len) as f64;
    let mut mean = vec![0.0; p];
    let visit = |f: &mut dyn FnMut(&[f64])| match rows {
        Some(ix) => ix.iter().for_each(|&i| f(x.row(i))),
        None => x.rows().for_each(f),
    };
    visit(&mut |r| {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    });
    for m in &mut mean {
        *m /= count;
    }
    let mut cov = vec![0.0; p * p];
    let mut diff = vec![0.0; p];
    visit(&mut |r| {
        for j in 0..p {
            diff[j] = r[j] - mean[j];
        }
        for a in 0..p {
            for b in 0..=a {
                cov[a * p + b] += diff[a] * diff[b];
            }
        }
    });
    for a in 0..p {
        for b in 0..=a {
            let v = cov[a * p + b] / count;
            cov[a * p + b] = v;
            cov[b * p + a] = v;
        }
    }
    (mean, cov)
}

impl Gaussian {
    /// Factorizes `covariance`, adding a ridge of `1e-6 * trace / p` if it is
    /// singular.
    pub fn from_moments(location: Vec<f64>, covariance: Vec<f64>) -> Result<Self> {
        let p = location.len();
        if let Some(chol) = cholesky(&covariance, p) {
            return Ok(Gaussian {
                p,
                location,
                covariance,
                chol,
                ridge: 0.0,
            });
        }
        let trace: f64 = (0..p).map(|i| covariance[i * p + i]).sum();
        let ridge = 1e-6 * trace / p as f64;
        let mut ridged = covariance.clone();
        for i in 0..p {
            ridged[i * p + i] += ridge;
        }
        match cholesky(&ridged, p) {
            Some(chol) => Ok(Gaussian {
                p,
                location,
                covariance,
                chol,
                ridge,
            }),
            None => Err(Error::SingularCovariance { ridge }),
        }
    }

    /// Fit without any ridge; `None` when singular.
    pub fn fit_strict(x: &Matrix, rows: &[usize]) -> Option<Self> {
        let (location, covariance) = moments(x, Some(rows));
        let chol = cholesky(&covariance, x.ncols())?;
        Some(Gaussian {
            p: x.ncols(),
            location,
            covariance,
            chol,
            ridge: 0.0,
        })
    }

    pub fn fit(x: &Matrix, rows: Option<&[usize]>) -> Result<Self> {
        let (location, covariance) = moments(x, rows);
        Gaussian::from_moments(location, covariance)
    }

    /// Determinant of the (ridged) covariance.
    pub fn determinant(&self) -> f64 {
        (0..self.p)
            .map(|i| self.chol[i * self.p + i])
            .product::<f64>()
            .powi(2)
    }

    pub fn mahalanobis_sq(&self, row: &[f64], buf: &mut [f64]) -> f64 {
        let p = self.p;
        let mut acc = 0.0;
        for i in 0..p {
            let mut s = row[i] - self.location[i];
            for k in 0..i {
                s -= self.chol[i * p + k] * buf[k];
            }
            let y = s / self.chol[i * p + i];
            buf[i] = y;
            acc += y * y;
        }
        acc
    }

    pub fn mahalanobis_sq_all(&self, x: &Matrix) -> Vec<f64> {
        let mut buf = vec![0.0; self.p];
        x.rows().map(|r| self.mahalanobis_sq(r, &mut buf)).collect()
    }
}
