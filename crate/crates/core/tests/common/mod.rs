//! Oracles and statistics shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand_distr::StandardNormal;
use spectralflow::matrix::SymMatrix;

pub fn axis(a: f64, b: f64, intervals: usize) -> Vec<f64> {
    (0..=intervals)
        .map(|k| a + (b - a) * k as f64 / intervals as f64)
        .collect()
}

/// Lower Cholesky factor of a dense row-major SPD matrix.
pub fn cholesky(a: &[f64], n: usize) -> Vec<f64> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum();
            if i == j {
                let d = a[i * n + i] - s;
                assert!(d > 0.0, "matrix is not positive definite");
                l[i * n + i] = d.sqrt();
            } else {
                l[i * n + j] = (a[i * n + j] - s) / l[j * n + j];
            }
        }
    }
    l
}

/// `count` draws of `L ξ` with `ξ` standard normal.
pub fn cholesky_samples<R: Rng>(l: &[f64], n: usize, count: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| {
            let xi: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            (0..n)
                .map(|i| (0..=i).map(|k| l[i * n + k] * xi[k]).sum())
                .collect()
        })
        .collect()
}

/// Sample mean and (biased) covariance of row vectors.
pub struct SampleMoments {
    pub n: usize,
    pub dim: usize,
    pub mean: Vec<f64>,
    pub cov: Vec<f64>,
}

impl SampleMoments {
    pub fn of<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Self {
        let rows: Vec<&[f64]> = rows.into_iter().collect();
        let n = rows.len();
        let dim = rows[0].len();
        let mut mean = vec![0.0; dim];
        for r in &rows {
            for (m, v) in mean.iter_mut().zip(r.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut cov = vec![0.0; dim * dim];
        for r in &rows {
            for i in 0..dim {
                let di = r[i] - mean[i];
                for j in i..dim {
                    cov[i * dim + j] += di * (r[j] - mean[j]);
                }
            }
        }
        for i in 0..dim {
            for j in i..dim {
                let v = cov[i * dim + j] / n as f64;
                cov[i * dim + j] = v;
                cov[j * dim + i] = v;
            }
        }
        Self { n, dim, mean, cov }
    }

    pub fn cov(&self, i: usize, j: usize) -> f64 {
        self.cov[i * self.dim + j]
    }

    /// Gaussian standard error of the `(i, j)` sample covariance given the true covariance.
    pub fn cov_se(&self, truth: impl Fn(usize, usize) -> f64, i: usize, j: usize) -> f64 {
        ((truth(i, i) * truth(j, j) + truth(i, j).powi(2)) / self.n as f64).sqrt()
    }

    /// Largest `|Ĉ_ij − C_ij| / se_ij` over all entries.
    pub fn max_cov_z(&self, truth: impl Fn(usize, usize) -> f64) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in i..self.dim {
                let z = (self.cov(i, j) - truth(i, j)).abs() / self.cov_se(&truth, i, j);
                worst = worst.max(z);
            }
        }
        worst
    }
}

/// Number of eigenvalues of `a` below `x`: the count of negative pivots of
/// the LDLᵀ factorization of `a − xI`. The pivots multiply to the
/// characteristic polynomial `det(a − xI)`, so the count steps by one at
/// each of its roots.
pub fn count_below(a: &SymMatrix, x: f64) -> usize {
    let n = a.dim();
    let mut m: Vec<f64> = (0..n * n)
        .map(|k| {
            let (i, j) = (k / n, k % n);
            a.get(i, j) - if i == j { x } else { 0.0 }
        })
        .collect();
    let mut negative = 0;
    for k in 0..n {
        let mut piv = m[k * n + k];
        if piv == 0.0 {
            piv = -f64::EPSILON * (1.0 + x.abs());
        }
        if piv < 0.0 {
            negative += 1;
        }
        for i in k + 1..n {
            let f = m[i * n + k] / piv;
            for j in k + 1..n {
                m[i * n + j] -= f * m[k * n + j];
            }
        }
    }
    negative
}

/// Roots of the characteristic polynomial by bisection on the root count.
pub fn charpoly_roots(a: &SymMatrix) -> Vec<f64> {
    let n = a.dim();
    let radius = (0..n)
        .map(|i| (0..n).map(|j| a.get(i, j).abs()).sum::<f64>())
        .fold(0.0, f64::max)
        + 1.0;
    (0..n)
        .map(|k| {
            let (mut lo, mut hi) = (-radius, radius);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if count_below(a, mid) > k {
                    hi = mid;
                } else {
                    lo = mid;
                }
                if hi - lo < 1e-15 * radius {
                    break;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

pub fn random_sym<R: Rng>(n: usize, rng: &mut R) -> SymMatrix {
    SymMatrix::from_upper(n, |_, _| rng.random_range(-1.0..1.0))
}

/// 99th percentile by sorting.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let idx = ((v.len() - 1) as f64 * q).round() as usize;
    v[idx]
}
