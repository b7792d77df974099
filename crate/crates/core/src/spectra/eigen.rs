//! Symmetric and Hermitian eigenvalues: Householder reduction to real
//! tridiagonal form followed by implicitly shifted QL.
//!
//! Verification mode recovers an eigenvector for every computed eigenvalue by
//! inverse iteration on the tridiagonal matrix, maps it back through the
//! reflectors and checks `‖A v − λ v‖ ≤ tol · ‖A‖₂`.

use num_complex::Complex64;

use crate::error::{Result, SpectralError};
use crate::matrix::{FrameMatrix, HermMatrix, SymMatrix};

const MAX_QL_SWEEPS: usize = 60;

#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    pub verify: bool,
    pub tol_eig: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            verify: false,
            tol_eig: 1e-9,
        }
    }
}

impl EigenOptions {
    pub fn verified() -> Self {
        Self {
            verify: true,
            ..Self::default()
        }
    }
}

struct Reflector {
    start: usize,
    v: Vec<f64>,
    beta: f64,
}

struct Tridiagonal {
    d: Vec<f64>,
    e: Vec<f64>,
}

fn tridiagonalize_real(m: &SymMatrix) -> (Tridiagonal, Vec<Reflector>) {
    let n = m.dim();
    let mut a = m.as_slice().to_vec();
    let mut reflectors = Vec::new();
    let mut p = vec![0.0; n];
    for k in 0..n.saturating_sub(2) {
        let start = k + 1;
        let len = n - start;
        let mut v: Vec<f64> = (start..n).map(|i| a[i * n + k]).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if v[0] >= 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|x| x * x).sum();
        if vv == 0.0 {
            continue;
        }
        let beta = 2.0 / vv;
        // p = β S v
        for (r, pr) in p[..len].iter_mut().enumerate() {
            let row = &a[(start + r) * n + start..(start + r) * n + n];
            *pr = beta * row.iter().zip(&v).map(|(x, y)| x * y).sum::<f64>();
        }
        let kappa = 0.5 * beta * p[..len].iter().zip(&v).map(|(x, y)| x * y).sum::<f64>();
        for r in 0..len {
            p[r] -= kappa * v[r];
        }
        // S -= v wᵀ + w vᵀ
        for r in 0..len {
            let (vr, wr) = (v[r], p[r]);
            let row = &mut a[(start + r) * n + start..(start + r) * n + n];
            for c in 0..len {
                row[c] -= vr * p[c] + wr * v[c];
            }
        }
        a[start * n + k] = alpha;
        a[k * n + start] = alpha;
        for i in start + 1..n {
            a[i * n + k] = 0.0;
            a[k * n + i] = 0.0;
        }
        reflectors.push(Reflector { start, v, beta });
    }
    let d = (0..n).map(|i| a[i * n + i]).collect();
    let e = (0..n)
        .map(|i| if i + 1 < n { a[(i + 1) * n + i] } else { 0.0 })
        .collect();
    (Tridiagonal { d, e }, reflectors)
}

fn tridiagonalize_complex(m: &HermMatrix) -> Tridiagonal {
    let n = m.dim();
    let mut a = m.as_slice().to_vec();
    let mut p = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..n.saturating_sub(2) {
        let start = k + 1;
        let len = n - start;
        let mut v: Vec<Complex64> = (start..n).map(|i| a[i * n + k]).collect();
        let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let phase = if v[0].norm() > 0.0 {
            v[0] / v[0].norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let alpha = -phase * norm;
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|x| x.norm_sqr()).sum();
        if vv == 0.0 {
            continue;
        }
        let beta = 2.0 / vv;
        for (r, pr) in p[..len].iter_mut().enumerate() {
            let row = &a[(start + r) * n + start..(start + r) * n + n];
            *pr = row.iter().zip(&v).map(|(x, y)| x * y).sum::<Complex64>() * beta;
        }
        // v* p is real for Hermitian S.
        let vp: Complex64 = v.iter().zip(&p[..len]).map(|(x, y)| x.conj() * y).sum();
        let kappa = 0.5 * beta * vp.re;
        for r in 0..len {
            p[r] -= v[r] * kappa;
        }
        for r in 0..len {
            let (vr, wr) = (v[r], p[r]);
            let row = &mut a[(start + r) * n + start..(start + r) * n + n];
            for c in 0..len {
                row[c] -= vr * p[c].conj() + wr * v[c].conj();
            }
        }
        a[start * n + k] = alpha;
        a[k * n + start] = alpha.conj();
        for i in start + 1..n {
            a[i * n + k] = Complex64::new(0.0, 0.0);
            a[k * n + i] = Complex64::new(0.0, 0.0);
        }
    }
    // A diagonal unitary similarity turns the complex subdiagonal into |e|.
    let d = (0..n).map(|i| a[i * n + i].re).collect();
    let e = (0..n)
        .map(|i| if i + 1 < n { a[(i + 1) * n + i].norm() } else { 0.0 })
        .collect();
    Tridiagonal { d, e }
}

/// Implicit QL with Wilkinson-type shifts on a real symmetric tridiagonal
/// matrix; `e[i]` couples `i` and `i + 1`. Returns ascending eigenvalues.
fn tridiagonal_ql(mut d: Vec<f64>, mut e: Vec<f64>) -> Result<Vec<f64>> {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_QL_SWEEPS {
                return Err(SpectralError::NoConvergence {
                    iterations: iter,
                    residual: e[l].abs(),
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(|a, b| a.total_cmp(b));
    Ok(d)
}

/// Ascending eigenvalues of a real symmetric matrix.
pub fn eigenvalues_real(m: &SymMatrix, opts: EigenOptions) -> Result<Vec<f64>> {
    let (tri, reflectors) = tridiagonalize_real(m);
    let vals = tridiagonal_ql(tri.d.clone(), tri.e.clone())?;
    if opts.verify {
        let worst = max_relative_residual(m, &tri, &reflectors, &vals);
        if worst > opts.tol_eig {
            return Err(SpectralError::Shape(format!(
                "eigen residual {worst:e} exceeds tolerance {:e}",
                opts.tol_eig
            )));
        }
    }
    Ok(vals)
}

/// Ascending eigenvalues of a complex Hermitian matrix. In verification mode
/// the real `2n` embedding is solved with residual checks and must agree.
pub fn eigenvalues_complex(m: &HermMatrix, opts: EigenOptions) -> Result<Vec<f64>> {
    let vals = tridiagonal_ql(tridiagonalize_complex(m).d, tridiagonalize_complex(m).e)?;
    if opts.verify {
        let embedded = eigenvalues_real(&m.real_embedding(), opts)?;
        let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
        for (i, v) in vals.iter().enumerate() {
            let pair = [embedded[2 * i], embedded[2 * i + 1]];
            if pair.iter().any(|p| (p - v).abs() > opts.tol_eig * scale) {
                return Err(SpectralError::Shape(format!(
                    "complex eigenvalue {i} disagrees with real embedding"
                )));
            }
        }
    }
    Ok(vals)
}

pub fn eigenvalues_frame(m: &FrameMatrix, opts: EigenOptions) -> Result<Vec<f64>> {
    match m {
        FrameMatrix::Real(a) => eigenvalues_real(a, opts),
        FrameMatrix::Complex(a) => eigenvalues_complex(a, opts),
    }
}

/// Solve `(T − μ I) x = b` by Gaussian elimination with partial pivoting;
/// zero pivots are replaced by `tiny`.
fn shifted_tridiagonal_solve(tri: &Tridiagonal, mu: f64, b: &mut [f64], tiny: f64) {
    let n = tri.d.len();
    if n == 1 {
        let p = tri.d[0] - mu;
        b[0] /= if p.abs() < tiny { tiny } else { p };
        return;
    }
    // Row k after elimination: u0[k] x_k + u1[k] x_{k+1} + u2[k] x_{k+2}.
    let mut u0 = vec![0.0; n];
    let mut u1 = vec![0.0; n];
    let mut u2 = vec![0.0; n];
    let mut diag = tri.d[0] - mu;
    let mut sup = tri.e[0];
    for k in 0..n - 1 {
        let sub = tri.e[k];
        let next_diag = tri.d[k + 1] - mu;
        let next_sup = if k + 2 < n { tri.e[k + 1] } else { 0.0 };
        if diag.abs() >= sub.abs() {
            let piv = if diag.abs() < tiny { tiny } else { diag };
            let l = sub / piv;
            u0[k] = piv;
            u1[k] = sup;
            u2[k] = 0.0;
            b[k + 1] -= l * b[k];
            diag = next_diag - l * sup;
            sup = next_sup;
        } else {
            // swap rows k and k+1
            let l = diag / sub;
            u0[k] = sub;
            u1[k] = next_diag;
            u2[k] = next_sup;
            b.swap(k, k + 1);
            b[k + 1] -= l * b[k];
            diag = sup - l * next_diag;
            sup = -l * next_sup;
        }
    }
    u0[n - 1] = if diag.abs() < tiny { tiny } else { diag };
    for k in (0..n).rev() {
        let mut s = b[k];
        if k + 1 < n {
            s -= u1[k] * b[k + 1];
        }
        if k + 2 < n {
            s -= u2[k] * b[k + 2];
        }
        b[k] = s / u0[k];
    }
}

fn normalize(x: &mut [f64]) {
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
}

fn max_relative_residual(
    m: &SymMatrix,
    tri: &Tridiagonal,
    reflectors: &[Reflector],
    vals: &[f64],
) -> f64 {
    let n = m.dim();
    if n == 0 {
        return 0.0;
    }
    let norm2 = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if norm2 == 0.0 {
        return 0.0;
    }
    let tiny = f64::EPSILON * norm2;
    let mut worst = 0.0f64;
    for (idx, &lambda) in vals.iter().enumerate() {
        let mut y: Vec<f64> = (0..n)
            .map(|i| 1.0 + ((i * 7 + idx * 13) % 11) as f64 * 0.01)
            .collect();
        for _ in 0..3 {
            shifted_tridiagonal_solve(tri, lambda, &mut y, tiny);
            normalize(&mut y);
        }
        for r in reflectors.iter().rev() {
            let seg = &mut y[r.start..];
            let dot: f64 = seg.iter().zip(&r.v).map(|(a, b)| a * b).sum();
            for (s, v) in seg.iter_mut().zip(&r.v) {
                *s -= r.beta * dot * v;
            }
        }
        let av = m.mul_vec(&y);
        let res = av
            .iter()
            .zip(&y)
            .map(|(a, v)| (a - lambda * v).powi(2))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(res / norm2);
    }
    worst
}
