//! Kolmogorov–Smirnov and Wasserstein-1 distances, Hoffman–Wielandt checks.

use std::io::{self, Write};

use super::eigen::{eigenvalues_frame, EigenOptions};
use super::SpectrumFrame;
use crate::error::Result;
use crate::laws::SpectralLaw;
use crate::matrix::FrameMatrix;

/// Quantile grid size for Wasserstein-1.
pub const W1_GRID: usize = 10_000;

/// `sup_x |F_emp(x) − F_law(x)|`, checked on both sides of every jump of the
/// empirical CDF and at the law's atom.
pub fn ks_distance(frame: &SpectrumFrame, law: &SpectralLaw) -> f64 {
    ks_sorted(frame.eigenvalues(), law)
}

fn ks_sorted(x: &[f64], law: &SpectralLaw) -> f64 {
    let n = x.len();
    if n == 0 {
        return 1.0;
    }
    let nf = n as f64;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < n {
        let v = x[i];
        let mut j = i;
        while j < n && x[j] == v {
            j += 1;
        }
        d = d
            .max((j as f64 / nf - law.cdf(v)).abs())
            .max((i as f64 / nf - law.cdf_left(v)).abs());
        i = j;
    }
    if let Some((a, _)) = law.atom() {
        let below = x.partition_point(|&v| v < a) as f64 / nf;
        let upto = x.partition_point(|&v| v <= a) as f64 / nf;
        d = d
            .max((upto - law.cdf(a)).abs())
            .max((below - law.cdf_left(a)).abs());
    }
    d.min(1.0)
}

/// Two-sample KS distance between empirical distributions.
pub fn ks_two_sample(a: &SpectrumFrame, b: &SpectrumFrame) -> f64 {
    let (x, y) = (a.eigenvalues(), b.eigenvalues());
    if x.is_empty() || y.is_empty() {
        return 1.0;
    }
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < x.len() || j < y.len() {
        let v = match (x.get(i), y.get(j)) {
            (Some(&p), Some(&q)) => p.min(q),
            (Some(&p), None) => p,
            (None, Some(&q)) => q,
            (None, None) => break,
        };
        while i < x.len() && x[i] == v {
            i += 1;
        }
        while j < y.len() && y[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / nx - j as f64 / ny).abs());
    }
    d
}

fn law_quantiles(law: &SpectralLaw) -> Vec<f64> {
    (0..W1_GRID)
        .map(|k| law.quantile((k as f64 + 0.5) / W1_GRID as f64))
        .collect()
}

/// `∫|F_emp − F_law| = ∫₀¹ |Q_emp(u) − Q_law(u)| du` by the midpoint rule on
/// a quantile grid of [`W1_GRID`] points.
pub fn wasserstein1(frame: &SpectrumFrame, law: &SpectralLaw) -> f64 {
    let x = frame.eigenvalues();
    if x.is_empty() {
        return f64::INFINITY;
    }
    let n = x.len();
    law_quantiles(law)
        .iter()
        .enumerate()
        .map(|(k, q)| {
            let u = (k as f64 + 0.5) / W1_GRID as f64;
            let idx = ((u * n as f64).floor() as usize).min(n - 1);
            (x[idx] - q).abs()
        })
        .sum::<f64>()
        / W1_GRID as f64
}

/// Wasserstein-1 distance between two reference laws on the same quantile grid.
pub fn wasserstein1_laws(a: &SpectralLaw, b: &SpectralLaw) -> f64 {
    law_quantiles(a)
        .iter()
        .zip(law_quantiles(b))
        .map(|(p, q)| (p - q).abs())
        .sum::<f64>()
        / W1_GRID as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoffmanWielandt {
    /// `Σ (λ_i^A − λ_i^B)²` over ascending spectra.
    pub lhs: f64,
    /// `‖A − B‖_F²`.
    pub rhs: f64,
    pub ok: bool,
}

pub fn hoffman_wielandt_check(a: &FrameMatrix, b: &FrameMatrix) -> Result<HoffmanWielandt> {
    let rhs = a.distance_sq(b)?;
    let la = eigenvalues_frame(a, EigenOptions::default())?;
    let lb = eigenvalues_frame(b, EigenOptions::default())?;
    let lhs: f64 = la.iter().zip(&lb).map(|(x, y)| (x - y).powi(2)).sum();
    let tol = 1e-10 * (a.frobenius_sq() + b.frobenius_sq()) + f64::MIN_POSITIVE;
    Ok(HoffmanWielandt {
        lhs,
        rhs,
        ok: lhs <= rhs + tol,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub t: f64,
    pub metric: String,
    pub value: f64,
    pub law: String,
    pub ensemble_hash: String,
}

/// Rows of `t,metric,value,law,ensemble_hash`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
}

impl MetricReport {
    /// Adds `ks` and `w1` rows for one frame against one law.
    pub fn push_frame(&mut self, frame: &SpectrumFrame, law: &SpectralLaw, law_id: &str, hash: &str) {
        for (metric, value) in [
            ("ks", ks_distance(frame, law)),
            ("w1", wasserstein1(frame, law)),
        ] {
            self.rows.push(MetricRow {
                t: frame.t,
                metric: metric.into(),
                value,
                law: law_id.into(),
                ensemble_hash: hash.into(),
            });
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,metric,value,law,ensemble_hash")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{},{}", r.t, r.metric, r.value, r.law, r.ensemble_hash)?;
        }
        Ok(())
    }
}
