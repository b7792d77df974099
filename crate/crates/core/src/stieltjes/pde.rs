//! Finite-difference residuals of the transport equations satisfied by
//! Stieltjes-transform flows.
//!
//! Derivatives are second-order central differences: in time over the field's
//! nodes and in `z` along the real direction (`∂_z = ∂_E` for holomorphic
//! fields). Residuals are reported at interior points only.

use std::io::{self, Write};

use num_complex::Complex64;

use super::StieltjesField;
use crate::error::{Result, SpectralError};

/// `|LHS − RHS|` at interior `(t, E)` points.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualField {
    pub equation_id: &'static str,
    pub times: Vec<f64>,
    pub re: Vec<f64>,
    /// Time-major over the interior points.
    pub values: Vec<f64>,
}

impl ResidualField {
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// CSV rows `t,re_z,residual,equation_id` (header not included).
    pub fn write_rows<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (k, t) in self.times.iter().enumerate() {
            for (j, e) in self.re.iter().enumerate() {
                writeln!(w, "{},{},{},{}", t, e, self.values[k * self.re.len() + j], self.equation_id)?;
            }
        }
        Ok(())
    }
}

pub const RESIDUAL_CSV_HEADER: &str = "t,re_z,residual,equation_id";

fn uniform_step(xs: &[f64], what: &str) -> Result<f64> {
    if xs.len() < 3 {
        return Err(SpectralError::Domain(format!("{what} needs at least 3 nodes, got {}", xs.len())));
    }
    let h = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
    if !(h > 0.0) {
        return Err(SpectralError::Domain(format!("{what} nodes must increase")));
    }
    for (k, x) in xs.iter().enumerate() {
        if (x - (xs[0] + k as f64 * h)).abs() > 1e-9 * h.max(x.abs()) {
            return Err(SpectralError::Domain(format!("{what} nodes are not uniform")));
        }
    }
    Ok(h)
}

// Generic residual: `∂_t G − rhs(k, G, ∂_z G, z)` at interior nodes, with the
// time axis `axis` (times or reindexed times).
fn residual(
    field: &StieltjesField,
    axis: &[f64],
    id: &'static str,
    rhs: impl Fn(usize, Complex64, Complex64, Complex64) -> Complex64,
) -> Result<ResidualField> {
    let dt = uniform_step(axis, "time axis")?;
    let de = uniform_step(&field.re, "real axis")?;
    let (nt, ne) = (axis.len(), field.re.len());
    let mut values = Vec::with_capacity((nt - 2) * (ne - 2));
    for k in 1..nt - 1 {
        for j in 1..ne - 1 {
            let g = field.get(k, j);
            let gt = (field.get(k + 1, j) - field.get(k - 1, j)) / (2.0 * dt);
            let gz = (field.get(k, j + 1) - field.get(k, j - 1)) / (2.0 * de);
            let z = Complex64::new(field.re[j], field.eta);
            values.push((gt - rhs(k, g, gz, z)).norm());
        }
    }
    Ok(ResidualField {
        equation_id: id,
        times: axis[1..nt - 1].to_vec(),
        re: field.re[1..ne - 1].to_vec(),
        values,
    })
}

fn variance_rate(field: &StieltjesField, d_series: &[f64]) -> Result<Vec<f64>> {
    if d_series.len() != field.times.len() {
        return Err(SpectralError::Shape(format!(
            "{} d_t values for {} field times",
            d_series.len(),
            field.times.len()
        )));
    }
    let dt = uniform_step(&field.times, "time axis")?;
    let d2: Vec<f64> = d_series.iter().map(|d| d * d).collect();
    Ok((0..d2.len())
        .map(|k| {
            if k == 0 || k + 1 == d2.len() {
                0.0
            } else {
                (d2[k + 1] - d2[k - 1]) / (2.0 * dt)
            }
        })
        .collect())
}

/// Residual of `∂_t G = −(d_t²)′ G ∂_z G`, `(d_t²)′` by central differences.
pub fn pde_residual_sc(field: &StieltjesField, d_series: &[f64]) -> Result<ResidualField> {
    let rate = variance_rate(field, d_series)?;
    residual(field, &field.times, "sc", |k, g, gz, _| -rate[k] * g * gz)
}

/// Residual of `∂_t G = −2H t^{2H−1} G ∂_z G` (fBm entries, `d_t = t^H`).
pub fn pde_residual_sc_fbm(field: &StieltjesField, h: f64) -> Result<ResidualField> {
    let times = field.times.clone();
    residual(field, &field.times, "sc_fbm", |k, g, gz, _| {
        -2.0 * h * times[k].powf(2.0 * h - 1.0) * g * gz
    })
}

/// Field times `t = τ^{1/(2H)}` for a uniform `τ` axis.
pub fn burgers_times(tau: &[f64], h: f64) -> Vec<f64> {
    tau.iter().map(|t| t.powf(1.0 / (2.0 * h))).collect()
}

/// Residual of `∂_τ F = −F ∂_z F` for `F_τ = G_{τ^{1/(2H)}}`. The field must
/// have been evaluated at [`burgers_times`] of a uniform `τ` axis.
pub fn burgers_check(field: &StieltjesField, h: f64) -> Result<ResidualField> {
    let tau: Vec<f64> = field.times.iter().map(|t| t.powf(2.0 * h)).collect();
    residual(field, &tau, "burgers", |_, f, fz, _| -f * fz)
}

/// Residual of `∂_t G = −(d_t²)′ (c G² + 2cz G ∂_z G + (1 − c) ∂_z G)`.
pub fn pde_residual_mp(field: &StieltjesField, d_series: &[f64], c: f64) -> Result<ResidualField> {
    let rate = variance_rate(field, d_series)?;
    residual(field, &field.times, "mp", |k, g, gz, z| {
        -rate[k] * (c * g * g + 2.0 * c * z * g * gz + (1.0 - c) * gz)
    })
}
