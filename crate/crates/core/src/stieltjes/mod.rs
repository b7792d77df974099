//! Stieltjes transforms, their transport equations, and the self-consistent
//! equation of the locally dependent ensemble.
//!
//! Every field is stored in the `upper` convention `G(z) = ∫ μ(dx)/(z − x)`,
//! so `Im G < 0` when `Im z > 0`.

mod fixed_point;
mod pde;

use std::io::{self, Write};

use num_complex::Complex64;

pub use fixed_point::{
    dependent_fixed_point, select_sign_convention, DependentKernel, FixedPointConfig,
    FixedPointResult, SignConvention, SignOutcome,
};
pub use pde::{
    burgers_check, burgers_times, pde_residual_mp, pde_residual_sc, pde_residual_sc_fbm,
    ResidualField, RESIDUAL_CSV_HEADER,
};

use crate::error::{Result, SpectralError};
use crate::spectra::SpectrumFrame;

/// Smallest admissible `Im z`.
pub const ETA_MIN: f64 = 0.05;

/// Uniform real parts `[e_min, e_max]` at one or more heights `η`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGrid {
    pub e_min: f64,
    pub e_max: f64,
    pub n_e: usize,
    pub etas: Vec<f64>,
}

impl ComplexGrid {
    pub fn new(e_min: f64, e_max: f64, n_e: usize, etas: Vec<f64>) -> Result<Self> {
        let g = Self {
            e_min,
            e_max,
            n_e,
            etas,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_e < 2 || !(self.e_max > self.e_min) {
            return Err(SpectralError::Config(
                "complex grid needs n_e >= 2 and e_max > e_min".into(),
            ));
        }
        if self.etas.is_empty() {
            return Err(SpectralError::Config("complex grid has no imaginary levels".into()));
        }
        if let Some(eta) = self.etas.iter().find(|&&e| !(e >= ETA_MIN)) {
            return Err(SpectralError::Config(format!(
                "imaginary level {eta} is below the minimum {ETA_MIN}"
            )));
        }
        Ok(())
    }

    pub fn de(&self) -> f64 {
        (self.e_max - self.e_min) / (self.n_e - 1) as f64
    }

    pub fn re_parts(&self) -> Vec<f64> {
        (0..self.n_e).map(|j| self.e_min + j as f64 * self.de()).collect()
    }
}

/// `G(t, E + iη)` over times × real parts at one height.
#[derive(Debug, Clone, PartialEq)]
pub struct StieltjesField {
    pub times: Vec<f64>,
    pub re: Vec<f64>,
    pub eta: f64,
    /// Time-major: `values[k * re.len() + j]`.
    pub values: Vec<Complex64>,
}

impl StieltjesField {
    /// Evaluate `g(t, z)` on the grid.
    pub fn from_fn(times: &[f64], re: &[f64], eta: f64, g: impl Fn(f64, Complex64) -> Complex64) -> Self {
        let values = times
            .iter()
            .flat_map(|&t| re.iter().map(move |&e| (t, Complex64::new(e, eta))))
            .map(|(t, z)| g(t, z))
            .collect();
        Self {
            times: times.to_vec(),
            re: re.to_vec(),
            eta,
            values,
        }
    }

    /// Empirical transforms of a time-ordered list of spectra.
    pub fn empirical(frames: &[SpectrumFrame], re: &[f64], eta: f64) -> Self {
        let times: Vec<f64> = frames.iter().map(|f| f.t).collect();
        let mut values = Vec::with_capacity(times.len() * re.len());
        for f in frames {
            values.extend(re.iter().map(|&e| empirical_stieltjes(f, Complex64::new(e, eta))));
        }
        Self {
            times,
            re: re.to_vec(),
            eta,
            values,
        }
    }

    #[inline]
    pub fn get(&self, k: usize, j: usize) -> Complex64 {
        self.values[k * self.re.len() + j]
    }

    /// CSV rows `t,re_z,im_z,re_G,im_G,convention` (header not included).
    pub fn write_rows<W: Write>(&self, mut w: W, convention: &str) -> io::Result<()> {
        for (k, t) in self.times.iter().enumerate() {
            for (j, e) in self.re.iter().enumerate() {
                let g = self.get(k, j);
                writeln!(w, "{},{},{},{},{},{}", t, e, self.eta, g.re, g.im, convention)?;
            }
        }
        Ok(())
    }
}

pub const STIELTJES_CSV_HEADER: &str = "t,re_z,im_z,re_G,im_G,convention";

/// `(1/N) Σ 1/(z − λ_i)`.
pub fn empirical_stieltjes(frame: &SpectrumFrame, z: Complex64) -> Complex64 {
    frame.stieltjes(z)
}

// Root `(B − R)/(2A)` of `A G² − B G + 1 = 0` where `R = √(z−a)·√(z−b)`
// (principal roots) carries the cut on `[a, b]` and `R ~ z` at infinity.
// The algebraically equal form `2/(B + R)` is used when it is better conditioned.
fn quadratic_branch(z: Complex64, a: f64, b: f64, qa: Complex64, qb: Complex64) -> Complex64 {
    let r = (z - a).sqrt() * (z - b).sqrt();
    let plus = qb + r;
    let minus = qb - r;
    if plus.norm() >= minus.norm() {
        2.0 / plus
    } else {
        minus / (2.0 * qa)
    }
}

/// Stieltjes transform of the semicircle law of scale `d`: the root of
/// `d²G² − zG + 1 = 0` that behaves like `1/z` at infinity.
pub fn gsc_closed(z: Complex64, d: f64) -> Complex64 {
    let d2 = d * d;
    quadratic_branch(z, -2.0 * d, 2.0 * d, Complex64::new(d2, 0.0), z)
}

/// Stieltjes transform of the Marchenko–Pastur law: the root of
/// `c σ² z G² − (z − σ²(1 − c)) G + 1 = 0` that behaves like `1/z` at infinity.
/// For `c > 1` it carries the pole `(1 − 1/c)/z` of the atom.
pub fn gmp_closed(z: Complex64, c: f64, sigma: f64) -> Complex64 {
    let s2 = sigma * sigma;
    let (a, b) = (s2 * (1.0 - c.sqrt()).powi(2), s2 * (1.0 + c.sqrt()).powi(2));
    quadratic_branch(z, a, b, c * s2 * z, z - s2 * (1.0 - c))
}

/// `|d²G² − zG + 1|`.
pub fn gsc_residual(z: Complex64, d: f64, g: Complex64) -> f64 {
    (d * d * g * g - z * g + 1.0).norm()
}

/// `|cσ²zG² − G(z − σ²(1 − c)) + 1|`.
pub fn gmp_residual(z: Complex64, c: f64, sigma: f64, g: Complex64) -> f64 {
    let s2 = sigma * sigma;
    (c * z * s2 * g * g - g * (z - s2 * (1.0 - c)) + 1.0).norm()
}
