//! Eigenvalues, empirical spectral distributions and distances to reference laws.

mod eigen;
mod flow;
mod metrics;

use std::io::{self, Write};

pub use eigen::{eigenvalues_complex, eigenvalues_frame, eigenvalues_real, EigenOptions};
pub use flow::{
    lipschitz_flow_check, measure_flow_modulus, modulus_moment_probe, FlowBound, ProbeEstimate,
    TestFunction,
};
pub use metrics::{
    hoffman_wielandt_check, ks_distance, ks_two_sample, wasserstein1, wasserstein1_laws,
    HoffmanWielandt, MetricReport, MetricRow, W1_GRID,
};

use crate::ensembles::MatrixProcessFrame;
use crate::error::{Result, SpectralError};
use num_complex::Complex64;

/// Sorted eigenvalues at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumFrame {
    pub t: f64,
    eigenvalues: Vec<f64>,
}

impl SpectrumFrame {
    /// Wraps eigenvalues, sorting them ascending.
    pub fn new(t: f64, mut eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(SpectralError::Shape("non-finite eigenvalue".into()));
        }
        eigenvalues.sort_by(f64::total_cmp);
        Ok(Self { t, eigenvalues })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `⟨f, L⟩ = (1/N) Σ f(λ_i)`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.eigenvalues.iter().map(|&x| f(x)).sum::<f64>() / self.len() as f64
    }

    /// Every eigenvalue multiplied by `s` (a positive scale keeps the order).
    pub fn scaled(&self, s: f64) -> Self {
        let mut ev: Vec<f64> = self.eigenvalues.iter().map(|v| v * s).collect();
        ev.sort_by(f64::total_cmp);
        Self {
            t: self.t,
            eigenvalues: ev,
        }
    }

    /// Empirical Stieltjes transform `(1/N) Σ 1/(z − λ_i)`.
    pub fn stieltjes(&self, z: Complex64) -> Complex64 {
        self.eigenvalues
            .iter()
            .map(|&l| (z - l).inv())
            .sum::<Complex64>()
            / self.len() as f64
    }
}

/// Eigenvalues of a frame, ascending.
pub fn eigenvalues_sym(frame: &MatrixProcessFrame, opts: EigenOptions) -> Result<SpectrumFrame> {
    SpectrumFrame::new(frame.t, eigenvalues_frame(&frame.data, opts)?)
}

/// Time-ordered spectra of one ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct ESDSeries {
    pub spec_hash: String,
    frames: Vec<SpectrumFrame>,
}

impl ESDSeries {
    pub fn new(spec_hash: impl Into<String>) -> Self {
        Self {
            spec_hash: spec_hash.into(),
            frames: Vec::new(),
        }
    }

    /// Appends a frame; times must increase strictly.
    pub fn push(&mut self, frame: SpectrumFrame) -> Result<()> {
        if let Some(last) = self.frames.last() {
            if frame.t <= last.t {
                return Err(SpectralError::Shape(format!(
                    "frame time {} does not follow {}",
                    frame.t, last.t
                )));
            }
        }
        self.frames.push(frame);
        Ok(())
    }

    pub fn frames(&self) -> &[SpectrumFrame] {
        &self.frames
    }

    pub fn at(&self, t: f64) -> Option<&SpectrumFrame> {
        self.frames.iter().find(|f| (f.t - t).abs() <= 1e-12 * t.abs().max(1.0))
    }

    /// CSV with header `t,rank,eigenvalue`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,rank,eigenvalue")?;
        for f in &self.frames {
            for (r, v) in f.eigenvalues.iter().enumerate() {
                writeln!(w, "{},{},{}", f.t, r, v)?;
            }
        }
        Ok(())
    }
}

/// `|Σλ − Tr A|` and `|Σλ² − ‖A‖_F²|`, each relative to `‖A‖_F · N`.
pub fn spectral_identity_errors(frame: &MatrixProcessFrame, spectrum: &SpectrumFrame) -> (f64, f64) {
    let n = frame.dim().max(1) as f64;
    let fro2 = frame.data.frobenius_sq();
    let scale = fro2.sqrt().max(f64::MIN_POSITIVE) * n;
    let sum: f64 = spectrum.eigenvalues().iter().sum();
    let sum2: f64 = spectrum.eigenvalues().iter().map(|v| v * v).sum();
    (
        (sum - frame.data.trace()).abs() / scale,
        (sum2 - fro2).abs() / (scale * fro2.sqrt().max(f64::MIN_POSITIVE)),
    )
}
