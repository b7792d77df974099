//! Time regularity of `t ↦ ⟨f, L_N(t)⟩`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{eigenvalues_sym, EigenOptions, ESDSeries, SpectrumFrame};
use crate::ensembles::{build_frames, EnsembleSpec, MatrixProcessFrame};
use crate::error::{Result, SpectralError};

/// Test functions with bounded derivative; `scale` multiplies the function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFunction {
    Arctan { scale: f64 },
    /// `x / √(1 + x²)`.
    Ratio { scale: f64 },
    /// `φ(x) = √(1 + x²)`.
    Phi { scale: f64 },
    Sin { scale: f64 },
}

impl TestFunction {
    pub fn arctan() -> Self {
        TestFunction::Arctan { scale: 1.0 }
    }

    pub fn ratio() -> Self {
        TestFunction::Ratio { scale: 1.0 }
    }

    pub fn phi() -> Self {
        TestFunction::Phi { scale: 1.0 }
    }

    pub fn sin() -> Self {
        TestFunction::Sin { scale: 1.0 }
    }

    fn scale(&self) -> f64 {
        match *self {
            TestFunction::Arctan { scale }
            | TestFunction::Ratio { scale }
            | TestFunction::Phi { scale }
            | TestFunction::Sin { scale } => scale,
        }
    }

    pub fn scaled(self, k: f64) -> Self {
        match self {
            TestFunction::Arctan { scale } => TestFunction::Arctan { scale: scale * k },
            TestFunction::Ratio { scale } => TestFunction::Ratio { scale: scale * k },
            TestFunction::Phi { scale } => TestFunction::Phi { scale: scale * k },
            TestFunction::Sin { scale } => TestFunction::Sin { scale: scale * k },
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let base = match self {
            TestFunction::Arctan { .. } => x.atan(),
            TestFunction::Ratio { .. } => x / (1.0 + x * x).sqrt(),
            TestFunction::Phi { .. } => (1.0 + x * x).sqrt(),
            TestFunction::Sin { .. } => x.sin(),
        };
        self.scale() * base
    }

    /// `‖f′‖∞`; every base function has unit Lipschitz constant.
    pub fn lipschitz(&self) -> f64 {
        self.scale().abs()
    }
}

/// `max |⟨f, L(t)⟩ − ⟨f, L(s)⟩|` over frame pairs with `|t − s| ≤ delta`.
pub fn measure_flow_modulus(series: &ESDSeries, f: &TestFunction, delta: f64) -> f64 {
    let frames = series.frames();
    let vals: Vec<f64> = frames.iter().map(|fr| fr.integrate(|x| f.eval(x))).collect();
    let slack = 1e-12 * delta.abs().max(1.0);
    let mut best = 0.0f64;
    for i in 0..frames.len() {
        for j in i + 1..frames.len() {
            if frames[j].t - frames[i].t > delta + slack {
                break;
            }
            best = best.max((vals[j] - vals[i]).abs());
        }
    }
    best
}

/// One realization of the Lipschitz flow bound
/// `|⟨f,L(t)⟩ − ⟨f,L(s)⟩|² ≤ (‖f′‖∞²/N) ‖Y(t) − Y(s)‖_F²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowBound {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

pub fn lipschitz_flow_check(
    a: &MatrixProcessFrame,
    sa: &SpectrumFrame,
    b: &MatrixProcessFrame,
    sb: &SpectrumFrame,
    f: &TestFunction,
) -> Result<FlowBound> {
    let n = a.dim();
    if sa.len() != n || sb.len() != n || b.dim() != n {
        return Err(SpectralError::Shape("frames and spectra differ in size".into()));
    }
    let diff = sb.integrate(|x| f.eval(x)) - sa.integrate(|x| f.eval(x));
    let lhs = diff * diff;
    let rhs = f.lipschitz().powi(2) / n as f64 * a.data.distance_sq(&b.data)?;
    let tol = 1e-12 * (1.0 + rhs) + 1e-14 * f.lipschitz().powi(2);
    Ok(FlowBound {
        lhs,
        rhs,
        ok: lhs <= rhs + tol,
    })
}

/// Monte Carlo estimate of `E|⟨f, L(t)⟩ − ⟨f, L(s)⟩|²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeEstimate {
    pub s: f64,
    pub t: f64,
    pub value: f64,
    pub stderr: f64,
    pub n_mc: usize,
}

/// Probe every `(s, t)` pair (grid times) on the same `n_mc` replicas.
pub fn modulus_moment_probe(
    spec: &EnsembleSpec,
    f: &TestFunction,
    pairs: &[(f64, f64)],
    n_mc: usize,
) -> Result<Vec<ProbeEstimate>> {
    if n_mc < 2 {
        return Err(SpectralError::Domain(format!("probe needs n_mc >= 2, got {n_mc}")));
    }
    let mut nodes: Vec<usize> = Vec::new();
    let mut idx = Vec::with_capacity(pairs.len());
    for &(s, t) in pairs {
        let mut locate = |x: f64| -> Result<usize> {
            let k = spec
                .grid
                .index_of(x)
                .ok_or_else(|| SpectralError::Domain(format!("time {x} is not a grid node")))?;
            Ok(match nodes.iter().position(|&n| n == k) {
                Some(p) => p,
                None => {
                    nodes.push(k);
                    nodes.len() - 1
                }
            })
        };
        idx.push((locate(s)?, locate(t)?));
    }
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.sort_by_key(|&i| nodes[i]);
    let sorted: Vec<usize> = order.iter().map(|&i| nodes[i]).collect();
    let pos = |i: usize| order.iter().position(|&o| o == i).unwrap();
    let idx: Vec<(usize, usize)> = idx.iter().map(|&(a, b)| (pos(a), pos(b))).collect();

    let per_replica: Vec<Result<Vec<f64>>> = (0..n_mc)
        .into_par_iter()
        .map(|r| {
            let frames = build_frames(&spec.replica(r), &sorted)?;
            let vals: Vec<f64> = frames
                .iter()
                .map(|fr| Ok(eigenvalues_sym(fr, EigenOptions::default())?.integrate(|x| f.eval(x))))
                .collect::<Result<_>>()?;
            Ok(idx.iter().map(|&(a, b)| (vals[b] - vals[a]).powi(2)).collect())
        })
        .collect();
    let mut sum = vec![0.0; pairs.len()];
    let mut sum2 = vec![0.0; pairs.len()];
    for rep in per_replica {
        for (k, v) in rep?.into_iter().enumerate() {
            sum[k] += v;
            sum2[k] += v * v;
        }
    }
    let n = n_mc as f64;
    Ok(pairs
        .iter()
        .enumerate()
        .map(|(k, &(s, t))| {
            let mean = sum[k] / n;
            let var = ((sum2[k] / n - mean * mean) * n / (n - 1.0)).max(0.0);
            ProbeEstimate {
                s,
                t,
                value: mean,
                stderr: (var / n).sqrt(),
                n_mc,
            }
        })
        .collect())
}
