//! Self-consistent equation for the locally dependent ensemble.
//!
//! The kernel `f(x, y) = Σ γ(k, l) e^{−2πi(kx + ly)}` is built from the
//! entry covariances `γ(k, l) = d² Σ_{r ∈ I ∩ (I + (k, l))} a_r a_{r − (k, l)}`.
//! The raw enumeration is not symmetric in `(k, l)` for asymmetric index sets,
//! while the symmetric matrix sees both orientations of every window; the
//! kernel therefore uses `½(γ(k, l) + γ(l, k))` and reports how far the raw
//! table was from symmetric.
//!
//! Two sign conventions are solved:
//! * `selfconsistent_minus`: `h = (−z − ∫ f h)^{-1}`, and `G = −S`;
//! * `paper_plus`: `h = (−z + ∫ f h)^{-1}`, mapped the same way.
//!
//! For a constant kernel the first reduces to the semicircle identity; the
//! second yields `d²S² − zS − 1 = 0`, which matches no semicircle transform.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensembles::IndexTerm;
use crate::error::{Result, SpectralError};
use crate::stieltjes::ETA_MIN;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignConvention {
    PaperPlus,
    SelfconsistentMinus,
}

impl SignConvention {
    pub fn as_str(self) -> &'static str {
        match self {
            SignConvention::PaperPlus => "paper_plus",
            SignConvention::SelfconsistentMinus => "selfconsistent_minus",
        }
    }
}

/// Covariance kernel of a dependent ensemble at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct DependentKernel {
    pub index_set: Vec<IndexTerm>,
    pub d: f64,
    /// Raw enumeration `γ(k, l)`.
    pub gamma_raw: BTreeMap<(i64, i64), f64>,
    /// `½(γ(k, l) + γ(l, k))`.
    pub gamma: BTreeMap<(i64, i64), f64>,
    /// `max |γ(k, l) − γ(l, k)|` over the raw table.
    pub asymmetry: f64,
}

impl DependentKernel {
    pub fn new(index_set: &[IndexTerm], d: f64) -> Result<Self> {
        if index_set.is_empty() {
            return Err(SpectralError::Config("dependent index set is empty".into()));
        }
        let d2 = d * d;
        let mut raw: BTreeMap<(i64, i64), f64> = BTreeMap::new();
        for r in index_set {
            for q in index_set {
                // r − (k, l) = q
                let shift = (r.offset.0 - q.offset.0, r.offset.1 - q.offset.1);
                *raw.entry(shift).or_insert(0.0) += d2 * r.weight * q.weight;
            }
        }
        let keys: Vec<(i64, i64)> = raw
            .keys()
            .flat_map(|&(k, l)| [(k, l), (l, k)])
            .collect();
        let get = |m: &BTreeMap<(i64, i64), f64>, k: (i64, i64)| m.get(&k).copied().unwrap_or(0.0);
        let mut gamma = BTreeMap::new();
        let mut asymmetry = 0.0f64;
        for key in keys {
            let (a, b) = (get(&raw, key), get(&raw, (key.1, key.0)));
            asymmetry = asymmetry.max((a - b).abs());
            gamma.insert(key, 0.5 * (a + b));
        }
        Ok(Self {
            index_set: index_set.to_vec(),
            d,
            gamma_raw: raw,
            gamma,
            asymmetry,
        })
    }

    /// Whether the raw enumeration differs from its transpose by more than 1e−12.
    pub fn is_asymmetric(&self) -> bool {
        self.asymmetry > 1e-12
    }

    /// `Σ |γ|` of the symmetrized kernel.
    pub fn total_mass(&self) -> f64 {
        self.gamma.values().map(|v| v.abs()).sum()
    }

    /// `f(x, y)`; real because `γ(−k, −l) = γ(k, l)`.
    pub fn f(&self, x: f64, y: f64) -> f64 {
        self.gamma
            .iter()
            .map(|(&(k, l), g)| g * (2.0 * PI * (k as f64 * x + l as f64 * y)).cos())
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FixedPointConfig {
    pub n_q: usize,
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub sign_convention: SignConvention,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            n_q: 256,
            damping: 0.5,
            tol: 1e-10,
            max_iter: 10_000,
            sign_convention: SignConvention::SelfconsistentMinus,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointResult {
    /// `h(x_i, z)` at `x_i = i / n_q`.
    pub h: Vec<Complex64>,
    pub s: Complex64,
    pub iterations: usize,
    pub converged: bool,
    pub convention: SignConvention,
}

impl FixedPointResult {
    /// The transform in the `upper` convention, `G = −S`.
    pub fn g_upper(&self) -> Complex64 {
        -self.s
    }
}

/// Damped iteration `h ← (1 − θ) h + θ (−z ∓ ∫ f h)^{-1}` on an `n_q`-point
/// periodic trapezoid grid, started from `h ≡ −1/z`.
pub fn dependent_fixed_point(
    kernel: &DependentKernel,
    z: Complex64,
    cfg: &FixedPointConfig,
) -> Result<FixedPointResult> {
    if z.im.abs() < ETA_MIN {
        return Err(SpectralError::Domain(format!(
            "|Im z| = {} is below the minimum {ETA_MIN}",
            z.im.abs()
        )));
    }
    if cfg.n_q < 2 || !(cfg.damping > 0.0 && cfg.damping <= 1.0) || !(cfg.tol > 0.0) {
        return Err(SpectralError::Config(
            "fixed point needs n_q >= 2, damping in (0, 1] and tol > 0".into(),
        ));
    }
    let n = cfg.n_q;
    let w = 1.0 / n as f64;
    let xs: Vec<f64> = (0..n).map(|i| i as f64 * w).collect();
    let kmat: Vec<f64> = xs
        .iter()
        .flat_map(|&x| xs.iter().map(move |&y| (x, y)))
        .map(|(x, y)| kernel.f(x, y) * w)
        .collect();
    let sign = match cfg.sign_convention {
        SignConvention::SelfconsistentMinus => -1.0,
        SignConvention::PaperPlus => 1.0,
    };
    let mut h = vec![-z.inv(); n];
    let mut next = vec![Complex64::new(0.0, 0.0); n];
    let theta = cfg.damping;
    let mut change = f64::INFINITY;
    for it in 1..=cfg.max_iter {
        for (i, slot) in next.iter_mut().enumerate() {
            let row = &kmat[i * n..(i + 1) * n];
            let integral: Complex64 = row.iter().zip(&h).map(|(k, v)| v * *k).sum();
            *slot = (-z + sign * integral).inv();
        }
        change = 0.0;
        for (old, new) in h.iter_mut().zip(&next) {
            let upd = *old * (1.0 - theta) + new * theta;
            change = change.max((upd - *old).norm());
            *old = upd;
        }
        if !change.is_finite() {
            break;
        }
        if change < cfg.tol {
            let s = h.iter().sum::<Complex64>() * w;
            return Ok(FixedPointResult {
                h,
                s,
                iterations: it,
                converged: true,
                convention: cfg.sign_convention,
            });
        }
    }
    Err(SpectralError::NoConvergence {
        iterations: cfg.max_iter,
        residual: change,
    })
}

/// Cross-validation of both conventions against reference `upper`-convention
/// values (typically empirical transforms of a simulated ensemble).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignOutcome {
    pub chosen: SignConvention,
    /// Max `|G_fixed(z) − G_ref(z)|`; infinite when the iteration failed.
    pub max_err_minus: f64,
    pub max_err_plus: f64,
    pub max_iterations_minus: usize,
}

pub fn select_sign_convention(
    kernel: &DependentKernel,
    zs: &[Complex64],
    reference: &[Complex64],
    cfg: &FixedPointConfig,
) -> Result<SignOutcome> {
    if zs.len() != reference.len() || zs.is_empty() {
        return Err(SpectralError::Shape("need one reference value per z".into()));
    }
    let run = |conv: SignConvention| -> (f64, usize) {
        let c = FixedPointConfig {
            sign_convention: conv,
            ..*cfg
        };
        let res: Vec<Option<(f64, usize)>> = zs
            .par_iter()
            .zip(reference.par_iter())
            .map(|(&z, &r)| {
                dependent_fixed_point(kernel, z, &c)
                    .ok()
                    .map(|fp| ((fp.g_upper() - r).norm(), fp.iterations))
            })
            .collect();
        res.into_iter().fold((0.0, 0), |(e, i), x| match x {
            Some((err, it)) => (e.max(err), i.max(it)),
            None => (f64::INFINITY, i),
        })
    };
    let (minus, iters) = run(SignConvention::SelfconsistentMinus);
    let (plus, _) = run(SignConvention::PaperPlus);
    Ok(SignOutcome {
        chosen: if plus < minus {
            SignConvention::PaperPlus
        } else {
            SignConvention::SelfconsistentMinus
        },
        max_err_minus: minus,
        max_err_plus: plus,
        max_iterations_minus: iters,
    })
}
