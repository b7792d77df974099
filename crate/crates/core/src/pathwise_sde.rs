//! Pathwise integration of `dX = σ(X) ∘ dB^H + b(X) dt` and its 2-D analogue.
//!
//! For `H > 1/2` the Stratonovich integral coincides with the Young integral,
//! so the equation is solved path by path. The scheme is Heun's explicit
//! trapezoidal predictor–corrector, which is exact whenever the coefficients
//! do not depend on the state.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result, SpectralError};
use crate::fractional_noise::{FgnSampler, HurstParameter, SamplerOptions, TimeGrid};
use crate::rng::{self, substream};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type MatrixFn2 = Arc<dyn Fn(f64, f64) -> [[f64; 2]; 2] + Send + Sync>;
pub type VectorFn2 = Arc<dyn Fn(f64, f64) -> [f64; 2] + Send + Sync>;

/// Named coefficient presets usable from configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum Preset {
    /// σ = 1, b = 0: the solution is the driver itself.
    Fbm,
    /// σ constant, b(x) = −θx.
    Ou {
        #[serde(default = "one")]
        sigma: f64,
        #[serde(default = "one")]
        theta: f64,
    },
    /// σ = 1, b = sin.
    SinDrift,
    /// σ(x) = 1/(1+x²), b = cos.
    BoundedSmooth,
}

fn one() -> f64 {
    1.0
}

impl Preset {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "fbm" => Ok(Preset::Fbm),
            "ou" => Ok(Preset::Ou {
                sigma: 1.0,
                theta: 1.0,
            }),
            "sin_drift" => Ok(Preset::SinDrift),
            "bounded_smooth" => Ok(Preset::BoundedSmooth),
            other => Err(SpectralError::Config(format!(
                "unknown coefficient preset `{other}`"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Fbm => "fbm",
            Preset::Ou { .. } => "ou",
            Preset::SinDrift => "sin_drift",
            Preset::BoundedSmooth => "bounded_smooth",
        }
    }

    pub fn coefficients(&self) -> CoefficientSet {
        match *self {
            Preset::Fbm => CoefficientSet::constant(1.0, 0.0).named("fbm"),
            Preset::Ou { sigma, theta } => CoefficientSet::new(
                "ou",
                move |_| sigma,
                move |x| -theta * x,
                |_| 0.0,
                move |_| -theta,
                Boundedness {
                    sigma_bounded: true,
                    b_bounded: false,
                },
            ),
            Preset::SinDrift => CoefficientSet::new(
                "sin_drift",
                |_| 1.0,
                f64::sin,
                |_| 0.0,
                f64::cos,
                Boundedness {
                    sigma_bounded: true,
                    b_bounded: true,
                },
            ),
            Preset::BoundedSmooth => CoefficientSet::new(
                "bounded_smooth",
                |x| 1.0 / (1.0 + x * x),
                f64::cos,
                |x| -2.0 * x / ((1.0 + x * x) * (1.0 + x * x)),
                |x| -x.sin(),
                Boundedness {
                    sigma_bounded: true,
                    b_bounded: true,
                },
            ),
        }
    }

    /// `E[X_t]` when it is known in closed form for this preset.
    pub fn exact_mean(&self, x0: &InitialLaw, t: f64) -> Option<f64> {
        match *self {
            Preset::Fbm => Some(x0.mean()),
            Preset::Ou { theta, .. } => Some(x0.mean() * (-theta * t).exp()),
            _ => None,
        }
    }

    /// `(E|X_t|² − m_t²)^{1/2}` when known in closed form.
    pub fn exact_sd(&self, x0: &InitialLaw, t: f64, h: HurstParameter) -> Option<f64> {
        match *self {
            Preset::Fbm => Some((x0.variance() + t.powf(2.0 * h.value())).sqrt()),
            _ => None,
        }
    }
}

/// Caller-declared boundedness of the coefficients; not verified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Boundedness {
    pub sigma_bounded: bool,
    pub b_bounded: bool,
}

/// The `(σ, b, σ′, b′)` bundle of a scalar equation.
#[derive(Clone)]
pub struct CoefficientSet {
    pub name: String,
    pub sigma: ScalarFn,
    pub b: ScalarFn,
    pub sigma_prime: ScalarFn,
    pub b_prime: ScalarFn,
    pub flags: Boundedness,
}

impl fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientSet")
            .field("name", &self.name)
            .field("flags", &self.flags)
            .finish()
    }
}

impl CoefficientSet {
    pub fn new(
        name: &str,
        sigma: impl Fn(f64) -> f64 + Send + Sync + 'static,
        b: impl Fn(f64) -> f64 + Send + Sync + 'static,
        sigma_prime: impl Fn(f64) -> f64 + Send + Sync + 'static,
        b_prime: impl Fn(f64) -> f64 + Send + Sync + 'static,
        flags: Boundedness,
    ) -> Self {
        Self {
            name: name.to_string(),
            sigma: Arc::new(sigma),
            b: Arc::new(b),
            sigma_prime: Arc::new(sigma_prime),
            b_prime: Arc::new(b_prime),
            flags,
        }
    }

    /// State-independent coefficients σ ≡ `sigma`, b ≡ `drift`.
    pub fn constant(sigma: f64, drift: f64) -> Self {
        Self::new(
            "constant",
            move |_| sigma,
            move |_| drift,
            |_| 0.0,
            |_| 0.0,
            Boundedness {
                sigma_bounded: true,
                b_bounded: true,
            },
        )
    }

    pub fn named(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }
}

/// Coefficients of the 2-D equation `dZ = σ̃(Z) ∘ dB^H + b̃(Z) dt`.
#[derive(Clone)]
pub struct CoefficientSet2D {
    pub name: String,
    pub sigma_tilde: MatrixFn2,
    pub b_tilde: VectorFn2,
    /// `∂σ̃/∂z₁` and `∂σ̃/∂z₂`.
    pub sigma_partials: Arc<dyn Fn(f64, f64) -> [[[f64; 2]; 2]; 2] + Send + Sync>,
    pub b_jacobian: MatrixFn2,
}

impl fmt::Debug for CoefficientSet2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientSet2D")
            .field("name", &self.name)
            .finish()
    }
}

impl CoefficientSet2D {
    /// Two uncoupled copies of a scalar equation, one per component.
    pub fn componentwise(c: &CoefficientSet) -> Self {
        let (s, sp, b, bp) = (
            c.sigma.clone(),
            c.sigma_prime.clone(),
            c.b.clone(),
            c.b_prime.clone(),
        );
        Self {
            name: format!("{}_2d", c.name),
            sigma_tilde: Arc::new(move |x, y| [[s(x), 0.0], [0.0, s(y)]]),
            b_tilde: Arc::new(move |x, y| [b(x), b(y)]),
            sigma_partials: Arc::new(move |x, y| {
                [[[sp(x), 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, sp(y)]]]
            }),
            b_jacobian: Arc::new(move |x, y| [[bp(x), 0.0], [0.0, bp(y)]]),
        }
    }

    /// Constant σ̃ and b̃.
    pub fn constant(sigma: [[f64; 2]; 2], drift: [f64; 2]) -> Self {
        Self {
            name: "constant_2d".into(),
            sigma_tilde: Arc::new(move |_, _| sigma),
            b_tilde: Arc::new(move |_, _| drift),
            sigma_partials: Arc::new(|_, _| [[[0.0; 2]; 2]; 2]),
            b_jacobian: Arc::new(|_, _| [[0.0; 2]; 2]),
        }
    }

    /// Linear drift b̃(z) = −θz with zero noise.
    pub fn linear_decay(theta: f64) -> Self {
        Self {
            name: "linear_decay_2d".into(),
            sigma_tilde: Arc::new(|_, _| [[0.0; 2]; 2]),
            b_tilde: Arc::new(move |x, y| [-theta * x, -theta * y]),
            sigma_partials: Arc::new(|_, _| [[[0.0; 2]; 2]; 2]),
            b_jacobian: Arc::new(move |_, _| [[-theta, 0.0], [0.0, -theta]]),
        }
    }

    /// Rotation driven by the first driver component: σ̃(z) = [[−z₂, 0], [z₁, 0]].
    /// The exact solution keeps `|Z_t|` constant.
    pub fn rotation() -> Self {
        Self {
            name: "rotation_2d".into(),
            sigma_tilde: Arc::new(|x, y| [[-y, 0.0], [x, 0.0]]),
            b_tilde: Arc::new(|_, _| [0.0, 0.0]),
            sigma_partials: Arc::new(|_, _| [[[0.0, 0.0], [1.0, 0.0]], [[-1.0, 0.0], [0.0, 0.0]]]),
            b_jacobian: Arc::new(|_, _| [[0.0; 2]; 2]),
        }
    }
}

/// Law of the initial condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialLaw {
    Fixed(f64),
    Normal { mean: f64, sd: f64 },
}

impl Default for InitialLaw {
    fn default() -> Self {
        InitialLaw::Fixed(0.0)
    }
}

impl InitialLaw {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            InitialLaw::Fixed(x) => x,
            InitialLaw::Normal { mean, sd } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + sd * z
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            InitialLaw::Fixed(x) => x,
            InitialLaw::Normal { mean, .. } => mean,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            InitialLaw::Fixed(_) => 0.0,
            InitialLaw::Normal { sd, .. } => sd * sd,
        }
    }
}

/// Independent initial laws for the two components.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialLaw2D {
    pub re: InitialLaw,
    pub im: InitialLaw,
}

impl InitialLaw2D {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 2] {
        [self.re.sample(rng), self.im.sample(rng)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub x0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath2D {
    pub grid: TimeGrid,
    pub values: Vec<[f64; 2]>,
    pub z0: [f64; 2],
}

fn check_driver(grid: &TimeGrid, driver: &[f64]) -> Result<()> {
    if driver.len() != grid.len() {
        return Err(SpectralError::Shape(format!(
            "driver has {} nodes, grid has {}",
            driver.len(),
            grid.len()
        )));
    }
    Ok(())
}

/// Heun integration of the scalar equation along one driver path.
pub fn integrate(
    coeffs: &CoefficientSet,
    grid: TimeGrid,
    driver: &[f64],
    x0: f64,
) -> Result<SamplePath> {
    check_driver(&grid, driver)?;
    let mut values = Vec::with_capacity(grid.len());
    integrate_into(coeffs, grid.dt(), driver, x0, &mut values)?;
    Ok(SamplePath { grid, values, x0 })
}

/// Allocation-free core of [`integrate`]; `out` is cleared and refilled.
pub fn integrate_into(
    coeffs: &CoefficientSet,
    dt: f64,
    driver: &[f64],
    x0: f64,
    out: &mut Vec<f64>,
) -> Result<()> {
    out.clear();
    out.push(x0);
    let (sigma, b) = (&*coeffs.sigma, &*coeffs.b);
    let mut x = x0;
    for k in 0..driver.len().saturating_sub(1) {
        let db = driver[k + 1] - driver[k];
        let (s0, b0) = (sigma(x), b(x));
        let pred = x + s0 * db + b0 * dt;
        let next = x + 0.5 * (s0 + sigma(pred)) * db + 0.5 * (b0 + b(pred)) * dt;
        if !next.is_finite()
            || !(coeffs.sigma_prime)(x).is_finite()
            || !(coeffs.b_prime)(x).is_finite()
        {
            return Err(SpectralError::IntegrationFailure {
                step: k + 1,
                t: (k + 1) as f64 * dt,
            });
        }
        out.push(next);
        x = next;
    }
    Ok(())
}

fn mat_vec(m: [[f64; 2]; 2], v: [f64; 2]) -> [f64; 2] {
    [
        m[0][0] * v[0] + m[0][1] * v[1],
        m[1][0] * v[0] + m[1][1] * v[1],
    ]
}

/// Heun integration of the 2-D equation; `driver1`/`driver2` are the
/// independent components of the 2-D fBm.
pub fn integrate_2d(
    coeffs: &CoefficientSet2D,
    grid: TimeGrid,
    driver1: &[f64],
    driver2: &[f64],
    z0: [f64; 2],
) -> Result<SamplePath2D> {
    check_driver(&grid, driver1)?;
    check_driver(&grid, driver2)?;
    let mut values = Vec::with_capacity(grid.len());
    integrate_2d_into(coeffs, grid.dt(), driver1, driver2, z0, &mut values)?;
    Ok(SamplePath2D { grid, values, z0 })
}

pub fn integrate_2d_into(
    coeffs: &CoefficientSet2D,
    dt: f64,
    driver1: &[f64],
    driver2: &[f64],
    z0: [f64; 2],
    out: &mut Vec<[f64; 2]>,
) -> Result<()> {
    out.clear();
    out.push(z0);
    let mut z = z0;
    for k in 0..driver1.len().saturating_sub(1) {
        let db = [driver1[k + 1] - driver1[k], driver2[k + 1] - driver2[k]];
        let s0 = mat_vec((coeffs.sigma_tilde)(z[0], z[1]), db);
        let b0 = (coeffs.b_tilde)(z[0], z[1]);
        let pred = [
            z[0] + s0[0] + b0[0] * dt,
            z[1] + s0[1] + b0[1] * dt,
        ];
        let s1 = mat_vec((coeffs.sigma_tilde)(pred[0], pred[1]), db);
        let b1 = (coeffs.b_tilde)(pred[0], pred[1]);
        let next = [
            z[0] + 0.5 * (s0[0] + s1[0]) + 0.5 * (b0[0] + b1[0]) * dt,
            z[1] + 0.5 * (s0[1] + s1[1]) + 0.5 * (b0[1] + b1[1]) * dt,
        ];
        let partials_ok = (coeffs.sigma_partials)(z[0], z[1])
            .iter()
            .flatten()
            .flatten()
            .all(|v| v.is_finite());
        if !(next[0].is_finite() && next[1].is_finite() && partials_ok) {
            return Err(SpectralError::IntegrationFailure {
                step: k + 1,
                t: (k + 1) as f64 * dt,
            });
        }
        out.push(next);
        z = next;
    }
    Ok(())
}

/// Empirical Hölder constant of a path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderEstimate {
    pub beta: f64,
    pub quotient: f64,
    /// Grid times `(s, t)` attaining the quotient; `None` for a constant path.
    pub argmax_pair: Option<(f64, f64)>,
}

/// Largest grid size for which all pairs are scanned.
pub const HOLDER_EXACT_LIMIT: usize = 2048;

/// `max |x_t − x_s| / |t − s|^β` over grid pairs: all pairs when `M ≤ 2048`,
/// dyadic separations otherwise.
pub fn holder_norm_estimate(values: &[f64], grid: TimeGrid, beta: f64) -> Result<HolderEstimate> {
    if !(beta > 0.0 && beta < 1.0) {
        return domain(format!("Hölder exponent must lie in (0, 1), got {beta}"));
    }
    check_driver(&grid, values)?;
    let m = grid.steps;
    let dt = grid.dt();
    let lags: Vec<usize> = if m <= HOLDER_EXACT_LIMIT {
        (1..=m).collect()
    } else {
        std::iter::successors(Some(1usize), |&l| (l * 2 <= m).then_some(l * 2)).collect()
    };
    let mut best = 0.0f64;
    let mut arg = None;
    for lag in lags {
        let denom = (lag as f64 * dt).powf(beta);
        for k in 0..=(m - lag) {
            let q = (values[k + lag] - values[k]).abs() / denom;
            if q > best {
                best = q;
                arg = Some((grid.node(k), grid.node(k + lag)));
            }
        }
    }
    Ok(HolderEstimate {
        beta,
        quotient: best,
        argmax_pair: arg,
    })
}

/// Monte Carlo mean and spread of `X_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub t: f64,
    pub m_t: f64,
    pub d_t: f64,
    /// Standard error of `m_t`.
    pub mc_stderr: f64,
    /// Delta-method standard error of `d_t`.
    pub d_stderr: f64,
    pub n_mc: usize,
}

/// As [`MomentEstimate`] for the 2-D equation; `d_t = (E‖Z_t − m_Z(t)‖²)^{1/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate2D {
    pub t: f64,
    pub m_t: [f64; 2],
    pub d_t: f64,
    pub mc_stderr: f64,
    pub d_stderr: f64,
    pub n_mc: usize,
}

const REDUCE_CHUNK: usize = 256;

/// Sum `f(r)` over `r < n` in fixed-size chunks, combined in index order, so
/// the floating-point result does not depend on the thread count.
pub(crate) fn ordered_sum<F>(n: usize, width: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(usize, &mut [f64]) -> Result<()> + Sync,
{
    let chunks: Vec<Result<Vec<f64>>> = (0..n.div_ceil(REDUCE_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; width];
            for r in c * REDUCE_CHUNK..((c + 1) * REDUCE_CHUNK).min(n) {
                f(r, &mut acc)?;
            }
            Ok(acc)
        })
        .collect();
    let mut total = vec![0.0; width];
    for chunk in chunks {
        for (t, v) in total.iter_mut().zip(chunk?) {
            *t += v;
        }
    }
    Ok(total)
}

/// Moment table for every node of `grid`. Replica `r` draws its initial value
/// and driver from substream `(seed, r)`.
pub fn moment_table(
    coeffs: &CoefficientSet,
    x0: &InitialLaw,
    grid: TimeGrid,
    hurst: HurstParameter,
    n_mc: usize,
    seed: u64,
) -> Result<Vec<MomentEstimate>> {
    if n_mc < 2 {
        return domain(format!("moment estimation needs n_mc >= 2, got {n_mc}"));
    }
    let sampler = FgnSampler::new(grid, hurst, SamplerOptions::default())?;
    let nodes = grid.len();
    let replica = |r: usize| -> Result<Vec<f64>> {
        let mut rng = substream(seed, rng::domain::MOMENT, r as u64);
        let start = x0.sample(&mut rng);
        let driver = sampler.sample_path(&mut rng);
        Ok(integrate(coeffs, grid, &driver, start)?.values)
    };
    let sums = ordered_sum(n_mc, nodes, |r, acc| {
        for (a, v) in acc.iter_mut().zip(replica(r)?) {
            *a += v;
        }
        Ok(())
    })?;
    let n = n_mc as f64;
    let means: Vec<f64> = sums.iter().map(|s| s / n).collect();
    let central = ordered_sum(n_mc, 2 * nodes, |r, acc| {
        for (k, v) in replica(r)?.into_iter().enumerate() {
            let q = (v - means[k]) * (v - means[k]);
            acc[2 * k] += q;
            acc[2 * k + 1] += q * q;
        }
        Ok(())
    })?;
    Ok((0..nodes)
        .map(|k| {
            let (t, d, se, dse) =
                summarize(grid.node(k), n_mc, central[2 * k], central[2 * k + 1]);
            MomentEstimate {
                t,
                m_t: means[k],
                d_t: d,
                mc_stderr: se,
                d_stderr: dse,
                n_mc,
            }
        })
        .collect())
}

// Returns (t, d, stderr of mean, stderr of d) from Σq and Σq², q = (x − m)².
fn summarize(t: f64, n_mc: usize, sum_q: f64, sum_q2: f64) -> (f64, f64, f64, f64) {
    let n = n_mc as f64;
    let var = sum_q / n;
    let d = var.sqrt();
    let var_q = (sum_q2 / n - var * var).max(0.0) * n / (n - 1.0);
    let d_se = if d > 0.0 {
        (var_q / n).sqrt() / (2.0 * d)
    } else {
        0.0
    };
    (t, d, (var * n / (n - 1.0) / n).sqrt(), d_se)
}

/// [`moment_table`] entry at time `t`, which must be a grid node.
pub fn moment_estimator(
    coeffs: &CoefficientSet,
    x0: &InitialLaw,
    grid: TimeGrid,
    hurst: HurstParameter,
    t: f64,
    n_mc: usize,
    seed: u64,
) -> Result<MomentEstimate> {
    let k = grid
        .index_of(t)
        .ok_or_else(|| SpectralError::Domain(format!("t = {t} is not a grid node")))?;
    Ok(moment_table(coeffs, x0, grid, hurst, n_mc, seed)?[k])
}

/// 2-D moment table; the two driver components come from one replica substream.
pub fn moment_table_2d(
    coeffs: &CoefficientSet2D,
    z0: &InitialLaw2D,
    grid: TimeGrid,
    hurst: HurstParameter,
    n_mc: usize,
    seed: u64,
) -> Result<Vec<MomentEstimate2D>> {
    if n_mc < 2 {
        return domain(format!("moment estimation needs n_mc >= 2, got {n_mc}"));
    }
    let sampler = FgnSampler::new(grid, hurst, SamplerOptions::default())?;
    let nodes = grid.len();
    let replica = |r: usize| -> Result<Vec<[f64; 2]>> {
        let mut rng = substream(seed, rng::domain::MOMENT, r as u64);
        let start = z0.sample(&mut rng);
        let d1 = sampler.sample_path(&mut rng);
        let d2 = sampler.sample_path(&mut rng);
        Ok(integrate_2d(coeffs, grid, &d1, &d2, start)?.values)
    };
    let sums = ordered_sum(n_mc, 2 * nodes, |r, acc| {
        for (k, v) in replica(r)?.into_iter().enumerate() {
            acc[2 * k] += v[0];
            acc[2 * k + 1] += v[1];
        }
        Ok(())
    })?;
    let n = n_mc as f64;
    let means: Vec<[f64; 2]> = (0..nodes)
        .map(|k| [sums[2 * k] / n, sums[2 * k + 1] / n])
        .collect();
    let central = ordered_sum(n_mc, 2 * nodes, |r, acc| {
        for (k, v) in replica(r)?.into_iter().enumerate() {
            let q = (v[0] - means[k][0]).powi(2) + (v[1] - means[k][1]).powi(2);
            acc[2 * k] += q;
            acc[2 * k + 1] += q * q;
        }
        Ok(())
    })?;
    Ok((0..nodes)
        .map(|k| {
            let (t, d, se, dse) =
                summarize(grid.node(k), n_mc, central[2 * k], central[2 * k + 1]);
            MomentEstimate2D {
                t,
                m_t: means[k],
                d_t: d,
                mc_stderr: se,
                d_stderr: dse,
                n_mc,
            }
        })
        .collect())
}
